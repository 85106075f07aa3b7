#pragma once

// Binary field container ("GFFS") and its JSON sidecar manifest.
//
// File layout, all little-endian regardless of host:
//   bytes 0..3   magic "GFFS"
//   u32          format version (currently 1)
//   u32          nu
//   u32          p
//   u64          master seed
//   u32          level count L
//   L times      { u64 center count, f64 radius }
//   then         row-major f64 sample values, one row per replica of
//                length M = sum of center counts; the replica count is
//                implied by the file size.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gff/lattice.hpp"
#include "gff/sequence.hpp"

namespace gff::fieldio {

struct FieldLevel {
    std::uint64_t count = 0;
    double radius = 1.0;
};

struct FieldContainer {
    std::uint32_t version = 1;
    std::uint32_t nu = 3;
    std::uint32_t p = 1;
    std::uint64_t seed = 0;
    std::vector<FieldLevel> levels;
    std::vector<std::vector<double>> replicas;  // each of length points_per_replica()

    std::uint64_t points_per_replica() const {
        std::uint64_t m = 0;
        for (const auto& lv : levels) m += lv.count;
        return m;
    }
};

void write_gffs(const std::string& path, const FieldContainer& fc);
FieldContainer read_gffs(const std::string& path);

// sidecar manifest describing the container plus the generating sequence
// and lattice (pass nullptr when a field was assembled without a lattice)
nlohmann::json field_manifest(const FieldContainer& fc, const seq::ScaleSequence* s,
                              const lat::MultiLattice* ml, const std::string& values_file);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

} // namespace gff::fieldio
