#pragma once

// Experiment configuration (JSON schema "config_version": 1, strict keys,
// lossless round-trip) and the run manifest that records provenance for a
// deterministic run: config hash, tool version, seed, output files.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gff/kernels.hpp"
#include "gff/sequence.hpp"

namespace gff::config {

struct ExperimentConfig {
    kernels::KernelConfig kernel;  // nu, p, quad_rel_tol, quad_max_subdiv

    struct Sequence {
        seq::SequenceKind kind = seq::SequenceKind::geometric_power;
        double rho = 0.5;
        double c = 2.0;
        int n_max = 4;
        std::vector<double> custom_radii;  // used when kind == custom
    } sequence;

    struct Lattice {
        std::int64_t per_level_cap = 4096;
    } lattice;

    struct Sampling {
        std::uint64_t seed = 42;
        int replicas = 100;
        std::int64_t max_points = 4096;
    } sampling;

    struct Thick {
        double gamma = 0.5;
        double tol = 0.05;
        int window = 3;
    } thick;

    struct Measure {
        double alpha = 1.2;
        double c1 = 4.0;
        double c2 = 50.0;
    } measure;

    struct Output {
        std::string dir = ".";
        std::vector<std::string> formats = {"csv", "json"};
    } output;

    void validate() const;
    seq::SequenceParams sequence_params() const;
    seq::ScaleSequence make_scale_sequence() const;
};

// strict parser: any key not in the schema raises a validation error
// naming the offending key; missing keys keep their defaults
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// 64-bit FNV-1a of the canonical (sorted-key) JSON dump, as 16 hex digits;
// timestamps never enter the hash
std::string config_hash(const ExperimentConfig& cfg);

// compact sequence grammar used by command lines:
//   "paper" | "geometric:rho,c" | "custom:file.json"
ExperimentConfig::Sequence parse_sequence_spec(const std::string& spec);

const char* tool_version();

struct RunManifest {
    std::string config_hash;
    std::string tool_version;
    std::string created_utc;  // informational; excluded from the hash
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> outputs;  // stage -> file

    nlohmann::json to_json() const;
};

RunManifest make_manifest(const ExperimentConfig& cfg,
                          std::vector<std::pair<std::string, std::string>> outputs);

} // namespace gff::config
