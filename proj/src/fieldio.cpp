#include "gff/fieldio.hpp"

#include <cstring>
#include <fstream>

#include "gff/errors.hpp"

namespace gff::fieldio {

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double x) {
    std::uint64_t v;
    std::memcpy(&v, &x, 8);
    put_u64(buf, v);
}

class Reader {
public:
    Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() {
        std::uint64_t v = u64();
        double x;
        std::memcpy(&x, &v, 8);
        return x;
    }
    std::size_t remaining() const { return n_ - pos_; }

private:
    void need(std::size_t k) const {
        if (pos_ + k > n_) throw validation_error("field file truncated inside the header");
    }
    const unsigned char* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

} // namespace

void write_gffs(const std::string& path, const FieldContainer& fc) {
    const std::uint64_t m = fc.points_per_replica();
    if (m == 0) throw validation_error("field container has no points");
    for (const auto& row : fc.replicas)
        if (row.size() != m)
            throw validation_error("replica row length does not match the level counts");

    std::string buf;
    buf.reserve(32 + fc.levels.size() * 16 + fc.replicas.size() * m * 8);
    buf += "GFFS";
    put_u32(buf, fc.version);
    put_u32(buf, fc.nu);
    put_u32(buf, fc.p);
    put_u64(buf, fc.seed);
    put_u32(buf, static_cast<std::uint32_t>(fc.levels.size()));
    for (const auto& lv : fc.levels) {
        put_u64(buf, lv.count);
        put_f64(buf, lv.radius);
    }
    for (const auto& row : fc.replicas)
        for (double x : row) put_f64(buf, x);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw validation_error("cannot open '" + path + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw internal_error("short write to '" + path + "'");
}

FieldContainer read_gffs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot open '" + path + "'");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < 4 || data.compare(0, 4, "GFFS") != 0)
        throw validation_error("'" + path + "' is not a GFFS field container (bad magic)");

    Reader rd(reinterpret_cast<const unsigned char*>(data.data()) + 4, data.size() - 4);
    FieldContainer fc;
    fc.version = rd.u32();
    if (fc.version != 1)
        throw unsupported_error("field container version " + std::to_string(fc.version) +
                                " is not supported (expected 1)");
    fc.nu = rd.u32();
    fc.p = rd.u32();
    fc.seed = rd.u64();
    const std::uint32_t n_levels = rd.u32();
    if (n_levels == 0 || n_levels > 1000000)
        throw validation_error("implausible level count in field container");
    fc.levels.resize(n_levels);
    for (auto& lv : fc.levels) {
        lv.count = rd.u64();
        lv.radius = rd.f64();
    }
    const std::uint64_t m = fc.points_per_replica();
    if (m == 0) throw validation_error("field container declares no points");
    const std::size_t body = rd.remaining();
    if (body % (8 * m) != 0)
        throw validation_error("field container body is not a whole number of replica rows");
    const std::size_t n_rep = body / (8 * m);
    fc.replicas.resize(n_rep);
    for (auto& row : fc.replicas) {
        row.resize(m);
        for (auto& x : row) x = rd.f64();
    }
    return fc;
}

nlohmann::json field_manifest(const FieldContainer& fc, const seq::ScaleSequence* s,
                              const lat::MultiLattice* ml, const std::string& values_file) {
    nlohmann::json j;
    j["format"] = "gffs";
    j["format_version"] = fc.version;
    j["nu"] = fc.nu;
    j["p"] = fc.p;
    j["seed"] = fc.seed;
    j["replicas"] = fc.replicas.size();
    j["points"] = fc.points_per_replica();
    j["values_file"] = values_file;
    nlohmann::json jl = nlohmann::json::array();
    for (const auto& lv : fc.levels)
        jl.push_back({{"count", lv.count}, {"radius", lv.radius}});
    j["levels"] = jl;
    if (s != nullptr) {
        j["sequence"] = {{"kind", seq::kind_name(s->kind)}, {"radii", s->radii}};
    }
    if (ml != nullptr) {
        nlohmann::json grid = nlohmann::json::array();
        for (const auto& L : ml->levels)
            grid.push_back({{"level", L.level},
                            {"radius", L.radius},
                            {"per_axis", L.per_axis},
                            {"count", L.count},
                            {"ideal_count_log10", L.ideal_count_log10}});
        j["lattice"] = {{"nu", ml->nu}, {"per_level_cap", ml->per_level_cap}, {"levels", grid}};
    }
    return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw validation_error("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw internal_error("short write to '" + path + "'");
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw validation_error("'" + path + "': " + e.what());
    }
    return j;
}

} // namespace gff::fieldio
