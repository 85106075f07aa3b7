#include "gff/config.hpp"

#include <cstdio>
#include <ctime>
#include <set>
#include <string>

#include "gff/errors.hpp"
#include "gff/fieldio.hpp"

namespace gff::config {

namespace {

void reject_unknown(const nlohmann::json& j, const std::string& section,
                    std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw validation_error("config section '" + section + "' must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw validation_error("unknown key '" + it.key() + "' in config section '" +
                                   section + "'");
    }
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw validation_error(std::string("config key '") + key + "': " + e.what());
        }
    }
}

seq::SequenceKind kind_from_string(const std::string& s) {
    if (s == "paper_double_exp") return seq::SequenceKind::paper_double_exp;
    if (s == "geometric_power") return seq::SequenceKind::geometric_power;
    if (s == "custom") return seq::SequenceKind::custom;
    throw validation_error("unknown sequence kind '" + s + "'");
}

} // namespace

void ExperimentConfig::validate() const {
    kernel.validate();
    if (sequence.n_max < 0) throw validation_error("sequence.n_max must be >= 0");
    if (lattice.per_level_cap < 1) throw validation_error("lattice.per_level_cap must be >= 1");
    if (sampling.replicas < 1) throw validation_error("sampling.replicas must be >= 1");
    if (sampling.max_points < 1) throw validation_error("sampling.max_points must be >= 1");
    if (thick.gamma < 0.0) throw validation_error("thick.gamma must be >= 0");
    if (thick.tol < 0.0) throw validation_error("thick.tol must be >= 0");
    if (thick.window < 1) throw validation_error("thick.window must be >= 1");
    if (!(measure.alpha > 0.0)) throw validation_error("measure.alpha must be > 0");
    if (!(measure.c1 > 1.0)) throw validation_error("measure.c1 must be > 1");
    if (!(measure.c2 > 0.0)) throw validation_error("measure.c2 must be > 0");
    if (output.dir.empty()) throw validation_error("output.dir must be nonempty");
    for (const auto& f : output.formats)
        if (f != "csv" && f != "json")
            throw validation_error("unknown output format '" + f + "'");
}

seq::SequenceParams ExperimentConfig::sequence_params() const {
    seq::SequenceParams p;
    p.rho = sequence.rho;
    p.c = sequence.c;
    p.n_max = sequence.n_max;
    p.custom_radii = sequence.custom_radii;
    return p;
}

seq::ScaleSequence ExperimentConfig::make_scale_sequence() const {
    return seq::make_sequence(sequence.kind, sequence_params());
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    reject_unknown(j, "(top level)",
                   {"config_version", "kernel", "sequence", "lattice", "sampling", "thick",
                    "measure", "output"});
    if (j.contains("config_version")) {
        int v = 0;
        get_if(j, "config_version", v);
        if (v != 1)
            throw unsupported_error("config_version " + std::to_string(v) +
                                    " is not supported (expected 1)");
    }

    ExperimentConfig cfg;
    if (j.contains("kernel")) {
        const auto& k = j.at("kernel");
        reject_unknown(k, "kernel", {"nu", "p", "quad_rel_tol", "quad_max_subdiv"});
        get_if(k, "nu", cfg.kernel.nu);
        get_if(k, "p", cfg.kernel.p);
        get_if(k, "quad_rel_tol", cfg.kernel.quad_rel_tol);
        get_if(k, "quad_max_subdiv", cfg.kernel.quad_max_subdiv);
    }
    if (j.contains("sequence")) {
        const auto& s = j.at("sequence");
        reject_unknown(s, "sequence", {"kind", "rho", "c", "n_max", "custom_radii"});
        if (s.contains("kind")) cfg.sequence.kind = kind_from_string(s.at("kind").get<std::string>());
        get_if(s, "rho", cfg.sequence.rho);
        get_if(s, "c", cfg.sequence.c);
        get_if(s, "n_max", cfg.sequence.n_max);
        get_if(s, "custom_radii", cfg.sequence.custom_radii);
    }
    if (j.contains("lattice")) {
        const auto& l = j.at("lattice");
        reject_unknown(l, "lattice", {"per_level_cap"});
        get_if(l, "per_level_cap", cfg.lattice.per_level_cap);
    }
    if (j.contains("sampling")) {
        const auto& s = j.at("sampling");
        reject_unknown(s, "sampling", {"seed", "replicas", "max_points"});
        get_if(s, "seed", cfg.sampling.seed);
        get_if(s, "replicas", cfg.sampling.replicas);
        get_if(s, "max_points", cfg.sampling.max_points);
    }
    if (j.contains("thick")) {
        const auto& t = j.at("thick");
        reject_unknown(t, "thick", {"gamma", "tol", "window"});
        get_if(t, "gamma", cfg.thick.gamma);
        get_if(t, "tol", cfg.thick.tol);
        get_if(t, "window", cfg.thick.window);
    }
    if (j.contains("measure")) {
        const auto& m = j.at("measure");
        reject_unknown(m, "measure", {"alpha", "c1", "c2"});
        get_if(m, "alpha", cfg.measure.alpha);
        get_if(m, "c1", cfg.measure.c1);
        get_if(m, "c2", cfg.measure.c2);
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        reject_unknown(o, "output", {"dir", "formats"});
        get_if(o, "dir", cfg.output.dir);
        get_if(o, "formats", cfg.output.formats);
    }
    return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["config_version"] = 1;
    j["kernel"] = {{"nu", cfg.kernel.nu},
                   {"p", cfg.kernel.p},
                   {"quad_rel_tol", cfg.kernel.quad_rel_tol},
                   {"quad_max_subdiv", cfg.kernel.quad_max_subdiv}};
    j["sequence"] = {{"kind", seq::kind_name(cfg.sequence.kind)},
                     {"rho", cfg.sequence.rho},
                     {"c", cfg.sequence.c},
                     {"n_max", cfg.sequence.n_max},
                     {"custom_radii", cfg.sequence.custom_radii}};
    j["lattice"] = {{"per_level_cap", cfg.lattice.per_level_cap}};
    j["sampling"] = {{"seed", cfg.sampling.seed},
                     {"replicas", cfg.sampling.replicas},
                     {"max_points", cfg.sampling.max_points}};
    j["thick"] = {{"gamma", cfg.thick.gamma}, {"tol", cfg.thick.tol}, {"window", cfg.thick.window}};
    j["measure"] = {{"alpha", cfg.measure.alpha}, {"c1", cfg.measure.c1}, {"c2", cfg.measure.c2}};
    j["output"] = {{"dir", cfg.output.dir}, {"formats", cfg.output.formats}};
    return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
    // nlohmann objects iterate in sorted key order, so the dump is canonical
    const std::string dump = config_to_json(cfg).dump();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

ExperimentConfig::Sequence parse_sequence_spec(const std::string& spec) {
    ExperimentConfig::Sequence s;
    if (spec == "paper") {
        s.kind = seq::SequenceKind::paper_double_exp;
        return s;
    }
    if (spec.rfind("geometric:", 0) == 0) {
        s.kind = seq::SequenceKind::geometric_power;
        const std::string rest = spec.substr(10);
        const std::size_t comma = rest.find(',');
        if (comma == std::string::npos)
            throw validation_error("sequence spec '" + spec +
                                   "': expected geometric:rho,c");
        try {
            std::size_t used = 0;
            s.rho = std::stod(rest.substr(0, comma), &used);
            if (used != comma) throw std::invalid_argument("trailing characters");
            std::string cs = rest.substr(comma + 1);
            s.c = std::stod(cs, &used);
            if (used != cs.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw validation_error("sequence spec '" + spec + "': cannot parse rho,c");
        }
        return s;
    }
    if (spec.rfind("custom:", 0) == 0) {
        s.kind = seq::SequenceKind::custom;
        const std::string file = spec.substr(7);
        nlohmann::json j = fieldio::read_json(file);
        if (j.is_array()) {
            s.custom_radii = j.get<std::vector<double>>();
        } else if (j.is_object() && j.contains("radii")) {
            reject_unknown(j, "custom radii file", {"radii"});
            s.custom_radii = j.at("radii").get<std::vector<double>>();
        } else {
            throw validation_error("custom radii file '" + file +
                                   "' must be a JSON array or {\"radii\": [...]}");
        }
        return s;
    }
    throw validation_error("sequence spec '" + spec +
                           "': expected paper | geometric:rho,c | custom:file.json");
}

const char* tool_version() { return "0.1.0"; }

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["tool_version"] = tool_version;
    j["created_utc"] = created_utc;
    j["seed"] = seed;
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [stage, file] : outputs)
        files.push_back({{"stage", stage}, {"file", file}});
    j["outputs"] = files;
    return j;
}

RunManifest make_manifest(const ExperimentConfig& cfg,
                          std::vector<std::pair<std::string, std::string>> outputs) {
    RunManifest m;
    m.config_hash = config_hash(cfg);
    m.tool_version = tool_version();
    m.seed = cfg.sampling.seed;
    m.outputs = std::move(outputs);
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::tm tm_utc;
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    m.created_utc = buf;
    return m;
}

} // namespace gff::config
