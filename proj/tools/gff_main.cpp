// gff: command-line driver for kernel evaluation, verification suites,
// field sampling, thick-point detection, dimension estimation, and
// measure construction.
//
// Exit codes: 0 success (for `verify`: all checks pass), 1 verify failure
// or unexpected error, 2 invalid usage or arguments, 3 numerical or
// accuracy failure, 4 resource limit exceeded.
//
// Determinism contract: every CSV/JSON artifact except run_manifest.json
// is byte-identical across runs with the same config and seed; wall-clock
// timestamps live only in the run manifest.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gff/config.hpp"
#include "gff/errors.hpp"
#include "gff/fieldio.hpp"
#include "gff/kernels.hpp"
#include "gff/lattice.hpp"
#include "gff/measures.hpp"
#include "gff/sampler.hpp"
#include "gff/sequence.hpp"
#include "gff/thickpoints.hpp"
#include "gff/verify.hpp"

namespace {

using gff::config::ExperimentConfig;

std::string fp17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);  // binary: LF endings everywhere
    if (!f) throw gff::resource_error("cannot open " + path + " for writing");
    f << body;
    if (!f) throw gff::resource_error("short write to " + path);
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.output.dir);
    return (std::filesystem::path(cfg.output.dir) / name).string();
}

// GFF_THREADS in the environment wins over --threads; otherwise the flag
// (or hardware parallelism) is exported so library worker pools see it
void export_threads(int flag_value) {
    if (std::getenv("GFF_THREADS") != nullptr) return;
    unsigned n = flag_value > 0 ? static_cast<unsigned>(flag_value)
                                : std::max(1u, std::thread::hardware_concurrency());
    setenv("GFF_THREADS", std::to_string(n).c_str(), 1);
}

// flags shared by the experiment drivers; flag overrides merge over the
// --config file, and anything not given keeps the schema default
struct DriverFlags {
    std::string config_path, seq_spec, out_dir;
    int nu = 3, p = 1, levels = 4, replicas = 100, window = 3, threads = 0;
    std::int64_t cap = 4096, max_points = 4096;
    std::uint64_t seed = 42;
    double gamma = 0.5, tol = 0.05;
    double alpha = 1.2, c1 = 4.0, c2 = 50.0;

    CLI::Option* o_config = nullptr;
    CLI::Option* o_nu = nullptr;
    CLI::Option* o_p = nullptr;
    CLI::Option* o_seq = nullptr;
    CLI::Option* o_levels = nullptr;
    CLI::Option* o_cap = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_replicas = nullptr;
    CLI::Option* o_maxpts = nullptr;
    CLI::Option* o_outdir = nullptr;
    CLI::Option* o_gamma = nullptr;
    CLI::Option* o_tol = nullptr;
    CLI::Option* o_window = nullptr;
    CLI::Option* o_alpha = nullptr;
    CLI::Option* o_c1 = nullptr;
    CLI::Option* o_c2 = nullptr;
};

void add_common_flags(CLI::App* cmd, DriverFlags& f) {
    f.o_config = cmd->add_option("--config", f.config_path, "experiment config JSON file");
    f.o_nu = cmd->add_option("--nu", f.nu, "ambient dimension (>= 3)");
    f.o_p = cmd->add_option("--p", f.p, "operator order (1 <= p < nu/2)");
    f.o_seq = cmd->add_option("--seq", f.seq_spec,
                              "scale sequence: paper | geometric:rho,c | custom:file.json");
    f.o_levels = cmd->add_option("--levels", f.levels, "number of scale levels n_max");
    f.o_cap = cmd->add_option("--cap", f.cap, "per-level lattice cell cap");
    f.o_seed = cmd->add_option("--seed", f.seed, "master RNG seed");
    f.o_replicas = cmd->add_option("--replicas", f.replicas, "independent field replicas");
    f.o_maxpts = cmd->add_option("--max-points", f.max_points,
                                 "budget for the joint covariance block");
    f.o_outdir = cmd->add_option("--out-dir", f.out_dir, "output directory");
    cmd->add_option("--threads", f.threads,
                    "worker pool size (default: hardware parallelism; env GFF_THREADS wins)");
}

void add_thick_flags(CLI::App* cmd, DriverFlags& f) {
    f.o_gamma = cmd->add_option("--gamma", f.gamma, "thickness parameter (>= 0)");
    f.o_tol = cmd->add_option("--tol", f.tol, "detector tolerance");
    f.o_window = cmd->add_option("--window", f.window, "finest levels inspected");
}

ExperimentConfig resolve_config(const DriverFlags& f) {
    ExperimentConfig cfg;
    if (f.o_config->count() > 0)
        cfg = gff::config::config_from_json(gff::fieldio::read_json(f.config_path));
    if (f.o_nu->count() > 0) cfg.kernel.nu = f.nu;
    if (f.o_p->count() > 0) cfg.kernel.p = f.p;
    if (f.o_seq->count() > 0) {
        int keep_n = cfg.sequence.n_max;  // the grammar carries no level count
        cfg.sequence = gff::config::parse_sequence_spec(f.seq_spec);
        cfg.sequence.n_max = keep_n;
    }
    if (f.o_levels->count() > 0) cfg.sequence.n_max = f.levels;
    if (f.o_cap->count() > 0) cfg.lattice.per_level_cap = f.cap;
    if (f.o_seed->count() > 0) cfg.sampling.seed = f.seed;
    if (f.o_replicas->count() > 0) cfg.sampling.replicas = f.replicas;
    if (f.o_maxpts->count() > 0) cfg.sampling.max_points = f.max_points;
    if (f.o_outdir->count() > 0) cfg.output.dir = f.out_dir;
    if (f.o_gamma != nullptr && f.o_gamma->count() > 0) cfg.thick.gamma = f.gamma;
    if (f.o_tol != nullptr && f.o_tol->count() > 0) cfg.thick.tol = f.tol;
    if (f.o_window != nullptr && f.o_window->count() > 0) cfg.thick.window = f.window;
    if (f.o_alpha != nullptr && f.o_alpha->count() > 0) cfg.measure.alpha = f.alpha;
    if (f.o_c1 != nullptr && f.o_c1->count() > 0) cfg.measure.c1 = f.c1;
    if (f.o_c2 != nullptr && f.o_c2->count() > 0) cfg.measure.c2 = f.c2;
    cfg.validate();
    return cfg;
}

// Shrink the per-level cap so that a joint block of `width` levels (or of
// width radii per stacked center) fits the max_points budget; the lattice
// builder's own floor of 2^nu still applies, and a configuration that
// cannot fit even then fails later with a resource error.
gff::lat::MultiLattice shrunk_lattice(const ExperimentConfig& cfg, const gff::seq::ScaleSequence& s,
                                      std::int64_t width) {
    std::int64_t budget = cfg.sampling.max_points / std::max<std::int64_t>(width, 1);
    std::int64_t cap = std::min(cfg.lattice.per_level_cap, std::max<std::int64_t>(budget, 1));
    std::int64_t floor_cap = std::int64_t(1) << cfg.kernel.nu;
    return gff::lat::build_lattice(cfg.kernel, s, std::max(cap, floor_cap));
}

void write_run_manifest(const ExperimentConfig& cfg,
                        std::vector<std::pair<std::string, std::string>> outputs) {
    gff::config::RunManifest man = gff::config::make_manifest(cfg, std::move(outputs));
    gff::fieldio::write_json(out_path(cfg, "run_manifest.json"), man.to_json());
}

// ---- kernels ---------------------------------------------------------

struct KernelsArgs {
    int nu = 3, p = 1, points = 25;
    double t = 0.0, s = 0.0, dist = 0.0, t_min = 0.05, t_max = 1.0;
    bool table = false;
    CLI::Option* o_t = nullptr;
    CLI::Option* o_s = nullptr;
};

void run_kernels(const KernelsArgs& a) {
    gff::kernels::KernelConfig kc;
    kc.nu = a.nu;
    kc.p = a.p;
    kc.validate();
    std::string csv = "nu,p,t,s,dist,value,method,est_error\n";
    auto row = [&](double t, double s, double d) {
        gff::kernels::KernelValue kv = gff::kernels::cov_general(kc, t, s, d);
        csv += std::to_string(kc.nu) + "," + std::to_string(kc.p) + "," + fp17(t) + "," + fp17(s) +
               "," + fp17(d) + "," + fp17(kv.value) + "," + gff::kernels::method_name(kv.method) +
               "," + fp17(kv.est_error) + "\n";
    };
    if (a.table) {
        if (!(a.t_min > 0.0 && a.t_max >= a.t_min && a.points >= 1))
            throw gff::validation_error(
                "kernels: --table needs 0 < --t-min <= --t-max and --points >= 1");
        int denom = std::max(a.points - 1, 1);
        for (int i = 0; i < a.points; ++i) {
            double t = a.t_min * std::pow(a.t_max / a.t_min, static_cast<double>(i) / denom);
            row(t, t, 0.0);
        }
    } else {
        if (a.o_t->count() == 0 || a.o_s->count() == 0)
            throw gff::validation_error("kernels: provide --t and --s, or use --table");
        row(a.t, a.s, a.dist);
    }
    std::cout << csv;
}

// ---- sample ----------------------------------------------------------

void run_sample(const DriverFlags& f, CLI::Option* o_grid, int grid) {
    ExperimentConfig cfg = resolve_config(f);
    if (o_grid->count() > 0) {
        if (grid < 2) throw gff::validation_error("sample: --grid must be >= 2");
        std::int64_t cap = 1;
        for (int i = 0; i < cfg.kernel.nu; ++i) cap *= grid;
        cfg.lattice.per_level_cap = cap;
        cfg.validate();
    }
    export_threads(f.threads);
    gff::seq::ScaleSequence s = cfg.make_scale_sequence();
    int levels = s.max_level();
    gff::lat::MultiLattice ml = shrunk_lattice(cfg, s, levels);
    std::vector<gff::lat::LatticePoint> pts = gff::lat::window_points(ml, 1, levels);
    Eigen::MatrixXd cov =
        gff::sampler::assemble_covariance(cfg.kernel, pts, cfg.sampling.max_points);
    std::vector<gff::sampler::FieldSample> reps =
        gff::sampler::sample_field(cov, cfg.sampling.seed, cfg.sampling.replicas);

    gff::fieldio::FieldContainer fc;
    fc.nu = static_cast<std::uint32_t>(cfg.kernel.nu);
    fc.p = static_cast<std::uint32_t>(cfg.kernel.p);
    fc.seed = cfg.sampling.seed;
    for (int n = 1; n <= levels; ++n)
        fc.levels.push_back({static_cast<std::uint64_t>(ml.levels[static_cast<std::size_t>(n)].count),
                             ml.levels[static_cast<std::size_t>(n)].radius});
    fc.replicas.reserve(reps.size());
    for (gff::sampler::FieldSample& r : reps) fc.replicas.push_back(std::move(r.values));

    std::string values_path = out_path(cfg, "field.gffs");
    gff::fieldio::write_gffs(values_path, fc);
    gff::fieldio::write_json(out_path(cfg, "field_manifest.json"),
                             gff::fieldio::field_manifest(fc, &s, &ml, "field.gffs"));
    write_run_manifest(cfg, {{"field", "field.gffs"}, {"field_manifest", "field_manifest.json"}});
    std::cout << "wrote " << values_path << ": levels=" << levels
              << " points=" << fc.points_per_replica() << " replicas=" << fc.replicas.size()
              << "\n";
}

// ---- detect ----------------------------------------------------------

void run_detect(const DriverFlags& f, const std::string& mode_str) {
    ExperimentConfig cfg = resolve_config(f);
    export_threads(f.threads);
    gff::thick::DetectMode mode;
    if (mode_str == "limsup")
        mode = gff::thick::DetectMode::limsup;
    else if (mode_str == "sequential")
        mode = gff::thick::DetectMode::sequential;
    else if (mode_str == "perfect")
        mode = gff::thick::DetectMode::perfect_surrogate;
    else
        throw gff::validation_error("detect: --mode must be limsup, sequential, or perfect");

    gff::seq::ScaleSequence s = cfg.make_scale_sequence();
    int lev = s.max_level();
    gff::lat::MultiLattice ml = shrunk_lattice(cfg, s, lev + 1);
    gff::thick::ThickConfig tc;
    tc.gamma = cfg.thick.gamma;
    tc.tol = cfg.thick.tol;
    tc.window = cfg.thick.window;
    std::vector<gff::thick::LevelField> fields = gff::thick::sample_stack_fields(
        cfg.kernel, ml, lev, cfg.sampling.seed, cfg.sampling.replicas, cfg.sampling.max_points);

    std::vector<double> scales;
    for (int n = 1; n <= lev; ++n)
        scales.push_back(ml.levels[static_cast<std::size_t>(n)].cell_size);

    std::vector<std::int64_t> per_rep;
    std::int64_t total = 0;
    std::vector<double> dims;  // box-dimension estimates of nonempty detections
    for (const gff::thick::LevelField& fld : fields) {
        std::int64_t count = 0;
        if (mode == gff::thick::DetectMode::perfect_surrogate) {
            count = gff::thick::perfect_surrogate_count(cfg.kernel, tc, fld);
        } else {
            gff::thick::ThickPointReport rep =
                mode == gff::thick::DetectMode::limsup
                    ? gff::thick::detect_limsup(cfg.kernel, tc, fld)
                    : gff::thick::detect_sequential(cfg.kernel, tc, fld);
            count = static_cast<std::int64_t>(rep.flagged.size());
            if (!rep.flagged.empty()) {
                std::vector<std::vector<double>> flagged_pts;
                flagged_pts.reserve(rep.flagged.size());
                for (std::int64_t idx : rep.flagged)
                    flagged_pts.push_back(fld.centers[static_cast<std::size_t>(idx)]);
                gff::thick::BoxDimension bd = gff::thick::box_dimension(flagged_pts, scales);
                if (bd.applicable) dims.push_back(bd.estimate);
            }
        }
        per_rep.push_back(count);
        total += count;
    }

    double est = 0.0, ci = 0.0;
    if (!dims.empty()) {
        for (double d : dims) est += d;
        est /= static_cast<double>(dims.size());
        if (dims.size() > 1) {
            double ss = 0.0;
            for (double d : dims) ss += (d - est) * (d - est);
            ci = 1.96 * std::sqrt(ss / (static_cast<double>(dims.size()) - 1.0) /
                                  static_cast<double>(dims.size()));
        }
    }

    nlohmann::json out;
    out["mode"] = gff::thick::mode_name(mode);
    out["gamma"] = tc.gamma;
    out["threshold"] = gff::thick::threshold(cfg.kernel, tc);
    out["tol"] = tc.tol;
    out["window"] = tc.window;
    out["seed"] = cfg.sampling.seed;
    out["replicas"] = cfg.sampling.replicas;
    out["levels"] = nlohmann::json::array();
    for (int n = 1; n <= lev; ++n) {
        const gff::lat::LatticeLevel& L = ml.levels[static_cast<std::size_t>(n)];
        out["levels"].push_back({{"level", n}, {"radius", L.radius}, {"cells", L.count}});
    }
    out["flagged"] = {{"total", total}, {"per_replica", per_rep}};
    out["dimension"] = {{"applicable", dims.size()}, {"estimate", est}, {"ci", ci}};

    gff::fieldio::write_json(out_path(cfg, "detect.json"), out);
    write_run_manifest(cfg, {{"detect", "detect.json"}});
    std::cout << out.dump(2) << "\n";
}

// ---- dimension -------------------------------------------------------

void run_dimension(const DriverFlags& f, const std::vector<double>& gamma_list) {
    ExperimentConfig cfg = resolve_config(f);
    export_threads(f.threads);
    std::vector<double> gammas = gamma_list.empty() ? std::vector<double>{cfg.thick.gamma}
                                                    : gamma_list;
    gff::seq::ScaleSequence s = cfg.make_scale_sequence();
    int lev = s.max_level();
    gff::lat::MultiLattice ml = shrunk_lattice(cfg, s, lev + 1);

    std::string csv = "gamma,estimate,ci,replicas\n";
    for (double g : gammas) {
        gff::thick::ThickConfig tc;
        tc.gamma = g;
        tc.tol = cfg.thick.tol;
        tc.window = cfg.thick.window;
        gff::thick::DimensionResult dr =
            gff::thick::estimate_dimension(cfg.kernel, tc, ml, lev, cfg.sampling.seed,
                                           cfg.sampling.replicas, cfg.sampling.max_points);
        csv += fp17(g) + "," + fp17(dr.estimate) + "," + fp17(dr.ci_half_width) + "," +
               std::to_string(dr.replicas) + "\n";
    }
    write_text(out_path(cfg, "dimension.csv"), csv);
    write_run_manifest(cfg, {{"dimension", "dimension.csv"}});
    std::cout << csv;
}

// ---- measure ---------------------------------------------------------

void run_measure(const DriverFlags& f, CLI::Option* o_n, int n_flag, int pair_samples) {
    ExperimentConfig cfg = resolve_config(f);
    export_threads(f.threads);
    gff::seq::ScaleSequence s = cfg.make_scale_sequence();
    int n = o_n->count() > 0 ? n_flag : s.max_level();
    if (n < 1 || n > s.max_level())
        throw gff::validation_error("measure: --n must be in [1, n_max]");
    gff::lat::MultiLattice ml = shrunk_lattice(cfg, s, n + 1);
    gff::thick::ThickConfig tc;
    tc.gamma = cfg.thick.gamma;
    tc.tol = cfg.thick.tol;
    tc.window = cfg.thick.window;
    std::vector<gff::thick::LevelField> fields = gff::thick::sample_stack_fields(
        cfg.kernel, ml, n, cfg.sampling.seed, cfg.sampling.replicas, cfg.sampling.max_points);

    std::vector<gff::meas::DiscreteMeasure> measures;
    measures.reserve(fields.size());
    for (const gff::thick::LevelField& fld : fields)
        measures.push_back(gff::meas::build_measure(cfg.kernel, tc, s, fld, n));

    std::string csv = "replica,n,mass,I_alpha,pass_certificate\n";
    for (std::size_t i = 0; i < measures.size(); ++i) {
        double mass = gff::meas::total_mass(measures[i]);
        gff::meas::AlphaEnergy ae =
            gff::meas::alpha_energy(cfg.kernel, measures[i], cfg.measure.alpha, pair_samples);
        bool pass = mass >= 1.0 / cfg.measure.c1 && mass <= cfg.measure.c1 &&
                    ae.value <= cfg.measure.c2;
        csv += std::to_string(i) + "," + std::to_string(n) + "," + fp17(mass) + "," +
               fp17(ae.value) + "," + (pass ? "1" : "0") + "\n";
    }
    write_text(out_path(cfg, "measure.csv"), csv);

    gff::meas::CapacityReport cert = gff::meas::capacity_certificate(
        cfg.kernel, measures, cfg.measure.alpha, cfg.measure.c1, cfg.measure.c2, pair_samples);
    write_run_manifest(cfg, {{"measure", "measure.csv"}});
    nlohmann::json summary = {{"alpha", cert.alpha},   {"c1", cert.c1},
                              {"c2", cert.c2},         {"total", cert.total},
                              {"passed", cert.passed}, {"fraction", cert.fraction}};
    std::cout << summary.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    int verify_exit = 0;
    CLI::App app{"dim-nu order-p Gaussian field toolkit: kernels, sampling, "
                 "thick-point detection, dimension and measure drivers"};
    app.require_subcommand(1);

    // kernels
    KernelsArgs ka;
    CLI::App* k = app.add_subcommand("kernels", "evaluate sphere-average covariance kernels");
    k->add_option("--nu", ka.nu, "ambient dimension (>= 3)")->required();
    k->add_option("--p", ka.p, "operator order");
    ka.o_t = k->add_option("--t", ka.t, "first radius");
    ka.o_s = k->add_option("--s", ka.s, "second radius");
    k->add_option("--dist", ka.dist, "center distance (default 0: concentric)");
    k->add_flag("--table", ka.table, "emit a log-spaced concentric grid instead");
    k->add_option("--t-min", ka.t_min, "table lower radius");
    k->add_option("--t-max", ka.t_max, "table upper radius");
    k->add_option("--points", ka.points, "table size");
    k->callback([&]() { run_kernels(ka); });

    // verify
    std::string v_suite;
    gff::verify::SuiteOptions vopt;
    CLI::App* v = app.add_subcommand("verify", "run a named verification suite");
    v->add_option("suite", v_suite, "specfun | covariance | sampler | probabilities | energy")
        ->required();
    v->add_option("--nu", vopt.nu, "ambient dimension");
    v->add_option("--cases", vopt.cases, "random cases for sampled checks");
    v->add_option("--tol", vopt.tol, "override the suite's headline tolerance");
    v->add_option("--seed", vopt.seed, "seed for the sampled checks");
    v->callback([&]() {
        nlohmann::json rep = gff::verify::run_suite(v_suite, vopt);
        std::cout << rep.dump(2) << "\n";
        verify_exit = rep.at("pass").get<bool>() ? 0 : 1;
    });

    // sample
    DriverFlags sf;
    int sample_grid = 8;
    CLI::App* sc = app.add_subcommand("sample", "sample joint field replicas over a lattice window");
    add_common_flags(sc, sf);
    CLI::Option* o_grid =
        sc->add_option("--grid", sample_grid, "per-axis center count (sets the cell cap to grid^nu)");
    sc->callback([&]() { run_sample(sf, o_grid, sample_grid); });

    // detect
    DriverFlags df;
    std::string detect_mode = "limsup";
    CLI::App* dc = app.add_subcommand("detect", "flag thick-point candidate cells over replicas");
    add_common_flags(dc, df);
    add_thick_flags(dc, df);
    dc->add_option("--mode", detect_mode, "limsup | sequential | perfect");
    dc->callback([&]() { run_detect(df, detect_mode); });

    // dimension
    DriverFlags mf;
    std::vector<double> gamma_list;
    CLI::App* mc = app.add_subcommand("dimension", "detection-based box-dimension estimates");
    add_common_flags(mc, mf);
    mf.o_tol = mc->add_option("--tol", mf.tol, "detector tolerance");
    mf.o_window = mc->add_option("--window", mf.window, "finest levels inspected");
    mc->add_option("--gamma", gamma_list, "thickness parameter(s); one CSV row each");
    mc->callback([&]() { run_dimension(mf, gamma_list); });

    // measure
    DriverFlags ef;
    int measure_n = 0, pair_samples = 64;
    CLI::App* ec = app.add_subcommand("measure", "build thick-cell measures and energy certificates");
    add_common_flags(ec, ef);
    add_thick_flags(ec, ef);
    ef.o_alpha = ec->add_option("--alpha", ef.alpha, "energy exponent in (0, nu)");
    ef.o_c1 = ec->add_option("--c1", ef.c1, "mass window constant (> 1)");
    ef.o_c2 = ec->add_option("--c2", ef.c2, "energy bound (> 0)");
    CLI::Option* o_n = ec->add_option("--n", measure_n, "measure level (default: n_max)");
    ec->add_option("--pair-samples", pair_samples, "QMC samples per near cell pair");
    ec->callback([&]() { run_measure(ef, o_n, measure_n, pair_samples); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const gff::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const gff::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const gff::unsupported_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const gff::accuracy_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const gff::numerical_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const gff::range_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const gff::resource_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return verify_exit;
}
