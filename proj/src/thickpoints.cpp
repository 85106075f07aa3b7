#include "gff/thickpoints.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include "gff/errors.hpp"
#include "gff/sampler.hpp"
#include "gff/specfun.hpp"

namespace gff::thick {

namespace {

const gsl_error_handler_t* const g_prev_handler = gsl_set_error_handler_off();

// shared validation of a LevelField's shape
void check_field(const LevelField& field) {
    const std::size_t L = field.radii.size();
    if (L == 0) throw validation_error("field has no levels");
    if (field.n_centers < 0) throw validation_error("field has negative center count");
    if (field.values.size() != static_cast<std::size_t>(field.n_centers) * L)
        throw validation_error("field value array does not match centers x levels");
    for (std::size_t i = 0; i < L; ++i) {
        if (!(field.radii[i] > 0.0) || !std::isfinite(field.radii[i]))
            throw validation_error("field radii must be positive and finite");
        if (i > 0 && !(field.radii[i] < field.radii[i - 1]))
            throw validation_error("field radii must be strictly decreasing");
    }
}

// index of the first level in the window of the `window` finest levels;
// every window level must have radius < 1 so the ratio normalizer D is
// positive there
std::size_t window_start(const LevelField& field, int window) {
    const std::size_t L = field.radii.size();
    if (window < 1) throw validation_error("detector window must cover at least one level");
    if (static_cast<std::size_t>(window) > L)
        throw validation_error("detector window exceeds the field's level count");
    const std::size_t start = L - static_cast<std::size_t>(window);
    if (field.radii[start] >= 1.0)
        throw validation_error("detector window reaches a radius >= 1 where the "
                               "ratio normalizer vanishes");
    return start;
}

std::vector<double> window_normalizers(const kernels::KernelConfig& kcfg, const LevelField& field,
                                       std::size_t start) {
    std::vector<double> d(field.radii.size(), 0.0);
    for (std::size_t i = start; i < field.radii.size(); ++i)
        d[i] = kernels::d_fn(kcfg, field.radii[i]);
    return d;
}

struct ProbPair {
    double ln_p;
    double p;
};

// W = Phi(b+1) - Phi(b-1), stable for any b >= 0. Below b = 30 both
// normal tails are far from underflow and the erfc difference carries
// full relative precision; above, the log-scale tail difference takes over.
ProbPair prob_from_offset(double b) {
    if (b < 30.0) {
        const double inv_sqrt2 = 0.7071067811865475244;
        double p = 0.5 * (std::erfc((b - 1.0) * inv_sqrt2) - std::erfc((b + 1.0) * inv_sqrt2));
        return {std::log(p), p};
    }
    double lnq_lo = specfun::log_normal_tail(b - 1.0);
    double lnq_hi = specfun::log_normal_tail(b + 1.0);
    double ln_p = lnq_lo + std::log1p(-std::exp(lnq_hi - lnq_lo));
    return {ln_p, std::exp(ln_p)};
}

// I_mu(t) K_mu(t); the exponential factors of the scaled forms cancel
// exactly. Tiny arguments go to the limiting value 1/(2 mu).
double bessel_ik(double mu, double t) {
    if (t < 1e-60) return 0.5 / mu;
    return specfun::bessel_i_scaled(mu, t) * specfun::bessel_k_scaled(mu, t);
}

struct EnergyParams {
    double mu;
};

// energy integrand in u = -ln t: (u + IK(e^-u))^2 / (4 u IK(e^-u)).
// Derived from energy = int (-D') (D'/G') dt with D^2 = -G ln t and the
// p=1 Wronskian forms G'(t) = -(alpha_nu/(2 pi)^nu) / (t I_mu^2) and
// G/(t G') = -I_mu K_mu; smooth on u > 0.
double energy_integrand(double u, void* raw) {
    const auto* par = static_cast<const EnergyParams*>(raw);
    double ik = bessel_ik(par->mu, std::exp(-u));
    double s = u + ik;
    return s * s / (4.0 * u * ik);
}

} // namespace

const char* mode_name(DetectMode m) {
    switch (m) {
        case DetectMode::limsup: return "limsup";
        case DetectMode::sequential: return "sequential";
        case DetectMode::perfect_surrogate: return "perfect_surrogate";
    }
    return "unknown";
}

double threshold(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg) {
    kcfg.validate();
    if (!(tcfg.gamma >= 0.0) || !std::isfinite(tcfg.gamma))
        throw validation_error("gamma must be finite and >= 0");
    return std::sqrt(2.0 * kcfg.nu * tcfg.gamma);
}

double ratio(const kernels::KernelConfig& kcfg, double theta_bar, double t) {
    kcfg.validate();
    if (!std::isfinite(theta_bar)) throw domain_error("theta_bar must be finite");
    if (!(t > 0.0) || !(t < 1.0))
        throw domain_error("ratio requires t in (0,1); the normalizer D vanishes at t = 1");
    return theta_bar / kernels::d_fn(kcfg, t);
}

std::vector<LevelField> sample_stack_fields(const kernels::KernelConfig& kcfg,
                                            const lat::MultiLattice& ml, int lev,
                                            std::uint64_t seed, int n_replicas,
                                            std::int64_t max_points) {
    if (n_replicas < 1) throw validation_error("need at least one replica");
    std::vector<lat::LatticePoint> pts = lat::stack_points(ml, lev);
    Eigen::MatrixXd cov = sampler::assemble_covariance(kcfg, pts, max_points);
    std::vector<sampler::FieldSample> reps = sampler::sample_field(cov, seed, n_replicas);

    const std::int64_t n_centers = ml.levels[lev].count;
    std::vector<double> radii(lev + 1);
    for (int n = 0; n <= lev; ++n) radii[n] = ml.levels[n].radius;
    std::vector<std::vector<double>> centers(static_cast<std::size_t>(n_centers));
    for (std::int64_t j = 0; j < n_centers; ++j) centers[j] = ml.center(lev, j);

    std::vector<LevelField> fields;
    fields.reserve(reps.size());
    for (auto& r : reps) {
        LevelField f;
        f.radii = radii;
        f.centers = centers;
        f.n_centers = n_centers;
        f.values = std::move(r.values);  // stack_points is center-major already
        fields.push_back(std::move(f));
    }
    return fields;
}

ThickPointReport detect_limsup(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                               const LevelField& field) {
    check_field(field);
    const double thr = threshold(kcfg, tcfg);
    const std::size_t start = window_start(field, tcfg.window);
    const std::vector<double> d = window_normalizers(kcfg, field, start);
    const std::size_t L = field.radii.size();

    ThickPointReport rep;
    rep.mode = DetectMode::limsup;
    rep.gamma = tcfg.gamma;
    rep.threshold = thr;
    rep.tol = tcfg.tol;
    rep.window = tcfg.window;
    rep.n_centers = field.n_centers;
    for (std::int64_t c = 0; c < field.n_centers; ++c) {
        double best = -HUGE_VAL;
        for (std::size_t i = start; i < L; ++i)
            best = std::max(best, field.at(c, static_cast<int>(i)) / d[i]);
        if (best >= thr - tcfg.tol) rep.flagged.push_back(c);
    }
    return rep;
}

ThickPointReport detect_sequential(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                                   const LevelField& field) {
    check_field(field);
    const double thr = threshold(kcfg, tcfg);
    const std::size_t start = window_start(field, tcfg.window);
    const std::vector<double> d = window_normalizers(kcfg, field, start);
    const std::size_t L = field.radii.size();

    ThickPointReport rep;
    rep.mode = DetectMode::sequential;
    rep.gamma = tcfg.gamma;
    rep.threshold = thr;
    rep.tol = tcfg.tol;
    rep.window = tcfg.window;
    rep.n_centers = field.n_centers;
    for (std::int64_t c = 0; c < field.n_centers; ++c) {
        bool all = true;
        for (std::size_t i = start; all && i < L; ++i)
            all = std::abs(field.at(c, static_cast<int>(i)) / d[i] - thr) <= tcfg.tol;
        if (all) rep.flagged.push_back(c);
    }
    return rep;
}

std::vector<std::int64_t> xi_set(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                                 const LevelField& field, int n) {
    std::vector<std::vector<std::int64_t>> all = xi_sets(kcfg, tcfg, field);
    if (n == -1) n = field.depth();
    if (n < 0 || n > field.depth()) throw validation_error("xi_set: level out of range");
    return all[static_cast<std::size_t>(n)];
}

std::vector<std::vector<std::int64_t>> xi_sets(const kernels::KernelConfig& kcfg,
                                               const ThickConfig& tcfg, const LevelField& field) {
    check_field(field);
    const double a = threshold(kcfg, tcfg);
    const std::size_t L = field.radii.size();
    if (field.radii[0] > 1.0)
        throw validation_error("xi_sets: first radius must be <= 1 (G and D are "
                               "defined on (0,1])");

    std::vector<double> D(L), G(L);
    for (std::size_t i = 0; i < L; ++i) {
        D[i] = kernels::d_fn(kcfg, field.radii[i]);
        G[i] = kernels::g_fn(kcfg, field.radii[i]);
    }
    for (std::size_t i = 1; i < L; ++i)
        if (!(G[i] > G[i - 1]))
            throw internal_error("xi_sets: variance profile is not increasing along the levels");

    // prefix structure: survivors at n are the survivors at n-1 passing the
    // level-n increment pinning
    std::vector<std::vector<std::int64_t>> out(L);
    const double sd0 = std::sqrt(G[0]);
    for (std::int64_t c = 0; c < field.n_centers; ++c)
        if (std::abs(field.at(c, 0) - a * D[0]) <= sd0) out[0].push_back(c);
    for (std::size_t n = 1; n < L; ++n) {
        const double dd = D[n] - D[n - 1];
        const double sd = std::sqrt(G[n] - G[n - 1]);
        for (std::int64_t c : out[n - 1]) {
            double dv = field.at(c, static_cast<int>(n)) - field.at(c, static_cast<int>(n) - 1);
            if (std::abs(dv - a * dd) <= sd) out[n].push_back(c);
        }
    }
    return out;
}

std::vector<std::int64_t> upper_bound_cells(const kernels::KernelConfig& kcfg,
                                            double gamma_prime, const LevelField& field) {
    check_field(field);
    kcfg.validate();
    if (!(gamma_prime >= 0.0) || !std::isfinite(gamma_prime))
        throw validation_error("gamma_prime must be finite and >= 0");
    const std::size_t L = field.radii.size();
    const double r_fine = field.radii[L - 1];
    // radii within [r_N, 2 r_N]; the slack absorbs one-ulp misses of exact
    // doubling sequences. Radii >= 1 stay out (no normalizer there).
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < L; ++i)
        if (field.radii[i] < 1.0 && field.radii[i] <= 2.0 * r_fine * (1.0 + 1e-12))
            idx.push_back(i);
    if (idx.empty())
        throw validation_error("upper_bound_cells: no usable radius in [r_N, 2 r_N]");

    const double thr = std::sqrt(2.0 * kcfg.nu * gamma_prime);
    std::vector<double> d(L, 0.0);
    for (std::size_t i : idx) d[i] = kernels::d_fn(kcfg, field.radii[i]);

    std::vector<std::int64_t> flagged;
    for (std::int64_t c = 0; c < field.n_centers; ++c) {
        double best = -HUGE_VAL;
        for (std::size_t i : idx)
            best = std::max(best, field.at(c, static_cast<int>(i)) / d[i]);
        if (best > thr) flagged.push_back(c);
    }
    return flagged;
}

std::int64_t perfect_surrogate_count(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                                     const LevelField& field) {
    check_field(field);
    if (!(tcfg.gamma > 0.0))
        throw validation_error("perfect surrogate scan requires gamma > 0");
    if (tcfg.window < 2)
        throw validation_error("perfect surrogate window must cover at least 2 levels");
    if (field.radii.size() < 6)
        throw validation_error("perfect surrogate scan requires a field with >= 6 levels");
    const double thr = threshold(kcfg, tcfg);
    const std::size_t start = window_start(field, tcfg.window);
    const std::vector<double> d = window_normalizers(kcfg, field, start);
    const std::size_t L = field.radii.size();

    std::int64_t count = 0;
    for (std::int64_t c = 0; c < field.n_centers; ++c) {
        bool all = true;
        for (std::size_t i = start; all && i < L; ++i)
            all = std::abs(field.at(c, static_cast<int>(i)) / d[i] - thr) <= tcfg.tol;
        if (all) ++count;
    }
    return count;
}

double pin_offset(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                  const seq::ScaleSequence& s, int n) {
    const double a = threshold(kcfg, tcfg);
    if (n < 0 || n > s.max_level()) throw validation_error("pin_offset: level out of range");
    if (n == 0) {
        double g0 = kernels::g_fn(kcfg, s.radii[0]);
        return a * kernels::d_fn(kcfg, s.radii[0]) / std::sqrt(g0);
    }
    double dd = kernels::d_fn(kcfg, s.radii[n]) - kernels::d_fn(kcfg, s.radii[n - 1]);
    double dg = kernels::g_fn(kcfg, s.radii[n]) - kernels::g_fn(kcfg, s.radii[n - 1]);
    if (!(dg > 0.0))
        throw internal_error("pin_offset: variance increment is not positive");
    return a * dd / std::sqrt(dg);
}

double ln_prob_P(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                 const seq::ScaleSequence& s, int n) {
    return prob_from_offset(pin_offset(kcfg, tcfg, s, n)).ln_p;
}

double prob_P(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
              const seq::ScaleSequence& s, int n) {
    return prob_from_offset(pin_offset(kcfg, tcfg, s, n)).p;
}

double ln_prob_Phi(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                   const seq::ScaleSequence& s, int n) {
    if (n < 0 || n > s.max_level()) throw validation_error("ln_prob_Phi: level out of range");
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) acc += ln_prob_P(kcfg, tcfg, s, i);
    return acc;
}

double prob_Phi(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                const seq::ScaleSequence& s, int n) {
    return std::exp(ln_prob_Phi(kcfg, tcfg, s, n));
}

ProbEstimates prob_estimates(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                             const seq::ScaleSequence& s) {
    const int N = s.max_level();
    if (N < 0) throw validation_error("prob_estimates: empty sequence");
    ProbEstimates pe;
    double acc = 0.0;
    for (int n = 0; n <= N; ++n) {
        double b = pin_offset(kcfg, tcfg, s, n);
        ProbPair pp = prob_from_offset(b);
        acc += pp.ln_p;
        pe.b.push_back(b);
        pe.ln_p.push_back(pp.ln_p);
        pe.p.push_back(pp.p);
        pe.ln_phi.push_back(acc);
        pe.phi.push_back(std::exp(acc));
        if (n >= 1) {
            double lr = std::log(s.radii[n]);
            pe.c_fit.push_back(std::abs(pp.ln_p - kcfg.nu * tcfg.gamma * lr) / std::sqrt(-lr));
        }
    }
    if (!pe.c_fit.empty()) {
        pe.c_max = *std::max_element(pe.c_fit.begin(), pe.c_fit.end());
        pe.c_min = *std::min_element(pe.c_fit.begin(), pe.c_fit.end());
        pe.c_ratio = pe.c_max / pe.c_min;
    }
    return pe;
}

BoxDimension box_dimension(const std::vector<std::vector<double>>& points,
                           const std::vector<double>& scales) {
    if (scales.size() < 2)
        throw validation_error("box_dimension requires at least two scales");
    for (double s : scales)
        if (!(s > 0.0) || !(s <= 1.0) || !std::isfinite(s))
            throw validation_error("box scales must lie in (0, 1]");

    BoxDimension bd;
    bd.n_points = static_cast<std::int64_t>(points.size());
    bd.box_counts.assign(scales.size(), 0);
    if (points.empty()) return bd;  // applicable stays false, counts 0

    const std::size_t dim = points[0].size();
    if (dim == 0) throw validation_error("box_dimension: zero-dimensional points");
    for (const auto& p : points) {
        if (p.size() != dim)
            throw validation_error("box_dimension: points of mixed dimension");
        for (double x : p)
            if (!std::isfinite(x)) throw validation_error("box_dimension: non-finite coordinate");
    }

    // half-open partition of the cube anchored at -1: box k covers
    // [-1 + k s, -1 + (k+1) s)
    std::vector<double> x(scales.size()), y(scales.size());
    for (std::size_t j = 0; j < scales.size(); ++j) {
        std::set<std::vector<std::int64_t>> boxes;
        std::vector<std::int64_t> key(dim);
        for (const auto& p : points) {
            for (std::size_t k = 0; k < dim; ++k)
                key[k] = static_cast<std::int64_t>(std::floor((p[k] + 1.0) / scales[j]));
            boxes.insert(key);
        }
        bd.box_counts[j] = static_cast<std::int64_t>(boxes.size());
        x[j] = -std::log(scales[j]);
        y[j] = std::log(static_cast<double>(boxes.size()));
    }

    const std::size_t m = scales.size();
    double xbar = 0.0, ybar = 0.0;
    for (std::size_t j = 0; j < m; ++j) { xbar += x[j]; ybar += y[j]; }
    xbar /= static_cast<double>(m);
    ybar /= static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        sxx += (x[j] - xbar) * (x[j] - xbar);
        sxy += (x[j] - xbar) * (y[j] - ybar);
    }
    if (!(sxx > 0.0)) throw validation_error("box_dimension: scales must not all be equal");
    const double slope = sxy / sxx;

    double rss = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double e = y[j] - ybar - slope * (x[j] - xbar);
        rss += e * e;
    }
    bd.applicable = true;
    bd.estimate = slope;
    bd.ci_half_width = m > 2 ? std::sqrt(rss / (static_cast<double>(m - 2) * sxx)) : 0.0;
    return bd;
}

ShiftEnergy shift_energy(const kernels::KernelConfig& kcfg, double s_prev, double s_cur) {
    kcfg.validate();
    if (kcfg.p != 1)
        throw unsupported_error("shift energy uses the p=1 closed derivative forms");
    if (!(s_cur > 0.0) || !(s_cur <= s_prev) || !(s_prev < 1.0))
        throw domain_error("shift_energy requires 0 < s_cur <= s_prev < 1");

    const double mu = kcfg.mu();
    const double u_prev = -std::log(s_prev);
    ShiftEnergy se;
    se.boundary = 0.5 * (bessel_ik(mu, s_prev) + u_prev);
    if (s_cur == s_prev) return se;  // energy 0 as the vanishing-interval limit

    EnergyParams par{mu};
    gsl_function f;
    f.function = &energy_integrand;
    f.params = &par;
    const std::size_t limit = 4000;
    std::unique_ptr<gsl_integration_workspace, void (*)(gsl_integration_workspace*)> ws(
        gsl_integration_workspace_alloc(limit), gsl_integration_workspace_free);
    if (!ws) throw resource_error("shift_energy: cannot allocate quadrature workspace");

    double result = 0.0, abserr = 0.0;
    int status = gsl_integration_qag(&f, u_prev, -std::log(s_cur), 0.0, 1e-10,
                                     limit, GSL_INTEG_GAUSS61, ws.get(), &result, &abserr);
    if (status != GSL_SUCCESS)
        throw accuracy_error("shift_energy quadrature did not converge", result, abserr);
    se.energy = result;
    return se;
}

DimensionResult estimate_dimension(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                                   const lat::MultiLattice& ml, int lev, std::uint64_t seed,
                                   int n_replicas, std::int64_t max_points) {
    if (n_replicas < 1) throw validation_error("need at least one replica");
    if (lev < 1 || lev >= static_cast<int>(ml.levels.size()))
        throw validation_error("estimate_dimension: level out of range");

    // distinct realized cell sizes of levels 1..lev (capped levels repeat
    // the same grid and add no box-counting information)
    std::vector<double> scales;
    for (int n = 1; n <= lev; ++n) {
        double cs = ml.levels[n].cell_size;
        if (scales.empty() || cs < scales.back()) scales.push_back(cs);
    }
    if (scales.size() < 2)
        throw validation_error("estimate_dimension needs at least two distinct cell scales");

    std::vector<LevelField> fields = sample_stack_fields(kcfg, ml, lev, seed, n_replicas,
                                                         max_points);
    DimensionResult res;
    res.replicas = n_replicas;
    res.scales = scales;
    for (const LevelField& f : fields) {
        ThickPointReport rep = detect_limsup(kcfg, tcfg, f);
        res.total_flagged += static_cast<std::int64_t>(rep.flagged.size());
        if (rep.flagged.empty()) continue;
        std::vector<std::vector<double>> pts;
        pts.reserve(rep.flagged.size());
        for (std::int64_t c : rep.flagged) pts.push_back(f.centers[static_cast<std::size_t>(c)]);
        BoxDimension bd = box_dimension(pts, scales);
        res.per_replica.push_back(bd.estimate);
    }
    res.applicable = static_cast<int>(res.per_replica.size());
    if (res.applicable > 0) {
        double mean = 0.0;
        for (double v : res.per_replica) mean += v;
        mean /= res.applicable;
        res.estimate = mean;
        if (res.applicable > 1) {
            double ss = 0.0;
            for (double v : res.per_replica) ss += (v - mean) * (v - mean);
            double sd = std::sqrt(ss / (res.applicable - 1));
            res.ci_half_width = 1.96 * sd / std::sqrt(static_cast<double>(res.applicable));
        }
    }
    return res;
}

} // namespace gff::thick
