#include "gff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "gff/errors.hpp"

namespace gff::sampler {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ ((index + 1) * 0x9E3779B97F4A7C15ULL));
}

double GaussianStream::uniform01() {
    // 53-bit mantissa offset by half an ulp keeps the value strictly inside
    // (0,1), so log() below never sees 0
    const std::uint64_t x = engine_();
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianStream::next() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * M_PI * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
}

ConcentricPaths sample_concentric(const kernels::KernelConfig& cfg, const seq::ScaleSequence& s,
                                  int n_paths, std::uint64_t seed) {
    cfg.validate();
    if (cfg.p != 1)
        throw unsupported_error("independent-increment sampling requires p = 1 "
                                "(increments of the concentric process are only "
                                "independent for the first-order operator)");
    if (n_paths <= 0) throw validation_error("n_paths must be positive");
    const std::size_t levels = s.radii.size();
    if (levels < 1) throw validation_error("scale sequence is empty");

    // increment variances G(r_n) - G(r_{n-1}) >= 0 since G grows as r shrinks
    std::vector<double> sd(levels);
    std::vector<double> g(levels);
    for (std::size_t n = 0; n < levels; ++n) g[n] = kernels::g_fn(cfg, s.radii[n]);
    sd[0] = std::sqrt(g[0]);
    for (std::size_t n = 1; n < levels; ++n) {
        const double dv = g[n] - g[n - 1];
        if (dv < 0.0)
            throw internal_error("increment variance came out negative at level " +
                                 std::to_string(n));
        sd[n] = std::sqrt(dv);
    }

    ConcentricPaths out;
    out.radii = s.radii;
    out.n_paths = n_paths;
    out.values.resize(static_cast<std::size_t>(n_paths) * levels);
    for (int j = 0; j < n_paths; ++j) {
        GaussianStream gs(stream_seed(seed, static_cast<std::uint64_t>(j)));
        double acc = 0.0;
        for (std::size_t n = 0; n < levels; ++n) {
            acc += sd[n] * gs.next();
            out.values[static_cast<std::size_t>(j) * levels + n] = acc;
        }
    }
    return out;
}

Eigen::MatrixXd assemble_covariance(const kernels::KernelConfig& cfg,
                                    const std::vector<lat::LatticePoint>& pts,
                                    std::int64_t max_points) {
    cfg.validate();
    const std::int64_t m = static_cast<std::int64_t>(pts.size());
    if (m == 0) throw validation_error("empty point list");
    if (m > max_points)
        throw resource_error("covariance assembly over " + std::to_string(m) +
                             " points exceeds the limit of " + std::to_string(max_points) +
                             "; shrink the window or raise the limit explicitly");

    kernels::CovarianceCache cache(cfg);
    Eigen::MatrixXd cov(m, m);
    for (std::int64_t i = 0; i < m; ++i) {
        cov(i, i) = kernels::g_fn(cfg, pts[i].radius);
        for (std::int64_t j = i + 1; j < m; ++j) {
            double d2 = 0.0;
            for (std::size_t a = 0; a < pts[i].pos.size(); ++a) {
                const double dx = pts[i].pos[a] - pts[j].pos[a];
                d2 += dx * dx;
            }
            const double v = cache.get(pts[i].radius, pts[j].radius, std::sqrt(d2));
            cov(i, j) = v;
            cov(j, i) = v;  // mirrored, so exactly symmetric by construction
        }
    }
    return cov;
}

Eigen::MatrixXd assemble_covariance(const kernels::KernelConfig& cfg, const lat::MultiLattice& ml,
                                    int level_lo, int level_hi, std::int64_t max_points) {
    return assemble_covariance(cfg, lat::window_points(ml, level_lo, level_hi), max_points);
}

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols()) throw validation_error("covariance matrix must be square");
    const double max_diag = cov.diagonal().maxCoeff();
    static const double ladder[] = {0.0, 1e-12, 1e-10, 1e-8, 1e-6};
    for (double eps : ladder) {
        Eigen::MatrixXd shifted = cov;
        if (eps > 0.0)
            shifted.diagonal().array() += eps * max_diag;
        Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    const double lam_min = es.eigenvalues().minCoeff();
    throw numerical_error("Cholesky failed after jitter escalation up to 1e-6 * max diagonal; "
                          "matrix is not numerically positive definite",
                          lam_min);
}

std::vector<FieldSample> sample_field(const Eigen::MatrixXd& cov, std::uint64_t seed,
                                      int n_replicas) {
    if (n_replicas <= 0) throw validation_error("n_replicas must be positive");
    const Eigen::MatrixXd L = cholesky_factor(cov);
    const std::int64_t m = cov.rows();

    std::vector<FieldSample> out;
    out.reserve(static_cast<std::size_t>(n_replicas));
    for (int k = 0; k < n_replicas; ++k) {
        GaussianStream gs(stream_seed(seed, static_cast<std::uint64_t>(k)));
        Eigen::VectorXd z(m);
        for (std::int64_t i = 0; i < m; ++i) z(i) = gs.next();
        Eigen::VectorXd v = L * z;
        FieldSample fs;
        fs.seed = seed;
        fs.replica_id = k;
        fs.values.assign(v.data(), v.data() + m);
        out.push_back(std::move(fs));
    }
    return out;
}

double lil_median_statistic(const kernels::KernelConfig& cfg, const ConcentricPaths& paths) {
    const std::size_t levels = paths.radii.size();
    std::vector<double> denom(levels, 0.0);
    std::size_t usable = 0;
    for (std::size_t n = 0; n < levels; ++n) {
        const double g = kernels::g_fn(cfg, paths.radii[n]);
        if (g > M_E) {
            denom[n] = std::sqrt(2.0 * g * std::log(std::log(g)));
            ++usable;
        }
    }
    if (usable == 0)
        throw validation_error("iterated-logarithm statistic needs at least one level "
                               "with G(r) > e; deepen the sequence");
    std::vector<double> stat(paths.n_paths);
    for (int j = 0; j < paths.n_paths; ++j) {
        double best = 0.0;
        for (std::size_t n = 0; n < levels; ++n) {
            if (denom[n] == 0.0) continue;
            best = std::max(best, std::fabs(paths.at(j, static_cast<int>(n))) / denom[n]);
        }
        stat[j] = best;
    }
    const std::size_t mid = stat.size() / 2;
    std::nth_element(stat.begin(), stat.begin() + mid, stat.end());
    return stat[mid];
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw validation_error("KS statistic needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        // consume every copy of the current value on both sides, so ties
        // move the empirical CDFs together
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

} // namespace gff::sampler
