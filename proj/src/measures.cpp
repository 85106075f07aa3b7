#include "gff/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include <gsl/gsl_qrng.h>

#include "gff/errors.hpp"

namespace gff::meas {

namespace {

int thread_count() {
    const char* e = std::getenv("GFF_THREADS");
    if (!e) return 1;
    long n = std::strtol(e, nullptr, 10);
    if (n < 1) return 1;
    if (n > 64) return 64;
    return static_cast<int>(n);
}

struct QrngDeleter {
    void operator()(gsl_qrng* q) const { gsl_qrng_free(q); }
};
using QrngPtr = std::unique_ptr<gsl_qrng, QrngDeleter>;

QrngPtr make_halton(int dim) {
    gsl_qrng* q = gsl_qrng_alloc(gsl_qrng_halton, static_cast<unsigned>(dim));
    if (!q) throw resource_error("could not allocate a Halton stream of dimension " +
                                 std::to_string(dim));
    return QrngPtr(q);
}

double pairwise_reduce(std::vector<double>& v) {
    if (v.empty()) return 0.0;
    std::size_t n = v.size();
    while (n > 1) {
        std::size_t h = 0;
        for (std::size_t i = 0; i + 1 < n; i += 2) v[h++] = v[i] + v[i + 1];
        if (n % 2) v[h++] = v[n - 1];
        n = h;
    }
    return v[0];
}

double sq_center_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double u = a[i] - b[i];
        d2 += u * u;
    }
    return d2;
}

// quasi-MC mean of |y - w|^{-alpha} over uniform points of two cells of
// side L centered at distance given by `offset`; the same Halton point set
// serves every pair (the stream is re-initialized by the caller)
struct PairMean {
    double value;
    double err;  // half-sample difference
};

PairMean qmc_pair_mean(gsl_qrng* q, const std::vector<double>& cj, const std::vector<double>& ck,
                       double L, double alpha, int S, std::vector<double>& scratch) {
    gsl_qrng_init(q);
    const int nu = static_cast<int>(cj.size());
    double acc = 0.0, acc_half = 0.0;
    int cnt = 0, cnt_half = 0;
    for (int s = 0; s < S; ++s) {
        gsl_qrng_get(q, scratch.data());
        double d2 = 0.0;
        for (int i = 0; i < nu; ++i) {
            double u = (cj[i] + L * (scratch[i] - 0.5)) -
                       (ck[i] + L * (scratch[nu + i] - 0.5));
            d2 += u * u;
        }
        if (!(d2 > 0.0)) continue;  // a coincident sample would poison the mean
        double f = std::pow(d2, -0.5 * alpha);
        acc += f;
        ++cnt;
        if (s < S / 2) {
            acc_half += f;
            ++cnt_half;
        }
    }
    double mean = cnt ? acc / cnt : 0.0;
    double half = cnt_half ? acc_half / cnt_half : mean;
    return {mean, std::abs(mean - half)};
}

} // namespace

DiscreteMeasure build_measure(const kernels::KernelConfig& kcfg, const thick::ThickConfig& tcfg,
                              const seq::ScaleSequence& s, const thick::LevelField& field, int n) {
    kcfg.validate();
    if (n < 0 || n > s.max_level())
        throw validation_error("build_measure: level out of range for the sequence");
    if (field.depth() != n)
        throw validation_error("build_measure: field must be sampled at exactly the measure "
                               "level (cells are level-n cells)");
    for (int i = 0; i <= n; ++i)
        if (std::abs(field.radii[static_cast<std::size_t>(i)] -
                     s.radii[static_cast<std::size_t>(i)]) >
            1e-12 * s.radii[static_cast<std::size_t>(i)])
            throw validation_error("build_measure: field radii do not match the sequence prefix");

    const double r = s.radii[static_cast<std::size_t>(n)];
    DiscreteMeasure m;
    m.level = n;
    m.radius = r;
    m.cell_size = 2.0 * r;
    // ideal count K_n = r^{-nu} overflows double well inside the supported
    // radius range, so the weight lives in log space
    const double ln_K = -static_cast<double>(kcfg.nu) * std::log(r);
    const double ln_W = thick::ln_prob_Phi(kcfg, tcfg, s, n);
    m.ln_weight = -(ln_K + ln_W);
    // realized/ideal diagnostic; may underflow to 0 for synthetic deep levels
    m.realized_correction =
        static_cast<double>(field.n_centers) * std::pow(r, static_cast<double>(kcfg.nu));

    m.cells = thick::xi_set(kcfg, tcfg, field, n);
    m.weights.assign(m.cells.size(), std::exp(m.ln_weight));
    if (!field.centers.empty()) {
        if (field.centers.size() != static_cast<std::size_t>(field.n_centers))
            throw validation_error("build_measure: field centers do not match the center count");
        m.centers.reserve(m.cells.size());
        for (std::int64_t c : m.cells) m.centers.push_back(field.centers[static_cast<std::size_t>(c)]);
    }
    return m;
}

double total_mass(const DiscreteMeasure& m) {
    double acc = 0.0;
    for (double w : m.weights) acc += w;
    return acc;
}

MomentEstimate second_moment_mc(const kernels::KernelConfig& kcfg, const thick::ThickConfig& tcfg,
                                const seq::ScaleSequence& s,
                                const std::vector<thick::LevelField>& fields, int n) {
    if (fields.size() < 100)
        throw validation_error("second_moment_mc needs at least 100 replicas");
    // Welford over the squared masses
    double mean = 0.0, m2 = 0.0;
    std::int64_t cnt = 0;
    for (const thick::LevelField& f : fields) {
        double mass = total_mass(build_measure(kcfg, tcfg, s, f, n));
        double x = mass * mass;
        ++cnt;
        double d = x - mean;
        mean += d / static_cast<double>(cnt);
        m2 += d * (x - mean);
    }
    MomentEstimate est;
    est.value = mean;
    est.se = std::sqrt(m2 / static_cast<double>(cnt - 1) / static_cast<double>(cnt));
    est.replicas = static_cast<int>(cnt);
    return est;
}

std::pair<double, double> unit_cube_self_energy(int nu, double alpha) {
    if (nu < 1) throw validation_error("unit_cube_self_energy: nu must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw domain_error("unit_cube_self_energy: alpha must be positive and finite");
    if (alpha >= static_cast<double>(nu))
        throw domain_error("unit_cube_self_energy: the self integral diverges for alpha >= nu");

    static std::mutex cache_mutex;
    static std::map<std::pair<int, std::int64_t>, std::pair<double, double>> cache;
    std::int64_t bits;
    std::memcpy(&bits, &alpha, sizeof(bits));
    const std::pair<int, std::int64_t> key{nu, bits};
    {
        std::lock_guard<std::mutex> lock(cache_mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }

    QrngPtr q = make_halton(2 * nu);
    std::vector<double> v(static_cast<std::size_t>(2 * nu));
    const long N = 1L << 18;
    double acc = 0.0, acc_half = 0.0;
    long cnt = 0, cnt_half = 0;
    for (long i = 0; i < N; ++i) {
        gsl_qrng_get(q.get(), v.data());
        double d2 = 0.0;
        for (int k = 0; k < nu; ++k) {
            double u = v[static_cast<std::size_t>(k)] - v[static_cast<std::size_t>(nu + k)];
            d2 += u * u;
        }
        if (!(d2 > 0.0)) continue;
        double f = std::pow(d2, -0.5 * alpha);
        acc += f;
        ++cnt;
        if (i < N / 2) {
            acc_half += f;
            ++cnt_half;
        }
    }
    std::pair<double, double> out{acc / static_cast<double>(cnt), 0.0};
    out.second = std::abs(out.first - acc_half / static_cast<double>(cnt_half));

    std::lock_guard<std::mutex> lock(cache_mutex);
    cache.emplace(key, out);
    return out;
}

AlphaEnergy alpha_energy(const kernels::KernelConfig& kcfg, const DiscreteMeasure& m, double alpha,
                         int pair_mc_samples) {
    kcfg.validate();
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw domain_error("alpha_energy: alpha must be positive and finite");
    if (alpha >= static_cast<double>(kcfg.nu))
        throw domain_error("alpha_energy: the diagonal integral diverges for alpha >= nu");
    if (pair_mc_samples < 1)
        throw validation_error("alpha_energy: need at least one quasi-MC sample per pair");

    AlphaEnergy out;
    const std::size_t mcnt = m.cells.size();
    if (mcnt == 0) return out;
    if (m.weights.size() != mcnt)
        throw validation_error("alpha_energy: weights do not match the cell list");
    if (m.centers.size() != mcnt)
        throw validation_error("alpha_energy: measure lacks center coordinates");
    for (const auto& c : m.centers)
        if (c.size() != static_cast<std::size_t>(kcfg.nu))
            throw validation_error("alpha_energy: center dimension does not match nu");
    const double L = m.cell_size;
    if (L < 0.0 || !std::isfinite(L))
        throw validation_error("alpha_energy: cell size must be finite and non-negative");

    // point masses: every self term diverges, the distinct-pair part stays
    // finite and is still reported
    if (L == 0.0) {
        double acc = 0.0;
        for (std::size_t j = 0; j < mcnt; ++j)
            for (std::size_t k = j + 1; k < mcnt; ++k)
                acc += 2.0 * m.weights[j] * m.weights[k] *
                       std::pow(sq_center_dist(m.centers[j], m.centers[k]), -0.5 * alpha);
        out.off_diagonal = acc;
        out.value = std::numeric_limits<double>::infinity();
        out.diagonal_divergent = true;
        return out;
    }

    const std::pair<double, double> cunit = unit_cube_self_energy(kcfg.nu, alpha);
    const double lpow = std::pow(L, -alpha);
    double diag = 0.0, diag_err = 0.0;
    for (std::size_t j = 0; j < mcnt; ++j) {
        diag += m.weights[j] * m.weights[j] * cunit.first * lpow;
        diag_err += m.weights[j] * m.weights[j] * cunit.second * lpow;
    }

    // deterministic pair sum: the flattened j<k index space is cut into
    // fixed blocks, each block accumulates independently (same Halton point
    // set per pair regardless of the executing thread), and the block
    // partials are combined by pairwise summation in index order
    const std::size_t npairs = mcnt * (mcnt - 1) / 2;
    const std::size_t BLOCK = 2048;
    const std::size_t nblocks = npairs ? (npairs + BLOCK - 1) / BLOCK : 0;
    std::vector<double> block_val(nblocks, 0.0), block_err(nblocks, 0.0);

    // row offsets of the flattened enumeration, for locating a block start
    std::vector<std::size_t> row_off(mcnt + 1, 0);
    for (std::size_t j = 0; j < mcnt; ++j) row_off[j + 1] = row_off[j] + (mcnt - 1 - j);

    const double near_cut = 16.0 * L * L;  // squared distance under (4 L)^2
    const int S = pair_mc_samples;
    const double lap = std::abs(alpha * (alpha + 2.0 - static_cast<double>(kcfg.nu)));

    auto run_blocks = [&](std::size_t first_block, std::size_t stride) {
        QrngPtr q = make_halton(2 * kcfg.nu);
        std::vector<double> scratch(static_cast<std::size_t>(2 * kcfg.nu));
        for (std::size_t b = first_block; b < nblocks; b += stride) {
            const std::size_t p0 = b * BLOCK;
            const std::size_t p1 = std::min(npairs, p0 + BLOCK);
            // invert the triangular index once per block
            std::size_t j = static_cast<std::size_t>(
                std::upper_bound(row_off.begin(), row_off.end(), p0) - row_off.begin() - 1);
            std::size_t k = j + 1 + (p0 - row_off[j]);
            double val = 0.0, err = 0.0;
            for (std::size_t p = p0; p < p1; ++p) {
                const double ww = 2.0 * m.weights[j] * m.weights[k];
                const double d2 = sq_center_dist(m.centers[j], m.centers[k]);
                if (d2 > near_cut) {
                    const double mid = std::pow(d2, -0.5 * alpha);
                    val += ww * mid;
                    // leading midpoint-rule correction: (L^2/12) Lap |x|^-a
                    err += ww * (L * L / 12.0) * lap * mid / d2;
                } else {
                    PairMean pm = qmc_pair_mean(q.get(), m.centers[j], m.centers[k], L, alpha,
                                                S, scratch);
                    val += ww * pm.value;
                    err += ww * pm.err;
                }
                if (++k == mcnt) {
                    ++j;
                    k = j + 1;
                }
            }
            block_val[b] = val;
            block_err[b] = err;
        }
    };

    const int T = std::min<int>(thread_count(), nblocks ? static_cast<int>(nblocks) : 1);
    if (T <= 1) {
        run_blocks(0, 1);
    } else {
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t)
            workers.emplace_back(run_blocks, static_cast<std::size_t>(t),
                                 static_cast<std::size_t>(T));
        for (std::thread& w : workers) w.join();
    }

    out.off_diagonal = pairwise_reduce(block_val);
    out.value = diag + out.off_diagonal;
    out.se = diag_err + pairwise_reduce(block_err);
    return out;
}

CapacityReport capacity_certificate(const kernels::KernelConfig& kcfg,
                                    const std::vector<DiscreteMeasure>& measures, double alpha,
                                    double c1, double c2, int pair_mc_samples) {
    kcfg.validate();
    if (!(c1 > 1.0)) throw validation_error("capacity_certificate: c1 must exceed 1");
    if (!(c2 > 0.0)) throw validation_error("capacity_certificate: c2 must be positive");
    if (measures.empty())
        throw validation_error("capacity_certificate: needs at least one replica measure");
    if (!(alpha > 0.0) || !std::isfinite(alpha) || alpha >= static_cast<double>(kcfg.nu))
        throw domain_error("capacity_certificate: alpha must lie in (0, nu)");

    CapacityReport rep;
    rep.alpha = alpha;
    rep.c1 = c1;
    rep.c2 = c2;
    rep.total = static_cast<int>(measures.size());
    for (const DiscreteMeasure& mm : measures) {
        const double mass = total_mass(mm);
        // zero-mass replicas fail the window and stay in the denominator
        if (!(mass >= 1.0 / c1) || !(mass <= c1)) continue;
        if (alpha_energy(kcfg, mm, alpha, pair_mc_samples).value <= c2) ++rep.passed;
    }
    rep.fraction = static_cast<double>(rep.passed) / static_cast<double>(rep.total);
    return rep;
}

} // namespace gff::meas
