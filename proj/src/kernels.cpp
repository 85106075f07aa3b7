#include "gff/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "gff/errors.hpp"
#include "gff/quadrature.hpp"
#include "gff/specfun.hpp"

namespace gff::kernels {

namespace {

constexpr double kLnDblMax = 709.782712893383996;  // ln(DBL_MAX)

void require_finite(double x, const char* what) {
    if (!std::isfinite(x))
        throw domain_error(std::string(what) + " must be finite");
}

// Gamma(mu+1) (t/2)^{-mu} I_mu(t) = sum_k (t^2/4)^k / (k! (mu+1)_k).
// Always >= 1; converges for all t, usable up to t ~ 30 before the
// number of terms grows past the fixed cap.
double scaled_i_series(double mu, double t) {
    double q = 0.25 * t * t;
    double term = 1.0, series = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= q / (k * (mu + k));
        series += term;
        if (term < 1e-18 * series)
            break;
    }
    return series;
}

double ln_spectral_const(const KernelConfig& cfg) {
    // ln( alpha_nu / (2 pi)^nu )
    return std::log(alpha_nu(cfg.nu)) - cfg.nu * std::log(2.0 * M_PI);
}

void require_radius(const KernelConfig&, double t, const char* name) {
    require_finite(t, name);
    if (t <= 0.0 || t > 1.0)
        throw domain_error(std::string(name) + " must lie in (0, 1]");
}

} // namespace

void KernelConfig::validate() const {
    if (nu < 3)
        throw validation_error("kernel config: nu must be an integer >= 3");
    if (p < 1 || 2 * p >= nu)
        throw validation_error("kernel config: p must satisfy 1 <= p < nu/2");
    if (!(quad_rel_tol > 0.0) || quad_rel_tol > 1e-4)
        throw validation_error("kernel config: quad_rel_tol must lie in (0, 1e-4]");
    if (quad_max_subdiv < 1)
        throw validation_error("kernel config: quad_max_subdiv must be >= 1");
}

const char* method_name(Method m) {
    switch (m) {
    case Method::closed_disjoint: return "closed_disjoint";
    case Method::closed_inclusion: return "closed_inclusion";
    case Method::closed_concentric: return "closed_concentric";
    case Method::quadrature: return "quadrature";
    }
    return "unknown";
}

double alpha_nu(int nu) {
    if (nu < 2)
        throw domain_error("alpha_nu requires nu >= 2");
    return 2.0 * std::pow(M_PI, 0.5 * nu) / specfun::gamma_fn(0.5 * nu);
}

double renorm_factor(const KernelConfig& cfg, double t) {
    cfg.validate();
    require_finite(t, "t");
    if (t <= 0.0)
        throw domain_error("renorm_factor requires t > 0");
    double mu = cfg.mu();
    // c(t) = (t/2)^mu / (Gamma(nu/2) I_mu(t)); since Gamma(mu+1) =
    // Gamma(nu/2), the prefactor cancels against the series form of I
    // and c(t) = 1 / scaled_i_series(mu, t) exactly.
    if (t < 15.0)
        return 1.0 / scaled_i_series(mu, t);
    double is = specfun::bessel_i_scaled(mu, t);
    return std::exp(mu * std::log(0.5 * t) - t - specfun::lgamma_fn(0.5 * cfg.nu)) / is;
}

KernelValue raw_cov_quadrature(const KernelConfig& cfg, double t, double s, double dist) {
    cfg.validate();
    require_radius(cfg, t, "t");
    require_radius(cfg, s, "s");
    require_finite(dist, "dist");
    if (dist < 0.0)
        throw domain_error("raw_cov_quadrature requires dist >= 0");

    double mu = cfg.mu();
    quad::Options opts;
    opts.rel_tol = cfg.quad_rel_tol;
    opts.max_panels = cfg.quad_max_subdiv;

    double hi = std::max(t, s), lo = std::min(t, s);  // keeps the result bitwise symmetric
    double pref;
    quad::Result res;
    if (dist == 0.0) {
        pref = 1.0 / (alpha_nu(cfg.nu) * std::pow(hi * lo, mu));
        res = quad::bessel_product_integral(mu, {hi, lo}, 1.0, cfg.p, opts);
    } else {
        double a = alpha_nu(cfg.nu);
        pref = std::pow(2.0 * M_PI, 0.5 * cfg.nu) / (a * a * std::pow(hi * lo * dist, mu));
        res = quad::bessel_product_integral(mu, {hi, lo, dist}, 2.0 - 0.5 * cfg.nu, cfg.p, opts);
    }
    if (!res.converged)
        throw accuracy_error("raw_cov_quadrature: tolerance not reached within subdivision budget",
                             pref * res.value, pref * res.est_error);
    return KernelValue{pref * res.value, Method::quadrature, pref * res.est_error};
}

double concentric_closed(const KernelConfig& cfg, double t, double s) {
    cfg.validate();
    if (cfg.p != 1)
        throw unsupported_error("concentric_closed requires p = 1; use concentric_cov_p");
    require_finite(t, "t");
    require_finite(s, "s");
    if (t <= 0.0 || s <= 0.0)
        throw domain_error("concentric_closed requires positive radii");
    double mu = cfg.mu();
    double lo = std::min(t, s), hi = std::max(t, s);
    // I_mu(lo) K_mu(hi) = I_scaled(lo) K_scaled(hi) e^{lo - hi}, stable for
    // large radii where I alone would overflow
    double ik = specfun::bessel_i_scaled(mu, lo) * specfun::bessel_k_scaled(mu, hi) *
                std::exp(lo - hi);
    return ik / (alpha_nu(cfg.nu) * std::pow(t * s, mu));
}

double log_g_fn(const KernelConfig& cfg, double t) {
    cfg.validate();
    if (cfg.p != 1)
        throw unsupported_error("log_g_fn requires p = 1");
    require_radius(cfg, t, "t");
    return ln_spectral_const(cfg) + specfun::log_bessel_k_over_i(cfg.mu(), t);
}

double g_fn(const KernelConfig& cfg, double t) {
    double lg = log_g_fn(cfg, t);
    if (lg >= kLnDblMax)
        throw range_error("g_fn overflow; true value is exp(scale_exponent)", 1.0, lg);
    return std::exp(lg);
}

double g_fn_derivative(const KernelConfig& cfg, double t) {
    cfg.validate();
    if (cfg.p != 1)
        throw unsupported_error("g_fn_derivative requires p = 1");
    require_radius(cfg, t, "t");
    // dG/dt = -(alpha_nu/(2 pi)^nu) (K'I - KI')/I^2 = -(alpha_nu/(2 pi)^nu)
    // / (t I_mu(t)^2) by the modified Bessel Wronskian K'I - KI' = -1/t.
    double mu = cfg.mu();
    double is = specfun::bessel_i_scaled(mu, t);
    double lg = ln_spectral_const(cfg) - std::log(t) - 2.0 * (std::log(is) + t);
    if (lg >= kLnDblMax)
        throw range_error("g_fn_derivative overflow; |value| = exp(scale_exponent)", -1.0, lg);
    return -std::exp(lg);
}

double d_fn(const KernelConfig& cfg, double t) {
    cfg.validate();
    if (cfg.p != 1)
        throw unsupported_error("d_fn requires p = 1");
    require_finite(t, "t");
    if (t <= 0.0 || t > 1.0)
        throw domain_error("d_fn requires t in (0, 1]");
    if (t == 1.0)
        return 0.0;
    double ld = log_d_fn(cfg, t);
    if (ld >= kLnDblMax)
        throw range_error("d_fn overflow; true value is exp(scale_exponent)", 1.0, ld);
    return std::exp(ld);
}

double log_d_fn(const KernelConfig& cfg, double t) {
    cfg.validate();
    if (cfg.p != 1)
        throw unsupported_error("log_d_fn requires p = 1");
    require_finite(t, "t");
    if (t <= 0.0 || t >= 1.0)
        throw domain_error("log_d_fn requires t in (0, 1)");
    return 0.5 * (log_g_fn(cfg, t) + std::log(-std::log(t)));
}

double cov_disjoint(const KernelConfig& cfg, double dist) {
    cfg.validate();
    if (cfg.p != 1)
        throw unsupported_error("cov_disjoint requires p = 1");
    require_finite(dist, "dist");
    if (dist <= 0.0)
        throw domain_error("cov_disjoint requires dist > 0");
    double mu = cfg.mu();
    // (2 pi)^{-nu/2} K_mu(dist) / dist^mu; K underflow at large dist
    // legitimately yields 0
    double v = std::pow(2.0 * M_PI, -0.5 * cfg.nu) * specfun::bessel_k(mu, dist) /
               std::pow(dist, mu);
    if (!std::isfinite(v)) {
        // only reachable for tiny dist, where K_mu(d) ~ Gamma(mu)/2 (2/d)^mu
        double lg = -0.5 * cfg.nu * std::log(2.0 * M_PI) + specfun::lgamma_fn(mu) -
                    std::log(2.0) + 2.0 * mu * std::log(2.0 / dist) - mu * std::log(2.0);
        throw range_error("cov_disjoint overflow at small dist", 1.0, lg);
    }
    return v;
}

double cov_inclusion(const KernelConfig& cfg, double t, double dist) {
    cfg.validate();
    if (cfg.p != 1)
        throw unsupported_error("cov_inclusion requires p = 1");
    require_radius(cfg, t, "t");
    require_finite(dist, "dist");
    if (dist < 0.0)
        throw domain_error("cov_inclusion requires dist >= 0");
    double mu = cfg.mu();
    // (2 pi)^{-nu/2} [I_mu(d)/d^mu] K_mu(t)/I_mu(t); the bracket equals
    // scaled_i_series(mu, d) / (2^mu Gamma(mu+1)), which is analytic
    // through d = 0 (value 1/(2^mu Gamma(mu+1)))
    double bracket;
    if (dist < 15.0) {
        bracket = scaled_i_series(mu, dist) /
                  (std::pow(2.0, mu) * specfun::gamma_fn(mu + 1.0));
    } else {
        bracket = specfun::bessel_i_scaled(mu, dist) * std::exp(dist) / std::pow(dist, mu);
    }
    double lg = -0.5 * cfg.nu * std::log(2.0 * M_PI) + std::log(bracket) +
                specfun::log_bessel_k_over_i(mu, t);
    if (lg >= kLnDblMax)
        throw range_error("cov_inclusion overflow; true value is exp(scale_exponent)", 1.0, lg);
    return std::exp(lg);
}

KernelValue cov_general(const KernelConfig& cfg, double t, double s, double dist) {
    cfg.validate();
    require_radius(cfg, t, "t");
    require_radius(cfg, s, "s");
    require_finite(dist, "dist");
    if (dist < 0.0)
        throw domain_error("cov_general requires dist >= 0");

    double hi = std::max(t, s), lo = std::min(t, s);

    if (cfg.p == 1) {
        // closed forms take precedence when their geometric predicate holds
        // within a 1e-12 margin; exact tangency uses the closed form
        if (dist >= hi + lo - 1e-12)
            return KernelValue{cov_disjoint(cfg, dist), Method::closed_disjoint, 0.0};
        if (dist == 0.0)
            return KernelValue{g_fn(cfg, hi), Method::closed_concentric, 0.0};
        if (hi >= dist + lo - 1e-12)
            return KernelValue{cov_inclusion(cfg, hi, dist), Method::closed_inclusion, 0.0};
    } else if (dist == 0.0) {
        double cc = renorm_factor(cfg, t) * renorm_factor(cfg, s);
        return KernelValue{cc * concentric_cov_p(cfg, hi, lo), Method::closed_concentric, 0.0};
    }

    double cc = renorm_factor(cfg, t) * renorm_factor(cfg, s);
    try {
        KernelValue raw = raw_cov_quadrature(cfg, t, s, dist);
        return KernelValue{cc * raw.value, Method::quadrature, cc * raw.est_error};
    } catch (const accuracy_error& e) {
        throw accuracy_error(e.what(), cc * e.partial_value, cc * e.est_error);
    }
}

double psi_fn(const KernelConfig& cfg, double w) {
    cfg.validate();
    require_finite(w, "w");
    if (w < 0.0)
        throw domain_error("psi_fn requires w >= 0");
    if (w == 0.0)
        return 0.0;
    double half_nu = 0.5 * cfg.nu;
    if (w <= 4.0) {
        // Psi(w) = Gamma(nu/2) sum_{m>=1} (-1)^{m-1} (w^2/4)^m / (m! Gamma(nu/2+m));
        // leading term w^2/(2 nu)
        double q = 0.25 * w * w;
        double term = q / half_nu;  // m = 1
        double sum = term;
        for (int m = 2; m < 60; ++m) {
            term *= -q / (m * (half_nu + m - 1.0));
            sum += term;
            if (std::fabs(term) < 1e-18 * std::fabs(sum))
                break;
        }
        return sum;
    }
    double mu = cfg.mu();
    // 1 - 2^mu Gamma(nu/2) w^{-mu} J_mu(w)
    return 1.0 - std::pow(2.0, mu) * specfun::gamma_fn(half_nu) * std::pow(w, -mu) *
                     specfun::bessel_j(mu, w);
}

double intrinsic_metric(const KernelConfig& cfg, double t, double s, double dist) {
    cfg.validate();
    if (cfg.p != 1)
        throw unsupported_error("intrinsic_metric requires p = 1");
    double gt = g_fn(cfg, t);
    double gs = g_fn(cfg, s);
    double cov = cov_general(cfg, t, s, dist).value;
    double rad = gt + gs - 2.0 * cov;
    if (rad < 0.0) {
        double floor = -1e-12 * std::max(gt, gs);
        if (rad < floor) {
            std::ostringstream msg;
            msg << "intrinsic_metric: radicand " << rad << " below tolerance floor " << floor
                << " (t=" << t << ", s=" << s << ", dist=" << dist << ")";
            throw internal_error(msg.str());
        }
        rad = 0.0;
    }
    return std::sqrt(rad);
}

double clock_fn(const KernelConfig& cfg, double t) {
    return g_fn(cfg, t) - g_fn(cfg, 1.0);
}

double clock_inverse(const KernelConfig& cfg, double tau) {
    cfg.validate();
    if (cfg.p != 1)
        throw unsupported_error("clock_inverse requires p = 1");
    require_finite(tau, "tau");
    if (tau < 0.0)
        throw domain_error("clock_inverse requires tau >= 0");
    if (tau == 0.0)
        return 1.0;
    double g1 = g_fn(cfg, 1.0);
    double target = std::log(tau + g1);
    // ln G is strictly decreasing in t; bisect on x = ln t so the fixed
    // iteration count gives ~1e-16 relative accuracy in t
    double lo = std::log(1e-300), hi = 0.0;
    if (log_g_fn(cfg, std::exp(lo)) < target)
        throw domain_error("clock_inverse: tau exceeds the supported range");
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        if (log_g_fn(cfg, std::exp(mid)) >= target)
            lo = mid;
        else
            hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

namespace {

// one product term coeff * m^{-apow} t^{tpow} s^{spow} K_{mu+ki}(m t) I_{mu+ij}(m s)
struct DerivTerm {
    double coeff;
    int apow, ki, ij, tpow, spow;
};

using TermKey = std::array<int, 5>;

std::vector<DerivTerm> apply_operator(const std::vector<DerivTerm>& in) {
    // -1/(2m) d/dm, using K'_r(z) = -(K_{r-1}(z) + K_{r+1}(z))/2 and
    // I'_r(z) = (I_{r-1}(z) + I_{r+1}(z))/2
    std::map<TermKey, double> acc;
    auto add = [&acc](double c, int a, int ki, int ij, int tp, int sp) {
        acc[{a, ki, ij, tp, sp}] += c;
    };
    for (const DerivTerm& tm : in) {
        // d/dm of the m^{-apow} factor
        if (tm.apow != 0)
            add(-0.5 * tm.coeff * (-tm.apow), tm.apow + 2, tm.ki, tm.ij, tm.tpow, tm.spow);
        // d/dm of K_{mu+ki}(m t): factor t K'
        add(-0.5 * tm.coeff * (-0.5), tm.apow + 1, tm.ki - 1, tm.ij, tm.tpow + 1, tm.spow);
        add(-0.5 * tm.coeff * (-0.5), tm.apow + 1, tm.ki + 1, tm.ij, tm.tpow + 1, tm.spow);
        // d/dm of I_{mu+ij}(m s): factor s I'
        add(-0.5 * tm.coeff * 0.5, tm.apow + 1, tm.ki, tm.ij - 1, tm.tpow, tm.spow + 1);
        add(-0.5 * tm.coeff * 0.5, tm.apow + 1, tm.ki, tm.ij + 1, tm.tpow, tm.spow + 1);
    }
    std::vector<DerivTerm> out;
    out.reserve(acc.size());
    for (const auto& [k, c] : acc)
        if (c != 0.0)
            out.push_back(DerivTerm{c, k[0], k[1], k[2], k[3], k[4]});
    return out;
}

} // namespace

double concentric_cov_p(const KernelConfig& cfg, double t, double s) {
    cfg.validate();
    if (cfg.p == 1)
        throw unsupported_error("concentric_cov_p requires p >= 2; use concentric_closed");
    double hi = std::max(t, s), lo = std::min(t, s);
    require_finite(t, "t");
    require_finite(s, "s");
    if (lo <= 0.0 || hi > 1.0)
        throw domain_error("concentric_cov_p requires radii in (0, 1]");

    std::vector<DerivTerm> terms{DerivTerm{1.0, 0, 0, 0, 0, 0}};
    for (int k = 1; k < cfg.p; ++k)
        terms = apply_operator(terms);

    double mu = cfg.mu();
    double sum = 0.0;
    for (const DerivTerm& tm : terms) {
        // orders stay positive: mu - (p-1) = nu/2 - p > 0; K is even in its
        // order anyway
        double kv = specfun::bessel_k(std::fabs(mu + tm.ki), hi);
        double iv = specfun::bessel_i(mu + tm.ij, lo);
        sum += tm.coeff * std::pow(hi, tm.tpow) * std::pow(lo, tm.spow) * kv * iv;
    }
    double fact = 1.0;
    for (int k = 2; k <= cfg.p - 1; ++k)
        fact *= k;
    return sum / (alpha_nu(cfg.nu) * std::pow(t * s, mu) * fact);
}

double CovarianceCache::get(double t, double s, double dist) {
    char key[80];
    std::snprintf(key, sizeof key, "%.11e|%.11e|%.11e", t, s, dist);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = map_.find(key);
        if (it != map_.end())
            return it->second;
    }
    double v = cov_general(cfg_, t, s, dist).value;
    std::lock_guard<std::mutex> lock(mu_);
    map_.emplace(key, v);
    return v;
}

std::size_t CovarianceCache::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return map_.size();
}

} // namespace gff::kernels
