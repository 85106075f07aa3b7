#pragma once

// Covariance kernels of renormalized spherical averages of the Gaussian
// field driven by (I - Laplace)^p on R^nu: closed forms where they exist
// (disjoint, inclusion, concentric), oscillatory quadrature for
// overlapping spheres, and the derived quantities built from them
// (variance profile G, thick-point normalizer D, intrinsic metric, clock
// reparametrization, sphere-average modulus Psi).

#include <mutex>
#include <string>
#include <unordered_map>

namespace gff::kernels {

struct KernelConfig {
    int nu = 3;             // ambient dimension, >= 3
    int p = 1;              // operator order, 1 <= p < nu/2
    double quad_rel_tol = 1e-8;
    int quad_max_subdiv = 10000;

    void validate() const;  // throws validation_error
    double mu() const { return 0.5 * (nu - 2); }
};

enum class Method { closed_disjoint, closed_inclusion, closed_concentric, quadrature };

struct KernelValue {
    double value = 0.0;
    Method method = Method::quadrature;
    double est_error = 0.0;
};

const char* method_name(Method m);

// surface area of the unit sphere S^{nu-1}: 2 pi^{nu/2} / Gamma(nu/2)
double alpha_nu(int nu);

// renormalization c(t) = (t/2)^mu / (Gamma(nu/2) I_mu(t)); c(0+) = 1,
// decreasing. Computed from the ascending series of I, which cancels the
// (t/2)^mu prefactor exactly, so it is stable down to t = 1e-300.
double renorm_factor(const KernelConfig& cfg, double t);

// un-renormalized covariance of sphere averages at center distance dist
// (dist = 0 selects the concentric spectral integrand), via panel
// quadrature with accelerated tails. Throws accuracy_error carrying the
// partial value when quad_rel_tol is not met within quad_max_subdiv.
KernelValue raw_cov_quadrature(const KernelConfig& cfg, double t, double s, double dist);

// closed concentric form for p=1: I_mu(min) K_mu(max) / (alpha_nu (ts)^mu)
double concentric_closed(const KernelConfig& cfg, double t, double s);

// renormalized concentric variance G(t) (p=1); throws range_error with
// ln G attached if the value overflows (possible for tiny t when nu >= 4)
double g_fn(const KernelConfig& cfg, double t);

// ln G(t), stable for t down to 1e-300
double log_g_fn(const KernelConfig& cfg, double t);

// dG/dt = -(alpha_nu/(2 pi)^nu) / (t I_mu(t)^2)  (p=1, via the Wronskian)
double g_fn_derivative(const KernelConfig& cfg, double t);

// thick-point normalizer D(t) = sqrt(-G(t) ln t), t in (0,1]; D(1) = 0
double d_fn(const KernelConfig& cfg, double t);

// ln D(t), stable for tiny t
double log_d_fn(const KernelConfig& cfg, double t);

// renormalized covariance for disjoint spheres, distance dist > 0 (p=1)
double cov_disjoint(const KernelConfig& cfg, double dist);

// renormalized covariance when the smaller sphere lies inside the one of
// radius t, centers dist apart (p=1); independent of the inner radius;
// dist = 0 reduces analytically to g_fn(t)
double cov_inclusion(const KernelConfig& cfg, double t, double dist);

// full dispatch: disjoint / inclusion / concentric closed forms, else
// renormalized quadrature. Symmetric in (t, s).
KernelValue cov_general(const KernelConfig& cfg, double t, double s, double dist);

// sphere-average modulus Psi(w) = 1 - (2 pi)^{nu/2}/alpha_nu w^{-mu} J_mu(w)
double psi_fn(const KernelConfig& cfg, double w);

// intrinsic metric d((x,t),(y,s)) = sqrt(G(t) + G(s) - 2 Cov)
double intrinsic_metric(const KernelConfig& cfg, double t, double s, double dist);

// clock tau(t) = G(t) - G(1) and its inverse (bisection, 1e-12 relative)
double clock_fn(const KernelConfig& cfg, double t);
double clock_inverse(const KernelConfig& cfg, double tau);

// concentric covariance for p >= 2 via symbolic differentiation of
// K_mu(mt) I_mu(ms) under (-1/(2m) d/dm)^{p-1} at m = 1
double concentric_cov_p(const KernelConfig& cfg, double t, double s);

// memoized cov_general for assembly loops over lattices, where the same
// (t, s, dist) triple repeats across many point pairs; key rounded to 12
// significant digits; thread-safe
class CovarianceCache {
public:
    explicit CovarianceCache(const KernelConfig& cfg) : cfg_(cfg) {}
    double get(double t, double s, double dist);
    const KernelConfig& config() const { return cfg_; }
    std::size_t size() const;

private:
    KernelConfig cfg_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, double> map_;
};

} // namespace gff::kernels
