#pragma once

// Oscillatory quadrature for Bessel-product integrals on [0, inf) and a
// small adaptive Gauss-Kronrod helper for smooth finite integrals.

#include <functional>
#include <vector>

namespace gff::quad {

struct Options {
    double rel_tol = 1e-8;
    int max_panels = 10000; // total Gauss-Kronrod panel budget
};

struct Result {
    double value = 0.0;
    double est_error = 0.0;
    int panels_used = 0;
    bool converged = false;
};

// integral over [0, inf) of  tau^q / (1+tau^2)^p * prod_i J_mu(scale_i*tau).
//
// The integrand oscillates with up to 2^(n-1) combination frequencies
// |sum_i (+-scale_i)|. The head [0, T0] is integrated by adaptive
// Gauss-Kronrod; the tail is split into single-frequency components via
// H+- = J +- iY, each accelerated by a Levin u-transform over panel sums
// partitioned at that component's own zero spacing. The reported
// est_error combines accelerator residuals, a cross-check against a
// pair-grouped acceleration of the same panel stream, and panel
// quadrature errors. q + n*mu must exceed -1 (integrable at the origin);
// all scales positive.
Result bessel_product_integral(double mu, const std::vector<double>& scales,
                               double q, int p, const Options& opt = {});

// adaptive GK15 bisection on [a, b]; est_err (optional) receives the
// accumulated error estimate; throws nothing, caller checks est_err.
double adaptive_gk(const std::function<double(double)>& f, double a, double b,
                   double rel_tol, double abs_tol, int max_depth = 24,
                   double* est_err = nullptr, int* panel_budget = nullptr);

} // namespace gff::quad
