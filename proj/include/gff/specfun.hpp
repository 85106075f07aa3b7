#pragma once

// Special functions used throughout the library: Bessel J/I/K of real
// order, the gamma function, and the standard normal CDF with a
// log-scale tail. Backed by GSL with input checking and error mapping;
// everything returns double precision values.

namespace gff::specfun {

// J_mu(z), mu >= 0, z >= 0.
double bessel_j(double mu, double z);

// I_mu(z), mu >= 0, z >= 0. Throws gff::range_error with the scaled
// value exp(-z)*I_mu(z) attached when I_mu(z) overflows.
double bessel_i(double mu, double z);

// exp(-z) * I_mu(z); never overflows for z >= 0.
double bessel_i_scaled(double mu, double z);

// K_mu(z), z > 0.
double bessel_k(double mu, double z);

// exp(z) * K_mu(z); avoids underflow for large z.
double bessel_k_scaled(double mu, double z);

// Y_mu(z), z > 0 (used by the oscillatory quadrature tail split).
double bessel_y(double mu, double z);

// Gamma(x), x > 0.
double gamma_fn(double x);

// ln Gamma(x), x > 0.
double lgamma_fn(double x);

// Standard normal CDF, absolute error <= 1e-14.
double std_normal_cdf(double z);

// ln(1 - Phi(x)) for any x; uses erfc directly up to x ~ 25 and the
// asymptotic expansion of the Mills ratio beyond, so it stays accurate
// where 1 - Phi(x) underflows double precision.
double log_normal_tail(double x);

// Inverse standard normal CDF (quantile), 0 < u < 1.
double normal_quantile(double u);

// ln of the ratio K_mu(t)/I_mu(t), usable for t down to 1e-300 where the
// ratio itself overflows. For small t, ln I is taken from the ascending
// series (only ln(t/2) enters unexponentiated); otherwise the scaled
// Bessel functions are combined.
double log_bessel_k_over_i(double mu, double t);

} // namespace gff::specfun
