#include "gff/quadrature.hpp"
#include "gff/errors.hpp"

#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_errno.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace gff::quad {

namespace {

const gsl_error_handler_t* const g_prev_handler = gsl_set_error_handler_off();

double bessel_j_raw(double mu, double z) {
    gsl_sf_result r;
    int status = gsl_sf_bessel_Jnu_e(mu, z, &r);
    if (status == GSL_EUNDRFLW)
        return 0.0;
    if (status != GSL_SUCCESS)
        throw internal_error("quadrature: J_nu evaluation failed");
    if (!std::isfinite(r.val)) {
        // GSL's Steed recurrence yields NaN with a SUCCESS status at
        // isolated arguments (e.g. mu=1/2 at the double nearest 3 pi/2);
        // a one-ulp shift is far below our tolerances and recovers it
        status = gsl_sf_bessel_Jnu_e(mu, std::nextafter(z, 2.0 * z + 1.0), &r);
        if (status != GSL_SUCCESS || !std::isfinite(r.val))
            throw internal_error("quadrature: J_nu evaluation failed");
    }
    return r.val;
}

// Y_nu grows like z^-mu near 0; report overflow distinctly so the caller
// can fall back to the unsplit scheme.
struct y_overflow {};

double bessel_y_raw(double mu, double z) {
    gsl_sf_result r;
    int status = gsl_sf_bessel_Ynu_e(mu, z, &r);
    if (status == GSL_EOVRFLW)
        throw y_overflow{};
    if (status != GSL_SUCCESS)
        throw internal_error("quadrature: Y_nu evaluation failed");
    if (!std::isfinite(r.val)) {
        // same isolated-argument guard as bessel_j_raw
        status = gsl_sf_bessel_Ynu_e(mu, std::nextafter(z, 2.0 * z + 1.0), &r);
        if (status != GSL_SUCCESS || !std::isfinite(r.val))
            throw internal_error("quadrature: Y_nu evaluation failed");
    }
    return r.val;
}

struct gk_panel {
    double value;
    double abserr;
};

gk_panel gk15(const std::function<double(double)>& f, double a, double b) {
    gsl_function gf;
    gf.function = [](double x, void* params) {
        return (*static_cast<const std::function<double(double)>*>(params))(x);
    };
    gf.params = const_cast<void*>(static_cast<const void*>(&f));
    double result, abserr, resabs, resasc;
    gsl_integration_qk15(&gf, a, b, &result, &abserr, &resabs, &resasc);
    return {result, abserr};
}

// Levin u-transform over a stream of terms (Numerical Recipes style
// triangular update). Restarted periodically to avoid cancellation decay
// in very long streams; `base` carries the partial sum consumed by
// earlier windows.
class LevinStream {
public:
    explicit LevinStream(int window = 60) : window_(window) {}

    void add(double term) {
        if (n_ == window_) {
            base_ = sum_;
            numer_.clear();
            denom_.clear();
            n_ = 0;
        }
        sum_ += term;
        double omega = (beta_ + n_) * term;
        if (omega == 0.0 || !std::isfinite(omega))
            omega = std::numeric_limits<double>::min();
        double t = 1.0 / (beta_ + n_);
        denom_.push_back(t / omega);
        numer_.push_back((sum_ - base_) * denom_[n_]);
        if (n_ > 0) {
            double ratio = (beta_ + n_ - 1) * t;
            double fac = t;
            for (int j = 1; j <= n_; ++j) {
                double c = (n_ - j + beta_) * fac;
                numer_[n_ - j] = numer_[n_ - j + 1] - c * numer_[n_ - j];
                denom_[n_ - j] = denom_[n_ - j + 1] - c * denom_[n_ - j];
                fac *= ratio;
            }
        }
        ++n_;
        double val = std::fabs(denom_[0]) < 1e-300
            ? last_
            : base_ + numer_[0] / denom_[0];
        eps_ = std::fabs(val - last_);
        last_ = val;
    }

    int terms() const { return total_terms(); }
    double value() const { return last_; }
    double eps() const { return eps_; }
    double raw_sum() const { return sum_; }

private:
    int total_terms() const { return n_; }
    int window_;
    int n_ = 0;
    double beta_ = 1.0;
    double sum_ = 0.0;
    double base_ = 0.0;
    double last_ = 0.0;
    double eps_ = std::numeric_limits<double>::infinity();
    std::vector<double> numer_, denom_;
};

// Accelerates one panel-sum stream three ways (every panel, pairs,
// triples); agreement between the groupings is the error cross-check.
class TailAccumulator {
public:
    void add(double term, double quad_err) {
        single_.add(term);
        quad_err_ += quad_err;
        pair_carry_ += term;
        if (++pair_cnt_ == 2) {
            pairs_.add(pair_carry_);
            pair_carry_ = 0.0;
            pair_cnt_ = 0;
        }
        triple_carry_ += term;
        if (++triple_cnt_ == 3) {
            triples_.add(triple_carry_);
            triple_carry_ = 0.0;
            triple_cnt_ = 0;
        }
        ++count_;
    }

    int count() const { return count_; }
    double value() const { return single_.value(); }

    // residual estimate: accelerator step size plus disagreement between
    // the three groupings of the same data
    double residual() const {
        double r = single_.eps();
        if (pairs_.terms() >= 4)
            r = std::max(r, std::fabs(single_.value() - pairs_.value()));
        if (triples_.terms() >= 4)
            r = std::max(r, std::fabs(single_.value() - triples_.value()));
        return r;
    }

    double quad_err() const { return quad_err_; }

    bool settled(double abs_tol) const {
        return count_ >= 8 && residual() <= abs_tol;
    }

private:
    LevinStream single_, pairs_, triples_;
    double pair_carry_ = 0.0, triple_carry_ = 0.0;
    int pair_cnt_ = 0, triple_cnt_ = 0;
    int count_ = 0;
    double quad_err_ = 0.0;
};

// one GK panel, bisected while its own error estimate stays above tol
gk_panel integrate_panel(const std::function<double(double)>& f, double a, double b,
                         double abs_tol, int depth, int* budget) {
    if (*budget <= 0)
        return {0.0, std::numeric_limits<double>::infinity()};
    --*budget;
    gk_panel p = gk15(f, a, b);
    if (p.abserr <= abs_tol || depth >= 20 || *budget <= 0)
        return p;
    double m = 0.5 * (a + b);
    gk_panel l = integrate_panel(f, a, m, 0.5 * abs_tol, depth + 1, budget);
    gk_panel r = integrate_panel(f, m, b, 0.5 * abs_tol, depth + 1, budget);
    return {l.value + r.value, l.abserr + r.abserr};
}

struct component_result {
    double value = 0.0;
    double err = 0.0;
    bool settled = false;
};

// tail of one frequency component from T0 to infinity
component_result integrate_component(const std::function<double(double)>& f,
                                     double T0, double omega, double omega_fast,
                                     double abs_tol, int* budget) {
    TailAccumulator acc;
    bool oscillatory = omega > 1e-3 * omega_fast;
    double panel_tol = 0.02 * abs_tol;
    if (oscillatory) {
        double h = M_PI / omega;
        double a = T0;
        for (int k = 0; *budget > 0 && k < 100000; ++k) {
            gk_panel p = integrate_panel(f, a, a + h, panel_tol, 0, budget);
            acc.add(p.value, p.abserr);
            a += h;
            if (acc.settled(abs_tol))
                return {acc.value(), acc.residual() + acc.quad_err(), true};
        }
    } else {
        // quasi-monotone component: geometrically expanding panels
        double a = T0, h = std::max(T0, 1.0);
        for (int k = 0; *budget > 0 && k < 100000; ++k) {
            gk_panel p = integrate_panel(f, a, a + h, panel_tol, 0, budget);
            acc.add(p.value, p.abserr);
            a += h;
            h *= 1.5;
            if (acc.settled(abs_tol))
                return {acc.value(), acc.residual() + acc.quad_err(), true};
        }
    }
    return {acc.value(), acc.residual() + acc.quad_err(), false};
}

struct weight_fn {
    double q;
    int p;
    double operator()(double tau) const {
        return std::pow(tau, q) / std::pow(1.0 + tau * tau, p);
    }
};

} // namespace

double adaptive_gk(const std::function<double(double)>& f, double a, double b,
                   double rel_tol, double abs_tol, int max_depth,
                   double* est_err, int* panel_budget) {
    int local_budget = 1 << 22;
    int* budget = panel_budget ? panel_budget : &local_budget;
    --*budget;
    gk_panel whole = gk15(f, a, b);
    double target = std::max(abs_tol, rel_tol * std::fabs(whole.value));
    struct rec {
        static gk_panel go(const std::function<double(double)>& f, double a, double b,
                           double tol, int depth, int max_depth, int* budget) {
            gk_panel p = gk15(f, a, b);
            --*budget;
            if (p.abserr <= tol || depth >= max_depth || *budget <= 0)
                return p;
            double m = 0.5 * (a + b);
            gk_panel l = go(f, a, m, 0.5 * tol, depth + 1, max_depth, budget);
            gk_panel r = go(f, m, b, 0.5 * tol, depth + 1, max_depth, budget);
            return {l.value + r.value, l.abserr + r.abserr};
        }
    };
    gk_panel out = whole.abserr <= target
        ? whole
        : rec::go(f, a, b, target, 0, max_depth, budget);
    if (est_err)
        *est_err = out.abserr;
    return out.value;
}

Result bessel_product_integral(double mu, const std::vector<double>& scales,
                               double q, int p, const Options& opt) {
    const int n = static_cast<int>(scales.size());
    if (n < 1 || n > 3)
        throw domain_error("bessel_product_integral supports 1..3 factors");
    for (double s : scales)
        if (!(s > 0.0) || !std::isfinite(s))
            throw domain_error("bessel_product_integral scales must be positive");
    if (q + n * mu <= -1.0)
        throw domain_error("bessel_product_integral integrand not integrable at 0");

    weight_fn w{q, p};
    auto j_product = [&](double tau) -> double {
        if (tau <= 0.0)
            return 0.0;
        double v = w(tau);
        for (double s : scales)
            v *= bessel_j_raw(mu, s * tau);
        return v;
    };

    double omega_fast = 0.0;
    for (double s : scales)
        omega_fast += s;

    int budget = opt.max_panels;
    Result res;

    // Head: everything below T0, where the slowest Bessel factors are
    // still pre-asymptotic, handled by plain adaptive bisection. One
    // plain GK pass first, just to set the magnitude scale.
    const double T0 = 8.0 * M_PI / omega_fast;
    --budget;
    gk_panel head = gk15(j_product, 0.0, T0);
    double scale0 = std::max({std::fabs(head.value), 1e-300});

    for (int attempt = 0; attempt < 2; ++attempt) {
        double tight = attempt == 0 ? 1.0 : 0.02;
        double comp_tol = 0.2 * opt.rel_tol * scale0 * tight;
        double head_tol = 0.1 * opt.rel_tol * scale0 * tight;

        if (head.abserr > head_tol && budget > 0)
            head = integrate_panel(j_product, 0.0, T0, head_tol, 0, &budget);

        double tail_value = 0.0, tail_err = 0.0;
        bool all_settled = true;
        bool used_split = true;
        try {
            // probe Y at the smallest tail argument; throws y_overflow if
            // the split cannot be evaluated in double range
            double min_scale = *std::min_element(scales.begin(), scales.end());
            (void)bessel_y_raw(mu, min_scale * T0);

            // components: sign pattern over factors 2..n (first fixed +),
            // frequency = |sum of signed scales|
            int n_comp = 1 << (n - 1);
            for (int mask = 0; mask < n_comp; ++mask) {
                double omega = scales[0];
                for (int i = 1; i < n; ++i)
                    omega += (mask >> (i - 1)) & 1 ? -scales[i] : scales[i];
                omega = std::fabs(omega);
                double coeff = std::pow(0.5, n - 1);
                auto comp_fn = [&, mask](double tau) -> double {
                    std::complex<double> prod(1.0, 0.0);
                    prod *= std::complex<double>(bessel_j_raw(mu, scales[0] * tau),
                                                 bessel_y_raw(mu, scales[0] * tau));
                    for (int i = 1; i < n; ++i) {
                        double jj = bessel_j_raw(mu, scales[i] * tau);
                        double yy = bessel_y_raw(mu, scales[i] * tau);
                        bool minus = (mask >> (i - 1)) & 1;
                        prod *= std::complex<double>(jj, minus ? -yy : yy);
                    }
                    return coeff * w(tau) * prod.real();
                };
                component_result c =
                    integrate_component(comp_fn, T0, omega, omega_fast, comp_tol, &budget);
                tail_value += c.value;
                tail_err += c.err;
                all_settled = all_settled && c.settled;
            }
        } catch (const y_overflow&) {
            // fall back: accelerate the raw J-product panel sums at the
            // fastest combination frequency
            used_split = false;
            TailAccumulator acc;
            double h = M_PI / omega_fast;
            double a = T0;
            double comp_tol2 = comp_tol;
            while (budget > 0 && !acc.settled(comp_tol2)) {
                gk_panel panel = integrate_panel(j_product, a, a + h, 0.02 * comp_tol2, 0, &budget);
                acc.add(panel.value, panel.abserr);
                a += h;
            }
            tail_value = acc.value();
            tail_err = acc.residual() + acc.quad_err();
            all_settled = acc.settled(comp_tol2);
        }
        (void)used_split;

        res.value = head.value + tail_value;
        res.est_error = head.abserr + tail_err;
        res.panels_used = opt.max_panels - budget;
        res.converged = all_settled && res.est_error <= opt.rel_tol * std::fabs(res.value);
        if (res.converged || budget <= 0)
            return res;
        // second attempt with tightened targets if the first pass met its
        // component goals but the combined error still misses rel_tol
        // (cancellation between head and tail)
        if (attempt == 0 && std::fabs(res.value) < 0.2 * scale0)
            scale0 = std::max(std::fabs(res.value), 1e-3 * scale0);
    }
    return res;
}

} // namespace gff::quad
