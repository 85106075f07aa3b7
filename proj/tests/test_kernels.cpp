#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gff/kernels.hpp"
#include "gff/specfun.hpp"
#include "gff/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

using namespace gff;
using namespace gff::kernels;
namespace sf = gff::specfun;

static KernelConfig cfg3() { return KernelConfig{3, 1, 1e-8, 10000}; }
static KernelConfig cfg4() { return KernelConfig{4, 1, 1e-8, 10000}; }
static KernelConfig cfg5(int p = 1) { return KernelConfig{5, p, 1e-8, 10000}; }

// nu=3 elementary forms (mu = 1/2): G(t) = e^{-t}/(4 pi sinh t),
// c(t) = t/sinh t, and the renormalized covariance of sphere averages at
// center distance d reduces to 1D integrals of exponentials:
//   Cov(t,s,d) = (1/(16 pi sinh t sinh s d)) *
//                int_{|t-s|}^{t+s} (e^{-|d-w|} - e^{-(d+w)}) dw
// valid across all geometries (overlapping, inclusion, disjoint).
static double elem3_cov(double t, double s, double d) {
    double lo = std::fabs(t - s), hi = t + s;
    if (d == 0.0) {
        // limit (e^{-|d-w|} - e^{-(d+w)}) / d -> 2 e^{-w}
        return (std::exp(-lo) - std::exp(-hi)) / (8.0 * M_PI * std::sinh(t) * std::sinh(s));
    }
    double i_abs;
    if (hi <= d)
        i_abs = std::exp(-d) * (std::exp(hi) - std::exp(lo));
    else if (lo >= d)
        i_abs = std::exp(d) * (std::exp(-lo) - std::exp(-hi));
    else
        i_abs = 2.0 - std::exp(-(d - lo)) - std::exp(-(hi - d));
    double i_plus = std::exp(-d) * (std::exp(-lo) - std::exp(-hi));
    return (i_abs - i_plus) / (16.0 * M_PI * std::sinh(t) * std::sinh(s) * d);
}

static double g3_closed(double t) { return std::exp(-t) / (4.0 * M_PI * std::sinh(t)); }

TEST_CASE("kernel config validation") {
    CHECK_NOTHROW(cfg3().validate());
    CHECK_NOTHROW(cfg5(2).validate());
    CHECK_THROWS_AS((KernelConfig{2, 1, 1e-8, 10000}.validate()), validation_error);
    CHECK_THROWS_AS((KernelConfig{4, 2, 1e-8, 10000}.validate()), validation_error); // 2p >= nu
    CHECK_THROWS_AS((KernelConfig{3, 0, 1e-8, 10000}.validate()), validation_error);
    CHECK_THROWS_AS((KernelConfig{3, 1, 0.0, 10000}.validate()), validation_error);
    CHECK_THROWS_AS((KernelConfig{3, 1, 2e-4, 10000}.validate()), validation_error);
    CHECK_THROWS_AS((KernelConfig{3, 1, 1e-8, 0}.validate()), validation_error);
}

TEST_CASE("sphere area constant") {
    // mpmath: 2*pi**(nu/2)/gamma(nu/2), dps=30
    CHECK(alpha_nu(3) == doctest::Approx(12.566370614359173).epsilon(1e-15));
    CHECK(alpha_nu(4) == doctest::Approx(19.739208802178717).epsilon(1e-15));
    CHECK(alpha_nu(5) == doctest::Approx(26.318945069571623).epsilon(1e-15));
    CHECK_THROWS_AS(alpha_nu(1), domain_error);
}

TEST_CASE("renormalization factor") {
    // mpmath dps=30: (t/2)^mu / (gamma(nu/2) besseli(mu, t))
    CHECK(renorm_factor(cfg3(), 1.0) == doctest::Approx(0.85091812823932155).epsilon(1e-14));
    CHECK(renorm_factor(cfg3(), 0.5) == doctest::Approx(0.95951737566747186).epsilon(1e-14));
    CHECK(renorm_factor(cfg4(), 0.8) == doctest::Approx(0.92407605695434114).epsilon(1e-14));

    // nu=3 closed form c(t) = t/sinh t
    for (double t : {0.01, 0.1, 0.4, 0.9, 1.0, 5.0, 14.0})
        CHECK(renorm_factor(cfg3(), t) ==
              doctest::Approx(t / std::sinh(t)).epsilon(1e-13));

    // both branches of the series/scaled-Bessel switch at t = 15 agree
    // with the elementary form
    CHECK(renorm_factor(cfg3(), 14.999999) ==
          doctest::Approx(14.999999 / std::sinh(14.999999)).epsilon(1e-12));
    CHECK(renorm_factor(cfg3(), 15.000001) ==
          doctest::Approx(15.000001 / std::sinh(15.000001)).epsilon(1e-12));

    // c(0+) = 1, stable down to denormal-adjacent arguments
    CHECK(renorm_factor(cfg3(), 1e-8) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(renorm_factor(cfg4(), 1e-300) == doctest::Approx(1.0).epsilon(1e-15));

    // decreasing in t
    CHECK(renorm_factor(cfg3(), 0.2) > renorm_factor(cfg3(), 0.3));
    CHECK_THROWS_AS(renorm_factor(cfg3(), 0.0), domain_error);
    CHECK_THROWS_AS(renorm_factor(cfg3(), -1.0), domain_error);
}

TEST_CASE("variance profile G") {
    // mpmath dps=30: (alpha_nu/(2 pi)^nu) besselk(mu,t)/besseli(mu,t)
    CHECK(g_fn(cfg3(), 1.0) == doctest::Approx(0.024910556524700641).epsilon(1e-13));
    CHECK(g_fn(cfg3(), 0.5) == doctest::Approx(0.092624469662596300).epsilon(1e-13));
    CHECK(g_fn(cfg3(), 0.25) == doctest::Approx(0.24533640298263754).epsilon(1e-13));
    CHECK(g_fn(cfg3(), 0.125) == doctest::Approx(0.56035458005109038).epsilon(1e-13));
    CHECK(g_fn(cfg3(), 0.01) == doctest::Approx(7.8784349395189342).epsilon(1e-13));
    CHECK(g_fn(cfg4(), 1.0) == doctest::Approx(0.013488669070275610).epsilon(1e-13));
    CHECK(g_fn(cfg4(), 0.3) == doctest::Approx(0.25514939336372961).epsilon(1e-13));
    CHECK(g_fn(cfg5(), 1.0) == doctest::Approx(0.0084434319701948143).epsilon(1e-13));
    CHECK(g_fn(cfg5(), 0.7) == doctest::Approx(0.029691035193625691).epsilon(1e-13));

    // nu=3 closed form to 1e-10 relative
    for (double t = 0.01; t <= 1.0; t += 0.0199)
        CHECK(g_fn(cfg3(), t) == doctest::Approx(g3_closed(t)).epsilon(1e-10));

    // log variant agrees and stays finite at extreme arguments
    for (double t : {1e-300, 1e-100, 1e-3, 0.5, 1.0}) {
        double lg = log_g_fn(cfg3(), t);
        CHECK(std::isfinite(lg));
        if (t >= 1e-3)
            CHECK(std::exp(lg) == doctest::Approx(g_fn(cfg3(), t)).epsilon(1e-14));
    }
    CHECK(std::isfinite(g_fn(cfg3(), 1e-300)));  // ~2.6e298, still representable

    // overflow for nu=4 at tiny t carries ln G
    try {
        g_fn(cfg4(), 1e-200);
        CHECK(false);
    } catch (const range_error& e) {
        CHECK(e.scale_exponent == doctest::Approx(log_g_fn(cfg4(), 1e-200)).epsilon(1e-15));
        CHECK(e.scale_exponent > 800.0);
    }

    CHECK_THROWS_AS(g_fn(cfg3(), 0.0), domain_error);
    CHECK_THROWS_AS(g_fn(cfg3(), 1.5), domain_error);
    CHECK_THROWS_AS(g_fn(cfg5(2), 0.5), unsupported_error);
}

TEST_CASE("variance profile derivative") {
    // Wronskian form vs central difference of the nu=3 closed form
    for (double t : {0.1, 0.3, 0.5, 0.9}) {
        double h = 1e-6 * t;
        double num = (g3_closed(t + h) - g3_closed(t - h)) / (2.0 * h);
        CHECK(g_fn_derivative(cfg3(), t) == doctest::Approx(num).epsilon(1e-8));
    }
    // identity G/(t G') = -I_mu(t) K_mu(t)
    for (int nu : {3, 4, 5}) {
        KernelConfig c{nu, 1, 1e-8, 10000};
        for (double t : {0.2, 0.6, 1.0}) {
            double ik = sf::bessel_i_scaled(c.mu(), t) * sf::bessel_k_scaled(c.mu(), t);
            CHECK(g_fn(c, t) / (t * g_fn_derivative(c, t)) ==
                  doctest::Approx(-ik).epsilon(1e-12));
        }
    }
    CHECK(g_fn_derivative(cfg3(), 0.5) < 0.0);
}

TEST_CASE("thick-point normalizer D") {
    // mpmath: sqrt(-G(t) ln t)
    CHECK(d_fn(cfg3(), 0.5) == doctest::Approx(0.25338190542635205).epsilon(1e-13));
    CHECK(d_fn(cfg3(), 1.0) == 0.0);
    for (double t : {0.05, 0.2, 0.7, 0.99})
        CHECK(d_fn(cfg3(), t) * d_fn(cfg3(), t) ==
              doctest::Approx(-g_fn(cfg3(), t) * std::log(t)).epsilon(1e-13));
    CHECK(std::exp(log_d_fn(cfg3(), 0.3)) ==
          doctest::Approx(d_fn(cfg3(), 0.3)).epsilon(1e-14));
    CHECK(std::isfinite(log_d_fn(cfg4(), 1e-250)));
    CHECK_THROWS_AS(d_fn(cfg3(), 0.0), domain_error);
    CHECK_THROWS_AS(d_fn(cfg3(), 1.2), domain_error);
    CHECK_THROWS_AS(log_d_fn(cfg3(), 1.0), domain_error);
}

TEST_CASE("disjoint covariance") {
    // mpmath dps=30: (2 pi)^{-nu/2} besselk(mu, r)/r^mu
    CHECK(cov_disjoint(cfg3(), 1.0) == doctest::Approx(0.029274915762159580).epsilon(1e-13));
    CHECK(cov_disjoint(cfg3(), 2.0) == doctest::Approx(0.0053848198254621574).epsilon(1e-13));
    CHECK(cov_disjoint(cfg4(), 1.3) == doctest::Approx(0.0072590294654652053).epsilon(1e-13));

    // nu=3 closed form e^{-r}/(4 pi r)
    for (double r = 0.1; r < 5.0; r += 0.37)
        CHECK(cov_disjoint(cfg3(), r) ==
              doctest::Approx(std::exp(-r) / (4.0 * M_PI * r)).epsilon(1e-12));

    CHECK(cov_disjoint(cfg3(), 800.0) == 0.0);  // legitimate underflow
    CHECK_THROWS_AS(cov_disjoint(cfg3(), 0.0), domain_error);
    CHECK_THROWS_AS(cov_disjoint(cfg3(), -0.5), domain_error);
}

TEST_CASE("inclusion covariance") {
    // mpmath dps=30
    CHECK(cov_inclusion(cfg3(), 0.5, 0.2) ==
          doctest::Approx(0.093243202296779859).epsilon(1e-13));
    CHECK(cov_inclusion(cfg5(), 0.8, 0.3) ==
          doctest::Approx(0.018946780833868735).epsilon(1e-13));

    // nu=3 elementary form (sinh d / d) G(t)
    for (double d : {0.0, 1e-12, 0.05, 0.3, 0.49})
        CHECK(cov_inclusion(cfg3(), 0.5, d) ==
              doctest::Approx((d == 0.0 ? 1.0 : std::sinh(d) / d) * g3_closed(0.5))
                  .epsilon(1e-12));

    // analytic d -> 0 limit equals the concentric variance
    for (int nu : {3, 4, 5}) {
        KernelConfig c{nu, 1, 1e-8, 10000};
        for (double t : {0.2, 0.7, 1.0})
            CHECK(cov_inclusion(c, t, 0.0) == doctest::Approx(g_fn(c, t)).epsilon(1e-13));
    }

    CHECK_THROWS_AS(cov_inclusion(cfg3(), 0.0, 0.1), domain_error);
    CHECK_THROWS_AS(cov_inclusion(cfg3(), 0.5, -0.1), domain_error);
}

TEST_CASE("concentric closed form p=1") {
    // mpmath dps=30: besseli(mu,min) besselk(mu,max)/(alpha_nu (t s)^mu)
    CHECK(concentric_closed(cfg3(), 1.0, 1.0) ==
          doctest::Approx(0.034403915947511676).epsilon(1e-13));
    CHECK(concentric_closed(cfg3(), 0.5, 1.0) ==
          doctest::Approx(0.030510042344772533).epsilon(1e-13));
    CHECK(concentric_closed(cfg4(), 0.9, 0.4) ==
          doctest::Approx(0.020572706461897304).epsilon(1e-13));
    // renormalized equal-radii concentric value is G
    double t = 0.6;
    double c = renorm_factor(cfg3(), t);
    CHECK(c * c * concentric_closed(cfg3(), t, t) ==
          doctest::Approx(g_fn(cfg3(), t)).epsilon(1e-13));
    CHECK_THROWS_AS(concentric_closed(cfg5(2), 0.5, 0.5), unsupported_error);
}

TEST_CASE("raw covariance quadrature") {
    // mpmath quadosc freeze of the spectral integral, raw (un-renormalized)
    auto r = raw_cov_quadrature(cfg3(), 0.5, 0.5, 0.6);
    CHECK(r.method == Method::quadrature);
    CHECK(r.value == doctest::Approx(0.057554830678411286).epsilon(5e-8));
    CHECK(r.est_error <= 1e-8 * std::fabs(r.value));

    // concentric integrand at dist = 0 matches closed form / c(t)c(s)
    auto rc = raw_cov_quadrature(cfg3(), 0.8, 0.4, 0.0);
    CHECK(rc.value == doctest::Approx(concentric_closed(cfg3(), 0.8, 0.4)).epsilon(5e-8));

    CHECK_THROWS_AS(raw_cov_quadrature(cfg3(), 0.0, 0.5, 0.1), domain_error);
    CHECK_THROWS_AS(raw_cov_quadrature(cfg3(), 0.5, 1.0001, 0.1), domain_error);
    CHECK_THROWS_AS(raw_cov_quadrature(cfg3(), 0.5, 0.5, -0.1), domain_error);

    // budget exhaustion carries the partial value
    KernelConfig tiny = cfg3();
    tiny.quad_max_subdiv = 5;
    try {
        raw_cov_quadrature(tiny, 0.5, 0.5, 0.6);
        CHECK(false);
    } catch (const accuracy_error& e) {
        CHECK(std::isfinite(e.partial_value));
        CHECK(e.est_error > 0.0);
    }
}

TEST_CASE("general covariance dispatch") {
    // disjoint branch, including the touching boundary dist = t + s
    auto kv = cov_general(cfg3(), 0.6, 0.6, 1.2);
    CHECK(kv.method == Method::closed_disjoint);
    CHECK(kv.value == doctest::Approx(0.019973561523539495).epsilon(1e-13));
    CHECK(kv.value == cov_disjoint(cfg3(), 1.2));
    CHECK(cov_general(cfg3(), 0.6, 0.6, 5.0).method == Method::closed_disjoint);

    // quadrature just inside the touching boundary; value from the
    // elementary nu=3 form (mpmath dps=30)
    auto kq = cov_general(cfg3(), 0.6, 0.6, 1.19999);
    CHECK(kq.method == Method::quadrature);
    CHECK(kq.value == doctest::Approx(0.019973927705460777).epsilon(2e-7));
    CHECK(kq.est_error <= 1e-8 * std::fabs(kq.value));

    // inclusion branch, including the internal-tangency boundary
    auto ki = cov_general(cfg3(), 0.9, 0.2, 0.699);
    CHECK(ki.method == Method::closed_inclusion);
    CHECK(ki.value == cov_inclusion(cfg3(), 0.9, 0.699));
    CHECK(cov_general(cfg3(), 0.8, 0.2, 0.6).method == Method::closed_inclusion);
    auto kq2 = cov_general(cfg3(), 0.8, 0.2, 0.6000001);
    CHECK(kq2.method == Method::quadrature);
    CHECK(kq2.value == doctest::Approx(0.04272102854096008).epsilon(2e-7));

    // within 1e-12 of a geometric boundary the closed form wins
    CHECK(cov_general(cfg3(), 0.6, 0.6, 1.2 - 1e-13).method == Method::closed_disjoint);
    CHECK(cov_general(cfg3(), 0.8, 0.2, 0.6 + 1e-13).method == Method::closed_inclusion);

    // concentric branch ignores the smaller radius entirely
    auto kc = cov_general(cfg3(), 0.7, 0.3, 0.0);
    CHECK(kc.method == Method::closed_concentric);
    CHECK(kc.value == g_fn(cfg3(), 0.7));
    CHECK(cov_general(cfg3(), 0.7, 0.05, 0.0).value == kc.value);  // exact
    CHECK(cov_general(cfg3(), 0.7, 0.69, 0.0).value == kc.value);

    // symmetry is bitwise
    auto a = cov_general(cfg3(), 0.8, 0.5, 0.4);
    auto b = cov_general(cfg3(), 0.5, 0.8, 0.4);
    CHECK(a.value == b.value);
    CHECK(a.method == Method::quadrature);

    // overlapping-sphere frozen values (mpmath quadosc, dps=30)
    CHECK(cov_general(cfg3(), 0.5, 0.5, 0.6).value ==
          doctest::Approx(0.052989212824713828).epsilon(5e-8));
    CHECK(cov_general(cfg3(), 0.8, 0.5, 0.4).value ==
          doctest::Approx(0.040268145014768742).epsilon(5e-8));
    CHECK(cov_general(cfg3(), 0.3, 0.3, 0.55).value ==
          doctest::Approx(0.082501379049126986).epsilon(5e-8));
    CHECK(cov_general(cfg4(), 0.7, 0.4, 0.5).value ==
          doctest::Approx(0.033326436764833504).epsilon(5e-8));
    CHECK(cov_general(cfg4(), 0.6, 0.6, 1.0).value ==
          doctest::Approx(0.014371094238698616).epsilon(5e-8));
    CHECK(cov_general(cfg5(), 0.7, 0.4, 0.5).value ==
          doctest::Approx(0.027365796211230285).epsilon(5e-8));
    // p = 2 goes through the same quadrature path
    CHECK(cov_general(cfg5(2), 0.7, 0.4, 0.5).value ==
          doctest::Approx(0.0031530136314637057).epsilon(5e-8));

    // nearly concentric: exact elementary value, and the reported error
    // must cover the actual miss
    auto kn = cov_general(cfg3(), 0.5, 0.5, 0.001);
    CHECK(kn.value == doctest::Approx(0.0925512202171571).epsilon(1e-6));
    CHECK(std::fabs(kn.value - 0.0925512202171571) <=
          3.0 * kn.est_error + 1e-12 * kn.value);
    CHECK(cov_general(cfg3(), 0.5, 0.5, 1e-6).value ==
          doctest::Approx(0.092624396397734992).epsilon(1e-6));

    // domain checks
    CHECK_THROWS_AS(cov_general(cfg3(), 0.0, 0.5, 0.1), domain_error);
    CHECK_THROWS_AS(cov_general(cfg3(), 0.5, 1.1, 0.1), domain_error);
    CHECK_THROWS_AS(cov_general(cfg3(), 0.5, 0.5, -0.1), domain_error);

    // accuracy failure propagates with the renormalized partial value
    KernelConfig tiny = cfg3();
    tiny.quad_max_subdiv = 5;
    CHECK_THROWS_AS(cov_general(tiny, 0.5, 0.5, 0.6), accuracy_error);
}

TEST_CASE("oracle equivalence on random pairs (nu=3 elementary form)") {
    std::mt19937_64 rng(20240817);
    std::uniform_real_distribution<double> ur(0.05, 1.0);
    int seen_quad = 0, seen_disjoint = 0, seen_inclusion = 0;
    for (int i = 0; i < 200; ++i) {
        double t = ur(rng), s = ur(rng);
        // cover all geometries: concentric-adjacent through fully disjoint
        std::uniform_real_distribution<double> ud(0.0, t + s + 0.6);
        double d = ud(rng);
        auto kv = cov_general(cfg3(), t, s, d);
        double want = elem3_cov(t, s, d);
        double tol = (kv.method == Method::quadrature) ? 1e-6 : 1e-10;
        CHECK(std::fabs(kv.value - want) <= tol * std::fabs(want));
        if (kv.method == Method::quadrature) ++seen_quad;
        if (kv.method == Method::closed_disjoint) ++seen_disjoint;
        if (kv.method == Method::closed_inclusion) ++seen_inclusion;
    }
    CHECK(seen_quad > 20);
    CHECK(seen_disjoint > 20);
    CHECK(seen_inclusion > 0);
}

TEST_CASE("three-point covariance matrices are positive semidefinite") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ur(0.1, 1.0);
    std::uniform_real_distribution<double> ux(-1.2, 1.2);
    for (int nu : {3, 4}) {
        KernelConfig c{nu, 1, 1e-8, 10000};
        int cases = (nu == 3) ? 20 : 5;
        for (int i = 0; i < cases; ++i) {
            double t[3] = {ur(rng), ur(rng), ur(rng)};
            double x[3] = {ux(rng), ux(rng), ux(rng)};
            Eigen::Matrix3d m;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    m(a, b) = (a == b) ? g_fn(c, t[a])
                                       : cov_general(c, t[a], t[b],
                                                     std::fabs(x[a] - x[b])).value;
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
            CHECK(es.eigenvalues().minCoeff() >= -1e-10 * m.trace());
        }
    }
}

TEST_CASE("sphere-average modulus Psi") {
    // mpmath dps=30: 1 - gamma(nu/2) (2/w)^mu besselj(mu, w)
    CHECK(psi_fn(cfg3(), 0.3) == doctest::Approx(0.014932644462201416).epsilon(1e-13));
    CHECK(psi_fn(cfg3(), 2.0) == doctest::Approx(0.54535128658715915).epsilon(1e-13));
    CHECK(psi_fn(cfg3(), 25.0) == doctest::Approx(1.0052940700039109).epsilon(1e-13));
    CHECK(psi_fn(cfg5(), 0.3) == doctest::Approx(0.0089711195935811986).epsilon(1e-13));
    CHECK(psi_fn(cfg5(), 2.0) == doctest::Approx(0.34690333753001257).epsilon(1e-13));

    CHECK(psi_fn(cfg3(), 0.0) == 0.0);
    // leading behavior w^2/(2 nu)
    for (int nu : {3, 4, 5}) {
        KernelConfig c{nu, 1, 1e-8, 10000};
        double w = 1e-4;
        CHECK(psi_fn(c, w) == doctest::Approx(w * w / (2.0 * nu)).epsilon(1e-7));
    }
    // nu=3 elementary form 1 - sin(w)/w
    for (double w = 0.05; w < 30.0; w += 0.31)
        CHECK(psi_fn(cfg3(), w) == doctest::Approx(1.0 - std::sin(w) / w).epsilon(1e-12));
    // series/direct switch continuity at w = 4
    CHECK(std::fabs(psi_fn(cfg4(), 3.9999999) - psi_fn(cfg4(), 4.0000001)) < 1e-7);
    // growth bound on [0, 100]
    for (int i = 1; i <= 10000; ++i) {
        double w = 0.01 * i;
        CHECK(psi_fn(cfg3(), w) <= 1.1 * std::sqrt(w));
        CHECK(psi_fn(cfg3(), w) >= 0.0);
    }
    CHECK_THROWS_AS(psi_fn(cfg3(), -0.1), domain_error);
}

TEST_CASE("intrinsic metric") {
    CHECK(intrinsic_metric(cfg3(), 0.5, 0.5, 0.0) == 0.0);
    for (auto [t, s, d] : std::vector<std::array<double, 3>>{
             {0.5, 0.5, 0.6}, {0.8, 0.3, 0.2}, {0.6, 0.6, 3.0}, {0.9, 0.2, 0.1}}) {
        double gt = g_fn(cfg3(), t), gs = g_fn(cfg3(), s);
        double cov = cov_general(cfg3(), t, s, d).value;
        double want = std::sqrt(std::max(0.0, gt + gs - 2.0 * cov));
        CHECK(intrinsic_metric(cfg3(), t, s, d) == doctest::Approx(want).epsilon(1e-12));
    }
    // same radii, tiny separation: radicand is a near-cancellation but must
    // never trip the consistency floor
    CHECK(intrinsic_metric(cfg3(), 0.5, 0.5, 1e-6) >= 0.0);
    CHECK(intrinsic_metric(cfg3(), 0.5, 0.5, 1e-6) < 1e-2);
}

TEST_CASE("clock reparametrization") {
    CHECK(clock_fn(cfg3(), 1.0) == 0.0);
    // mpmath: G(0.5) - G(1)
    CHECK(clock_fn(cfg3(), 0.5) == doctest::Approx(0.067713913137895659).epsilon(1e-12));
    CHECK(clock_inverse(cfg3(), 0.0) == 1.0);
    for (double t : {0.05, 0.3, 0.7, 0.95}) {
        double tau = clock_fn(cfg3(), t);
        CHECK(clock_inverse(cfg3(), tau) == doctest::Approx(t).epsilon(1e-12));
    }
    for (double t : {0.2, 0.8}) {
        double tau = clock_fn(cfg4(), t);
        CHECK(clock_inverse(cfg4(), tau) == doctest::Approx(t).epsilon(1e-12));
    }
    // huge tau still inverts (t far below any sphere radius in use)
    double t_deep = clock_inverse(cfg3(), 1e200);
    CHECK(std::isfinite(t_deep));
    CHECK(t_deep > 0.0);
    CHECK(log_g_fn(cfg3(), t_deep) == doctest::Approx(std::log(1e200)).epsilon(1e-12));
    CHECK_THROWS_AS(clock_inverse(cfg3(), -1e-12), domain_error);
}

TEST_CASE("concentric covariance for p >= 2") {
    // mpmath dps=30: nested derivative (-1/(2m) d/dm)^{p-1} K_mu(mt) I_mu(ms)
    // at m=1, over alpha_nu (ts)^mu (p-1)!; cross-checked against quadosc
    KernelConfig c52 = cfg5(2);
    CHECK(concentric_cov_p(c52, 0.5, 0.5) ==
          doctest::Approx(0.0055295886741803721).epsilon(1e-12));
    CHECK(concentric_cov_p(c52, 0.6, 0.35) ==
          doctest::Approx(0.0052273275815713683).epsilon(1e-12));
    CHECK(concentric_cov_p(c52, 0.8, 0.8) ==
          doctest::Approx(0.0024496401007672181).epsilon(1e-12));
    CHECK(concentric_cov_p(c52, 1.0, 1.0) ==
          doctest::Approx(0.0015707746962186145).epsilon(1e-12));
    CHECK(concentric_cov_p(c52, 0.9, 0.1) ==
          doctest::Approx(0.0028501342744415137).epsilon(1e-12));
    KernelConfig c73{7, 3, 1e-8, 10000};
    CHECK(concentric_cov_p(c73, 0.6, 0.35) ==
          doctest::Approx(0.00019859495073629718).epsilon(1e-12));

    // argument order does not matter
    CHECK(concentric_cov_p(c52, 0.35, 0.6) == concentric_cov_p(c52, 0.6, 0.35));

    // agreement with the p-weighted spectral quadrature
    for (auto [t, s] : std::vector<std::pair<double, double>>{{0.5, 0.5}, {0.9, 0.1}}) {
        auto rq = raw_cov_quadrature(c52, t, s, 0.0);
        CHECK(concentric_cov_p(c52, t, s) ==
              doctest::Approx(rq.value).epsilon(1e-5));
    }

    CHECK_THROWS_AS(concentric_cov_p(cfg3(), 0.5, 0.5), unsupported_error);
    CHECK_THROWS_AS(concentric_cov_p(c52, 0.0, 0.5), domain_error);
    CHECK_THROWS_AS(concentric_cov_p(c52, 0.5, 1.2), domain_error);
}

TEST_CASE("covariance cache") {
    CovarianceCache cache(cfg3());
    double v1 = cache.get(0.5, 0.5, 0.6);
    double v2 = cache.get(0.5, 0.5, 0.6);
    CHECK(v1 == v2);
    CHECK(cache.size() == 1);
    CHECK(v1 == cov_general(cfg3(), 0.5, 0.5, 0.6).value);
    cache.get(0.5, 0.5, 2.0);
    CHECK(cache.size() == 2);
}
