#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>

#include "levyheat/frozen.hpp"
#include "levyheat/oracles.hpp"

using namespace levyheat;

namespace {

std::shared_ptr<const CoefficientSet> cauchy() {
    return std::make_shared<CoefficientSet>(example_catalog("cauchy-const").coeffs);
}

std::shared_ptr<const CoefficientSet> ex1() {
    return std::make_shared<CoefficientSet>(example_catalog("ex1").coeffs);
}

constexpr double kEuler = 0.57721566490153286;

}  // namespace

TEST_CASE("symbol of the constant-coefficient reference is pi |xi|") {
    auto cs = cauchy();
    FrozenSymbol sym(cs, {0.0});
    CHECK(sym.eval1(0.0) == Complex(0.0, 0.0));
    const Complex v = sym.eval1(1.0);
    CHECK(v.real() == doctest::Approx(M_PI).epsilon(1e-7));
    CHECK(std::fabs(v.imag()) < 1e-8);
    for (double xi : {0.3, 2.0, 37.0, 400.0}) {
        const Complex a = sym.eval1(xi);
        CHECK(a.real() == doctest::Approx(M_PI * xi).epsilon(1e-6));
        // conjugate symmetry and nonnegative real part
        const Complex b = sym.eval1(-xi);
        CHECK(b.real() == doctest::Approx(a.real()));
        CHECK(b.imag() == doctest::Approx(-a.imag()));
        CHECK(a.real() >= 0.0);
    }
}

TEST_CASE("symbol of the ex1 kernel matches its closed form") {
    auto cs = ex1();
    // base point with a(w) = 1.5; psi_hat = pi xi - i xi (1 - euler - log xi)
    FrozenSymbol sym(cs, {0.25});
    for (double xi : {0.05, 0.7, 1.0, 6.0, 90.0}) {
        const Complex v = sym.eval1(xi);
        CHECK(v.real() == doctest::Approx(1.5 * M_PI * xi).epsilon(1e-6));
        const double im_exact = -1.5 * xi * (1.0 - kEuler - std::log(xi));
        CHECK(v.imag() == doctest::Approx(im_exact).epsilon(1e-5));
    }
    // the tabulated shape agrees with direct quadrature off the table nodes
    auto shape = make_symbol_shape(cs);
    for (double xi : {0.013, 1.7, 230.0}) {
        const Complex tab = shape->psi_hat(xi);
        const Complex ref = shape->psi_hat_quadrature(xi);
        CHECK(tab.real() == doctest::Approx(ref.real()).epsilon(1e-6));
        CHECK(tab.imag() == doctest::Approx(ref.imag()).epsilon(1e-5));
    }
}

TEST_CASE("frozen density reproduces the Cauchy law") {
    auto cs = cauchy();
    FrozenKernelEvaluator ev(cs, {0.0});
    CHECK(ev.density(0.1, {0.3}, {0.3}) ==
          doctest::Approx(1.0 / (M_PI * M_PI * 0.1)).epsilon(1e-6));
    for (double t : {0.05, 0.1, 0.2}) {
        for (double u : {-4.0, -1.3, -0.2, 0.0, 0.7, 2.9}) {
            const double got = ev.density(t, {0.0}, {u});
            const double want = cauchy_closed_form(t, 0.0, u);
            CHECK(got == doctest::Approx(want).epsilon(1e-5));
        }
    }
    // translation invariance
    const double a = ev.density(0.1, {0.0}, {0.8});
    const double b = ev.density(0.1, {2.5}, {3.3});
    CHECK(a == doctest::Approx(b).epsilon(1e-10));
}

TEST_CASE("frozen density mass is one within 1e-6 on reference profiles") {
    auto cs = cauchy();
    FrozenKernelEvaluator ev(cs, {0.0});
    for (double t : {0.01, 0.1, 1.0})
        CHECK(ev.mass(t, {0.0}) == doctest::Approx(1.0).epsilon(1e-6));
    auto cs1 = ex1();
    FrozenKernelEvaluator ev1(cs1, {0.25});
    for (double t : {0.01, 0.1, 1.0})
        CHECK(ev1.mass(t, {0.25}) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("spatial derivatives via the Fourier factor") {
    auto cs = cauchy();
    FrozenKernelEvaluator ev(cs, {0.0});
    // odd derivative vanishes on the diagonal of a symmetric kernel
    CHECK(std::fabs(ev.density_derivative(0.1, {0.4}, {0.4}, {1})) < 1e-9);
    // closed form: d/dx p = 2 gamma u / (pi (gamma^2+u^2)^2) at u = y - x
    const double t = 0.1, gamma = M_PI * t, u = 1.0;
    const double want = 2.0 * gamma * u / (M_PI * std::pow(gamma * gamma + u * u, 2));
    CHECK(ev.density_derivative(t, {0.0}, {1.0}, {1}) == doctest::Approx(want).epsilon(1e-6));
    // and the second derivative against finite differences of the density
    const double h = 1e-3;
    const double fd2 = (ev.density(t, {-h}, {1.0}) - 2.0 * ev.density(t, {0.0}, {1.0}) +
                        ev.density(t, {h}, {1.0})) /
                       (h * h);
    CHECK(ev.density_derivative(t, {0.0}, {1.0}, {2}) == doctest::Approx(fd2).epsilon(1e-4));
}

TEST_CASE("derivative envelope has a stable fitted constant") {
    auto cs = ex1();
    const auto& prof = *cs->profile;
    FrozenKernelEvaluator ev(cs, {0.6});
    auto fit_on = [&](int n) {
        double c = 0.0;
        for (double t : {0.02, 0.1}) {
            const double rt = prof.r_t(t);
            const double shift = t * cs->effective_drift({0.6}, rt)[0];
            for (int i = 0; i <= n; ++i) {
                const double u = -3.0 + 6.0 * i / n;
                const double ups = prof.upsilon_radial_given_rt(rt, t, std::fabs(u - shift));
                for (int m = 0; m <= 2; ++m) {
                    const double d = std::fabs(ev.density_derivative(t, {0.0}, {u}, {m}));
                    c = std::max(c, d * std::pow(rt, m) / ups);
                }
            }
        }
        return c;
    };
    const double c_coarse = fit_on(12);
    const double c_fine = fit_on(25);
    CHECK(std::isfinite(c_fine));
    CHECK(c_fine < 2.0 * c_coarse);
    CHECK(c_coarse < 2.0 * c_fine);
}

TEST_CASE("delta increment") {
    auto cs = ex1();
    FrozenKernelEvaluator ev(cs, {0.5});
    const double t = 0.05;
    // z = 0 gives zero
    CHECK(ev.delta_increment(0.3, t, {0.1}, {0.6}, {0.0}) == 0.0);
    // |z| >= r: plain increment
    const double z = 0.9, r = 0.3;
    const double plain = ev.density(t, {0.1 + z}, {0.6}) - ev.density(t, {0.1}, {0.6});
    CHECK(ev.delta_increment(r, t, {0.1}, {0.6}, {z}) == doctest::Approx(plain).epsilon(1e-7));
    // |z| < r: bounded by z^2 max |p''| along the segment
    const double zs = 0.01;
    double m2 = 0.0;
    for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0})
        m2 = std::max(m2, std::fabs(ev.density_derivative(t, {0.1 + theta * zs}, {0.6}, {2})));
    CHECK(std::fabs(ev.delta_increment(r, t, {0.1}, {0.6}, {zs})) <= 0.5 * zs * zs * m2 * 1.05);
}

TEST_CASE("generator identity at the frozen base point") {
    auto check_point = [](std::shared_ptr<const CoefficientSet> cs, double w, double t,
                          double x, double y) {
        FrozenKernelEvaluator ev(cs, {w});
        const double r = cs->profile->r_t(t);
        const double gen = ev.apply_generator({w}, r, t, {x}, {y});
        const double dt = ev.time_derivative(t, {x}, {y});
        const double h = 5e-4 * t;
        const double fd =
            (ev.density_raw(t + h, {x}, {y}) - ev.density_raw(t - h, {x}, {y})) / (2.0 * h);
        CHECK(gen == doctest::Approx(dt).epsilon(2e-4));
        CHECK(std::fabs(gen - fd) <= std::max(1e-4, 1e-2 * std::fabs(fd)));
        return gen;
    };
    check_point(cauchy(), 0.0, 0.1, 0.0, 0.5);
    check_point(ex1(), 0.25, 0.05, 0.1, 0.4);

    // Cauchy closed form: d/dt p = (u^2 - gamma^2)/((gamma^2+u^2)^2) at gamma = pi t
    auto cs = cauchy();
    FrozenKernelEvaluator ev(cs, {0.0});
    const double t = 0.1, gamma = M_PI * t, u = 0.5;
    const double want = (u * u - gamma * gamma) / std::pow(gamma * gamma + u * u, 2);
    CHECK(ev.apply_generator({0.0}, cs->profile->r_t(t), t, {0.0}, {0.5}) ==
          doctest::Approx(want).epsilon(1e-4));
}

TEST_CASE("generator value does not depend on the splitting radius") {
    auto cs = ex1();
    FrozenKernelEvaluator ev(cs, {0.7});
    const double t = 0.05;
    const double v1 = ev.apply_generator({0.3}, cs->profile->r_t(t), t, {0.1}, {0.5});
    const double v2 = ev.apply_generator({0.3}, 1.0, t, {0.1}, {0.5});
    const double v3 = ev.apply_generator({0.3}, 0.08, t, {0.1}, {0.5});
    CHECK(v2 == doctest::Approx(v1).epsilon(5e-4));
    CHECK(v3 == doctest::Approx(v1).epsilon(5e-4));
}

TEST_CASE("mass concentrates at the starting point as t drops") {
    auto cs = ex1();
    FrozenKernelEvaluator ev(cs, {0.4});
    const double eps = 0.5;
    double prev = 1e300;
    for (double t : {0.08, 0.04, 0.02, 0.01}) {
        auto slice = ev.make_slice(t, 30.0);
        // mass outside |u| > eps by trapezoid + tail model
        const double du = 0.005;
        double outside = 0.0;
        for (double u = eps; u <= 30.0; u += du)
            outside += du * (slice->density(u) + slice->density(-u));
        QuadConfig qc;
        auto tail = [&](double uu) { return slice->tail_model(uu) + slice->tail_model(-uu); };
        outside += integrate_semiinf(tail, 30.0, qc).value;
        CHECK(outside < prev);
        prev = outside;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("near-diagonal base-point sensitivity obeys the rho envelope") {
    auto cs = ex1();
    const auto& prof = *cs->profile;
    double fit = 0.0;
    for (double t : {0.02, 0.05}) {
        const double rt = prof.r_t(t);
        for (double x : {-0.3, 0.2}) {
            FrozenKernelEvaluator ev_x(cs, {x});
            for (double dy : {-0.8, -0.2, 0.3, 0.9}) {
                const double y = x + dy;
                FrozenKernelEvaluator ev_y(cs, {y});
                const double diff =
                    std::fabs(ev_x.density_raw(t, {x}, {y}) - ev_y.density_raw(t, {x}, {y}));
                const double shift = t * cs->effective_drift({y}, rt)[0];
                double env = prof.rho_error(0.0, 0.5, t, {dy}, {shift});      // j = 0 term
                env += prof.rho_error(-0.1, 0.5, t, {dy}, {shift});           // (s-1, eps) term
                fit = std::max(fit, diff / (t * env));
            }
        }
    }
    CHECK(std::isfinite(fit));
    CHECK(fit > 0.0);
}

TEST_CASE("product shape tables agree with direct slices at off-node a") {
    auto cs = ex1();
    auto shape = make_symbol_shape(cs);
    const double t = 0.04;
    ProductShapeTable tab(*shape, t, cs->a_min, cs->a_max, 8.0, 0.01, 1e-8, 25);
    // direct slice at a base point whose a-value is off the table nodes
    const double w = 0.37;  // a(w) = 1 + sqrt(0.37), not a node
    FrozenSymbol sym(cs, {w});
    KernelSlice slice(sym, t, 6.0, 1e-10, 16u << 20, 1e12);
    const double aw = cs->a({w});
    for (double u : {-2.3, -0.41, 0.0, 0.17, 1.9, 5.0}) {
        CHECK(tab.p(aw, u) == doctest::Approx(slice.density(u)).epsilon(2e-5));
        CHECK(tab.pt(aw, u) == doctest::Approx(slice.density_dt(u)).epsilon(2e-4));
    }
    // beyond the window the one-jump model takes over and stays within a few
    // percent of the truth at this time scale
    const double far = 11.0;
    CHECK(tab.p(aw, far) == doctest::Approx(slice.tail_model(far)).epsilon(0.08));
}

TEST_CASE("two-dimensional isotropic density matches the 2d Cauchy law") {
    // nu = |z|^{-3} in d = 2 gives symbol c |xi| and the rotationally invariant
    // density gamma/(2 pi (gamma^2+|u|^2)^{3/2}) with gamma = c t
    auto prof = std::make_shared<LevyProfile>(builtin_profile("stable:1", 2));
    CoefficientSet cs;
    cs.profile = prof;
    cs.b = [](const Point& x) { return Point(x.size(), 0.0); };
    cs.kappa = [](const Point&, const Point&) { return 1.0; };
    cs.J = [prof](const Point& z) { return prof->nu(norm(z)); };
    cs.is_product = false;
    cs.b_is_zero = true;
    cs.kappaJ_even = true;
    auto csp = std::make_shared<CoefficientSet>(std::move(cs));

    FrozenKernelEvaluator ev(csp, {0.0, 0.0});
    const double c_sym = ev.symbol()(Point{1.0, 0.0}).real();
    CHECK(c_sym > 0.0);
    const double t = 0.2, gamma = c_sym * t;
    for (double u : {0.0, 0.5, 1.5}) {
        const double want = gamma / (2.0 * M_PI * std::pow(gamma * gamma + u * u, 1.5));
        CHECK(ev.density(t, {0.0, 0.0}, {u, 0.0}) == doctest::Approx(want).epsilon(5e-3));
    }
}
