#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "levyheat/coefficients.hpp"

using namespace levyheat;

namespace {

std::vector<double> log_r_grid(double lo, int n) {
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(1.0 / lo, double(i) / (n - 1)));
    return g;
}

}  // namespace

TEST_CASE("catalog entries materialize and satisfy their declared constants") {
    for (const auto& name : catalog_names()) {
        auto e = example_catalog(name);
        std::vector<Point> xs{{-1.2}, {0.1}, {0.5}, {2.0}};
        std::vector<Point> zs{{-0.7}, {-0.2}, {0.3}, {1.4}};
        CHECK(check_J_comparability(e.coeffs, zs).pass);
        CHECK(check_kappa_bounds(e.coeffs, xs, zs).pass);
        std::vector<Point> ys{{-0.9}, {0.4}, {0.8}, {3.0}};
        CHECK(check_kappa_holder(e.coeffs, xs, ys, zs).pass);
    }
    CHECK_THROWS_AS(example_catalog("nope"), ConfigError);
}

TEST_CASE("effective drift: r = 1 returns b, even kernels vanish") {
    auto e = example_catalog("ex1");
    CHECK(e.coeffs.effective_drift({0.25}, 1.0)[0] == 0.0);

    auto c = example_catalog("cauchy-const");
    for (double r : {0.05, 0.4, 1.0, 3.0})
        CHECK(c.coeffs.effective_drift({0.7}, r)[0] == 0.0);
}

TEST_CASE("effective drift of the catalog ex1 entry: a(x) log(1/r)") {
    auto e = example_catalog("ex1");
    // x = 0.25: a = 1.5; r = 0.1: b_r^x = -1.5 log(10)
    const double v = e.coeffs.effective_drift({0.25}, 0.1)[0];
    CHECK(v == doctest::Approx(-1.5 * std::log(10.0)).epsilon(1e-8));
    // generic x and r; paper gives |b_r^x| = a(x) log(1/r)
    for (double x : {-2.0, 0.09, 0.81, 4.0}) {
        const double a = e.coeffs.a({x});
        for (double r : {0.03, 0.5}) {
            CHECK(e.coeffs.effective_drift({x}, r)[0] ==
                  doctest::Approx(-a * std::log(1.0 / r)).epsilon(1e-8));
        }
    }
}

TEST_CASE("cancellation-scale fit: sigma = 0.9 passes, sigma = 1 fails") {
    auto e = example_catalog("ex1");
    std::vector<Point> xs{{-0.5}, {0.25}, {0.9}, {1.5}};
    auto rg = log_r_grid(1e-4, 48);

    DriftParameters ok = e.drift;  // sigma = 0.9
    auto rep_ok = check_cancellation_scale(e.coeffs, ok, xs, rg);
    CHECK(rep_ok.pass);
    CHECK(rep_ok.fitted_constant < e.coeffs.c_kappa);

    DriftParameters bad = e.drift;
    bad.sigma = 1.0;
    auto rep_bad = check_cancellation_scale(e.coeffs, bad, xs, rg);
    CHECK_FALSE(rep_bad.pass);

    // constant kappa, symmetric J: fitted c = 0
    auto c = example_catalog("cauchy-const");
    auto rep_zero = check_cancellation_scale(c.coeffs, c.drift, xs, rg);
    CHECK(rep_zero.fitted_constant == 0.0);
    CHECK(rep_zero.pass);
}

TEST_CASE("drift Hoelder fit") {
    auto e = example_catalog("ex1");
    std::vector<std::pair<Point, Point>> pairs;
    for (double x : {-0.4, 0.04, 0.36, 0.81, 1.2})
        for (double y : {0.01, 0.25, 0.64, 1.44}) pairs.emplace_back(Point{x}, Point{y});
    pairs.emplace_back(Point{0.5}, Point{0.5});  // x = y gives ratio 0
    auto rg = log_r_grid(1e-4, 32);

    auto rep = check_holder_drift(e.coeffs, e.drift, pairs, rg);  // (eps,s) = (1/2, 0.9)
    CHECK(rep.pass);

    DriftParameters bad = e.drift;
    bad.pairs = {{0.5, 1.0}};  // s = 1: log(1/r) vs r h(r) = const, fit diverges
    auto rep_bad = check_holder_drift(e.coeffs, bad, pairs, rg);
    CHECK(rep_bad.fitted_constant > e.coeffs.c_kappa);

    // product form with Lipschitz a: passes at (eps, s) = (1, 1)
    auto kp = example_catalog("kappa-prod");
    auto rep_kp = check_holder_drift(kp.coeffs, kp.drift, pairs, rg);
    CHECK(rep_kp.pass);
    auto rep_kp_cancel = check_cancellation_scale(kp.coeffs, kp.drift, {{0.0}, {1.3}}, rg);
    CHECK(rep_kp_cancel.pass);
}

TEST_CASE("epsilon0 window arithmetic") {
    DriftParameters dp;
    dp.sigma = 0.9;
    dp.pairs = {{0.5, 0.9}};
    dp.variant = Variant::A_star;
    auto w = epsilon0_window(dp, 1.0, 0.5);
    CHECK(w.hi == doctest::Approx(0.35).epsilon(1e-12));
    CHECK(w.midpoint() == doctest::Approx(0.175).epsilon(1e-12));

    // boundary: sigma eps_j + s_j = 1 exactly -> empty
    DriftParameters edge = dp;
    edge.pairs = {{0.5, 1.0 - 0.45}};
    CHECK_THROWS_AS(epsilon0_window(edge, 1.0, 0.5), AssumptionError);

    // variant A with alpha_h + sigma - 1 <= 0 -> empty
    DriftParameters va = dp;
    va.variant = Variant::A;
    CHECK_THROWS_AS(epsilon0_window(va, 0.1, 0.5), AssumptionError);

    // variant A cap is inclusive and can bind
    DriftParameters vb;
    vb.sigma = 0.2;
    vb.pairs = {{1.0, 1.0}};
    vb.variant = Variant::A;
    auto wb = epsilon0_window(vb, 0.9, 1.0);
    CHECK(wb.hi == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(wb.hi_inclusive);
}

TEST_CASE("drift parameter validation") {
    DriftParameters dp;
    dp.sigma = 0.9;
    dp.pairs = {{0.5, 0.9}};
    dp.variant = Variant::A_star;
    CHECK_NOTHROW(dp.validate(1.0));
    DriftParameters bad = dp;
    bad.pairs = {{0.5, 0.5}};  // 0.45 + 0.5 - 1 < 0
    CHECK_THROWS_AS(bad.validate(1.0), AssumptionError);
}

TEST_CASE("drift difference extends linearly in the spatial range") {
    auto e = example_catalog("ex1");
    const double t = 0.05;
    const double rt = e.coeffs.profile->r_t(t);
    auto fit_for_range = [&](double R) {
        double fit = 0.0;
        for (double x = -R; x <= R; x += R / 4.0) {
            for (double y = -R; y <= R; y += R / 4.0) {
                if (x == y) continue;
                const double lhs =
                    t * std::fabs(e.coeffs.effective_drift({x}, rt)[0] -
                                  e.coeffs.effective_drift({y}, rt)[0]);
                double rhs = 0.0;
                for (auto [eps, s] : e.drift.pairs)
                    rhs += std::pow(std::fabs(x - y), eps) * std::pow(rt, s);
                fit = std::max(fit, lhs / rhs);
            }
        }
        return fit;
    };
    const double c1 = fit_for_range(1.0);
    const double c5 = fit_for_range(5.0);
    CHECK(c5 <= 5.5 * c1);  // at most linear growth in R
}

TEST_CASE("effective drift time bound has a finite fit") {
    auto e = example_catalog("ex1");
    auto rep = check_effective_drift_time_bound(e.coeffs, e.drift,
                                                {{-0.5}, {0.25}, {1.0}},
                                                {0.01, 0.05, 0.1, 0.2});
    CHECK(rep.pass);
    CHECK(std::isfinite(rep.fitted_constant));
}

TEST_CASE("piecewise coefficients evaluate their pieces") {
    PiecewiseFn f({{-1e308, 0.0, 1.0, 0.0, 1.0, 0.0},
                   {0.0, 1.0, 1.0, 1.0, 0.5, 0.0},
                   {1.0, 1e308, 2.0, 0.0, 1.0, 0.0}});
    CHECK(f(-3.0) == 1.0);
    CHECK(f(0.25) == doctest::Approx(1.5));
    CHECK(f(0.81) == doctest::Approx(1.9));
    CHECK(f(7.0) == 2.0);
    auto b = f.breakpoints();
    CHECK(b == std::vector<double>{0.0, 1.0});
}
