#include "levyheat/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace levyheat {

namespace {

std::string fmt(std::initializer_list<double> vals) {
    std::ostringstream os;
    os.precision(6);
    os << "(";
    bool first = true;
    for (double v : vals) {
        if (!first) os << ",";
        os << v;
        first = false;
    }
    os << ")";
    return os.str();
}

}  // namespace

PiecewiseFn::PiecewiseFn(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
    std::sort(pieces_.begin(), pieces_.end(),
              [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
}

PiecewiseFn PiecewiseFn::constant(double c) {
    return PiecewiseFn({{-1e308, 1e308, c, 0.0, 1.0, 0.0}});
}

double PiecewiseFn::operator()(double x) const {
    for (const auto& p : pieces_) {
        if (x >= p.lo && x < p.hi) {
            double v = p.c0;
            const double u = x - p.lo;
            if (p.c1 != 0.0) v += p.c1 * std::pow(u, p.p);
            if (p.c2 != 0.0) v += p.c2 * std::log1p(u);
            return v;
        }
    }
    return pieces_.empty() ? 0.0 : pieces_.back().c0;
}

std::vector<double> PiecewiseFn::breakpoints() const {
    std::vector<double> b;
    for (const auto& p : pieces_) {
        if (p.lo > -1e307) b.push_back(p.lo);
        if (p.hi < 1e307) b.push_back(p.hi);
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

void DriftParameters::validate(double alpha_h) const {
    if (sigma <= 0.0 || sigma > 1.0) throw AssumptionError("sigma must lie in (0,1]");
    for (auto [eps, s] : pairs) {
        if (eps <= 0.0 || eps > 1.0 || s <= 0.0 || s > 1.0)
            throw AssumptionError("(eps_j, s_j) must lie in (0,1]^2");
        if (std::min(alpha_h, sigma * eps) + s - 1.0 <= 0.0)
            throw AssumptionError("drift pair violates alpha_h ^ (sigma eps_j) + s_j - 1 > 0");
    }
    if (variant == Variant::A && alpha_h + sigma - 1.0 <= 0.0)
        throw AssumptionError("variant A requires alpha_h + sigma - 1 > 0");
}

Point CoefficientSet::effective_drift(const Point& x, double r) const {
    const int d = dimension();
    Point drift = b_is_zero ? Point(d, 0.0) : b(x);
    if (r == 1.0 || kappaJ_even) return drift;

    const double lo = std::min(r, 1.0), hi = std::max(r, 1.0);
    const double sign = (r < 1.0) ? -1.0 : 1.0;

    if (d == 1) {
        QuadConfig cfg = profile->quad_cfg();
        cfg.rel_tol = 1e-9;
        cfg.breakpoints = z_breakpoints;
        auto f_pos = [&](double z) { return z * kappa(x, {z}) * J({z}); };
        auto f_neg = [&](double z) { return z * kappa(x, {z}) * J({z}); };
        const double pos = integrate(f_pos, lo, hi, cfg).value;
        const double neg = integrate(f_neg, -hi, -lo, cfg).value;
        drift[0] += sign * (pos + neg);
        return drift;
    }
    if (d == 2) {
        // polar: int_lo^hi int_0^{2pi} rho (cos,sin) kappa(x,z) J(z) rho dtheta drho
        QuadConfig cfg = profile->quad_cfg();
        cfg.rel_tol = 1e-7;
        for (int comp = 0; comp < 2; ++comp) {
            auto f_rho = [&](double rho) {
                auto f_theta = [&](double th) {
                    Point z{rho * std::cos(th), rho * std::sin(th)};
                    const double dir = (comp == 0) ? std::cos(th) : std::sin(th);
                    return dir * kappa(x, z) * J(z);
                };
                return rho * rho * integrate(f_theta, 0.0, 2.0 * M_PI, cfg).value;
            };
            drift[comp] += sign * integrate(f_rho, lo, hi, cfg).value;
        }
        return drift;
    }
    throw DomainError("effective_drift implemented for d <= 2");
}

Point CoefficientSet::drift_shift(double t, const Point& x) const {
    return t * effective_drift(x, profile->r_t(t));
}

VerificationReport check_J_comparability(const CoefficientSet& cs,
                                         const std::vector<Point>& x_samples) {
    VerificationReport rep;
    rep.name = "J_comparability";
    rep.tolerance = 1.0 + 1e-9;
    for (const auto& x : x_samples) {
        const double nu = cs.profile->nu(norm(x));
        const double j = cs.J(x);
        rep.note("J_upper", fmt({norm(x)}), j, cs.c_J * nu);
        rep.note("J_lower", fmt({norm(x)}), nu / cs.c_J, j);
    }
    rep.pass = rep.worst_ratio <= rep.tolerance;
    rep.fitted_constant = rep.worst_ratio;
    return rep;
}

VerificationReport check_kappa_bounds(const CoefficientSet& cs,
                                      const std::vector<Point>& x_samples,
                                      const std::vector<Point>& z_samples) {
    VerificationReport rep;
    rep.name = "kappa_bounds";
    rep.tolerance = 1.0 + 1e-9;
    for (const auto& x : x_samples) {
        for (const auto& z : z_samples) {
            const double kap = cs.kappa(x, z);
            rep.note("kappa_upper", fmt({x[0], z[0]}), kap, cs.c_kappa);
            rep.note("kappa_lower", fmt({x[0], z[0]}), 1.0 / cs.c_kappa, kap);
        }
    }
    rep.pass = rep.worst_ratio <= rep.tolerance;
    rep.fitted_constant = rep.worst_ratio;
    return rep;
}

VerificationReport check_kappa_holder(const CoefficientSet& cs,
                                      const std::vector<Point>& x_samples,
                                      const std::vector<Point>& y_samples,
                                      const std::vector<Point>& z_samples) {
    VerificationReport rep;
    rep.name = "kappa_holder";
    rep.tolerance = 1.0 + 1e-9;
    for (const auto& x : x_samples) {
        for (const auto& y : y_samples) {
            const double dist = norm(x - y);
            if (dist == 0.0) continue;
            for (const auto& z : z_samples) {
                const double lhs = std::fabs(cs.kappa(x, z) - cs.kappa(y, z));
                const double rhs = cs.c_kappa * std::pow(dist, cs.eps_kappa);
                rep.note("kappa_holder", fmt({x[0], y[0], z[0]}), lhs, rhs);
            }
        }
    }
    rep.pass = rep.worst_ratio <= rep.tolerance;
    rep.fitted_constant = rep.worst_ratio;
    return rep;
}

VerificationReport check_cancellation_scale(const CoefficientSet& cs, const DriftParameters& dp,
                                            const std::vector<Point>& x_grid,
                                            const std::vector<double>& r_grid) {
    VerificationReport rep;
    rep.name = "drift_cancellation_scale";
    rep.tolerance = cs.c_kappa;

    auto fit_on = [&](const std::vector<double>& rs) {
        double fit = 0.0;
        for (const auto& x : x_grid) {
            for (double r : rs) {
                if (r > 1.0) continue;
                const double lhs = norm(cs.effective_drift(x, r));
                const double rhs =
                    std::max(std::pow(r, dp.sigma) * cs.profile->h(r), 1e-300);
                rep.note("drift_cancellation_scale", fmt({x[0], r}), lhs, cs.c_kappa * rhs);
                fit = std::max(fit, lhs / rhs);
            }
        }
        return fit;
    };

    const double fit_base = fit_on(r_grid);
    // extend the grid two decades toward 0 to sniff out unbounded fits
    const double r_min = *std::min_element(r_grid.begin(), r_grid.end());
    std::vector<double> r_ext;
    for (int i = 1; i <= 8; ++i)
        r_ext.push_back(r_min * std::pow(1e-2, double(i) / 8.0));
    const double fit_ext = std::max(fit_base, fit_on(r_ext));

    rep.fitted_constant = fit_ext;
    rep.pass = fit_ext <= cs.c_kappa * (1.0 + 1e-9) && fit_ext <= fit_base * 1.15;
    return rep;
}

VerificationReport check_holder_drift(const CoefficientSet& cs, const DriftParameters& dp,
                                      const std::vector<std::pair<Point, Point>>& pair_grid,
                                      const std::vector<double>& r_grid) {
    VerificationReport rep;
    rep.name = "drift_holder";
    rep.tolerance = cs.c_kappa;

    auto fit_on = [&](const std::vector<double>& rs, bool record) {
        double fit = 0.0;
        for (const auto& [x, y] : pair_grid) {
            const double dist = norm(x - y);
            if (dist == 0.0) {
                if (record) rep.note("drift_holder", fmt({x[0], y[0], 0.0}), 0.0, 1.0);
                continue;
            }
            if (dp.variant == Variant::A && dist > 1.0) continue;
            for (double r : rs) {
                if (r > 1.0) continue;
                const double lhs =
                    norm(cs.effective_drift(x, r) - cs.effective_drift(y, r));
                double sum = 0.0;
                for (auto [eps, s] : dp.pairs) {
                    double hold = std::pow(dist, eps);
                    if (dp.variant == Variant::A_star) hold = std::min(hold, 1.0);
                    sum += hold * std::pow(r, s) * cs.profile->h(r);
                }
                const double rhs = std::max(sum, 1e-300);
                if (record) rep.note("drift_holder", fmt({x[0], y[0], r}), lhs, cs.c_kappa * rhs);
                fit = std::max(fit, lhs / rhs);
            }
        }
        return fit;
    };

    const double fit_base = fit_on(r_grid, true);
    const double r_min = *std::min_element(r_grid.begin(), r_grid.end());
    std::vector<double> r_ext;
    for (int i = 1; i <= 8; ++i)
        r_ext.push_back(r_min * std::pow(1e-2, double(i) / 8.0));
    const double fit_ext = std::max(fit_base, fit_on(r_ext, false));

    rep.fitted_constant = fit_ext;
    rep.pass = fit_ext <= cs.c_kappa * (1.0 + 1e-9) && fit_ext <= fit_base * 1.15;
    return rep;
}

VerificationReport check_effective_drift_time_bound(const CoefficientSet& cs,
                                                    const DriftParameters& dp,
                                                    const std::vector<Point>& w_grid,
                                                    const std::vector<double>& t_grid) {
    VerificationReport rep;
    rep.name = "effective_drift_time_bound";
    double fit = 0.0;
    for (double t : t_grid) {
        const double rt_sigma = std::pow(cs.profile->r_t(t), dp.sigma);
        for (double u : t_grid) {
            if (u > t) continue;
            const double ru = cs.profile->r_t(u);
            for (const auto& w : w_grid) {
                const double lhs = u * norm(cs.effective_drift(w, ru));
                rep.note("effective_drift_time_bound", fmt({u, t, w[0]}), lhs, rt_sigma);
                fit = std::max(fit, lhs / rt_sigma);
            }
        }
    }
    rep.fitted_constant = fit;
    rep.pass = std::isfinite(fit);
    return rep;
}

Epsilon0Window epsilon0_window(const DriftParameters& dp, double alpha_h, double eps_kappa) {
    // j = 0 term with (eps_0, s_0) = (eps_kappa, 1)
    double hi = std::min(alpha_h, dp.sigma * eps_kappa);
    for (auto [eps, s] : dp.pairs)
        hi = std::min(hi, std::min(alpha_h, dp.sigma * eps) + s - 1.0);
    Epsilon0Window w;
    w.hi = hi;
    if (dp.variant == Variant::A) {
        const double cap = alpha_h + dp.sigma - 1.0;
        if (cap < w.hi) {
            w.hi = cap;
            w.hi_inclusive = true;
        }
    }
    if (!(w.hi > 0.0))
        throw AssumptionError("epsilon0 window is empty: no admissible series exponent");
    return w;
}

namespace {

CatalogEntry make_profile_entry(const std::string& name, const std::string& profile_name,
                                double alpha_claim, double C_h_claim, double beta_claim) {
    CatalogEntry e;
    e.name = name;
    auto prof = std::make_shared<LevyProfile>(builtin_profile(profile_name, 1));
    CoefficientSet cs;
    cs.profile = prof;
    cs.b = [](const Point& x) { return Point(x.size(), 0.0); };
    cs.kappa = [](const Point&, const Point&) { return 1.0; };
    cs.J = [prof](const Point& z) { return prof->nu(norm(z)); };
    cs.c_J = 1.0;
    cs.c_kappa = 1.0;
    cs.eps_kappa = 1.0;
    cs.is_product = true;
    cs.a = [](const Point&) { return 1.0; };
    cs.k_scalar = [](double) { return 1.0; };
    cs.a_min = cs.a_max = 1.0;
    cs.b_is_zero = true;
    cs.kappaJ_even = true;
    e.coeffs = std::move(cs);
    e.drift.sigma = 1.0;
    e.drift.pairs = {{1.0, 1.0}};
    e.drift.variant = Variant::A_star;
    e.claimed_alpha_h = alpha_claim;
    e.claimed_C_h = C_h_claim;
    e.claimed_beta_h = beta_claim;
    e.notes = "kappa = 1, b = 0 over the " + profile_name + " profile";
    return e;
}

}  // namespace

CatalogEntry example_catalog(const std::string& name) {
    if (name == "ex1") {
        CatalogEntry e;
        e.name = "ex1";
        auto prof = std::make_shared<LevyProfile>(builtin_profile("inverse-square", 1));
        PiecewiseFn a_fn({{-1e308, 0.0, 1.0, 0.0, 1.0, 0.0},
                          {0.0, 1.0, 1.0, 1.0, 0.5, 0.0},
                          {1.0, 1e308, 2.0, 0.0, 1.0, 0.0}});
        PiecewiseFn k_fn({{-1e308, 0.0, 0.5, 0.0, 1.0, 0.0},
                          {0.0, 1e308, 1.5, 0.0, 1.0, 0.0}});
        CoefficientSet cs;
        cs.profile = prof;
        cs.b = [](const Point& x) { return Point(x.size(), 0.0); };
        cs.kappa = [a_fn, k_fn](const Point& x, const Point& z) { return a_fn(x[0]) * k_fn(z[0]); };
        cs.J = [](const Point& z) { return 1.0 / (z[0] * z[0]); };
        cs.c_J = 1.0;
        cs.c_kappa = 3.0;
        cs.eps_kappa = 0.5;
        cs.is_product = true;
        cs.a = [a_fn](const Point& x) { return a_fn(x[0]); };
        cs.k_scalar = [k_fn](double z) { return k_fn(z); };
        cs.a_min = 1.0;
        cs.a_max = 2.0;
        cs.b_is_zero = true;
        cs.kappaJ_even = false;
        cs.z_breakpoints = {0.0};
        e.coeffs = std::move(cs);
        e.drift.sigma = 0.9;
        e.drift.pairs = {{0.5, 0.9}};
        e.drift.variant = Variant::A_star;
        e.claimed_alpha_h = 1.0;
        e.claimed_C_h = 1.0;
        e.notes =
            "a(x) = 1 + sqrt(x) on (0,1), 1 for x <= 0, 2 for x >= 1; "
            "k = 1/2 on z<0, 3/2 on z>=0; |b_r^x| = a(x) log(1/r)";
        return e;
    }
    if (name == "cauchy-const") {
        CatalogEntry e = make_profile_entry("cauchy-const", "inverse-square", 1.0, 1.0, 1.0);
        e.notes = "constant-coefficient reference; frozen kernel is the Cauchy law";
        return e;
    }
    if (name == "kappa-prod") {
        CatalogEntry e;
        e.name = "kappa-prod";
        auto prof = std::make_shared<LevyProfile>(builtin_profile("stable:1.2", 1));
        CoefficientSet cs;
        cs.profile = prof;
        auto a_fn = [](double x) { return 1.0 + 0.5 * std::sin(x); };
        auto k_fn = [](double z) { return 1.0 + 0.5 * std::tanh(z); };
        cs.b = [](const Point& x) { return Point(x.size(), 0.0); };
        cs.kappa = [a_fn, k_fn](const Point& x, const Point& z) { return a_fn(x[0]) * k_fn(z[0]); };
        cs.J = [prof](const Point& z) { return prof->nu(norm(z)); };
        cs.c_J = 1.0;
        cs.c_kappa = 3.0;
        cs.eps_kappa = 1.0;
        cs.is_product = true;
        cs.a = [a_fn](const Point& x) { return a_fn(x[0]); };
        cs.k_scalar = k_fn;
        cs.a_min = 0.5;
        cs.a_max = 1.5;
        cs.b_is_zero = true;
        e.coeffs = std::move(cs);
        e.drift.sigma = 1.0;
        e.drift.pairs = {{1.0, 1.0}};
        e.drift.variant = Variant::A_star;
        e.claimed_alpha_h = 1.2;
        e.claimed_C_h = 1.0;
        e.notes = "product form with Lipschitz a and Hoelder-regular odd part of k";
        return e;
    }
    if (name == "ex3") return make_profile_entry("ex3", "ex3-log:0.5", 0.9, 60.0, 0.0);
    if (name == "ex1-log") return make_profile_entry("ex1-log", "ex1-log", 0.9, 40.0, 0.0);
    if (name == "ex0-log") return make_profile_entry("ex0-log", "ex0-log", 1.0, 8.0, 0.0);
    if (name == "oscillating-1")
        return make_profile_entry("oscillating-1", "oscillating-1", 0.75, 40.0, 1.25);
    if (name == "oscillating-2")
        return make_profile_entry("oscillating-2", "oscillating-2", 0.75, 40.0, 1.25);
    throw ConfigError("unknown catalog entry: " + name);
}

std::vector<std::string> catalog_names() {
    return {"ex1",     "cauchy-const", "kappa-prod",    "ex3",
            "ex1-log", "ex0-log",      "oscillating-1", "oscillating-2"};
}

}  // namespace levyheat
