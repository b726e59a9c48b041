#include "levyheat/profile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace levyheat {

namespace {

std::string fmt_point(std::initializer_list<double> vals) {
    std::ostringstream os;
    os.precision(6);
    bool first = true;
    os << "(";
    for (double v : vals) {
        if (!first) os << ",";
        os << v;
        first = false;
    }
    os << ")";
    return os.str();
}

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i)
        g[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
    return g;
}

}  // namespace

LevyProfile::LevyProfile(RadialFn nu, int dimension, QuadConfig quad_cfg)
    : nu_(std::move(nu)), d_(dimension), quad_cfg_(std::move(quad_cfg)) {
    if (d_ < 1) throw DomainError("profile dimension must be positive");
}

double LevyProfile::K_quadrature(double r) const {
    // omega_d r^{-2} int_0^r s^{d+1} nu(s) ds; tanh-sinh absorbs the s->0 power singularity.
    const double wd = sphere_surface(d_);
    auto f = [&](double s) { return std::pow(s, d_ + 1) * nu_(s); };
    double core = 0.0;
    double lo = 0.0;
    std::vector<double> cuts = breakpoints_;
    cuts.push_back(r);
    std::sort(cuts.begin(), cuts.end());
    for (double c : cuts) {
        if (c <= lo || c > r) continue;
        core += tanh_sinh(f, lo, c, 10);
        lo = c;
    }
    if (lo < r) core += tanh_sinh(f, lo, r, 10);
    return wd * core / (r * r);
}

double LevyProfile::h_quadrature(double r) const {
    const double wd = sphere_surface(d_);
    auto tail_f = [&](double s) { return std::pow(s, d_ - 1) * nu_(s); };
    QuadConfig cfg = quad_cfg_;
    cfg.breakpoints = breakpoints_;
    QuadResult tail = integrate_semiinf(tail_f, r, cfg);
    return K_quadrature(r) + wd * tail.value;
}

double LevyProfile::h(double r) const {
    if (r <= 0.0) throw DomainError("h requires r > 0");
    if (closed_form_h_) return (*closed_form_h_)(r);
    return h_quadrature(r);
}

double LevyProfile::K(double r) const {
    if (r <= 0.0) throw DomainError("K requires r > 0");
    if (closed_form_K_) return (*closed_form_K_)(r);
    return K_quadrature(r);
}

double LevyProfile::h_inverse(double u) const {
    if (u <= 0.0) throw DomainError("h_inverse requires u > 0");
    double lo = 1.0, hi = 1.0;
    int guard = 0;
    while (h(hi) > u) {          // h decreasing: move right until below u
        hi *= 2.0;
        if (++guard > 400) throw RangeError("h_inverse: no upper bracket within range");
    }
    guard = 0;
    while (h(lo) < u) {
        lo *= 0.5;
        if (++guard > 900) throw RangeError("h_inverse: no lower bracket within range");
    }
    for (int it = 0; it < 300; ++it) {
        double mid = std::sqrt(lo * hi);  // geometric midpoint suits power-law h
        if (h(mid) >= u)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-12 * hi) break;
    }
    return 0.5 * (lo + hi);
}

double LevyProfile::r_t(double t) const {
    if (t <= 0.0) throw DomainError("r_t requires t > 0");
    return h_inverse(1.0 / t);
}

double LevyProfile::t0() const {
    if (t0_cache_ < 0.0) t0_cache_ = 1.0 / h(1.0);
    return t0_cache_;
}

double LevyProfile::upsilon_radial_given_rt(double rt, double t, double absx) const {
    const double on_diag = std::pow(rt, -d_);
    if (absx <= 0.0) return on_diag;
    const double off = t * K(absx) / std::pow(absx, d_);
    return std::min(on_diag, off);
}

double LevyProfile::upsilon_radial(double t, double absx) const {
    return upsilon_radial_given_rt(r_t(t), t, absx);
}

double LevyProfile::upsilon(double t, const Point& x) const {
    return upsilon_radial(t, norm(x));
}

double LevyProfile::rho_error(double gamma, double beta, double t, const Point& x,
                              const Point& shift) const {
    if (t <= 0.0 || t > t0() * (1.0 + 1e-12))
        throw DomainError("rho_error requires t in (0, t0]");
    const double rt = r_t(t);
    const double absx = norm(x);
    const double hoelder = std::min(std::pow(absx, beta), 1.0);
    Point arg = x;
    for (std::size_t i = 0; i < arg.size(); ++i) arg[i] -= shift[i];
    return std::pow(rt, gamma) * hoelder / t * upsilon_radial_given_rt(rt, t, norm(arg));
}

void LevyProfile::validate() const {
    // nu non-increasing on a sampled grid
    auto rs = log_grid(1e-8, 1e3, 160);
    for (std::size_t i = 1; i < rs.size(); ++i) {
        if (nu_(rs[i]) > nu_(rs[i - 1]) * (1.0 + 1e-9))
            throw AssumptionError("profile: nu is not non-increasing near r=" +
                                  std::to_string(rs[i]));
    }
    // Levy integrability: radialized int (1 ^ r^2) r^{d-1} nu(r) dr < infinity
    const double h1 = h_quadrature(1.0);
    if (!std::isfinite(h1) || h1 <= 0.0)
        throw AssumptionError("profile: Levy integrability check failed (h(1) not finite)");
    // closed forms agree with quadrature
    if (closed_form_h_) {
        for (double r : log_grid(1e-3, 10.0, 7)) {
            double a = (*closed_form_h_)(r), b = h_quadrature(r);
            if (std::fabs(a - b) > 1e-6 * std::fabs(b))
                throw AssumptionError("profile: closed_form_h disagrees with quadrature at r=" +
                                      std::to_string(r));
        }
    }
    if (closed_form_K_) {
        for (double r : log_grid(1e-3, 10.0, 7)) {
            double a = (*closed_form_K_)(r), b = K_quadrature(r);
            if (std::fabs(a - b) > 1e-6 * std::fabs(b))
                throw AssumptionError("profile: closed_form_K disagrees with quadrature at r=" +
                                      std::to_string(r));
        }
    }
}

ScalingCertificate certify_scaling(const LevyProfile& profile, double alpha_h, double C_h_budget,
                                   int n_lambda, int n_r, double r_min) {
    ScalingCertificate cert;
    cert.alpha_h = alpha_h;
    double fit = 0.0;
    auto lambdas = log_grid(r_min, 1.0, n_lambda);
    auto rs = log_grid(r_min, 1.0, n_r);
    for (double r : rs) {
        const double hr = profile.h(r);
        for (double lam : lambdas) {
            const double need = hr / (std::pow(lam, alpha_h) * profile.h(lam * r));
            if (need > fit) {
                fit = need;
                cert.grid.emplace_back(lam, r);
            }
        }
    }
    cert.C_h = std::max(1.0, fit);
    cert.max_violation = cert.C_h / C_h_budget;
    cert.pass = cert.C_h <= C_h_budget * (1.0 + 1e-9);
    return cert;
}

double fit_upper_scaling(const LevyProfile& profile, double beta_h, int n_lambda, int n_r,
                         double r_min) {
    double fit = 1e300;
    auto lambdas = log_grid(r_min, 1.0, n_lambda);
    auto rs = log_grid(r_min, 1.0, n_r);
    for (double r : rs) {
        const double hr = profile.h(r);
        for (double lam : lambdas)
            fit = std::min(fit, hr / (std::pow(lam, beta_h) * profile.h(lam * r)));
    }
    return fit;
}

VerificationReport check_condition_R(const LevyProfile& profile,
                                     const std::vector<double>& t_grid,
                                     const std::vector<double>& lambda_grid) {
    VerificationReport rep;
    rep.name = "condition_R";
    rep.tolerance = 1.0 + 1e-9;
    for (double t : t_grid) {
        const double rt = profile.r_t(t);
        for (double lam : lambda_grid) {
            const double lhs = profile.r_t(lam * t);
            const double rhs = std::sqrt(lam) * rt;
            rep.note("condition_R", fmt_point({t, lam}), lhs, rhs);
        }
    }
    rep.fitted_constant = rep.worst_ratio;
    rep.pass = rep.worst_ratio <= rep.tolerance;
    return rep;
}

VerificationReport check_drift_lemma(const LevyProfile& profile, double alpha_h, double C_h,
                                     const std::vector<double>& r_grid) {
    VerificationReport rep;
    rep.name = "small_jump_drift_bound";
    if (alpha_h >= 1.0)
        throw DomainError("drift lemma check requires alpha_h < 1");
    const double wd = sphere_surface(profile.dimension());
    auto f = [&](double s) { return std::pow(s, profile.dimension()) * profile.nu(s); };
    for (double r : r_grid) {
        if (r >= 1.0) continue;
        QuadConfig cfg = profile.quad_cfg();
        double lhs = wd * integrate(f, r, 1.0, cfg).value;
        double rhs = 2.0 * C_h / (1.0 - alpha_h) * std::pow(r, alpha_h) * profile.h(r);
        rep.note("small_jump_drift_bound", fmt_point({r}), lhs, rhs);
    }
    rep.fitted_constant = rep.worst_ratio;
    rep.pass = rep.worst_ratio <= 1.0 + 1e-9;
    return rep;
}

VerificationReport check_time_convolution(const LevyProfile& profile,
                                          const std::vector<double>& t_grid,
                                          const std::vector<double>& eps_grid,
                                          const std::vector<int>& k_grid) {
    VerificationReport rep;
    rep.name = "time_convolution";
    for (double t : t_grid) {
        const double rt = profile.r_t(t);
        for (double eps : eps_grid) {
            for (int k : k_grid) {
                Mesh mesh = graded_mesh(t, 12, 6, std::max(3.0, 6.0 / eps));
                double lhs = 0.0;
                for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
                    const double s = mesh.nodes[i];
                    // nodes this deep in the endpoint carry ~(1e-25)^{eps/2} of the mass
                    if (s < 1e-25 * t || t - s < 1e-25 * t) continue;
                    lhs += mesh.weights[i] * std::pow(profile.r_t(t - s), eps) / (t - s) *
                           std::pow(profile.r_t(s), k * eps) / s;
                }
                const double rhs =
                    beta_function(0.5 * eps, 0.5 * k * eps) / t * std::pow(rt, (k + 1) * eps);
                rep.note("time_convolution", fmt_point({t, eps, double(k)}), lhs, rhs);
            }
        }
    }
    rep.fitted_constant = rep.worst_ratio;
    rep.pass = rep.worst_ratio <= 1.0 + 1e-6;
    return rep;
}

namespace {

// Factorial-band profiles: nu(r) = r^{-d-1} phi(r), with phi built from
// factorial cutoffs. step = 2 gives bands at (2k)!, (2k+1)!; step = 3 at
// (3k)!, (3k+2)!. All band arithmetic in logs via lgamma.
double oscillating_phi(double r, int step) {
    if (r > 1.0) return 0.0;
    const double L = std::log(1.0 / r);
    for (int k = 0;; ++k) {
        const int base = step * k;
        const double lf_lo = std::lgamma(base + 1.0);                   // ln((sk)!)
        const double lf_mid = std::lgamma(base + (step - 1) + 1.0);     // ln((sk+s-1)!)
        const double lf_hi = std::lgamma(base + step + 1.0);            // ln((sk+s)!)
        double lck;  // ln c_k for the multistep double factorial
        if (step == 2)
            lck = -0.5 * (k * std::log(2.0) + std::lgamma(k + 1.0));
        else
            lck = -0.5 * (k * std::log(3.0) + std::lgamma(k + 1.0));
        if (L <= lf_mid) {
            // r in [1/(sk+s-1)!, 1/(sk)!]: phi = c_k r^{-1/4}
            if (L >= lf_lo) return std::exp(lck + 0.25 * L);
            // fall through: L < lf_lo can only happen for k = 0 when r = 1 zone
            return std::exp(lck + 0.25 * L);
        }
        if (L <= lf_hi) {
            // r in [1/(sk+s)!, 1/(sk+s-1)!]: phi = c_k sqrt((sk+s-1)!) r^{1/4}
            return std::exp(lck + 0.5 * lf_mid - 0.25 * L);
        }
        if (k > 400) return 0.0;
    }
}

}  // namespace

LevyProfile builtin_profile(const std::string& name, int dimension) {
    const int d = dimension;
    const double wd = sphere_surface(d);
    if (name == "inverse-square") {
        if (d != 1) throw ConfigError("inverse-square profile is one-dimensional");
        LevyProfile p([](double r) { return 1.0 / (r * r); }, 1);
        p.set_closed_form_h([](double r) { return 4.0 / r; });
        p.set_closed_form_K([](double r) { return 2.0 / r; });
        p.set_name("inverse-square");
        return p;
    }
    if (name.rfind("stable:", 0) == 0) {
        const double alpha = std::stod(name.substr(7));
        if (alpha <= 0.0 || alpha >= 2.0) throw ConfigError("stable profile needs alpha in (0,2)");
        LevyProfile p([d, alpha](double r) { return std::pow(r, -double(d) - alpha); }, d);
        p.set_closed_form_h(
            [wd, alpha](double r) { return wd * 2.0 / (alpha * (2.0 - alpha)) * std::pow(r, -alpha); });
        p.set_closed_form_K([wd, alpha](double r) { return wd / (2.0 - alpha) * std::pow(r, -alpha); });
        p.set_name(name);
        return p;
    }
    if (name.rfind("ex3-log", 0) == 0) {
        double eps = 0.5;
        if (name.size() > 8 && name[7] == ':') eps = std::stod(name.substr(8));
        LevyProfile p(
            [d, eps](double r) {
                return std::pow(r, -double(d) - 1.0) / std::pow(std::log(2.0 + 1.0 / r), 1.0 + eps);
            },
            d);
        p.set_name(name);
        return p;
    }
    if (name == "ex1-log") {
        LevyProfile p(
            [d](double r) { return std::pow(r, -double(d) - 1.0) / std::log(2.0 + 1.0 / r); }, d);
        p.set_name(name);
        return p;
    }
    if (name == "ex0-log") {
        LevyProfile p(
            [d](double r) { return std::pow(r, -double(d) - 1.0) * std::log(2.0 + 1.0 / r); }, d);
        p.set_name(name);
        return p;
    }
    if (name == "oscillating-1" || name == "oscillating-2") {
        const int step = (name == "oscillating-1") ? 2 : 3;
        LevyProfile p(
            [d, step](double r) { return std::pow(r, -double(d) - 1.0) * oscillating_phi(r, step); },
            d);
        p.set_breakpoints({1.0});
        p.set_name(name);
        return p;
    }
    throw ConfigError("unknown builtin profile: " + name);
}

LevyProfile profile_from_table(const std::vector<double>& r, const std::vector<double>& nu,
                               int dimension) {
    if (r.size() != nu.size() || r.size() < 2)
        throw ConfigError("profile table needs matching r/nu columns with >= 2 rows");
    for (std::size_t i = 1; i < r.size(); ++i) {
        if (r[i] <= r[i - 1]) throw ConfigError("profile table: r must be strictly increasing");
        if (nu[i] > nu[i - 1]) throw ConfigError("profile table: nu must be non-increasing");
    }
    std::vector<double> lr(r.size()), ln(nu.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i] <= 0.0 || nu[i] <= 0.0)
            throw ConfigError("profile table: positive r and nu required");
        lr[i] = std::log(r[i]);
        ln[i] = std::log(nu[i]);
    }
    const std::size_t m = r.size();
    const double p_first = (ln[1] - ln[0]) / (lr[1] - lr[0]);
    const double p_last = (ln[m - 1] - ln[m - 2]) / (lr[m - 1] - lr[m - 2]);
    if (p_first <= -double(dimension) - 2.0)
        throw ConfigError("profile table: small-r exponent breaks Levy integrability");
    if (p_last >= -double(dimension))
        throw ConfigError("profile table: tail exponent breaks Levy integrability");

    auto eval = [lr, ln, m](double rr) {
        const double x = std::log(rr);
        std::size_t i;
        if (x <= lr[0])
            i = 0;
        else if (x >= lr[m - 1])
            i = m - 2;
        else
            i = std::upper_bound(lr.begin(), lr.end(), x) - lr.begin() - 1;
        const double p = (ln[i + 1] - ln[i]) / (lr[i + 1] - lr[i]);
        return std::exp(ln[i] + p * (x - lr[i]));
    };
    LevyProfile p(eval, dimension);
    p.set_breakpoints(r);
    p.set_name("table");
    return p;
}

}  // namespace levyheat
