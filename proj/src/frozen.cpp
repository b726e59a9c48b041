#include "levyheat/frozen.hpp"

#include <algorithm>
#include <cmath>

#include "levyheat/quadrature.hpp"

namespace levyheat {

namespace {

/// 1 - cos u without cancellation.
inline double one_minus_cos(double u) {
    const double s = std::sin(0.5 * u);
    return 2.0 * s * s;
}

/// sin u - u without cancellation for small u.
inline double sin_minus_u(double u) {
    const double a = std::fabs(u);
    if (a > 0.5) return std::sin(u) - u;
    const double u2 = u * u;
    return -u * u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0 * (1.0 - u2 / 72.0)));
}

double deriv_fd(const Fn1& f, double u, double h) { return (f(u + h) - f(u - h)) / (2.0 * h); }

// int_{lo}^{U} trig(u) f(u) du over pi-panels + two-term integration-by-parts tail,
// trig = cos (kind 0) or sin (kind 1). f must decay smoothly beyond U.
double oscillatory_tail_sum(const Fn1& f, double lo, int kind, int npanels) {
    double sum = 0.0;
    // first partial panel [lo, next odd multiple of pi]
    double edge = (std::floor(lo / M_PI) + 1.0) * M_PI;
    auto g = [&](double u) { return (kind == 0 ? std::cos(u) : std::sin(u)) * f(u); };
    double err;
    if (edge > lo) sum += quad_gk15(g, lo, edge, err);
    double U = edge;
    for (int m = 0; m < npanels; ++m) {
        sum += quad_gk15(g, U, U + M_PI, err);
        U += M_PI;
    }
    const double fU = f(U), fpU = deriv_fd(f, U, 0.25);
    if (kind == 0)
        sum += -std::sin(U) * fU - std::cos(U) * fpU;
    else
        sum += std::cos(U) * fU - std::sin(U) * fpU;
    return sum;
}

struct Symbol1DParts {
    double re;    // int (1 - cos xi z) pi(z) dz
    double comp;  // int (sin(xi z) - xi z 1_{|z|<1}) pi(z) dz
};

/// Compensated symbol integrals for xi > 0 against a signed-argument kernel
/// pi(z) (z in R, d = 1), via the substitution u = xi z.
Symbol1DParts symbol_parts_1d(const std::function<double(double)>& pi_fn, double xi,
                              const std::vector<double>& z_breaks) {
    auto f_plus = [&](double u) { return (pi_fn(u / xi) + pi_fn(-u / xi)) / xi; };
    auto f_minus = [&](double u) { return (pi_fn(u / xi) - pi_fn(-u / xi)) / xi; };

    const int kPanels = 300;
    QuadConfig head_cfg;
    head_cfg.abs_tol = 1e-13;
    head_cfg.rel_tol = 1e-10;
    head_cfg.max_subdivisions = 2000;
    for (double zb : z_breaks) {
        const double ub = std::fabs(zb) * xi;
        if (ub > 0.0 && ub < M_PI) head_cfg.breakpoints.push_back(ub);
    }

    Symbol1DParts out{0.0, 0.0};

    // real part: head [0,pi] (integrable u^{1-alpha} endpoint), then
    // (int f - int cos f) over the remainder
    auto re_head = [&](double u) { return one_minus_cos(u) * f_plus(u); };
    out.re = head_cfg.breakpoints.empty() ? tanh_sinh(re_head, 0.0, M_PI, 10)
                                          : integrate(re_head, 0.0, M_PI, head_cfg).value;
    QuadConfig tail_cfg;
    tail_cfg.abs_tol = 1e-13;
    tail_cfg.rel_tol = 1e-9;
    out.re += integrate_semiinf(f_plus, M_PI, tail_cfg).value;
    out.re -= oscillatory_tail_sum(f_plus, M_PI, 0, kPanels);

    // compensated odd part:
    //   int_0^{uc} (sin u - u) f_minus + int_{uc}^inf sin(u) f_minus - int_{uc}^{xi} u f_minus,
    // uc = min(xi, 1)
    const double uc = std::min(xi, 1.0);
    auto comp_head = [&](double u) { return sin_minus_u(u) * f_minus(u); };
    QuadConfig ch = head_cfg;
    ch.breakpoints.clear();
    for (double zb : z_breaks) {
        const double ub = std::fabs(zb) * xi;
        if (ub > 0.0 && ub < uc) ch.breakpoints.push_back(ub);
    }
    out.comp = ch.breakpoints.empty() ? tanh_sinh(comp_head, 0.0, uc, 10)
                                      : integrate(comp_head, 0.0, uc, ch).value;
    out.comp += oscillatory_tail_sum(f_minus, uc, 1, kPanels);
    if (xi > uc) {
        // smooth compensator remainder on [uc, xi]; log substitution tames the range
        auto comp_log = [&](double v) {
            const double u = std::exp(v);
            return u * u * f_minus(u);
        };
        QuadConfig cc;
        cc.abs_tol = 1e-13;
        cc.rel_tol = 1e-10;
        cc.max_subdivisions = 3000;
        for (double zb : z_breaks) {
            const double ub = std::fabs(zb) * xi;
            if (ub > uc && ub < xi) cc.breakpoints.push_back(std::log(ub));
        }
        out.comp -= integrate(comp_log, std::log(uc), std::log(xi), cc).value;
    }
    return out;
}

void fft_inplace(std::vector<Complex>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / double(len);
        const Complex wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            Complex w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                Complex u = a[i + k];
                Complex v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// SymbolShape

SymbolShape::SymbolShape(std::shared_ptr<const CoefficientSet> coeffs)
    : coeffs_(std::move(coeffs)) {
    if (!coeffs_->is_product || coeffs_->dimension() != 1)
        throw DomainError("SymbolShape requires a one-dimensional product coefficient set");
    lo_ = 1e-6;
    hi_ = 1e8;
    const int per_decade = 24;
    const int n = int(per_decade * std::log10(hi_ / lo_)) + 1;
    log_xi_.resize(n);
    re_log_.resize(n);
    im_over_xi_.resize(n);
    for (int i = 0; i < n; ++i) {
        const double xi = lo_ * std::pow(hi_ / lo_, double(i) / (n - 1));
        log_xi_[i] = std::log(xi);
        const Complex v = psi_hat_quadrature(xi);
        re_log_[i] = std::log(v.real());
        im_over_xi_[i] = v.imag() / xi;
    }
}

Complex SymbolShape::psi_hat_quadrature(double xi) const {
    if (xi == 0.0) return {0.0, 0.0};
    const auto& cs = *coeffs_;
    auto pi_fn = [&cs](double z) { return cs.k_scalar(z) * cs.J({z}); };
    Symbol1DParts parts = symbol_parts_1d(pi_fn, xi, cs.z_breakpoints);
    // psi_hat = -int(e^{iuz} - 1 - comp) k J = re - i comp
    return {parts.re, -parts.comp};
}

Complex SymbolShape::psi_hat(double xi) const {
    if (xi == 0.0) return {0.0, 0.0};
    const double lx = std::log(xi);
    const int n = int(log_xi_.size());
    const double t = (lx - log_xi_.front()) / (log_xi_[1] - log_xi_[0]);
    auto cr = [](double pm1, double p0, double p1, double p2, double s) {
        return p0 + 0.5 * s * (p1 - pm1 + s * (2 * pm1 - 5 * p0 + 4 * p1 - p2 +
                                               s * (3 * (p0 - p1) + p2 - pm1)));
    };
    if (t <= 0.0 || t >= n - 1) {
        // power-law extrapolation from the end segments
        const bool low = t <= 0.0;
        const int i0 = low ? 0 : n - 2;
        const double slope_re = (re_log_[i0 + 1] - re_log_[i0]) / (log_xi_[i0 + 1] - log_xi_[i0]);
        const double re = std::exp(re_log_[i0] + slope_re * (lx - log_xi_[i0]));
        const double slope_im =
            (im_over_xi_[i0 + 1] - im_over_xi_[i0]) / (log_xi_[i0 + 1] - log_xi_[i0]);
        const double im = (im_over_xi_[i0] + slope_im * (lx - log_xi_[i0])) * xi;
        return {re, im};
    }
    const int i = std::min(n - 2, std::max(1, int(t)));
    const double s = t - i;
    const int im1 = std::max(0, i - 1), ip2 = std::min(n - 1, i + 2);
    const double re = std::exp(cr(re_log_[im1], re_log_[i], re_log_[i + 1], re_log_[ip2], s));
    const double im = cr(im_over_xi_[im1], im_over_xi_[i], im_over_xi_[i + 1], im_over_xi_[ip2], s) * xi;
    return {re, im};
}

double SymbolShape::decay_rate(double alpha) const {
    double rate = 1e300;
    for (int i = 0; i < 60; ++i) {
        const double xi = std::pow(10.0, 3.0 * i / 59.0);
        rate = std::min(rate, psi_hat(xi).real() / std::pow(xi, alpha));
    }
    return rate;
}

// ---------------------------------------------------------------------------
// FrozenSymbol

FrozenSymbol::FrozenSymbol(std::shared_ptr<const CoefficientSet> coeffs, Point w,
                           std::shared_ptr<const SymbolShape> shape)
    : coeffs_(std::move(coeffs)), w_(std::move(w)), shape_(std::move(shape)) {
    if (coeffs_->is_product) a_w_ = coeffs_->a(w_);
    if (!coeffs_->b_is_zero && coeffs_->dimension() == 1) b_w_ = coeffs_->b(w_)[0];
    // certified scaling order of the profile drives the truncation policy
    decay_alpha_ = 1.0;
    if (shape_) {
        decay_rate_ = a_w_ * shape_->decay_rate(decay_alpha_);
    } else {
        double rate = 1e300;
        for (int i = 0; i < 24; ++i) {
            const double xi = std::pow(10.0, 3.0 * i / 23.0);
            rate = std::min(rate, eval1(xi).real() / std::pow(xi, decay_alpha_));
        }
        decay_rate_ = rate;
    }
}

Complex FrozenSymbol::eval1(double xi) const {
    if (xi == 0.0) return {0.0, 0.0};
    const double ax = std::fabs(xi);
    Complex v;
    if (shape_) {
        v = a_w_ * shape_->psi_hat(ax);
    } else {
        const auto& cs = *coeffs_;
        const Point& w = w_;
        auto pi_fn = [&cs, &w](double z) { return cs.kappa(w, {z}) * cs.J({z}); };
        Symbol1DParts parts = symbol_parts_1d(pi_fn, ax, cs.z_breakpoints);
        v = {parts.re, -parts.comp};
    }
    v += Complex(0.0, -ax * b_w_);
    if (xi < 0.0) v = std::conj(v);
    return v;
}

Complex FrozenSymbol::operator()(const Point& xi) const {
    const int d = coeffs_->dimension();
    if (d == 1) return eval1(xi[0]);
    if (d == 2) {
        // polar quadrature of the compensated exponential (test-scale path)
        const auto& cs = *coeffs_;
        const double m = norm(xi);
        if (m == 0.0) return {0.0, 0.0};
        QuadConfig cfg;
        cfg.abs_tol = 1e-10;
        cfg.rel_tol = 1e-7;
        auto radial = [&](double rho) {
            auto ang_re = [&](double th) {
                Point z{rho * std::cos(th), rho * std::sin(th)};
                return one_minus_cos(dot(xi, z)) * cs.kappa(w_, z) * cs.J(z);
            };
            return rho * integrate(ang_re, 0.0, 2.0 * M_PI, cfg).value;
        };
        auto radial_im = [&](double rho) {
            auto ang_im = [&](double th) {
                Point z{rho * std::cos(th), rho * std::sin(th)};
                const double u = dot(xi, z);
                const double comp = (rho < 1.0) ? sin_minus_u(u) : std::sin(u);
                return comp * cs.kappa(w_, z) * cs.J(z);
            };
            return rho * integrate(ang_im, 0.0, 2.0 * M_PI, cfg).value;
        };
        QuadConfig rc;
        rc.abs_tol = 1e-9;
        rc.rel_tol = 1e-6;
        const double re = tanh_sinh(radial, 0.0, 1.0, 9) + integrate_semiinf(radial, 1.0, rc).value;
        double comp = tanh_sinh(radial_im, 0.0, 1.0, 9) + integrate_semiinf(radial_im, 1.0, rc).value;
        double drift = coeffs_->b_is_zero ? 0.0 : dot(xi, coeffs_->b(w_));
        return {re, -(drift + comp)};
    }
    throw DomainError("symbol evaluation implemented for d <= 2");
}

// ---------------------------------------------------------------------------
// KernelSlice

KernelSlice::KernelSlice(const FrozenSymbol& symbol, double t, double u_max, double abs_tol,
                         std::size_t max_nodes, double max_xi)
    : t_(t), u_max_(u_max), cs_(&symbol.coeffs()), w_(symbol.base_point()) {
    const auto& prof = *cs_->profile;
    const double rt = prof.r_t(t);
    tol_ = std::max(abs_tol, 1e-7 * std::pow(rt, -prof.dimension()));
    const double logtol = std::log(1.0 / tol_);

    // truncation radius from the certified decay, then verified directly
    double R = std::pow(logtol / std::max(symbol.decay_rate(), 1e-300) / t,
                        1.0 / symbol.decay_alpha());
    for (int guard = 0; guard < 200 && t * symbol.eval1(R).real() < logtol; ++guard) R *= 1.25;
    if (R > max_xi)
        throw ResolutionError("Fourier truncation radius exceeds the configured cap (t too small)");

    // aliasing window: periodization images must sit below tol under the
    // one-jump tail model t kappa J
    drift_shift_ = t * cs_->effective_drift(w_, rt)[0];
    double U = std::max({1.3 * u_max_ + 8.0 * rt + 4.0 * std::fabs(drift_shift_), 20.0 * rt, 1.0});
    const double tail_scale = cs_->c_kappa * cs_->c_J;
    for (int guard = 0; guard < 300; ++guard) {
        const double img = 1.7 * t * tail_scale * prof.nu(std::max(2.0 * U - u_max_, U));
        if (img <= tol_) break;
        U *= 1.3;
    }
    dxi_ = M_PI / U;
    const std::size_t n = std::size_t(R / dxi_) + 2;
    if (n > max_nodes)
        throw ResolutionError("Fourier grid would exceed the node budget (t too small)");
    g_.resize(n);
    psi_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Complex p = symbol.eval1(k * dxi_);
        psi_[k] = p;
        g_[k] = std::exp(-t * p);
    }
}

double KernelSlice::density(double u) const {
    const Complex rot(std::cos(u * dxi_), -std::sin(u * dxi_));
    Complex ph = rot;
    double s = 0.5;  // k = 0 term, g_0 = 1
    for (std::size_t k = 1; k < g_.size(); ++k) {
        s += ph.real() * g_[k].real() - ph.imag() * g_[k].imag();
        ph *= rot;
    }
    return s * dxi_ / M_PI;
}

double KernelSlice::density_dx(double u, int order) const {
    const Complex rot(std::cos(u * dxi_), -std::sin(u * dxi_));
    Complex ph = rot;
    double s = 0.0;
    for (std::size_t k = 1; k < g_.size(); ++k) {
        const double xi = k * dxi_;
        Complex term = ph * g_[k];
        // multiply by (i xi)^order
        switch (order & 3) {
            case 1: term *= Complex(0.0, xi); break;
            case 2: term *= -xi * xi; break;
            case 3: term *= Complex(0.0, -xi * xi * xi); break;
            default: term *= (order == 0) ? 1.0 : xi * xi * xi * xi; break;
        }
        s += term.real();
        ph *= rot;
    }
    if (order == 0) s += 0.5;
    return s * dxi_ / M_PI;
}

double KernelSlice::density_dt(double u) const {
    const Complex rot(std::cos(u * dxi_), -std::sin(u * dxi_));
    Complex ph = rot;
    double s = 0.0;
    for (std::size_t k = 1; k < g_.size(); ++k) {
        s += (-psi_[k] * ph * g_[k]).real();
        ph *= rot;
    }
    return s * dxi_ / M_PI;
}

double KernelSlice::tail_model(double u) const {
    const double v = u - drift_shift_;
    return t_ * cs_->kappa(w_, {v}) * cs_->J({v});
}

double KernelSlice::tail_model_dt(double u) const {
    const double v = u - drift_shift_;
    return cs_->kappa(w_, {v}) * cs_->J({v});
}

// ---------------------------------------------------------------------------
// ProductShapeTable

ProductShapeTable::ProductShapeTable(const SymbolShape& shape, double t, double a_min,
                                     double a_max, double u_core, double du_target,
                                     double abs_tol, int n_a)
    : t_(t), u_core_(u_core), n_a_(n_a), cs_(&shape.coeffs()) {
    const auto& prof = *cs_->profile;
    const double rt = prof.r_t(t);
    if (rt < 1.0) {
        // compensator between scales r_t and 1 (tail-model drift, b = 0 sets)
        QuadConfig bc;
        bc.abs_tol = 1e-12;
        bc.rel_tol = 1e-9;
        bc.breakpoints = cs_->z_breakpoints;
        auto zf = [this](double z) { return z * cs_->k_scalar(z) * cs_->J({z}); };
        drift_beta_ = -(integrate(zf, rt, 1.0, bc).value + integrate(zf, -1.0, -rt, bc).value);
    }
    const double tol = std::max(abs_tol, 1e-7 * std::pow(rt, -prof.dimension()));
    const double logtol = std::log(1.0 / tol);

    const double rate = a_min * shape.decay_rate(1.0);
    double R = logtol / std::max(rate, 1e-300) / t;
    while (t * a_min * shape.psi_hat(R).real() < logtol) R *= 1.25;

    double U = std::max({1.15 * u_core + 8.0 * rt, 20.0 * rt, 1.0});
    const double tail_scale = cs_->c_kappa * cs_->c_J;
    for (int guard = 0; guard < 300; ++guard) {
        const double img = 1.7 * t * tail_scale * prof.nu(std::max(2.0 * U - u_core, U));
        if (img <= tol) break;
        U *= 1.3;
    }
    const double dxi = M_PI / U;
    std::size_t nfft = next_pow2(std::max<std::size_t>(std::size_t(R / dxi) + 2,
                                                       std::size_t(2.0 * U / du_target) + 2));
    du_ = 2.0 * M_PI / (double(nfft) * dxi);
    n_u_ = 2 * int(u_core_ / du_) + 1;
    const int half_cols = n_u_ / 2;

    a_lo_ = a_min;
    da_ = (n_a_ > 1) ? (a_max - a_min) / (n_a_ - 1) : 1.0;
    if (a_max == a_min) da_ = 1.0;

    const std::size_t nxi = std::size_t(R / dxi) + 2;
    std::vector<Complex> psi(nxi);
    for (std::size_t k = 0; k < nxi; ++k) psi[k] = shape.psi_hat(k * dxi);

    p_rows_.assign(n_a_, std::vector<double>(n_u_, 0.0));
    pt_rows_.assign(n_a_, std::vector<double>(n_u_, 0.0));

    std::vector<Complex> buf(nfft), buft(nfft);
    for (int ia = 0; ia < n_a_; ++ia) {
        const double a = a_lo_ + ia * da_;
        std::fill(buf.begin(), buf.end(), Complex(0.0, 0.0));
        std::fill(buft.begin(), buft.end(), Complex(0.0, 0.0));
        for (std::size_t k = 0; k < nxi; ++k) {
            const Complex g = std::exp(-t * a * psi[k]);
            buf[k] = g;
            buft[k] = -a * psi[k] * g;
        }
        fft_inplace(buf);
        fft_inplace(buft);
        const double scale = dxi / M_PI;
        for (int c = 0; c < n_u_; ++c) {
            const int j = c - half_cols;  // u = j * du
            const std::size_t idx = (j >= 0) ? std::size_t(j) : nfft + j;
            p_rows_[ia][c] = scale * (buf[idx].real() - 0.5);
            pt_rows_[ia][c] = scale * buft[idx].real();
        }
    }
}

double ProductShapeTable::interp(const std::vector<std::vector<double>>& rows, double a,
                                 double u) const {
    auto cr = [](double pm1, double p0, double p1, double p2, double s) {
        return p0 + 0.5 * s * (p1 - pm1 + s * (2 * pm1 - 5 * p0 + 4 * p1 - p2 +
                                               s * (3 * (p0 - p1) + p2 - pm1)));
    };
    const int half_cols = n_u_ / 2;
    const double cu = u / du_ + half_cols;
    int iu = int(std::floor(cu));
    iu = std::max(1, std::min(n_u_ - 3, iu));
    const double su = cu - iu;

    double ca = (n_a_ > 1) ? (a - a_lo_) / da_ : 0.0;
    int ia = int(std::floor(ca));
    ia = std::max(0, std::min(n_a_ - 2, ia));
    const double sa = ca - ia;
    const int iam = std::max(0, ia - 1), iap = std::min(n_a_ - 1, ia + 2);

    double vals[4];
    const int rows_idx[4] = {iam, ia, ia + 1, iap};
    for (int r = 0; r < 4; ++r) {
        const auto& row = rows[rows_idx[r]];
        vals[r] = cr(row[iu - 1], row[iu], row[iu + 1], row[iu + 2], su);
    }
    if (n_a_ == 1) return vals[1];
    return cr(vals[0], vals[1], vals[2], vals[3], sa);
}

double ProductShapeTable::p(double a, double u) const {
    if (std::fabs(u) > u_core_ - 2.0 * du_) {
        const double v = u - t_ * a * drift_beta_;
        return t_ * a * cs_->k_scalar(v) * cs_->J({v});
    }
    return interp(p_rows_, a, u);
}

double ProductShapeTable::pt(double a, double u) const {
    if (std::fabs(u) > u_core_ - 2.0 * du_) {
        const double v = u - t_ * a * drift_beta_;
        return a * cs_->k_scalar(v) * cs_->J({v});
    }
    return interp(pt_rows_, a, u);
}

// ---------------------------------------------------------------------------
// FrozenKernelEvaluator

FrozenKernelEvaluator::FrozenKernelEvaluator(std::shared_ptr<const CoefficientSet> coeffs,
                                             Point w, FourierConfig cfg,
                                             std::shared_ptr<const SymbolShape> shape)
    : coeffs_(std::move(coeffs)),
      symbol_(coeffs_, std::move(w), shape ? shape : make_symbol_shape(coeffs_)),
      cfg_(cfg) {}

std::shared_ptr<const KernelSlice> FrozenKernelEvaluator::make_slice(double t, double u_max,
                                                                     double abs_tol) const {
    if (u_max <= 0.0) u_max = cfg_.u_max;
    if (abs_tol <= 0.0) abs_tol = cfg_.abs_tol;
    return std::make_shared<KernelSlice>(symbol_, t, u_max, abs_tol, cfg_.max_nodes, cfg_.max_xi);
}

double FrozenKernelEvaluator::density_raw(double t, const Point& x, const Point& y) const {
    const int d = coeffs_->dimension();
    if (d == 1) {
        const double u = y[0] - x[0];
        if (std::fabs(u) > cfg_.u_max) {
            KernelSlice s(symbol_, t, 1.0, cfg_.abs_tol, cfg_.max_nodes, cfg_.max_xi);
            return s.tail_model(u);
        }
        KernelSlice s(symbol_, t, std::fabs(u) + 1.0, cfg_.abs_tol, cfg_.max_nodes, cfg_.max_xi);
        return s.density(u);
    }
    if (d == 2) {
        if (!coeffs_->kappaJ_even)
            throw ResolutionError("d = 2 densities support isotropic coefficient sets");
        // radial symbol + Hankel inversion: p(u) = (2pi)^{-1} int_0^R J0(|u| m) g(m) m dm
        const double u = norm(y - x);
        const auto& prof = *coeffs_->profile;
        const double rt = prof.r_t(t);
        const double tol = std::max(cfg_.abs_tol, 1e-7 * std::pow(rt, -2.0));
        const double logtol = std::log(1.0 / tol);
        double R = 1.0;
        while (t * symbol_(Point{R, 0.0}).real() < logtol) R *= 1.4;
        const double dm = std::min(M_PI / (4.0 * (u + 8.0 * rt + 1.0)), R / 400.0);
        // radial symbol sampled once, then the oscillatory Bessel sum
        const std::size_t n = std::size_t(R / dm) + 1;
        double sum = 0.0;
        for (std::size_t k = 1; k < n; ++k) {
            const double m = k * dm;
            const Complex ps = symbol_(Point{m, 0.0});
            sum += std::cyl_bessel_j(0.0, u * m) * std::exp(-t * ps.real()) * m;
        }
        return sum * dm / (2.0 * M_PI);
    }
    throw DomainError("densities implemented for d <= 2");
}

double FrozenKernelEvaluator::density(double t, const Point& x, const Point& y) const {
    return std::max(0.0, density_raw(t, x, y));
}

double FrozenKernelEvaluator::density_derivative(double t, const Point& x, const Point& y,
                                                 const std::vector<int>& beta) const {
    const int d = coeffs_->dimension();
    int total = 0;
    for (int b : beta) total += b;
    if (total > 2) throw DomainError("density derivatives support |beta| <= 2");
    if (d == 1) {
        const double u = y[0] - x[0];
        KernelSlice s(symbol_, t, std::fabs(u) + 1.0, cfg_.abs_tol, cfg_.max_nodes, cfg_.max_xi);
        return s.density_dx(u, total);
    }
    throw DomainError("density derivatives implemented for d = 1");
}

double FrozenKernelEvaluator::time_derivative(double t, const Point& x, const Point& y) const {
    const double u = y[0] - x[0];
    KernelSlice s(symbol_, t, std::fabs(u) + 1.0, cfg_.abs_tol, cfg_.max_nodes, cfg_.max_xi);
    return s.density_dt(u);
}

double FrozenKernelEvaluator::delta_increment(double r, double t, const Point& x, const Point& y,
                                              const Point& z) const {
    const double u = y[0] - x[0];
    const double zz = z[0];
    KernelSlice s(symbol_, t, std::fabs(u) + std::fabs(zz) + 1.0, cfg_.abs_tol, cfg_.max_nodes,
                  cfg_.max_xi);
    double v = s.density(u - zz) - s.density(u);
    if (std::fabs(zz) < r) v -= zz * s.density_dx(u, 1);
    return v;
}

namespace {

// Uniform-grid cache of a slice-evaluated function with Catmull-Rom lookup;
// the z-quadratures below would otherwise re-run the Fourier sum per node.
class SliceCurve {
public:
    SliceCurve(const KernelSlice& s, int order, double lo, double hi, double du) {
        lo_ = lo;
        du_ = du;
        const int n = int((hi - lo) / du) + 4;
        vals_.resize(n);
        for (int i = 0; i < n; ++i) {
            const double u = lo + i * du;
            vals_[i] = (order < 0) ? ((std::fabs(u) <= s.u_max()) ? s.density(u) : s.tail_model(u))
                                   : s.density_dx(u, order);
        }
    }
    double operator()(double u) const {
        const double c = (u - lo_) / du_;
        int i = std::max(1, std::min(int(vals_.size()) - 3, int(std::floor(c))));
        const double s = c - i;
        const double pm1 = vals_[i - 1], p0 = vals_[i], p1 = vals_[i + 1], p2 = vals_[i + 2];
        return p0 + 0.5 * s * (p1 - pm1 + s * (2 * pm1 - 5 * p0 + 4 * p1 - p2 +
                                               s * (3 * (p0 - p1) + p2 - pm1)));
    }

private:
    double lo_, du_;
    std::vector<double> vals_;
};

}  // namespace

double FrozenKernelEvaluator::delta_integral(double r, double t, const Point& x, const Point& y,
                                             const std::function<double(double)>& weight) const {
    if (coeffs_->dimension() != 1)
        throw DomainError("delta_integral implemented for d = 1");
    const double u = y[0] - x[0];
    const auto& cs = *coeffs_;
    const double rt = cs.profile->r_t(t);
    const double slice_win = std::fabs(u) + std::max(r, 1.0) * 4.0 + 8.0;
    KernelSlice s(symbol_, t, slice_win, 0.1 * cfg_.abs_tol, cfg_.max_nodes, cfg_.max_xi);

    const double du_fine = std::min(rt / 8.0, r / 64.0);
    SliceCurve pxx(s, 2, u - r - 4.0 * du_fine, u + r + 4.0 * du_fine, du_fine);
    SliceCurve pval(s, -1, -slice_win, slice_win, std::min(rt / 8.0, 0.02));

    const double p_x = s.density(u);
    double result = 0.0;

    // |z| < r: delta through the second-derivative remainder
    // delta(z) = z^2 int_0^1 (1-theta) p''(x + theta z) d theta
    std::vector<double> gl_x, gl_w;
    gauss_legendre(8, gl_x, gl_w);
    auto inner = [&](double zz) {
        double acc = 0.0;
        for (std::size_t i = 0; i < gl_x.size(); ++i) {
            const double theta = 0.5 * (gl_x[i] + 1.0);
            acc += 0.5 * gl_w[i] * (1.0 - theta) * pxx(u - theta * zz);
        }
        return zz * zz * acc * weight(zz);
    };
    result += tanh_sinh(inner, 0.0, r, 8);
    result += tanh_sinh(inner, -r, 0.0, 8);

    // |z| >= r: plain increments, split additionally at |z| = 1
    auto outer = [&](double zz) {
        const double uu = u - zz;
        const double pv = (std::fabs(uu) <= slice_win) ? pval(uu) : s.tail_model(uu);
        return (pv - p_x) * weight(zz);
    };
    QuadConfig oc;
    oc.abs_tol = 0.05 * cfg_.abs_tol;
    oc.rel_tol = 1e-8;
    oc.breakpoints = cs.z_breakpoints;
    if (r < 1.0) {
        result += integrate(outer, r, 1.0, oc).value;
        result += integrate(outer, -1.0, -r, oc).value;
    } else if (r > 1.0) {
        result += integrate(outer, 1.0, r, oc).value;
        result += integrate(outer, -r, -1.0, oc).value;
    }
    const double far = std::max(r, 1.0);
    result += integrate_semiinf(outer, far, oc).value;
    auto outer_neg = [&](double zz) { return outer(-zz); };
    result += integrate_semiinf(outer_neg, far, oc).value;
    return result;
}

double FrozenKernelEvaluator::apply_generator(const Point& v, double r, double t, const Point& x,
                                              const Point& y) const {
    const auto& cs = *coeffs_;
    const double u = y[0] - x[0];
    KernelSlice s(symbol_, t, std::fabs(u) + 1.0, cfg_.abs_tol, cfg_.max_nodes, cfg_.max_xi);
    Point bv = cs.effective_drift(v, r);
    auto weight = [&cs, &v](double zz) { return cs.kappa(v, {zz}) * cs.J({zz}); };
    return bv[0] * s.density_dx(u, 1) + delta_integral(r, t, x, y, weight);
}

double FrozenKernelEvaluator::mass(double t, const Point& x) const {
    const auto& prof = *coeffs_->profile;
    const double rt = prof.r_t(t);
    if (coeffs_->dimension() == 1) {
        double u_lim = std::max(30.0, 40.0 * rt);
        KernelSlice s(symbol_, t, u_lim, cfg_.abs_tol, cfg_.max_nodes, cfg_.max_xi);
        const double du = std::min(rt / 6.0, u_lim / 400.0);
        const std::size_t n = std::size_t(u_lim / du);
        double sum = 0.5 * (s.density(-double(n) * du) + s.density(double(n) * du));
        for (std::size_t k = 1; k < 2 * n; ++k) sum += s.density(-double(n) * du + k * du);
        double total = sum * du;
        QuadConfig tc;
        tc.abs_tol = 1e-12;
        tc.rel_tol = 1e-8;
        auto tail = [&](double uu) { return s.tail_model(uu) + s.tail_model(-uu); };
        total += integrate_semiinf(tail, double(n) * du, tc).value;
        return total;
    }
    throw DomainError("mass implemented for d = 1");
}

std::shared_ptr<const SymbolShape> make_symbol_shape(
    std::shared_ptr<const CoefficientSet> coeffs) {
    if (coeffs->is_product && coeffs->dimension() == 1)
        return std::make_shared<SymbolShape>(coeffs);
    return nullptr;
}

}  // namespace levyheat
