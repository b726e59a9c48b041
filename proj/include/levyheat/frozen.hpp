#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "levyheat/coefficients.hpp"
#include "levyheat/common.hpp"

namespace levyheat {

using Complex = std::complex<double>;

struct FourierConfig {
    double abs_tol = 1e-8;       // truncation + aliasing budget for densities
    double rel_peak_floor = 1e-7;  // effective abs tol >= this * on-diagonal peak
    double max_xi = 1e10;        // cap on the truncation radius R(t)
    std::size_t max_nodes = 8u << 20;
    double u_max = 12.0;         // largest |y - x| served by pointwise slices
};

/// Base-point-free part of the symbol for product coefficients
/// kappa(w,z) = a(w) k(z):  psi_hat(xi) = -int (e^{i xi z} - 1 - i xi z 1_{|z|<1}) k(z) J(z) dz,
/// so that Psi_w(xi) = a(w) psi_hat(xi) - i xi b(w). Tabulated once on a log-xi
/// grid with cubic interpolation; direct quadrature below/above the table.
class SymbolShape {
public:
    explicit SymbolShape(std::shared_ptr<const CoefficientSet> coeffs);

    Complex psi_hat(double xi) const;  // xi >= 0
    /// min over sampled xi in [1, 1e3] of Re psi_hat / xi^alpha (decay constant).
    double decay_rate(double alpha) const;
    const CoefficientSet& coeffs() const { return *coeffs_; }

    /// Direct quadrature of the compensated exponential against k(z)J(z)
    /// (the slow reference path; also exercised by tests).
    Complex psi_hat_quadrature(double xi) const;

private:
    std::shared_ptr<const CoefficientSet> coeffs_;
    std::vector<double> log_xi_;
    std::vector<double> re_log_;  // log Re psi_hat
    std::vector<double> im_over_xi_;
    double lo_, hi_;
};

/// Evaluator of the frozen symbol Psi_w at base point w. For product
/// coefficient sets it reuses the shared SymbolShape; otherwise each call
/// quadratures the compensated exponential against kappa(w,.)J.
class FrozenSymbol {
public:
    FrozenSymbol(std::shared_ptr<const CoefficientSet> coeffs, Point w,
                 std::shared_ptr<const SymbolShape> shape = nullptr);

    Complex operator()(const Point& xi) const;
    Complex eval1(double xi) const;  // d = 1
    const Point& base_point() const { return w_; }
    const CoefficientSet& coeffs() const { return *coeffs_; }
    std::shared_ptr<const SymbolShape> shape() const { return shape_; }

    double decay_alpha() const { return decay_alpha_; }
    double decay_rate() const { return decay_rate_; }

private:
    std::shared_ptr<const CoefficientSet> coeffs_;
    Point w_;
    std::shared_ptr<const SymbolShape> shape_;
    double a_w_ = 1.0;
    double b_w_ = 0.0;  // d = 1 external drift component
    double decay_alpha_ = 1.0;
    double decay_rate_ = 1.0;
};

/// One-dimensional Fourier inversion row at fixed (w, t): uniform xi grid on
/// [0, R(t)] carrying e^{-t Psi_w}. R(t) solves c_lo t R^alpha = log(1/tol);
/// the xi spacing is pi / U with U the aliasing window, so a slice evaluates
/// densities for |u| <= u_max with truncation + aliasing error within tol.
class KernelSlice {
public:
    KernelSlice(const FrozenSymbol& symbol, double t, double u_max, double abs_tol,
                std::size_t max_nodes, double max_xi);

    double t() const { return t_; }
    double dxi() const { return dxi_; }
    double u_max() const { return u_max_; }
    double tail_abs_tol() const { return tol_; }

    /// p^{K_w}(t, x, x+u); raw (unclamped) value.
    double density(double u) const;
    /// d^m/dx^m p^{K_w}(t,x,y) at u = y - x (Fourier factor route), m <= 2... 4.
    double density_dx(double u, int order) const;
    /// dp/dt via the -Psi multiplier.
    double density_dt(double u) const;
    /// One-jump tail model t kappa(w,u)J(u), used beyond u_max.
    double tail_model(double u) const;
    double tail_model_dt(double u) const;

private:
    double t_, u_max_, tol_;
    double dxi_;
    double drift_shift_ = 0.0;  // t b^w_{r_t}, enters the tail model
    std::vector<Complex> g_;       // e^{-t Psi}
    std::vector<Complex> psi_;     // Psi values (for dt)
    const CoefficientSet* cs_;
    Point w_;
};

/// FFT-filled kernel table for product coefficients at fixed t: values of the
/// frozen density p and its time derivative on (a-node, uniform-u) grids with
/// bicubic interpolation, plus the one-jump tail model beyond the window.
/// This is what makes whole-table builds cheap: p^{K_w} depends on w only
/// through a(w).
class ProductShapeTable {
public:
    ProductShapeTable(const SymbolShape& shape, double t, double a_min, double a_max,
                      double u_core, double du_target, double abs_tol, int n_a = 29);

    double t() const { return t_; }
    double u_core() const { return u_core_; }
    /// p^{K_w}(t, u) for a = a(w); |u| beyond the window falls back on the tail model.
    double p(double a, double u) const;
    double pt(double a, double u) const;

private:
    double interp(const std::vector<std::vector<double>>& rows, double a, double u) const;
    double t_, a_lo_, da_, u_core_, du_;
    int n_a_, n_u_;  // stored columns: u = -u_core .. u_core
    double drift_beta_ = 0.0;  // int z (1_{|z|<r_t} - 1_{|z|<1}) k J dz
    std::vector<std::vector<double>> p_rows_, pt_rows_;
    const CoefficientSet* cs_;
};

/// Pointwise frozen-kernel operations (d = 1 or 2). Holds the symbol and the
/// Fourier budget; creates slices on demand, so single evaluations are
/// self-contained while table builds go through ProductShapeTable.
class FrozenKernelEvaluator {
public:
    FrozenKernelEvaluator(std::shared_ptr<const CoefficientSet> coeffs, Point w,
                          FourierConfig cfg = {},
                          std::shared_ptr<const SymbolShape> shape = nullptr);

    const FrozenSymbol& symbol() const { return symbol_; }
    const FourierConfig& config() const { return cfg_; }

    /// p^{K_w}(t,x,y), clamped at zero from below (truncation can ring
    /// slightly negative); density_raw keeps the sign for residual accounting.
    double density(double t, const Point& x, const Point& y) const;
    double density_raw(double t, const Point& x, const Point& y) const;

    /// Spatial derivative d^|beta|/dx^beta, |beta| <= 2 (beta per dimension).
    double density_derivative(double t, const Point& x, const Point& y,
                              const std::vector<int>& beta) const;

    double time_derivative(double t, const Point& x, const Point& y) const;

    /// delta_r(t,x,y;z) = p(t,x+z,y) - p(t,x,y) - 1_{|z|<r} <z, grad_x p(t,x,y)>.
    double delta_increment(double r, double t, const Point& x, const Point& y,
                           const Point& z) const;

    /// Real-space application of the frozen generator at base point v:
    /// b_r^v . grad_x p + int delta_r(t,x,y;z) kappa(v,z) J(z) dz, with the
    /// z-integral split at |z| = r and |z| = 1 and the inner region computed
    /// through the second-derivative remainder.
    double apply_generator(const Point& v, double r, double t, const Point& x,
                           const Point& y) const;

    /// int delta_r(t,x,y;z) weight(z) dz with the same split policy as
    /// apply_generator (weight carries the kappa J factor).
    double delta_integral(double r, double t, const Point& x, const Point& y,
                          const std::function<double(double)>& weight) const;

    /// int p^{K_w}(t,x,y) dy by slice trapezoid plus the analytic tail.
    double mass(double t, const Point& x) const;

    /// Shared slice for batched evaluations at one t.
    std::shared_ptr<const KernelSlice> make_slice(double t, double u_max = 0.0,
                                                  double abs_tol = 0.0) const;

private:
    std::shared_ptr<const CoefficientSet> coeffs_;
    FrozenSymbol symbol_;
    FourierConfig cfg_;
};

/// Shared master shape for a coefficient set (product sets only; returns null
/// otherwise, in which case evaluators fall back on per-point quadrature).
std::shared_ptr<const SymbolShape> make_symbol_shape(
    std::shared_ptr<const CoefficientSet> coeffs);

}  // namespace levyheat
