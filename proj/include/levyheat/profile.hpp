#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "levyheat/common.hpp"
#include "levyheat/quadrature.hpp"
#include "levyheat/report.hpp"

namespace levyheat {

/// Radial jump-density profile nu together with the scale functions derived
/// from it:
///   h(r) = int (1 ^ |x|^2/r^2) nu(|x|) dx,
///   K(r) = r^{-2} int_{|x|<r} |x|^2 nu(|x|) dx,
///   r_t  = h^{-1}(1/t),
/// the bound function Upsilon_t and the rho error functions. All evaluations
/// are pure; instances are immutable after construction.
class LevyProfile {
public:
    using RadialFn = std::function<double(double)>;

    LevyProfile(RadialFn nu, int dimension, QuadConfig quad_cfg = scale_quad_defaults());

    static QuadConfig scale_quad_defaults() {
        QuadConfig q;
        q.abs_tol = 1e-12;
        q.rel_tol = 1e-8;
        return q;
    }

    /// Optional closed forms; when present they are used directly and the
    /// validator cross-checks them against quadrature on a sample grid.
    void set_closed_form_h(RadialFn h) { closed_form_h_ = std::move(h); }
    void set_closed_form_K(RadialFn K) { closed_form_K_ = std::move(K); }
    void set_breakpoints(std::vector<double> b) { breakpoints_ = std::move(b); }
    void set_name(std::string n) { name_ = std::move(n); }

    double nu(double r) const { return nu_(r); }
    int dimension() const { return d_; }
    const std::string& name() const { return name_; }
    const QuadConfig& quad_cfg() const { return quad_cfg_; }

    double h(double r) const;
    double K(double r) const;

    /// h^{-1}(u) by monotone bisection with bracket doubling; rel tol 1e-12.
    double h_inverse(double u) const;
    /// r_t = h^{-1}(1/t).
    double r_t(double t) const;
    /// Reference horizon 1/h(1).
    double t0() const;

    /// Upsilon_t(x) = min(r_t^{-d}, t K(|x|)/|x|^d); r_t^{-d} at x = 0.
    double upsilon(double t, const Point& x) const;
    double upsilon_radial(double t, double absx) const;
    /// Same with r_t precomputed by the caller (hot loops).
    double upsilon_radial_given_rt(double rt, double t, double absx) const;

    /// rho^gamma_beta(t, x - shift) = r_t^gamma (|x|^beta ^ 1) t^{-1} Upsilon_t(x - shift).
    /// Restricted to t in (0, t0]; throws DomainError outside.
    double rho_error(double gamma, double beta, double t, const Point& x,
                     const Point& shift) const;

    /// Invariant checks: nu non-increasing on a sampled grid, the Levy
    /// integrability condition, agreement of closed forms with quadrature.
    /// Throws AssumptionError on violation.
    void validate() const;

private:
    double h_quadrature(double r) const;
    double K_quadrature(double r) const;

    RadialFn nu_;
    int d_;
    QuadConfig quad_cfg_;
    std::optional<RadialFn> closed_form_h_;
    std::optional<RadialFn> closed_form_K_;
    std::vector<double> breakpoints_;
    std::string name_ = "custom";
    mutable double t0_cache_ = -1.0;
};

/// Sampled weak-scaling certificate: h(r) <= C_h lambda^{alpha_h} h(lambda r)
/// for (lambda, r) in (0,1]^2. C_h is fitted (max over the grid); pass means
/// the fit stayed within the budget.
struct ScalingCertificate {
    double alpha_h = 0.0;
    double C_h = 1.0;
    std::vector<std::pair<double, double>> grid;
    double max_violation = 0.0;  // fitted C_h / budget
    bool pass = false;
};

ScalingCertificate certify_scaling(const LevyProfile& profile, double alpha_h,
                                   double C_h_budget, int n_lambda = 32, int n_r = 32,
                                   double r_min = 1e-6);

/// Fitted constant c_h for the upper-scaling counterpart
/// h(r) >= c_h lambda^{beta_h} h(lambda r); returns the largest admissible c_h.
double fit_upper_scaling(const LevyProfile& profile, double beta_h, int n_lambda = 32,
                         int n_r = 32, double r_min = 1e-6);

/// Condition on t -> r_t: r_{lambda t} <= sqrt(lambda) r_t on the grid product.
VerificationReport check_condition_R(const LevyProfile& profile,
                                     const std::vector<double>& t_grid,
                                     const std::vector<double>& lambda_grid);

/// Small-jump drift bound for alpha_h < 1:
/// int_{r<=|z|<1} |z| nu(|z|) dz <= (2 C_h/(1-alpha_h)) r^{alpha_h} h(r).
VerificationReport check_drift_lemma(const LevyProfile& profile, double alpha_h, double C_h,
                                     const std::vector<double>& r_grid);

/// Time-convolution inequality on a graded mesh:
/// int_0^t (t-s)^{-1} r_{t-s}^eps s^{-1} r_s^{k eps} ds
///   <= B(eps/2, k eps/2) t^{-1} r_t^{(k+1) eps}.
VerificationReport check_time_convolution(const LevyProfile& profile,
                                          const std::vector<double>& t_grid,
                                          const std::vector<double>& eps_grid,
                                          const std::vector<int>& k_grid);

/// Builtin profile catalog. Names:
///   inverse-square        nu(r) = r^{-2}, d = 1 (closed forms installed)
///   stable:<alpha>        nu(r) = r^{-d-alpha}
///   ex3-log[:eps]         nu(r) = r^{-d-1} / log(2+1/r)^{1+eps}
///   ex1-log               nu(r) = r^{-d-1} / log(2+1/r)
///   ex0-log               nu(r) = r^{-d-1} log(2+1/r)
///   oscillating-1         factorial-band profile, alpha_h = 3/4, beta_h = 5/4
///   oscillating-2         triple-factorial variant
LevyProfile builtin_profile(const std::string& name, int dimension = 1);

/// Piecewise power-law profile from (r, nu) columns; r strictly increasing,
/// nu non-increasing. Power-law interpolation between nodes and extrapolation
/// beyond them (tail exponent must keep the Levy integral finite).
LevyProfile profile_from_table(const std::vector<double>& r, const std::vector<double>& nu,
                               int dimension);

}  // namespace levyheat
