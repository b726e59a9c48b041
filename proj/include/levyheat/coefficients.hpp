#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "levyheat/common.hpp"
#include "levyheat/profile.hpp"
#include "levyheat/report.hpp"

namespace levyheat {

/// Piecewise coefficient on the line: on piece [lo, hi) the value is
/// c0 + c1 (x - lo)^p + c2 ln(1 + (x - lo)). Covers the catalog's
/// power/log/constant coefficient shapes without an expression parser.
class PiecewiseFn {
public:
    struct Piece {
        double lo, hi;
        double c0 = 0.0, c1 = 0.0, p = 1.0, c2 = 0.0;
    };

    PiecewiseFn() = default;
    explicit PiecewiseFn(std::vector<Piece> pieces);
    static PiecewiseFn constant(double c);

    double operator()(double x) const;
    std::vector<double> breakpoints() const;

private:
    std::vector<Piece> pieces_;
};

enum class Variant { A, A_star };

/// sigma and the (eps_j, s_j) ladder from the drift conditions, plus which
/// assumption bundle they are meant for.
struct DriftParameters {
    double sigma = 1.0;
    std::vector<std::pair<double, double>> pairs;  // (eps_j, s_j), j = 1..N
    Variant variant = Variant::A_star;

    /// The boxed positivity conditions of the bundle; throws AssumptionError.
    void validate(double alpha_h) const;
};

/// Admissible range (0, hi) for the error-series exponent; hi_inclusive marks
/// the variant-A cap which is attained.
struct Epsilon0Window {
    double lo = 0.0;
    double hi = 0.0;
    bool hi_inclusive = false;
    double midpoint() const { return 0.5 * hi; }
};

/// Operator data (b, kappa, J) over a profile, with the declared comparability
/// and Hoelder constants. Immutable after construction; all checks are pure.
class CoefficientSet {
public:
    using DriftFn = std::function<Point(const Point&)>;
    using KappaFn = std::function<double(const Point&, const Point&)>;
    using JumpFn = std::function<double(const Point&)>;

    std::shared_ptr<const LevyProfile> profile;
    DriftFn b;
    KappaFn kappa;
    JumpFn J;
    double c_J = 1.0;
    double c_kappa = 1.0;
    double eps_kappa = 1.0;

    // Product fast path kappa(x,z) = a(x) k(z); every catalog entry has it.
    bool is_product = false;
    std::function<double(const Point&)> a;
    std::function<double(double)> k_scalar;  // d = 1 z-factor
    double a_min = 1.0, a_max = 1.0;

    bool b_is_zero = true;
    bool kappaJ_even = false;  // kappa(x,z)J(z) even in z and b = 0: drift vanishes
    std::vector<double> z_breakpoints;

    int dimension() const { return profile->dimension(); }

    /// b_r^x = b(x) + int z (1_{|z|<r} - 1_{|z|<1}) kappa(x,z) J(z) dz.
    /// Exactly b(x) at r = 1.
    Point effective_drift(const Point& x, double r) const;
    /// Drift shift entering the bound function: t * b^x_{r_t}.
    Point drift_shift(double t, const Point& x) const;
};

VerificationReport check_J_comparability(const CoefficientSet& cs,
                                         const std::vector<Point>& x_samples);
VerificationReport check_kappa_bounds(const CoefficientSet& cs,
                                      const std::vector<Point>& x_samples,
                                      const std::vector<Point>& z_samples);
VerificationReport check_kappa_holder(const CoefficientSet& cs,
                                      const std::vector<Point>& x_samples,
                                      const std::vector<Point>& y_samples,
                                      const std::vector<Point>& z_samples);

/// Fits the smallest c with |b_r^x| <= c r^sigma h(r) over the grids; passes
/// iff the fit stays within the c_kappa budget. A second fit on an r-grid
/// extended toward 0 flags unbounded behaviour (growth beyond 15%).
VerificationReport check_cancellation_scale(const CoefficientSet& cs,
                                            const DriftParameters& dp,
                                            const std::vector<Point>& x_grid,
                                            const std::vector<double>& r_grid);

/// Fits the smallest c with |b_r^x - b_r^y| <= c sum_j (|x-y|^{eps_j} [^1]) r^{s_j} h(r).
/// Variant A restricts to |x-y| <= 1; variant A* clamps the Hoelder factor at 1.
VerificationReport check_holder_drift(const CoefficientSet& cs, const DriftParameters& dp,
                                      const std::vector<std::pair<Point, Point>>& pair_grid,
                                      const std::vector<double>& r_grid);

/// Fact-style check: u |b_{r_u}^w| <= c r_t^sigma for 0 < u <= t <= T, fitted c.
VerificationReport check_effective_drift_time_bound(const CoefficientSet& cs,
                                                    const DriftParameters& dp,
                                                    const std::vector<Point>& w_grid,
                                                    const std::vector<double>& t_grid);

/// (0, min_j { alpha_h ^ (sigma eps_j) + s_j - 1 }) with (eps_0, s_0) = (eps_kappa, 1),
/// intersected for variant A with (0, alpha_h + sigma - 1]. Empty window throws.
Epsilon0Window epsilon0_window(const DriftParameters& dp, double alpha_h, double eps_kappa);

struct CatalogEntry {
    std::string name;
    CoefficientSet coeffs;
    DriftParameters drift;
    double claimed_alpha_h = 1.0;
    double claimed_C_h = 1.0;
    double claimed_beta_h = 0.0;  // 0 = no upper-scaling claim
    std::string notes;
};

/// Built-in coefficient sets:
///   ex1           d=1, J = |z|^{-2}, b = 0, kappa = a(x)k(z) with
///                 a = 1 + sqrt(x) on (0,1), 2 on [1,inf), 1 on (-inf,0]
///                 (the sqrt piece only constrains x in (0,1); elsewhere the
///                 flat continuation is used), k = 1/2 for z<0, 3/2 for z>=0
///   cauchy-const  d=1, J = |z|^{-2}, kappa = 1, b = 0
///   kappa-prod    product form with Lipschitz a and smooth odd-perturbed k
///   ex3 / ex1-log / ex0-log / oscillating-1 / oscillating-2
///                 profile-driven entries with kappa = 1, b = 0
CatalogEntry example_catalog(const std::string& name);

std::vector<std::string> catalog_names();

}  // namespace levyheat
