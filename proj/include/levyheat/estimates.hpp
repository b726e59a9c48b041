#pragma once

#include "levyheat/coefficients.hpp"
#include "levyheat/common.hpp"
#include "levyheat/parametrix.hpp"
#include "levyheat/report.hpp"

namespace levyheat {

enum class DriftAnchor { x, y };

/// Theoretical upper-envelope shape: c t (rho^0_0 + sum_j rho^{s_j-1}_{eps_j})
/// with the drift shift anchored at x or y, and the applicability exponent
/// eta = 2 min_j { alpha_h/2 ^ (sigma eps_j) + s_j - 1 } over j = 0..N
/// (conventions (eps_0, s_0) = (eps_kappa, 1)).
struct EnvelopeSpec {
    DriftAnchor drift_anchor = DriftAnchor::y;
    std::vector<std::pair<double, double>> terms;  // (gamma_j = s_j - 1, beta_j = eps_j)
    double eta = 0.0;
    double scale = 1.0;  // fitted constant c
};

EnvelopeSpec make_envelope_spec(const DriftParameters& dp, double alpha_h, double eps_kappa,
                                DriftAnchor anchor = DriftAnchor::y);

/// Envelope value c t (rho~^0_0 + sum_j rho~^{gamma_j}_{beta_j})(t,x,y).
/// Throws AssumptionError when eta <= 0 (theorem inapplicable).
double pointwise_bound(const EnvelopeSpec& spec, const CoefficientSet& cs, double t,
                       const Point& x, const Point& y);

struct EnvelopeFit {
    double c = 0.0;
    double t_at = 0.0, x_at = 0.0, y_at = 0.0;
    bool violation = false;  // bound vanished where the table is positive
};

/// c := max over the table of p / bound(c = 1), with the argmax location.
EnvelopeFit fit_envelope(const KernelTable& p, const EnvelopeSpec& spec,
                         const CoefficientSet& cs);

/// int rho^0_beta(t,x,z) dz <= c1/(alpha_h - beta0) t^{-1} r_t^{beta0 ^ sigma beta},
/// fitted c1 reported.
VerificationReport check_conv_lemma_a(const CoefficientSet& cs, double sigma, double alpha_h,
                                      double beta0, double beta,
                                      const std::vector<double>& t_grid);

/// Drift-anchor swap: Upsilon_t(y-x-t b^y) <= c Upsilon_t(y-x-t b^x), fitted c.
VerificationReport check_drift_swap(const CoefficientSet& cs, const std::vector<double>& t_grid,
                                    const std::vector<double>& x_grid,
                                    const std::vector<double>& y_grid);

/// Composite-shift comparison
/// Upsilon_t(y-x-(t-s) b^x_{r_{t-s}} - s b^y_{r_s}) <= c Upsilon_t(y-x-t b^y_{r_t}).
VerificationReport check_shift_lemma(const CoefficientSet& cs, const std::vector<double>& t_grid,
                                     const std::vector<double>& x_grid,
                                     const std::vector<double>& y_grid);

}  // namespace levyheat
