#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "levyheat/coefficients.hpp"
#include "levyheat/common.hpp"
#include "levyheat/parametrix.hpp"

namespace levyheat {

struct OracleResult {
    std::string name;
    std::string inputs;
    double oracle_value = 0.0;
    double engine_value = 0.0;
    double abs_err = 0.0;
    double rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

OracleResult make_oracle_result(const std::string& name, const std::string& inputs,
                                double oracle, double engine, double abs_tol, double rel_tol);

/// Closed-form transition density of the constant-coefficient reference
/// (kappa = kappa0, J = |z|^{-2}, d = 1, b = 0): Cauchy law with scale
/// gamma = kappa0 pi t.
double cauchy_closed_form(double t, double x, double y, double kappa0 = 1.0);

struct ResidualTolerances {
    double mass = 1e-2;
    double positivity = 1e-3;   // relative to the table maximum
    double chapman = 5e-2;      // relative
    double contraction = 1e-2;
    double q0_l1_budget = 1e3;  // fitted C3 must stay below this
};

/// Mass, positivity, Chapman-Kolmogorov, contraction and q0-L1 residuals of a
/// finished build.
std::vector<OracleResult> run_residual_suite(const ParametrixEngine& engine,
                                             const ParametrixEngine::BuildResult& build,
                                             const ResidualTolerances& tol = {});

/// Independent q1 probe: nested tanh-sinh quadrature of
/// int_0^t int q0(t-s,x,z) q0(s,z,y) dz ds with q0 evaluated through
/// per-point Fourier slices (a different mesh family and evaluation path
/// from the engine's graded product integration).
double q1_nested_oracle(std::shared_ptr<const CoefficientSet> cs, double t, double x, double y,
                        int levels = 6);

/// Same slice-based route for a single q0 value (oracle for q0_eval).
double q0_slice_oracle(std::shared_ptr<const CoefficientSet> cs, double t, double x, double y);

struct Histogram {
    std::vector<double> edges;    // n+1
    std::vector<double> density;  // n, normalized
    std::vector<double> sigma;    // n, binomial standard errors on the density
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    int workers = 0;
    double cutoff = 0.0;
};

/// Compound-Poisson sampler with small jumps truncated at |z| < cutoff and the
/// effective drift b^x_cutoff per unit time. Frozen-coefficient mode: the jump
/// intensity is kappa(x0, .) J. Deterministic for a fixed (seed, workers).
Histogram monte_carlo_density(const CoefficientSet& cs, double t, double x0,
                              std::size_t n_paths, double cutoff, std::uint64_t seed,
                              const std::vector<double>& edges, int workers = 2);

}  // namespace levyheat
