#pragma once

#include <functional>
#include <vector>

#include "levyheat/common.hpp"

namespace levyheat {

struct QuadConfig {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    int max_subdivisions = 4000;
    std::vector<double> breakpoints;  // integrand kinks; intervals are split here
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;  // estimated absolute error
    bool converged = true;
};

using Fn1 = std::function<double(double)>;

/// Gauss-Kronrod 7/15 on [a,b]; err receives the usual (200|G7-K15|)^{3/2} estimate.
double quad_gk15(const Fn1& f, double a, double b, double& err);

/// Adaptive GK15 on the finite interval [a,b]. Splits at cfg.breakpoints first.
/// Throws QuadratureError (with partial value) when the subdivision budget runs out.
QuadResult integrate(const Fn1& f, double a, double b, const QuadConfig& cfg = {});

/// Adaptive integral over [a, infinity), by geometric panels with tail detection.
QuadResult integrate_semiinf(const Fn1& f, double a, const QuadConfig& cfg = {});

/// Non-throwing variants used by samplers that prefer flagged results.
QuadResult integrate_nothrow(const Fn1& f, double a, double b, const QuadConfig& cfg = {});

/// Tanh-sinh (double exponential) rule on [a,b]. Deliberately a different mesh
/// family from the GK path so oracle and engine disagree on error profiles.
double tanh_sinh(const Fn1& f, double a, double b, int levels = 9);

/// Gauss-Legendre nodes/weights on [-1,1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

struct Mesh {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Composite Gauss-Legendre mesh on [0,t], panels graded toward both endpoints
/// with exponent g (panel edges at (k/m)^g), npanel panels per half, npts per panel.
/// Integrates u^{gamma-1}-type endpoint singularities accurately for g ~ 3/gamma.
Mesh graded_mesh(double t, int npanel_half, int npts, double g);

/// Graded mesh on [0,t] clustered toward 0 only.
Mesh graded_mesh_left(double t, int npanel, int npts, double g);

/// Trapezoid weights for an arbitrary increasing grid.
std::vector<double> trapezoid_weights(const std::vector<double>& grid);

}  // namespace levyheat
