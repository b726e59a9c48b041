#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace levyheat {

using Point = std::vector<double>;

inline double norm(const Point& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline double dot(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline Point operator+(Point a, const Point& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Point operator-(Point a, const Point& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

inline Point operator*(double c, Point a) {
    for (double& v : a) v *= c;
    return a;
}

/// Surface measure of the unit sphere in R^d, 2 pi^{d/2} / Gamma(d/2).
inline double sphere_surface(int d) {
    return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

/// Euler beta function.
inline double beta_function(double a, double b) {
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

// Error taxonomy. Quadrature failures carry the partial value and the
// tolerance actually achieved so callers can decide whether to keep going.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& msg, double partial, double achieved_tol)
        : std::runtime_error(msg), partial_value(partial), achieved_tolerance(achieved_tol) {}
    double partial_value;
    double achieved_tolerance;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class RangeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ResolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AssumptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace levyheat
