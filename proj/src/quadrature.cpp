#include "levyheat/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace levyheat {

namespace {

// Kronrod 15 / Gauss 7 abscissae on [0,1]: {node, G7 weight, K15 weight}.
const double kGK[8][3] = {
    {0.000000000000000, 0.417959183673469, 0.209482141084728},
    {0.405845151377397, 0.381830050505119, 0.190350578064785},
    {0.741531185599394, 0.279705391489277, 0.140653259715525},
    {0.949107912342759, 0.129484966168870, 0.063092092629979},
    {0.207784955007898, 0.0,               0.204432940075298},
    {0.586087235467691, 0.0,               0.169004726639267},
    {0.864864423359769, 0.0,               0.104790010322250},
    {0.991455371120813, 0.0,               0.022935322010529},
};

struct Interval {
    double a, b, value, error;
};

}  // namespace

double quad_gk15(const Fn1& f, double a, double b, double& err) {
    const double mid = 0.5 * (a + b);
    const double hl = 0.5 * (b - a);

    double y0 = f(mid);
    double g7 = kGK[0][1] * y0;
    double k15 = kGK[0][2] * y0;
    for (int i = 1; i < 8; ++i) {
        const double dx = hl * kGK[i][0];
        const double yi = f(mid + dx) + f(mid - dx);
        g7 += kGK[i][1] * yi;
        k15 += kGK[i][2] * yi;
    }
    g7 *= hl;
    k15 *= hl;

    err = 200.0 * std::fabs(g7 - k15);
    err = err * std::sqrt(err);
    return k15;
}

static QuadResult integrate_impl(const Fn1& f, double a, double b, const QuadConfig& cfg,
                                 bool may_throw) {
    QuadResult res;
    if (a == b) return res;

    std::vector<Interval> stack;
    std::vector<double> cuts{a, b};
    for (double c : cfg.breakpoints)
        if (c > a && c < b) cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());

    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        Interval iv{cuts[i], cuts[i + 1], 0.0, 0.0};
        iv.value = quad_gk15(f, iv.a, iv.b, iv.error);
        stack.push_back(iv);
    }

    double total = 0.0;
    for (const auto& iv : stack) total += iv.value;

    int used = static_cast<int>(stack.size());
    std::vector<Interval> done;
    while (!stack.empty()) {
        // largest-error first
        auto worst = std::max_element(stack.begin(), stack.end(),
                                      [](const Interval& u, const Interval& v) {
                                          return u.error < v.error;
                                      });
        double err_sum = 0.0;
        for (const auto& iv : stack) err_sum += iv.error;
        for (const auto& iv : done) err_sum += iv.error;
        if (err_sum <= cfg.abs_tol || err_sum <= cfg.rel_tol * std::fabs(total)) break;

        if (used >= cfg.max_subdivisions) {
            double value = 0.0, error = 0.0;
            for (const auto& iv : stack) value += iv.value, error += iv.error;
            for (const auto& iv : done) value += iv.value, error += iv.error;
            if (may_throw)
                throw QuadratureError("adaptive quadrature did not converge", value, error);
            res.value = value;
            res.error = error;
            res.converged = false;
            return res;
        }

        Interval iv = *worst;
        stack.erase(worst);
        if (iv.error <= (cfg.abs_tol + cfg.rel_tol * std::fabs(total)) /
                            std::max<std::size_t>(1, stack.size() + done.size() + 1) ||
            iv.b - iv.a < 1e-15 * (std::fabs(iv.a) + std::fabs(iv.b) + 1e-300)) {
            done.push_back(iv);
            continue;
        }
        const double mid = 0.5 * (iv.a + iv.b);
        Interval l{iv.a, mid, 0.0, 0.0}, r{mid, iv.b, 0.0, 0.0};
        l.value = quad_gk15(f, l.a, l.b, l.error);
        r.value = quad_gk15(f, r.a, r.b, r.error);
        total += l.value + r.value - iv.value;
        stack.push_back(l);
        stack.push_back(r);
        ++used;
    }

    res.value = 0.0;
    res.error = 0.0;
    for (const auto& iv : stack) res.value += iv.value, res.error += iv.error;
    for (const auto& iv : done) res.value += iv.value, res.error += iv.error;
    return res;
}

QuadResult integrate(const Fn1& f, double a, double b, const QuadConfig& cfg) {
    return integrate_impl(f, a, b, cfg, true);
}

QuadResult integrate_nothrow(const Fn1& f, double a, double b, const QuadConfig& cfg) {
    return integrate_impl(f, a, b, cfg, false);
}

QuadResult integrate_semiinf(const Fn1& f, double a, const QuadConfig& cfg) {
    // Geometric panels [c, 2c], stop when panels are negligible three times in a row.
    QuadResult res;
    double c = (a > 0.0) ? a : 0.0;
    double width = (a > 0.0) ? std::max(1.0, std::fabs(a)) : 1.0;

    QuadConfig panel_cfg = cfg;
    panel_cfg.abs_tol = 0.1 * cfg.abs_tol;
    int quiet = 0;
    for (int k = 0; k < 200; ++k) {
        double lo = c, hi = c + width;
        QuadConfig pc = panel_cfg;
        pc.breakpoints.clear();
        for (double b : cfg.breakpoints)
            if (b > lo && b < hi) pc.breakpoints.push_back(b);
        QuadResult p = integrate_impl(f, lo, hi, pc, false);
        res.value += p.value;
        res.error += p.error;
        res.converged = res.converged && p.converged;
        c = hi;
        width *= 2.0;
        if (std::fabs(p.value) <= 0.25 * (cfg.abs_tol + cfg.rel_tol * std::fabs(res.value)))
            ++quiet;
        else
            quiet = 0;
        if (quiet >= 3) return res;
    }
    throw QuadratureError("semi-infinite integral tail did not settle", res.value, res.error);
}

double tanh_sinh(const Fn1& f, double a, double b, int levels) {
    // x = mid + hl tanh(pi/2 sinh t); the distance to each endpoint is kept as
    // gap = 1 - tanh = 2/(e^{2 st} + 1) so nodes never collapse onto a or b.
    const double hl = 0.5 * (b - a);
    const double tmax = 3.9;

    auto node_sum = [&](double t) {
        const double st = M_PI_2 * std::sinh(t);
        const double gap = 2.0 / (std::exp(2.0 * st) + 1.0);
        const double wgt = M_PI_2 * std::cosh(t) / (std::cosh(st) * std::cosh(st));
        const double xp = b - hl * gap, xm = a + hl * gap;
        double acc = 0.0;  // sides guarded separately: one may round onto its endpoint
        if (xm > a) acc += f(xm);
        if (xp < b) acc += f(xp);
        return wgt * acc;
    };

    double h = 1.0;
    double sum = M_PI_2 * f(a + hl);  // t = 0 node at the midpoint
    for (double t = h; t <= tmax; t += h) sum += node_sum(t);
    double value = sum * h;
    for (int lev = 1; lev <= levels; ++lev) {
        h *= 0.5;
        for (double t = h; t <= tmax; t += 2.0 * h) sum += node_sum(t);
        double next = sum * h;
        if (lev >= 5 && std::fabs(next - value) <= 1e-14 * (std::fabs(next) + 1.0)) {
            value = next;
            break;
        }
        value = next;
    }
    return value * hl;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
}

namespace {

// int_0^L f(u) du via u = L v^g: composite GL in v turns u^{gamma-1} endpoint
// behaviour into the polynomial v^{g gamma - 1}.
void add_power_transformed(Mesh& m, double offset, double sign, double L, int npanel, int npts,
                           double g) {
    std::vector<double> gl_x, gl_w;
    gauss_legendre(npts, gl_x, gl_w);
    for (int k = 0; k < npanel; ++k) {
        const double vlo = double(k) / npanel, vhi = double(k + 1) / npanel;
        const double c = 0.5 * (vlo + vhi), hl = 0.5 * (vhi - vlo);
        for (int i = 0; i < npts; ++i) {
            const double v = c + hl * gl_x[i];
            const double dist = L * std::pow(v, g);
            const double node = offset + sign * dist;
            if (dist <= 0.0 || node == offset) continue;  // collapsed onto the endpoint
            m.nodes.push_back(node);
            m.weights.push_back(hl * gl_w[i] * L * g * std::pow(v, g - 1.0));
        }
    }
}

}  // namespace

Mesh graded_mesh(double t, int npanel_half, int npts, double g) {
    Mesh m;
    add_power_transformed(m, 0.0, 1.0, 0.5 * t, npanel_half, npts, g);
    Mesh right;
    add_power_transformed(right, t, -1.0, 0.5 * t, npanel_half, npts, g);
    for (std::size_t i = right.nodes.size(); i-- > 0;) {
        m.nodes.push_back(right.nodes[i]);
        m.weights.push_back(right.weights[i]);
    }
    return m;
}

Mesh graded_mesh_left(double t, int npanel, int npts, double g) {
    Mesh m;
    add_power_transformed(m, 0.0, 1.0, t, npanel, npts, g);
    return m;
}

std::vector<double> trapezoid_weights(const std::vector<double>& grid) {
    const std::size_t n = grid.size();
    std::vector<double> w(n, 0.0);
    if (n < 2) return w;
    w[0] = 0.5 * (grid[1] - grid[0]);
    w[n - 1] = 0.5 * (grid[n - 1] - grid[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) w[i] = 0.5 * (grid[i + 1] - grid[i - 1]);
    return w;
}

}  // namespace levyheat
