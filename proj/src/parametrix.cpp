#include "levyheat/parametrix.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "levyheat/quadrature.hpp"

namespace levyheat {

namespace {

inline double catmull(double pm1, double p0, double p1, double p2, double s) {
    return p0 + 0.5 * s * (p1 - pm1 + s * (2 * pm1 - 5 * p0 + 4 * p1 - p2 +
                                           s * (3 * (p0 - p1) + p2 - pm1)));
}

int omp_workers(ParallelMode mode) {
#ifdef _OPENMP
    return mode == ParallelMode::openmp ? omp_get_max_threads() : 1;
#else
    (void)mode;
    return 1;
#endif
}

// C[i][j] = sum_k A[i][k] w[k] B[k][j], all n-by-n row-major.
void weighted_matmul(const std::vector<double>& A, const std::vector<double>& w,
                     const std::vector<double>& B, std::vector<double>& C, int n,
                     double scale, bool accumulate, ParallelMode mode) {
    if (!accumulate) std::fill(C.begin(), C.end(), 0.0);
    const bool par = mode == ParallelMode::openmp;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < n; ++i) {
        double* ci = &C[std::size_t(i) * n];
        const double* ai = &A[std::size_t(i) * n];
        for (int k = 0; k < n; ++k) {
            const double aik = ai[k] * w[k] * scale;
            if (aik == 0.0) continue;
            const double* bk = &B[std::size_t(k) * n];
            for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

}  // namespace

double simpson_nonuniform(const std::vector<double>& s, const std::vector<double>& f) {
    const std::size_t n = s.size();
    if (n < 2) return 0.0;
    if (n == 2) return 0.5 * (s[1] - s[0]) * (f[0] + f[1]);
    double total = 0.0;
    std::size_t i = 0;
    while (i + 2 < n) {
        const double h0 = s[i + 1] - s[i], h1 = s[i + 2] - s[i + 1];
        const double H = h0 + h1;
        total += H / 6.0 *
                 ((2.0 - h1 / h0) * f[i] + H * H / (h0 * h1) * f[i + 1] +
                  (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if (i + 1 < n) total += 0.5 * (s[n - 1] - s[n - 2]) * (f[n - 2] + f[n - 1]);
    return total;
}

std::string table_kind_name(TableKind k) {
    switch (k) {
        case TableKind::p0: return "p0";
        case TableKind::q0: return "q0";
        case TableKind::qn: return "qn";
        case TableKind::q: return "q";
        case TableKind::p: return "p";
    }
    return "?";
}

std::size_t KernelTable::find_time(double t) const {
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        if (std::fabs(t_grid[i] - t) <= 1e-9 * std::max(1.0, std::fabs(t))) return i;
    throw RangeError("time level not present in table");
}

std::size_t KernelTable::find_x(double x) const {
    for (std::size_t i = 0; i < x_grid.size(); ++i)
        if (std::fabs(x_grid[i] - x) <= 1e-9 * std::max(1.0, std::fabs(x))) return i;
    throw RangeError("x probe not present in table");
}

void KernelTable::check_invariants() const {
    double vmax = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw AssumptionError("kernel table holds a non-finite entry");
        vmax = std::max(vmax, std::fabs(v));
    }
    if (kind == TableKind::p) {
        for (double v : values)
            if (v < -1e-3 * vmax)
                throw AssumptionError("kind=p table entry below the negativity tolerance");
        if (meta.series_depth < 1)
            throw AssumptionError("kind=p table requires series_depth >= 1");
    }
    if (kind == TableKind::q && meta.series_depth < 1)
        throw AssumptionError("kind=q table requires series_depth >= 1");
}

double SeriesBudget::tail_estimate(double t, double r_t, int from_n) const {
    // sum_{n > from_n} C3^{n+1} prod_{k<=n} B(eps0/2, k eps0/2) t^{-1} r_t^{(n+1) eps0}
    double total = 0.0;
    double log_prod = 0.0;
    double prev_term = 0.0;
    for (int n = 1; n <= 400; ++n) {
        log_prod += std::log(beta_function(0.5 * eps0, 0.5 * n * eps0));
        if (n <= from_n) continue;
        const double log_term = (n + 1) * std::log(std::max(fitted_C3, 1e-300)) + log_prod +
                                std::log(1.0 / t) + (n + 1) * eps0 * std::log(r_t);
        const double term = std::exp(log_term);
        total += term;
        if (n > from_n + 4 && term < 1e-18 && term < prev_term) break;
        prev_term = term;
    }
    return total;
}

BuildConfig BuildConfig::refined(double f) const {
    BuildConfig r = *this;
    r.dz /= f;
    r.mesh_ratio = std::pow(mesh_ratio, 1.0 / f);
    r.segment_nodes = int(segment_nodes * f);
    r.shape_du /= f;
    r.moment_nodes = int(moment_nodes * f);
    r.shape_n_a = int(shape_n_a * f);
    return r;
}

// ---------------------------------------------------------------------------

ParametrixEngine::ParametrixEngine(std::shared_ptr<const CoefficientSet> coeffs,
                                   DriftParameters drift, BuildConfig cfg)
    : coeffs_(std::move(coeffs)), drift_(std::move(drift)), cfg_(std::move(cfg)) {
    if (coeffs_->dimension() != 1)
        throw ResolutionError("parametrix table builds are one-dimensional in v1");
    alpha_h_ = cfg_.alpha_h;
    drift_.validate(alpha_h_);
    t0_ = coeffs_->profile->t0();
    for (double t : cfg_.t_report)
        if (t <= 0.0 || t > t0_ * (1.0 + 1e-12))
            throw DomainError("report times must lie in (0, t0]; compose tables beyond t0");
    if (cfg_.t_report.empty()) throw ConfigError("at least one report time required");
    if (cfg_.x_probes.empty()) throw ConfigError("at least one x probe required");

    Epsilon0Window win = epsilon0_window(drift_, alpha_h_, coeffs_->eps_kappa);
    eps0_ = (cfg_.eps0 > 0.0) ? cfg_.eps0 : win.midpoint();
    if (eps0_ <= 0.0 || eps0_ > win.hi * (1.0 + 1e-12))
        throw AssumptionError("requested eps0 falls outside the admissible window");

    if (!coeffs_->is_product || !coeffs_->b_is_zero)
        throw ResolutionError(
            "table builds require product-form coefficients with zero external drift in v1");
    shape_ = make_symbol_shape(coeffs_);

    build_spatial_grid();
    build_time_meshes();
    build_shapes();
    build_moments();
}

void ParametrixEngine::build_spatial_grid() {
    double lo = cfg_.x_probes.front(), hi = cfg_.x_probes.front();
    for (double x : cfg_.x_probes) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    core_lo_ = lo - cfg_.core_pad;
    core_hi_ = hi + cfg_.core_pad;
    const int n_core = int(std::ceil((core_hi_ - core_lo_) / cfg_.dz)) + 1;

    std::vector<double> nodes;
    // geometric tail below the core
    {
        std::vector<double> below;
        double step = cfg_.dz;
        double z = core_lo_;
        while (z > -cfg_.z_max) {
            step *= cfg_.tail_ratio;
            z -= step;
            below.push_back(z);
        }
        for (auto it = below.rbegin(); it != below.rend(); ++it) nodes.push_back(*it);
    }
    for (int i = 0; i < n_core; ++i) nodes.push_back(core_lo_ + i * cfg_.dz);
    {
        double step = cfg_.dz;
        double z = nodes.back();
        while (z < cfg_.z_max) {
            step *= cfg_.tail_ratio;
            z += step;
            nodes.push_back(z);
        }
    }
    s_nodes_ = std::move(nodes);
    s_weights_ = trapezoid_weights(s_nodes_);
    a_of_node_.resize(s_nodes_.size());
    for (std::size_t i = 0; i < s_nodes_.size(); ++i)
        a_of_node_[i] = coeffs_->a({s_nodes_[i]});

    probe_idx_.clear();
    for (double x : cfg_.x_probes) {
        std::size_t best = 0;
        double dist = 1e300;
        for (std::size_t i = 0; i < s_nodes_.size(); ++i) {
            const double d = std::fabs(s_nodes_[i] - x);
            if (d < dist) {
                dist = d;
                best = i;
            }
        }
        probe_idx_.push_back(best);
    }
}

void ParametrixEngine::build_time_meshes() {
    const double T = *std::max_element(cfg_.t_report.begin(), cfg_.t_report.end());
    const double t_min_rep = *std::min_element(cfg_.t_report.begin(), cfg_.t_report.end());
    const double t_lo = cfg_.mesh_floor_factor * t_min_rep;

    std::vector<double> mesh;
    for (double t = t_lo; t < T * (1.0 - 1e-12); t *= cfg_.mesh_ratio) mesh.push_back(t);
    mesh.push_back(T);
    // snap report and full-row times onto the mesh
    std::vector<double> pinned = cfg_.t_report;
    pinned.insert(pinned.end(), cfg_.full_row_times.begin(), cfg_.full_row_times.end());
    for (double t : pinned) {
        std::size_t best = 0;
        double dist = 1e300;
        for (std::size_t i = 0; i < mesh.size(); ++i) {
            const double d = std::fabs(std::log(mesh[i] / t));
            if (d < dist) {
                dist = d;
                best = i;
            }
        }
        if (dist < 0.5 * std::log(cfg_.mesh_ratio))
            mesh[best] = t;
        else
            mesh.push_back(t);
    }
    std::sort(mesh.begin(), mesh.end());
    mesh.erase(std::unique(mesh.begin(), mesh.end(),
                           [](double a, double b) { return std::fabs(a - b) < 1e-12 * a; }),
               mesh.end());
    t_dense_ = std::move(mesh);

    // shape times extend below the table mesh for the moment integrals
    t_shape_ = t_dense_;
    for (double t = t_lo / 1.3; t > t_lo / 80.0; t /= 1.3) t_shape_.push_back(t);
    std::sort(t_shape_.begin(), t_shape_.end());

    s_zres_ = 1.0 / coeffs_->profile->h(3.0 * cfg_.dz);
}

void ParametrixEngine::build_shapes() {
    shapes_.resize(t_shape_.size());
    const auto& prof = *coeffs_->profile;
    const bool par = cfg_.mode == ParallelMode::openmp;
#pragma omp parallel for schedule(dynamic) if (par)
    for (std::size_t i = 0; i < t_shape_.size(); ++i) {
        const double t = t_shape_[i];
        const double rt = prof.r_t(t);
        const double u_core =
            (t >= t_dense_.front() * 0.999)
                ? std::max(cfg_.shape_u_core, 30.0 * rt)
                : std::max(0.75, 80.0 * rt);
        const double du = std::min(cfg_.shape_du, rt / 6.0);
        shapes_[i] = std::make_unique<ProductShapeTable>(*shape_, t, coeffs_->a_min,
                                                         coeffs_->a_max, u_core, du,
                                                         cfg_.fourier_tol, cfg_.shape_n_a);
    }
}

double ParametrixEngine::shape_p(double t, double a, double u) const {
    const auto& ts = t_shape_;
    if (t <= ts.front()) return shapes_.front()->p(a, u);
    if (t >= ts.back()) return shapes_.back()->p(a, u);
    const std::size_t i =
        std::upper_bound(ts.begin(), ts.end(), t) - ts.begin() - 1;
    if (std::fabs(ts[i] - t) < 1e-12 * t) return shapes_[i]->p(a, u);
    const double w = std::log(t / ts[i]) / std::log(ts[i + 1] / ts[i]);
    return (1.0 - w) * shapes_[i]->p(a, u) + w * shapes_[i + 1]->p(a, u);
}

double ParametrixEngine::shape_pt(double t, double a, double u) const {
    const auto& ts = t_shape_;
    if (t <= ts.front()) return shapes_.front()->pt(a, u);
    if (t >= ts.back()) return shapes_.back()->pt(a, u);
    const std::size_t i =
        std::upper_bound(ts.begin(), ts.end(), t) - ts.begin() - 1;
    if (std::fabs(ts[i] - t) < 1e-12 * t) return shapes_[i]->pt(a, u);
    const double w = std::log(t / ts[i]) / std::log(ts[i + 1] / ts[i]);
    return (1.0 - w) * shapes_[i]->pt(a, u) + w * shapes_[i + 1]->pt(a, u);
}

double ParametrixEngine::p0_fast(double t, double x, double y) const {
    return shape_p(t, coeffs_->a({y}), y - x);
}

double ParametrixEngine::q0_fast(double t, double x, double y) const {
    const double ay = coeffs_->a({y});
    const double ax = coeffs_->a({x});
    return (ax - ay) / ay * shape_pt(t, ay, y - x);
}

void ParametrixEngine::build_moments() {
    const double T = t_dense_.back();
    const double u_max = std::max(cfg_.chi * T, 1.2 * s_zres_);
    const double u_floor = t_shape_.front() * 1.05;
    const int n = cfg_.moment_nodes;
    moment_u_.resize(n);
    for (int i = 0; i < n; ++i)
        moment_u_[i] = u_floor * std::pow(u_max / u_floor, double(i) / (n - 1));

    const auto& prof = *coeffs_->profile;
    const std::size_t S = s_nodes_.size();
    I_tabs_.assign(9, std::vector<double>(n * S, 0.0));
    M0_tab_.assign(n * S, 0.0);
    pmass_tab_.assign(n * S, 0.0);

    // local z-quadrature around the concentration point: uniform core at step
    // r_u/5 plus geometric Hoelder-tail nodes
    const bool par = cfg_.mode == ParallelMode::openmp;
#pragma omp parallel for schedule(dynamic) if (par)
    for (int iu = 0; iu < n; ++iu) {
        const double u = moment_u_[iu];
        const double ru = prof.r_t(u);
        Point origin{0.0};
        const double shift = u * norm(coeffs_->effective_drift(origin, ru)) * 2.0;
        const double V = 40.0 * ru + 3.0 * shift;
        const double dv = ru / 5.0;
        std::vector<double> vg;
        for (double v = -V; v <= V; v += dv) vg.push_back(v);
        {
            double v = V;
            for (int k = 0; k < 44; ++k) {
                v *= 1.35;
                vg.push_back(v);
                vg.insert(vg.begin(), -v);
            }
        }
        std::vector<double> vw = trapezoid_weights(vg);

        for (std::size_t yi = 0; yi < S; ++yi) {
            const double y = s_nodes_[yi];
            const double ay = a_of_node_[yi];
            double i0 = 0.0, m0 = 0.0, pm = 0.0;
            for (std::size_t k = 0; k < vg.size(); ++k) {
                const double z = y + vg[k];
                const double az = coeffs_->a({z});
                // I0: int q0(u, z, y) dz, frozen at y
                i0 += vw[k] * (az - ay) / ay * shape_pt(u, ay, -vg[k]);
                // M0: int q0(u, y, z) dz, frozen at z
                m0 += vw[k] * (ay - az) / az * shape_pt(u, az, vg[k]);
                // p0 mass: int p0(u, y, z) dz
                pm += vw[k] * shape_p(u, az, vg[k]);
            }
            I_tabs_[0][iu * S + yi] = i0;
            M0_tab_[iu * S + yi] = m0;
            pmass_tab_[iu * S + yi] = pm;
        }
    }

    // I_n(s, y) ~ int_0^s I0(s - sig, y) I_{n-1}(sig, y) d sig
    const double g = std::min(12.0, std::max(2.0, 3.0 / std::max(0.2, eps0_ / alpha_h_)));
    for (std::size_t nn = 1; nn < I_tabs_.size(); ++nn) {
#pragma omp parallel for schedule(static) if (par)
        for (int iu = 0; iu < n; ++iu) {
            const double s = moment_u_[iu];
            Mesh mesh = graded_mesh(s, 8, 3, g);
            for (std::size_t yi = 0; yi < S; ++yi) {
                double acc = 0.0;
                for (std::size_t m = 0; m < mesh.nodes.size(); ++m) {
                    const double sig = mesh.nodes[m];
                    acc += mesh.weights[m] * interp_moment(I_tabs_[0], s - sig, yi) *
                           interp_moment(I_tabs_[nn - 1], sig, yi);
                }
                I_tabs_[nn][iu * S + yi] = acc;
            }
        }
    }
}

double ParametrixEngine::interp_moment(const std::vector<double>& tab, double u,
                                       std::size_t yi) const {
    const std::size_t S = s_nodes_.size();
    const int n = int(moment_u_.size());
    if (u <= moment_u_.front()) {
        // below the floor: scale by the integrable endpoint profile u^{eps0/alpha - 1}
        const double p = eps0_ / alpha_h_ - 1.0;
        return tab[0 * S + yi] * std::pow(u / moment_u_.front(), p);
    }
    if (u >= moment_u_.back()) return tab[(n - 1) * S + yi];
    const double c = std::log(u / moment_u_.front()) /
                     std::log(moment_u_[1] / moment_u_[0]);
    int i = std::min(n - 2, int(c));
    const double w = c - i;
    return (1.0 - w) * tab[i * S + yi] + w * tab[(i + 1) * S + yi];
}

double ParametrixEngine::I_n(int nn, double s, std::size_t yi) const {
    return interp_moment(I_tabs_[std::size_t(nn)], s, yi);
}

double ParametrixEngine::M0(double u, std::size_t xi) const {
    return interp_moment(M0_tab_, u, xi);
}

double ParametrixEngine::p0_mass_small(double u, std::size_t xi) const {
    const std::size_t S = s_nodes_.size();
    const int n = int(moment_u_.size());
    if (u <= moment_u_.front()) return 1.0;
    if (u >= moment_u_.back()) return pmass_tab_[(n - 1) * S + xi];
    const double c = std::log(u / moment_u_.front()) /
                     std::log(moment_u_[1] / moment_u_[0]);
    int i = std::min(n - 2, int(c));
    const double w = c - i;
    return (1.0 - w) * pmass_tab_[i * S + xi] + w * pmass_tab_[(i + 1) * S + xi];
}

void ParametrixEngine::fill_q0_matrix(double t, std::vector<double>& m, int stride) const {
    const std::size_t S = s_nodes_.size();
    const std::size_t n = (S + stride - 1) / stride;
    m.assign(n * n, 0.0);
    const bool par = cfg_.mode == ParallelMode::openmp;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t ii = 0; ii < n; ++ii) {
        const std::size_t i = std::min(ii * stride, S - 1);
        const double x = s_nodes_[i];
        const double ax = a_of_node_[i];
        for (std::size_t jj = 0; jj < n; ++jj) {
            const std::size_t j = std::min(jj * stride, S - 1);
            const double az = a_of_node_[j];
            m[ii * n + jj] = (ax - az) / az * shape_pt(t, az, s_nodes_[j] - x);
        }
    }
}

void ParametrixEngine::fill_p0_matrix(double t, std::vector<double>& m, int stride) const {
    const std::size_t S = s_nodes_.size();
    const std::size_t n = (S + stride - 1) / stride;
    m.assign(n * n, 0.0);
    const bool par = cfg_.mode == ParallelMode::openmp;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t ii = 0; ii < n; ++ii) {
        const std::size_t i = std::min(ii * stride, S - 1);
        const double x = s_nodes_[i];
        for (std::size_t jj = 0; jj < n; ++jj) {
            const std::size_t j = std::min(jj * stride, S - 1);
            m[ii * n + jj] = shape_p(t, a_of_node_[j], s_nodes_[j] - x);
        }
    }
}

KernelTable ParametrixEngine::build_p0_table() const {
    KernelTable tab;
    tab.kind = TableKind::p0;
    tab.t_grid = t_dense_;
    for (std::size_t pi : probe_idx_) tab.x_grid.push_back(s_nodes_[pi]);
    tab.y_grid = s_nodes_;
    tab.values.assign(tab.t_grid.size() * tab.x_grid.size() * tab.y_grid.size(), 0.0);
    tab.quad_err.assign(tab.values.size(), 0.0);
    const bool par = cfg_.mode == ParallelMode::openmp;
    for (std::size_t ti = 0; ti < tab.t_grid.size(); ++ti) {
        const double t = tab.t_grid[ti];
#pragma omp parallel for schedule(static) if (par)
        for (std::size_t xi = 0; xi < tab.x_grid.size(); ++xi) {
            const double x = tab.x_grid[xi];
            for (std::size_t yi = 0; yi < tab.y_grid.size(); ++yi) {
                const double v = p0_fast(t, x, tab.y_grid[yi]);
                tab.values[tab.index(ti, xi, yi)] = v;
                tab.quad_err[tab.index(ti, xi, yi)] = cfg_.fourier_tol + 1e-4 * std::fabs(v);
            }
        }
    }
    tab.meta = TableMeta{coeffs_->profile->name(), eps0_, 0,       0.0,
                         t0_,   cfg_.dz, cfg_.mesh_ratio, cfg_.chi,
                         cfg_.fourier_tol, cfg_.shape_n_a, omp_workers(cfg_.mode), cfg_.mode};
    return tab;
}

KernelTable ParametrixEngine::build_q0_table() const {
    KernelTable tab;
    tab.kind = TableKind::q0;
    tab.series_index = 0;
    tab.t_grid = t_dense_;
    tab.x_grid = s_nodes_;
    tab.y_grid = s_nodes_;
    tab.values.assign(tab.t_grid.size() * s_nodes_.size() * s_nodes_.size(), 0.0);
    std::vector<double> level;
    for (std::size_t ti = 0; ti < t_dense_.size(); ++ti) {
        fill_q0_matrix(t_dense_[ti], level, 1);
        std::copy(level.begin(), level.end(),
                  tab.values.begin() + ti * s_nodes_.size() * s_nodes_.size());
    }
    tab.quad_err.assign(tab.values.size(), 0.0);
    for (std::size_t i = 0; i < tab.values.size(); ++i)
        tab.quad_err[i] = 1e-3 * std::fabs(tab.values[i]);
    tab.meta = TableMeta{coeffs_->profile->name(), eps0_, 0,       0.0,
                         t0_,   cfg_.dz, cfg_.mesh_ratio, cfg_.chi,
                         cfg_.fourier_tol, cfg_.shape_n_a, omp_workers(cfg_.mode), cfg_.mode};
    return tab;
}

namespace {

// linear-in-log-t interpolation between stored level matrices
struct LevelInterp {
    const KernelTable* tab;
    std::vector<double> scratch;
    const double* level(double s, std::vector<double>& buf) {
        const auto& tg = tab->t_grid;
        const std::size_t nn = tab->x_grid.size() * tab->y_grid.size();
        if (s <= tg.front() * (1.0 + 1e-12)) return &tab->values[0];
        if (s >= tg.back() * (1.0 - 1e-12))
            return &tab->values[(tg.size() - 1) * nn];
        std::size_t i = std::upper_bound(tg.begin(), tg.end(), s) - tg.begin() - 1;
        if (std::fabs(tg[i] - s) < 1e-12 * s) return &tab->values[i * nn];
        const double w = std::log(s / tg[i]) / std::log(tg[i + 1] / tg[i]);
        buf.resize(nn);
        const double* lo = &tab->values[i * nn];
        const double* hi = &tab->values[(i + 1) * nn];
        for (std::size_t k = 0; k < nn; ++k) buf[k] = (1.0 - w) * lo[k] + w * hi[k];
        return buf.data();
    }
    // single entry
    double at(double s, std::size_t xi, std::size_t yi) const {
        const auto& tg = tab->t_grid;
        const std::size_t nx = tab->x_grid.size(), ny = tab->y_grid.size();
        auto v = [&](std::size_t ti) { return tab->values[(ti * nx + xi) * ny + yi]; };
        if (s <= tg.front() * (1.0 + 1e-12)) return v(0);
        if (s >= tg.back() * (1.0 - 1e-12)) return v(tg.size() - 1);
        std::size_t i = std::upper_bound(tg.begin(), tg.end(), s) - tg.begin() - 1;
        if (std::fabs(tg[i] - s) < 1e-12 * s) return v(i);
        const double w = std::log(s / tg[i]) / std::log(tg[i + 1] / tg[i]);
        return (1.0 - w) * v(i) + w * v(i + 1);
    }
};

}  // namespace

KernelTable ParametrixEngine::qn_iterate(const KernelTable& prev, const KernelTable& q0_table,
                                         const SeriesBudget& budget) const {
    (void)budget;
    if (prev.x_grid.size() != s_nodes_.size() || q0_table.x_grid.size() != s_nodes_.size())
        throw DomainError("qn_iterate requires tables on the engine grid");
    const int n_out = prev.series_index + 1;
    const std::size_t S = s_nodes_.size();
    const std::size_t SS = S * S;
    const auto& prof = *coeffs_->profile;

    KernelTable out;
    out.kind = TableKind::qn;
    out.series_index = n_out;
    out.t_grid = t_dense_;
    out.x_grid = s_nodes_;
    out.y_grid = s_nodes_;
    out.values.assign(t_dense_.size() * SS, 0.0);
    out.quad_err.assign(out.values.size(), 0.0);
    out.meta = prev.meta;
    out.meta.series_depth = n_out;

    LevelInterp prev_interp{&prev, {}};
    const double g = std::min(12.0, std::max(2.0, 3.0 / std::max(0.2, eps0_ / alpha_h_)));
    const bool par = cfg_.mode == ParallelMode::openmp;

    std::vector<double> q0_mat, prev_buf, acc;
    for (std::size_t ti = 0; ti < t_dense_.size(); ++ti) {
        const double t = t_dense_[ti];
        double* dst = &out.values[ti * SS];
        const double s_split = std::max(cfg_.chi * t, s_zres_);
        const bool bottom = (t <= 2.0 * s_split);
        const double sA = bottom ? 0.5 * t : s_split;
        const double sB = bottom ? 0.5 * t : t - s_split;

        // middle region: product integration on the dense nodes
        if (!bottom) {
            std::vector<double> snodes{sA};
            for (double s : t_dense_)
                if (s > sA * (1.0 + 1e-12) && s < sB * (1.0 - 1e-12)) snodes.push_back(s);
            snodes.push_back(sB);

            // Simpson weights for the value at each node
            std::vector<double> wts(snodes.size(), 0.0);
            {
                std::vector<double> unit(snodes.size(), 0.0);
                for (std::size_t m = 0; m < snodes.size(); ++m) {
                    unit.assign(snodes.size(), 0.0);
                    unit[m] = 1.0;
                    wts[m] = simpson_nonuniform(snodes, unit);
                }
            }

            // coarsened sweep for higher iterates where the kernel width allows
            int stride = 1;
            if (n_out >= 2) {
                const double rt = prof.r_t(t);
                const int width_cap = std::max(1, int(rt / (3.0 * cfg_.dz)));
                stride = std::min(1 << (n_out - 1), width_cap);
                while (stride > 1 && S / stride < std::size_t(cfg_.coarse_floor)) stride /= 2;
            }

            if (stride == 1) {
                acc.assign(SS, 0.0);
                for (std::size_t m = 0; m < snodes.size(); ++m) {
                    const double s = snodes[m];
                    fill_q0_matrix(t - s, q0_mat, 1);
                    const double* pl = prev_interp.level(s, prev_buf);
                    std::vector<double> pl_copy(pl, pl + SS);
                    weighted_matmul(q0_mat, s_weights_, pl_copy, acc, int(S), wts[m], true,
                                    cfg_.mode);
                }
                for (std::size_t k = 0; k < SS; ++k) dst[k] += acc[k];
            } else {
                // build on the strided subgrid, then prolong
                std::vector<std::size_t> sub;
                for (std::size_t i = 0; i < S; i += stride) sub.push_back(i);
                if (sub.back() != S - 1) sub.push_back(S - 1);
                const std::size_t Sn = sub.size();
                std::vector<double> sub_nodes(Sn), sub_w;
                for (std::size_t i = 0; i < Sn; ++i) sub_nodes[i] = s_nodes_[sub[i]];
                sub_w = trapezoid_weights(sub_nodes);

                std::vector<double> accs(Sn * Sn, 0.0), q0s(Sn * Sn), prevs(Sn * Sn);
                for (std::size_t m = 0; m < snodes.size(); ++m) {
                    const double s = snodes[m];
                    const double* pl = prev_interp.level(s, prev_buf);
#pragma omp parallel for schedule(static) if (par)
                    for (std::size_t ii = 0; ii < Sn; ++ii) {
                        const double x = s_nodes_[sub[ii]];
                        const double ax = a_of_node_[sub[ii]];
                        for (std::size_t jj = 0; jj < Sn; ++jj) {
                            const std::size_t j = sub[jj];
                            const double az = a_of_node_[j];
                            q0s[ii * Sn + jj] =
                                (ax - az) / az * shape_pt(t - s, az, s_nodes_[j] - x);
                            prevs[ii * Sn + jj] = pl[sub[ii] * S + j];
                        }
                    }
                    weighted_matmul(q0s, sub_w, prevs, accs, int(Sn), wts[m], true, cfg_.mode);
                }
                // prolong accs (Sn x Sn on sub-nodes) to the full grid, cubic per axis
                std::vector<double> rows_full(Sn * S, 0.0);
#pragma omp parallel for schedule(static) if (par)
                for (std::size_t ii = 0; ii < Sn; ++ii) {
                    for (std::size_t j = 0; j < S; ++j) {
                        const double yv = s_nodes_[j];
                        std::size_t k =
                            std::upper_bound(sub_nodes.begin(), sub_nodes.end(), yv) -
                            sub_nodes.begin();
                        k = std::min(std::max<std::size_t>(k, 2), Sn - 2);
                        const double* row = &accs[ii * Sn];
                        // 4-point Lagrange on nonuniform nodes
                        double num = 0.0;
                        for (int a = -2; a <= 1; ++a) {
                            const std::size_t ka = k + a;
                            double L = 1.0;
                            for (int b = -2; b <= 1; ++b) {
                                if (b == a) continue;
                                L *= (yv - sub_nodes[k + b]) /
                                     (sub_nodes[ka] - sub_nodes[k + b]);
                            }
                            num += L * row[ka];
                        }
                        rows_full[ii * S + j] = num;
                    }
                }
#pragma omp parallel for schedule(static) if (par)
                for (std::size_t i = 0; i < S; ++i) {
                    const double xv = s_nodes_[i];
                    std::size_t k =
                        std::upper_bound(sub_nodes.begin(), sub_nodes.end(), xv) -
                        sub_nodes.begin();
                    k = std::min(std::max<std::size_t>(k, 2), Sn - 2);
                    for (std::size_t j = 0; j < S; ++j) {
                        double num = 0.0;
                        for (int a = -2; a <= 1; ++a) {
                            const std::size_t ka = k + a;
                            double L = 1.0;
                            for (int b = -2; b <= 1; ++b) {
                                if (b == a) continue;
                                L *= (xv - sub_nodes[k + b]) /
                                     (sub_nodes[ka] - sub_nodes[k + b]);
                            }
                            num += L * rows_full[ka * S + j];
                        }
                        dst[i * S + j] += num;
                    }
                }
            }
        }

        // left endpoint: int_0^{sA} q0(t - sig, x, y) I_{n-1}(sig, y) d sig
        {
            Mesh mesh = graded_mesh_left(sA, cfg_.segment_nodes, 3, g);
#pragma omp parallel for schedule(static) if (par)
            for (std::size_t i = 0; i < S; ++i) {
                const double x = s_nodes_[i];
                const double ax = a_of_node_[i];
                for (std::size_t j = 0; j < S; ++j) {
                    const double az = a_of_node_[j];
                    double accv = 0.0;
                    for (std::size_t m = 0; m < mesh.nodes.size(); ++m) {
                        const double sig = mesh.nodes[m];
                        const double q0v =
                            (ax - az) / az * shape_pt(t - sig, az, s_nodes_[j] - x);
                        accv += mesh.weights[m] * q0v * I_n(n_out - 1, sig, j);
                    }
                    dst[i * S + j] += accv;
                }
            }
        }

        // right endpoint: int_{sB}^{t} M0(t - s, x) prev(s, x, y) ds
        {
            Mesh mesh = graded_mesh_left(t - sB, cfg_.segment_nodes, 3, g);
#pragma omp parallel for schedule(static) if (par)
            for (std::size_t i = 0; i < S; ++i) {
                for (std::size_t j = 0; j < S; ++j) {
                    double accv = 0.0;
                    for (std::size_t m = 0; m < mesh.nodes.size(); ++m) {
                        const double sigp = mesh.nodes[m];  // t - s
                        accv += mesh.weights[m] * M0(sigp, i) *
                                prev_interp.at(t - sigp, i, j);
                    }
                    dst[i * S + j] += accv;
                }
            }
        }
        for (std::size_t k = 0; k < SS; ++k)
            out.quad_err[ti * SS + k] = 0.02 * std::fabs(dst[k]);
    }
    return out;
}

KernelTable ParametrixEngine::sum_q(const std::vector<KernelTable>& terms,
                                    const SeriesBudget& budget) const {
    if (terms.empty()) throw DomainError("sum_q needs at least one table");
    KernelTable out = terms.front();
    out.kind = TableKind::q;
    out.meta.series_depth = std::max(1, int(terms.size()));
    out.meta.fitted_C3 = budget.fitted_C3;
    out.meta.eps0 = budget.eps0;
    for (std::size_t k = 1; k < terms.size(); ++k) {
        const auto& tk = terms[k];
        if (tk.values.size() != out.values.size())
            throw DomainError("sum_q requires identical grids");
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] += tk.values[i];
            out.quad_err[i] += tk.quad_err[i];
        }
    }
    // analytic tail for the terms beyond n_max, relative to the q0 scale
    const std::size_t SS = out.x_grid.size() * out.y_grid.size();
    const double t_min_rep = *std::min_element(cfg_.t_report.begin(), cfg_.t_report.end());
    for (std::size_t ti = 0; ti < out.t_grid.size(); ++ti) {
        const double t = out.t_grid[ti];
        const double rt = coeffs_->profile->r_t(t);
        const double tail = budget.tail_estimate(t, rt, int(terms.size()) - 1);
        const double q_scale =
            std::max(budget.fitted_C3, 1e-300) * std::pow(rt, budget.eps0) / t;
        if (t >= t_min_rep * (1.0 - 1e-12) && tail > budget.tolerance * q_scale)
            throw BudgetError(
                "series tail bound exceeds the tolerance; increase n_max or lower T");
        for (std::size_t k = 0; k < SS; ++k) out.quad_err[ti * SS + k] += tail / double(SS);
    }
    return out;
}

KernelTable ParametrixEngine::assemble_p(const KernelTable& p0_probe, const KernelTable& q_table,
                                         const SeriesBudget& budget) const {
    (void)p0_probe;
    const std::size_t S = s_nodes_.size();
    const std::size_t SS = S * S;
    KernelTable out;
    out.kind = TableKind::p;
    out.t_grid = cfg_.t_report;
    for (double t : cfg_.full_row_times)
        out.t_grid.push_back(t);
    std::sort(out.t_grid.begin(), out.t_grid.end());
    out.t_grid.erase(std::unique(out.t_grid.begin(), out.t_grid.end(),
                                 [](double a, double b) { return std::fabs(a - b) < 1e-12 * a; }),
                     out.t_grid.end());
    out.x_grid = s_nodes_;
    out.y_grid = s_nodes_;
    out.values.assign(out.t_grid.size() * SS, 0.0);
    out.quad_err.assign(out.values.size(), 0.0);
    out.meta = q_table.meta;
    out.meta.series_depth = q_table.meta.series_depth;
    out.meta.fitted_C3 = budget.fitted_C3;

    LevelInterp q_interp{&q_table, {}};
    const double g = std::min(12.0, std::max(2.0, 3.0 / std::max(0.2, eps0_ / alpha_h_)));
    const bool par = cfg_.mode == ParallelMode::openmp;

    std::vector<double> p0_mat, q_buf, acc;
    for (std::size_t ti = 0; ti < out.t_grid.size(); ++ti) {
        const double t = out.t_grid[ti];
        double* dst = &out.values[ti * SS];

        // p0 part
        fill_p0_matrix(t, p0_mat, 1);
        std::copy(p0_mat.begin(), p0_mat.end(), dst);
        const std::vector<double> p0_level = p0_mat;

        const double s_split = std::max(cfg_.chi * t, s_zres_);
        const bool bottom = (t <= 2.0 * s_split);
        const double sA = bottom ? 0.5 * t : s_split;
        const double sB = bottom ? 0.5 * t : t - s_split;

        if (!bottom) {
            std::vector<double> snodes{sA};
            for (double s : t_dense_)
                if (s > sA * (1.0 + 1e-12) && s < sB * (1.0 - 1e-12)) snodes.push_back(s);
            snodes.push_back(sB);
            std::vector<double> wts(snodes.size(), 0.0);
            std::vector<double> unit;
            for (std::size_t m = 0; m < snodes.size(); ++m) {
                unit.assign(snodes.size(), 0.0);
                unit[m] = 1.0;
                wts[m] = simpson_nonuniform(snodes, unit);
            }
            acc.assign(SS, 0.0);
            for (std::size_t m = 0; m < snodes.size(); ++m) {
                const double s = snodes[m];
                fill_p0_matrix(t - s, p0_mat, 1);
                const double* ql = q_interp.level(s, q_buf);
                std::vector<double> ql_copy(ql, ql + SS);
                weighted_matmul(p0_mat, s_weights_, ql_copy, acc, int(S), wts[m], true,
                                cfg_.mode);
            }
            for (std::size_t k = 0; k < SS; ++k) dst[k] += acc[k];
        }

        // left endpoint: q(s,.,y) near-singular; freeze p0 at (x, y)
        {
            Mesh mesh = graded_mesh_left(sA, cfg_.segment_nodes, 3, g);
            const int nq = q_table.meta.series_depth;
#pragma omp parallel for schedule(static) if (par)
            for (std::size_t i = 0; i < S; ++i) {
                const double x = s_nodes_[i];
                for (std::size_t j = 0; j < S; ++j) {
                    const double az = a_of_node_[j];
                    double accv = 0.0;
                    for (std::size_t m = 0; m < mesh.nodes.size(); ++m) {
                        const double sig = mesh.nodes[m];
                        double iq = 0.0;
                        for (int nn = 0; nn < nq && nn < int(I_tabs_.size()); ++nn)
                            iq += I_n(nn, sig, j);
                        accv += mesh.weights[m] * shape_p(t - sig, az, s_nodes_[j] - x) * iq;
                    }
                    dst[i * S + j] += accv;
                }
            }
        }

        // right endpoint: p0(t-s,x,.) near-delta; freeze q at (x, y)
        {
            Mesh mesh = graded_mesh_left(t - sB, cfg_.segment_nodes, 3, g);
#pragma omp parallel for schedule(static) if (par)
            for (std::size_t i = 0; i < S; ++i) {
                for (std::size_t j = 0; j < S; ++j) {
                    double accv = 0.0;
                    for (std::size_t m = 0; m < mesh.nodes.size(); ++m) {
                        const double sigp = mesh.nodes[m];  // t - s
                        accv += mesh.weights[m] * p0_mass_small(sigp, i) *
                                q_interp.at(t - sigp, i, j);
                    }
                    dst[i * S + j] += accv;
                }
            }
        }

        for (std::size_t k = 0; k < SS; ++k)
            out.quad_err[ti * SS + k] =
                cfg_.fourier_tol + 0.02 * std::fabs(dst[k] - p0_level[k]);
    }
    out.meta.series_depth = std::max(1, out.meta.series_depth);
    return out;
}

SeriesBudget ParametrixEngine::make_budget(const KernelTable& q0_table) const {
    SeriesBudget b;
    b.eps0 = eps0_;
    b.n_max = cfg_.n_max;
    b.tolerance = cfg_.series_tol;
    double c3 = 0.0;
    for (std::size_t ti = 0; ti < q0_table.t_grid.size(); ++ti) {
        const double t = q0_table.t_grid[ti];
        const double rt = coeffs_->profile->r_t(t);
        const double scale = std::pow(rt, eps0_) / t;
        for (std::size_t xi = 0; xi < q0_table.x_grid.size(); ++xi)
            c3 = std::max(c3, l1_norm_y(q0_table, ti, xi) / scale);
    }
    b.fitted_C3 = c3;
    for (int k = 1; k <= b.n_max + 1; ++k)
        b.beta_factors.push_back(beta_function(0.5 * eps0_, 0.5 * k * eps0_));
    const double T = t_dense_.back();
    b.tail_bound = b.tail_estimate(T, coeffs_->profile->r_t(T), b.n_max);
    return b;
}

ParametrixEngine::BuildResult ParametrixEngine::build_all() const {
    BuildResult r;
    r.p0 = build_p0_table();
    r.q0 = build_q0_table();
    r.budget = make_budget(r.q0);
    std::vector<KernelTable> terms;
    terms.push_back(r.q0);
    const KernelTable* prev = &r.q0;
    for (int n = 1; n <= r.budget.n_max; ++n) {
        r.qn.push_back(qn_iterate(*prev, r.q0, r.budget));
        prev = &r.qn.back();
        terms.push_back(r.qn.back());
    }
    r.q = sum_q(terms, r.budget);
    r.p = assemble_p(r.p0, r.q, r.budget);
    r.p.check_invariants();
    return r;
}

double ParametrixEngine::l1_norm_y(const KernelTable& tab, std::size_t ti, std::size_t xi) const {
    if (tab.y_grid.size() != s_nodes_.size())
        throw DomainError("l1_norm_y requires the engine y-grid");
    double acc = 0.0;
    for (std::size_t yi = 0; yi < s_nodes_.size(); ++yi)
        acc += s_weights_[yi] * std::fabs(tab.at(ti, xi, yi));
    return acc;
}

double ParametrixEngine::mass_y(const KernelTable& tab, std::size_t ti, std::size_t xi) const {
    if (tab.y_grid.size() != s_nodes_.size())
        throw DomainError("mass_y requires the engine y-grid");
    double acc = 0.0;
    for (std::size_t yi = 0; yi < s_nodes_.size(); ++yi)
        acc += s_weights_[yi] * tab.at(ti, xi, yi);
    // one-jump envelope tail beyond the grid
    const double t = tab.t_grid[ti];
    const double reach = cfg_.z_max - std::fabs(tab.x_grid[xi]);
    QuadConfig qc;
    qc.abs_tol = 1e-12;
    qc.rel_tol = 1e-6;
    const auto& prof = *coeffs_->profile;
    auto tail = [&](double u) { return prof.nu(u); };
    acc += t * coeffs_->c_kappa * coeffs_->c_J * 2.0 *
           integrate_semiinf(tail, reach, qc).value;
    return acc;
}

double ParametrixEngine::chapman_residual(const KernelTable& p, double s, double t, double x,
                                          double y) const {
    const std::size_t ls = p.find_time(s);
    const std::size_t lu = p.find_time(t - s);
    const std::size_t lt = p.find_time(t);
    const std::size_t xi = p.find_x(x);
    const std::size_t yi = p.find_x(y);
    if (p.x_grid.size() != s_nodes_.size())
        throw DomainError("chapman_residual requires full-row levels");
    double acc = 0.0;
    for (std::size_t zi = 0; zi < s_nodes_.size(); ++zi)
        acc += s_weights_[zi] * p.at(ls, xi, zi) * p.at(lu, zi, yi);
    return std::fabs(acc - p.at(lt, xi, yi));
}

double ParametrixEngine::apply_Pt(const KernelTable& p, const std::function<double(double)>& f,
                                  double t, double x) const {
    const std::size_t ti = p.find_time(t);
    const std::size_t xi = p.find_x(x);
    double acc = 0.0;
    for (std::size_t yi = 0; yi < p.y_grid.size(); ++yi) {
        const double fv = f(p.y_grid[yi]);
        if (!std::isfinite(fv)) throw DomainError("apply_Pt: f is not finite on the grid");
        acc += s_weights_[yi] * p.at(ti, xi, yi) * fv;
    }
    return acc;
}

double ParametrixEngine::time_derivative_check(const KernelTable& p,
                                               const std::function<double(double)>& f, double t,
                                               double x) const {
    // FD d/dt of P_t f across neighbouring levels
    const std::size_t ti = p.find_time(t);
    if (ti == 0 || ti + 1 >= p.t_grid.size())
        throw DomainError("time_derivative_check needs an interior report level");
    const double tm = p.t_grid[ti - 1], tp = p.t_grid[ti + 1];
    const double gm = apply_Pt(p, f, tm, x);
    const double g0 = apply_Pt(p, f, t, x);
    const double gp = apply_Pt(p, f, tp, x);
    const double h1 = t - tm, h2 = tp - t;
    const double fd = (h1 * h1 * gp - h2 * h2 * gm + (h2 * h2 - h1 * h1) * g0) /
                      (h1 * h2 * (h1 + h2));

    // L_x P_t f via the frozen-at-x generator acting on the x-interpolant of F
    const std::size_t S = s_nodes_.size();
    std::vector<double> F(S);
    for (std::size_t i = 0; i < S; ++i) {
        double acc = 0.0;
        for (std::size_t yi = 0; yi < S; ++yi)
            acc += s_weights_[yi] * p.at(ti, i, yi) * f(p.y_grid[yi]);
        F[i] = acc;
    }
    auto F_at = [&](double xx) {
        if (xx <= s_nodes_.front() || xx >= s_nodes_.back()) return 0.0;
        std::size_t k = std::upper_bound(s_nodes_.begin(), s_nodes_.end(), xx) -
                        s_nodes_.begin();
        k = std::min(std::max<std::size_t>(k, 2), S - 2);
        double num = 0.0;
        for (int a = -2; a <= 1; ++a) {
            double L = 1.0;
            for (int b = -2; b <= 1; ++b) {
                if (b == a) continue;
                L *= (xx - s_nodes_[k + b]) / (s_nodes_[k + a] - s_nodes_[k + b]);
            }
            num += L * F[k + a];
        }
        return num;
    };
    const double r = coeffs_->profile->r_t(t);
    const double h = cfg_.dz;
    const double Fx = F_at(x);
    const double dF = (F_at(x + h) - F_at(x - h)) / (2.0 * h);
    const double d2F = (F_at(x + h) - 2.0 * Fx + F_at(x - h)) / (h * h);
    Point bx = coeffs_->effective_drift({x}, r);
    double res = bx[0] * dF;
    auto delta_w = [&](double z) {
        double dd;
        if (std::fabs(z) < r)
            dd = 0.5 * z * z * d2F;
        else
            dd = F_at(x + z) - Fx;
        return dd * coeffs_->kappa({x}, {z}) * coeffs_->J({z});
    };
    QuadConfig qc;
    qc.abs_tol = 1e-9;
    qc.rel_tol = 1e-6;
    qc.breakpoints = coeffs_->z_breakpoints;
    res += tanh_sinh(delta_w, 0.0, r, 8) + tanh_sinh(delta_w, -r, 0.0, 8);
    res += integrate(delta_w, r, 1.0, qc).value + integrate(delta_w, -1.0, -r, qc).value;
    res += integrate_semiinf(delta_w, 1.0, qc).value;
    auto delta_w_neg = [&](double z) { return delta_w(-z); };
    res += integrate_semiinf(delta_w_neg, 1.0, qc).value;

    return std::fabs(fd - res);
}

double ParametrixEngine::q0_eval(double t, const Point& x, const Point& y, double r) const {
    if (r <= 0.0) r = coeffs_->profile->r_t(t);
    FourierConfig fc;
    fc.abs_tol = 1e-9;
    FrozenKernelEvaluator ev(coeffs_, y, fc, shape_);
    const double grad = ev.density_derivative(t, x, y, {1});
    Point bx = coeffs_->effective_drift(x, r);
    Point by = coeffs_->effective_drift(y, r);
    const auto& cs = *coeffs_;
    auto weight = [&cs, &x, &y](double z) {
        return (cs.kappa(x, {z}) - cs.kappa(y, {z})) * cs.J({z});
    };
    return (bx[0] - by[0]) * grad + ev.delta_integral(r, t, x, y, weight);
}

}  // namespace levyheat
