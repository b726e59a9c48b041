#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "levyheat/coefficients.hpp"
#include "levyheat/common.hpp"
#include "levyheat/frozen.hpp"

namespace levyheat {

enum class TableKind { p0, q0, qn, q, p };
enum class ParallelMode { serial, openmp };

std::string table_kind_name(TableKind k);

struct TableMeta {
    std::string coefficients;
    double eps0 = 0.0;
    int series_depth = 0;
    double fitted_C3 = 0.0;
    double t0 = 0.0;
    double dz = 0.0;
    double mesh_ratio = 0.0;
    double chi = 0.0;
    double fourier_tol = 0.0;
    int shape_n_a = 0;
    int workers = 1;
    ParallelMode mode = ParallelMode::openmp;
};

/// Immutable dense grid of kernel values over (t, x, y), with per-entry
/// quadrature-error estimates and build provenance. x_grid is the probe set
/// for reported tables and the full spatial grid for intermediate ones.
struct KernelTable {
    TableKind kind = TableKind::p0;
    int series_index = 0;  // n for kind = qn
    std::vector<double> t_grid;
    std::vector<double> x_grid;
    std::vector<double> y_grid;
    std::vector<double> values;
    std::vector<double> quad_err;
    TableMeta meta;

    std::size_t index(std::size_t ti, std::size_t xi, std::size_t yi) const {
        return (ti * x_grid.size() + xi) * y_grid.size() + yi;
    }
    double at(std::size_t ti, std::size_t xi, std::size_t yi) const {
        return values[index(ti, xi, yi)];
    }
    double& at(std::size_t ti, std::size_t xi, std::size_t yi) {
        return values[index(ti, xi, yi)];
    }
    std::size_t find_time(double t) const;      // exact level lookup (1e-12 rel)
    std::size_t find_x(double x) const;
    void check_invariants() const;              // finite entries; p >= -tol; depth
};

/// Error-series accounting: the admissible exponent, the truncation depth and
/// the Beta-factor tail machinery driven by the *fitted* C3.
struct SeriesBudget {
    double eps0 = 0.0;
    int n_max = 3;
    double tail_bound = 0.0;
    std::vector<double> beta_factors;  // B(eps0/2, k eps0/2), k = 1..
    double fitted_C3 = 0.0;
    double tolerance = 5e-3;

    /// sup-norm style tail estimate sum_{n > from_n} C3^{n+1} prod B * t^{-1} r_t^{(n+1) eps0}.
    double tail_estimate(double t, double r_t, int from_n) const;
};

struct BuildConfig {
    std::vector<double> t_report;     // report times, all <= t0
    std::vector<double> x_probes;     // report x locations
    std::vector<double> full_row_times;  // levels built with rows at every grid node
    double core_pad = 1.6;            // spatial core beyond the probe hull
    double dz = 0.012;                // core spacing
    double z_max = 60.0;              // extent of the geometric tail nodes
    double tail_ratio = 1.12;
    double mesh_ratio = 1.10;         // dense time-mesh growth factor
    double mesh_floor_factor = 0.08;  // lowest dense node ~ factor * min(t_report)
    double chi = 0.10;                // endpoint fraction handled by moment segments
    int segment_nodes = 10;           // graded panels for endpoint segments
    double eps0 = 0.0;                // 0 = midpoint of the admissible window
    int n_max = 3;
    double series_tol = 5e-3;
    int shape_n_a = 25;
    double shape_du = 0.008;
    double shape_u_core = 12.0;
    double fourier_tol = 1e-8;
    int moment_nodes = 64;            // graded u-mesh size for moment tables
    int coarse_floor = 96;            // spatial floor for coarsened n >= 2 sweeps
    double alpha_h = 1.0;             // certified scaling order (grading + window)
    ParallelMode mode = ParallelMode::openmp;

    /// Scale the resolution knobs by f (2 = one refinement level).
    BuildConfig refined(double f) const;
};

/// The parametrix pipeline over one coefficient set: the frozen zero-order
/// kernel p0, the error kernel q0, the Volterra iterates q_n, their sum q and
/// the assembled heat kernel p. Tables live on a geometric time mesh (report
/// times snapped in) and one shared spatial grid; endpoint regions of the
/// time integrals, where either factor is narrower than the grid can resolve,
/// are handled by zeroth-moment freezing with dedicated moment tables.
class ParametrixEngine {
public:
    ParametrixEngine(std::shared_ptr<const CoefficientSet> coeffs, DriftParameters drift,
                     BuildConfig cfg);

    // -- pointwise spec operations -------------------------------------------------
    /// q0(t,x,y) by the real-space route: (b_r^x - b_r^y) . grad_x p^{K_y}
    /// + int delta_r (kappa(x,.) - kappa(y,.)) J, r defaulting to r_t.
    /// r-invariance is asserted on spot checks by the tests.
    double q0_eval(double t, const Point& x, const Point& y, double r = -1.0) const;

    /// Fast-path value used by table builds (product coefficients).
    double q0_fast(double t, double x, double y) const;
    double p0_fast(double t, double x, double y) const;

    // -- table pipeline ------------------------------------------------------------
    KernelTable build_p0_table() const;
    KernelTable build_q0_table() const;
    KernelTable qn_iterate(const KernelTable& prev, const KernelTable& q0_table,
                           const SeriesBudget& budget) const;
    KernelTable sum_q(const std::vector<KernelTable>& terms, const SeriesBudget& budget) const;
    KernelTable assemble_p(const KernelTable& p0_probe, const KernelTable& q_table,
                           const SeriesBudget& budget) const;

    struct BuildResult {
        KernelTable p0, q0, q, p;
        std::vector<KernelTable> qn;  // n = 1..n_max
        SeriesBudget budget;
    };
    BuildResult build_all() const;

    SeriesBudget make_budget(const KernelTable& q0_table) const;

    // -- functionals ----------------------------------------------------------------
    double apply_Pt(const KernelTable& p, const std::function<double(double)>& f, double t,
                    double x) const;
    /// |FD d/dt P_t f - L_x P_t f| at a probe; validation only.
    double time_derivative_check(const KernelTable& p, const std::function<double(double)>& f,
                                 double t, double x) const;
    /// |int p(s,x,z) p(t-s,z,y) dz - p(t,x,y)|; needs full rows at s and t-s.
    double chapman_residual(const KernelTable& p, double s, double t, double x, double y) const;

    double l1_norm_y(const KernelTable& tab, std::size_t ti, std::size_t xi) const;
    double mass_y(const KernelTable& tab, std::size_t ti, std::size_t xi) const;

    // -- introspection ---------------------------------------------------------------
    const std::vector<double>& spatial_nodes() const { return s_nodes_; }
    const std::vector<double>& spatial_weights() const { return s_weights_; }
    const std::vector<double>& dense_times() const { return t_dense_; }
    const std::vector<std::size_t>& probe_indices() const { return probe_idx_; }
    const BuildConfig& config() const { return cfg_; }
    const CoefficientSet& coeffs() const { return *coeffs_; }
    double eps0() const { return eps0_; }
    double t0() const { return t0_; }

    /// p shape and dp/dt at arbitrary (t, a, u) by log-t interpolation between
    /// the prepared shape tables (exposed for the oracles).
    double shape_p(double t, double a, double u) const;
    double shape_pt(double t, double a, double u) const;

private:
    void build_spatial_grid();
    void build_time_meshes();
    void build_shapes();
    void build_moments();

    // moment tables on the graded u-mesh: I0/In (first-argument integrals of
    // q0/qn), M0 (second-argument integral of q0), pmass (mass of p0).
    double interp_moment(const std::vector<double>& tab, double u, std::size_t yi) const;
    double I_n(int n, double s, std::size_t yi) const;
    double M0(double u, std::size_t xi) const;
    double p0_mass_small(double u, std::size_t xi) const;

    // level machinery
    void fill_q0_matrix(double t, std::vector<double>& m, int stride) const;
    void fill_p0_matrix(double t, std::vector<double>& m, int stride) const;

    std::shared_ptr<const CoefficientSet> coeffs_;
    DriftParameters drift_;
    BuildConfig cfg_;
    std::shared_ptr<const SymbolShape> shape_;
    double t0_ = 0.0;
    double eps0_ = 0.0;
    double alpha_h_ = 1.0;

    std::vector<double> s_nodes_, s_weights_;
    std::vector<double> a_of_node_;          // a(z) per spatial node
    std::vector<std::size_t> probe_idx_;
    double core_lo_ = 0.0, core_hi_ = 0.0;

    std::vector<double> t_dense_;            // table levels (geometric + report)
    std::vector<double> t_shape_;            // shape-table times (extends below)
    std::vector<std::unique_ptr<ProductShapeTable>> shapes_;

    std::vector<double> moment_u_;           // graded u-mesh for moment tables
    std::vector<std::vector<double>> I_tabs_;  // I_n[u-mesh * S], n = 0..
    std::vector<double> M0_tab_;               // [u-mesh * S]
    std::vector<double> pmass_tab_;            // [u-mesh * S]
    double s_zres_ = 0.0;                       // r_s = 3 dz resolvability time
};

/// Nonuniform composite Simpson on increasing nodes (used for the dense-mesh
/// time integrals; falls back to trapezoid on the last odd gap).
double simpson_nonuniform(const std::vector<double>& s, const std::vector<double>& f);

}  // namespace levyheat
