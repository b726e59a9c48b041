#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "levyheat/coefficients.hpp"
#include "levyheat/parametrix.hpp"

namespace levyheat {

/// One UTF-8 key = value file drives a whole run; no flags override anything
/// except --force and --out. Repeated keys are collected (piecewise pieces).
struct RunConfig {
    std::string profile_spec = "builtin:inverse-square";
    int dimension = 1;
    std::string coefficients = "catalog:cauchy-const";
    std::vector<PiecewiseFn::Piece> a_pieces, k_pieces;
    double c_J = 1.0, c_kappa = 1.0, eps_kappa = 1.0;
    bool has_drift_override = false;
    double sigma = 1.0;
    std::vector<std::pair<double, double>> pairs{{1.0, 1.0}};
    Variant variant = Variant::A_star;
    bool has_alpha_override = false;
    double alpha_h = 1.0;
    double C_h_budget = 0.0;  // 0 = twice the catalog claim

    BuildConfig build;
    std::uint64_t seed = 12345;
    std::string out_dir = "out";
    double mass_tol = 1e-2;
    double ck_tol = 5e-2;
    double refine = 1.0;

    static RunConfig from_file(const std::string& path);

    /// Catalog entry (with any drift/alpha overrides applied) plus the build
    /// config adjusted for the refinement factor.
    CatalogEntry materialize() const;
    BuildConfig build_config(const CatalogEntry& entry) const;
};

void write_table_csv(const KernelTable& tab, const std::string& path);
KernelTable read_table_csv(const std::string& path);

void write_manifest(const RunConfig& cfg, const ParametrixEngine& engine,
                    const SeriesBudget& budget, const std::string& path);

}  // namespace levyheat
