// Batch front-end for heat-kernel construction and verification of
// non-symmetric Levy-type operators. Subcommands: check-assumptions, build,
// verify, export, bench. Exit codes: 0 pass, 1 check/verify failure,
// 2 usage/config error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "levyheat/config.hpp"
#include "levyheat/estimates.hpp"
#include "levyheat/oracles.hpp"

namespace fs = std::filesystem;
using namespace levyheat;

namespace {

struct AssumptionOutcome {
    bool pass = true;
    std::vector<VerificationReport> reports;
};

AssumptionOutcome run_assumption_checks(const RunConfig& cfg, const CatalogEntry& entry) {
    AssumptionOutcome out;
    const auto& cs = entry.coeffs;
    const auto& prof = *cs.profile;
    prof.validate();

    const double budget = (cfg.C_h_budget > 0.0) ? cfg.C_h_budget
                                                 : std::max(10.0, 2.0 * entry.claimed_C_h);
    ScalingCertificate cert = certify_scaling(prof, entry.claimed_alpha_h, budget);
    VerificationReport scaling;
    scaling.name = "weak_scaling";
    scaling.fitted_constant = cert.C_h;
    scaling.tolerance = budget;
    scaling.worst_ratio = cert.max_violation;
    scaling.pass = cert.pass;
    out.reports.push_back(scaling);

    std::vector<Point> xs, zs, ys;
    for (double v : {-2.0, -0.5, 0.1, 0.25, 0.5, 0.9, 1.5, 3.0}) {
        xs.push_back({v});
        ys.push_back({v + 0.3});
        zs.push_back({v});
    }
    out.reports.push_back(check_J_comparability(cs, zs));
    out.reports.push_back(check_kappa_bounds(cs, xs, zs));
    out.reports.push_back(check_kappa_holder(cs, xs, ys, zs));

    std::vector<double> r_grid;
    for (int i = 0; i < 64; ++i) r_grid.push_back(std::pow(10.0, -4.0 + 4.0 * i / 63.0));
    out.reports.push_back(check_cancellation_scale(cs, entry.drift, xs, r_grid));

    std::vector<std::pair<Point, Point>> pairs;
    for (const auto& x : xs)
        for (const auto& y : ys) pairs.emplace_back(x, y);
    out.reports.push_back(check_holder_drift(cs, entry.drift, pairs, r_grid));

    VerificationReport window;
    window.name = "eps0_window";
    try {
        Epsilon0Window w = epsilon0_window(entry.drift, entry.claimed_alpha_h, cs.eps_kappa);
        window.fitted_constant = w.hi;
        window.pass = true;
    } catch (const AssumptionError& e) {
        window.pass = false;
        window.worst_location = e.what();
    }
    out.reports.push_back(window);

    for (const auto& r : out.reports) out.pass = out.pass && r.pass;
    return out;
}

void write_reports(const std::vector<VerificationReport>& reports, const std::string& path) {
    std::ofstream os(path);
    for (const auto& r : reports) r.write_jsonl(os);
}

int cmd_check_assumptions(const std::string& config_path, std::string out_override) {
    RunConfig cfg = RunConfig::from_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    CatalogEntry entry = cfg.materialize();
    fs::create_directories(cfg.out_dir);
    AssumptionOutcome res = run_assumption_checks(cfg, entry);
    write_reports(res.reports, cfg.out_dir + "/assumptions.jsonl");
    for (const auto& r : res.reports)
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name
                  << " (fitted=" << r.fitted_constant << ")\n";
    return res.pass ? 0 : 1;
}

int cmd_build(const std::string& config_path, std::string out_override, bool force) {
    RunConfig cfg = RunConfig::from_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    CatalogEntry entry = cfg.materialize();
    fs::create_directories(cfg.out_dir);

    if (!force) {
        AssumptionOutcome res = run_assumption_checks(cfg, entry);
        if (!res.pass) {
            write_reports(res.reports, cfg.out_dir + "/assumptions.jsonl");
            std::cerr << "assumption checks failed; rerun with --force to build anyway\n";
            return 1;
        }
    }

    auto cs = std::make_shared<CoefficientSet>(entry.coeffs);
    ParametrixEngine engine(cs, entry.drift, cfg.build_config(entry));
    try {
        auto build = engine.build_all();
        write_table_csv(build.p0, cfg.out_dir + "/p0.csv");
        write_table_csv(build.q0, cfg.out_dir + "/q0.csv");
        for (std::size_t n = 0; n < build.qn.size(); ++n)
            write_table_csv(build.qn[n], cfg.out_dir + "/q" + std::to_string(n + 1) + ".csv");
        write_table_csv(build.q, cfg.out_dir + "/q.csv");
        write_table_csv(build.p, cfg.out_dir + "/p.csv");
        write_manifest(cfg, engine, build.budget, cfg.out_dir + "/manifest.json");
        std::cout << "tables written to " << cfg.out_dir << "\n";
        return 0;
    } catch (const BudgetError& e) {
        SeriesBudget empty;
        write_manifest(cfg, engine, empty, cfg.out_dir + "/manifest.json");
        std::cerr << "build stopped: " << e.what() << "\n";
        return 1;
    } catch (const ResolutionError& e) {
        SeriesBudget empty;
        write_manifest(cfg, engine, empty, cfg.out_dir + "/manifest.json");
        std::cerr << "build stopped: " << e.what() << "\n";
        return 1;
    }
}

int cmd_verify(const std::string& config_path, const std::string& table_dir,
               std::string out_override) {
    RunConfig cfg = RunConfig::from_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (!fs::exists(table_dir + "/p.csv") || !fs::exists(table_dir + "/manifest.json")) {
        std::cerr << "missing tables in " << table_dir << "\n";
        return 2;
    }
    CatalogEntry entry = cfg.materialize();
    auto cs = std::make_shared<CoefficientSet>(entry.coeffs);
    ParametrixEngine engine(cs, entry.drift, cfg.build_config(entry));

    KernelTable p = read_table_csv(table_dir + "/p.csv");
    p.kind = TableKind::p;
    p.meta.series_depth = 1;
    KernelTable q0 = read_table_csv(table_dir + "/q0.csv");
    q0.kind = TableKind::q0;

    ParametrixEngine::BuildResult build;
    build.p = std::move(p);
    build.q0 = std::move(q0);
    build.budget = engine.make_budget(build.q0);

    ResidualTolerances tol;
    tol.mass = cfg.mass_tol;
    tol.chapman = cfg.ck_tol;
    auto residuals = run_residual_suite(engine, build, tol);

    EnvelopeSpec spec = make_envelope_spec(entry.drift, entry.claimed_alpha_h,
                                           entry.coeffs.eps_kappa);
    EnvelopeFit fit = fit_envelope(build.p, spec, entry.coeffs);

    fs::create_directories(cfg.out_dir);
    std::ofstream os(cfg.out_dir + "/verify.jsonl");
    bool pass = true;
    for (const auto& r : residuals) {
        nlohmann::json j{{"check", r.name},      {"grid_point", r.inputs},
                         {"lhs", r.engine_value}, {"rhs", r.oracle_value},
                         {"ratio", r.rel_err},    {"pass", r.pass}};
        os << j.dump() << "\n";
        pass = pass && r.pass;
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " " << r.inputs << "\n";
    }
    nlohmann::json env{{"check", "envelope"},
                       {"type", "envelope"},
                       {"fitted_c", fit.c},
                       {"argmax", {fit.t_at, fit.x_at, fit.y_at}},
                       {"violation", fit.violation},
                       {"eps0", engine.eps0()}};
    os << env.dump() << "\n";
    pass = pass && std::isfinite(fit.c) && !fit.violation;
    std::cout << (pass ? "PASS" : "FAIL") << " envelope fitted_c=" << fit.c << "\n";
    return pass ? 0 : 1;
}

int cmd_export(const std::string& config_path, const std::string& table_dir, double t_slice,
               double x0, bool have_t, bool have_x0, const std::string& out_file) {
    RunConfig cfg = RunConfig::from_file(config_path);
    if (!fs::exists(table_dir + "/p.csv")) {
        std::cerr << "missing tables in " << table_dir << "\n";
        return 2;
    }
    KernelTable p = read_table_csv(table_dir + "/p.csv");
    CatalogEntry entry = cfg.materialize();

    std::ofstream os(out_file.empty() ? (table_dir + "/slice.csv") : out_file);
    if (!have_t) {
        // full table echo
        os << "t,x,y,value,quad_err\n";
        for (std::size_t ti = 0; ti < p.t_grid.size(); ++ti)
            for (std::size_t xi = 0; xi < p.x_grid.size(); ++xi)
                for (std::size_t yi = 0; yi < p.y_grid.size(); ++yi) {
                    char buf[200];
                    std::snprintf(buf, sizeof buf, "%.16e,%.16e,%.16e,%.16e,%.16e\n",
                                  p.t_grid[ti], p.x_grid[xi], p.y_grid[yi],
                                  p.at(ti, xi, yi), p.quad_err[p.index(ti, xi, yi)]);
                    os << buf;
                }
        return 0;
    }
    std::size_t ti, xi;
    try {
        ti = p.find_time(t_slice);
        xi = have_x0 ? p.find_x(x0) : 0;
    } catch (const RangeError& e) {
        std::cerr << "slice outside grid: " << e.what() << "\n";
        return 2;
    }
    EnvelopeSpec spec = make_envelope_spec(entry.drift, entry.claimed_alpha_h,
                                           entry.coeffs.eps_kappa);
    os << "y,p,envelope_unit_c\n";
    for (std::size_t yi = 0; yi < p.y_grid.size(); ++yi) {
        double env = 0.0;
        try {
            env = pointwise_bound(spec, entry.coeffs, t_slice, {p.x_grid[xi]},
                                  {p.y_grid[yi]});
        } catch (const AssumptionError&) {
            env = std::nan("");
        }
        char buf[160];
        std::snprintf(buf, sizeof buf, "%.16e,%.16e,%.16e\n", p.y_grid[yi],
                      p.at(ti, xi, yi), env);
        os << buf;
    }
    return 0;
}

int cmd_bench(const std::string& config_path) {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
    if (cfg.build.t_report.empty()) {
        cfg.build.t_report = {0.02, 0.05};
        cfg.build.x_probes = {-0.5, 0.25, 1.0};
        cfg.build.dz = 0.02;
        cfg.build.n_max = 2;
    }
    CatalogEntry entry =
        config_path.empty() ? example_catalog("ex1") : cfg.materialize();
    auto cs = std::make_shared<CoefficientSet>(entry.coeffs);

    auto run = [&](ParallelMode mode) {
        BuildConfig bc = cfg.build_config(entry);
        bc.mode = mode;
        ParametrixEngine engine(cs, entry.drift, bc);
        auto t0 = std::chrono::steady_clock::now();
        auto build = engine.build_all();
        auto t1 = std::chrono::steady_clock::now();
        return std::pair<double, KernelTable>(
            std::chrono::duration<double>(t1 - t0).count(), std::move(build.p));
    };
    auto [ts, ps] = run(ParallelMode::serial);
    auto [tp, pp] = run(ParallelMode::openmp);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < ps.values.size(); ++i)
        max_diff = std::max(max_diff, std::fabs(ps.values[i] - pp.values[i]));
    std::cout << "serial  " << ts << " s\n";
    std::cout << "openmp  " << tp << " s\n";
    std::cout << "speedup " << ts / tp << "\n";
    std::cout << "max |serial - openmp| = " << max_diff << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heat kernels of non-symmetric Levy-type operators"};
    app.require_subcommand(1);

    std::string config_path, out_dir, table_dir, out_file;
    bool force = false;
    double t_slice = 0.0, x0 = 0.0;

    auto* c_check = app.add_subcommand("check-assumptions", "certify the assumption bundle");
    c_check->add_option("--config", config_path)->required();
    c_check->add_option("--out", out_dir);

    auto* c_build = app.add_subcommand("build", "build p0/q0/qn/q/p tables");
    c_build->add_option("--config", config_path)->required();
    c_build->add_option("--out", out_dir);
    c_build->add_flag("--force", force, "skip the assumption gate");

    auto* c_verify = app.add_subcommand("verify", "run residual suite on built tables");
    c_verify->add_option("--config", config_path)->required();
    c_verify->add_option("--tables", table_dir)->required();
    c_verify->add_option("--out", out_dir);

    auto* c_export = app.add_subcommand("export", "export plot slices");
    c_export->add_option("--config", config_path)->required();
    c_export->add_option("--tables", table_dir)->required();
    auto* topt = c_export->add_option("--t", t_slice);
    auto* xopt = c_export->add_option("--x0", x0);
    c_export->add_option("--out", out_file);

    auto* c_bench = app.add_subcommand("bench", "serial vs OpenMP build comparison");
    c_bench->add_option("--config", config_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (c_check->parsed()) return cmd_check_assumptions(config_path, out_dir);
        if (c_build->parsed()) return cmd_build(config_path, out_dir, force);
        if (c_verify->parsed()) return cmd_verify(config_path, table_dir, out_dir);
        if (c_export->parsed())
            return cmd_export(config_path, table_dir, t_slice, x0, topt->count() > 0,
                              xopt->count() > 0, out_file);
        if (c_bench->parsed()) return cmd_bench(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
