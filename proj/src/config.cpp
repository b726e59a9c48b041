#include "levyheat/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json.hpp"

namespace levyheat {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_num(const std::string& s) {
    const std::string t = trim(s);
    if (t == "inf" || t == "+inf") return 1e308;
    if (t == "-inf") return -1e308;
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + t + "'");
    }
    if (pos != t.size()) throw ConfigError("trailing junk in number: '" + t + "'");
    return v;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(parse_num(item));
    }
    return out;
}

std::vector<std::pair<double, double>> parse_pairs(const std::string& s) {
    // (a,b);(c,d)
    std::vector<std::pair<double, double>> out;
    std::string cur;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == ';') {
            std::string p = trim(cur);
            cur.clear();
            if (p.empty()) continue;
            if (p.front() == '(') p = p.substr(1);
            if (!p.empty() && p.back() == ')') p.pop_back();
            auto comma = p.find(',');
            if (comma == std::string::npos) throw ConfigError("pair needs (eps,s): " + p);
            out.emplace_back(parse_num(p.substr(0, comma)), parse_num(p.substr(comma + 1)));
        } else {
            cur += s[i];
        }
    }
    if (out.empty()) throw ConfigError("empty pair list");
    return out;
}

PiecewiseFn::Piece parse_piece(const std::string& s) {
    auto vals = [&] {
        std::vector<double> v;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) v.push_back(parse_num(item));
        return v;
    }();
    if (vals.size() != 6)
        throw ConfigError("piece needs lo,hi,c0,c1,p,c2: " + s);
    return {vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]};
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::map<std::string, std::vector<std::string>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        kv[trim(line.substr(0, eq))].push_back(trim(line.substr(eq + 1)));
    }

    auto take = [&](const std::string& key) -> const std::string* {
        auto it = kv.find(key);
        if (it == kv.end()) return nullptr;
        if (it->second.size() != 1) throw ConfigError("key repeated: " + key);
        return &it->second.front();
    };
    std::vector<std::string> known = {
        "profile",    "dimension",  "coefficients", "a.piece",     "k.piece",
        "c_J",        "c_kappa",    "eps_kappa",    "sigma",       "pairs",
        "variant",    "alpha_h",    "C_h_budget",   "t_report",    "full_rows",
        "x_probes",   "eps0",       "n_max",        "series_tol",  "dz",
        "core_pad",   "z_max",      "mesh_ratio",   "chi",         "segment_nodes",
        "fourier_tol","shape_du",   "shape_n_a",    "moment_nodes","threads",
        "seed",       "mass_tol",   "ck_tol",       "refine",      "out"};
    for (const auto& [k, v] : kv)
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw ConfigError("unknown config key: " + k);

    if (auto* v = take("profile")) cfg.profile_spec = *v;
    if (auto* v = take("dimension")) cfg.dimension = int(parse_num(*v));
    if (auto* v = take("coefficients")) cfg.coefficients = *v;
    for (const auto& p : kv["a.piece"]) cfg.a_pieces.push_back(parse_piece(p));
    for (const auto& p : kv["k.piece"]) cfg.k_pieces.push_back(parse_piece(p));
    if (auto* v = take("c_J")) cfg.c_J = parse_num(*v);
    if (auto* v = take("c_kappa")) cfg.c_kappa = parse_num(*v);
    if (auto* v = take("eps_kappa")) cfg.eps_kappa = parse_num(*v);
    if (auto* v = take("sigma")) {
        cfg.sigma = parse_num(*v);
        cfg.has_drift_override = true;
    }
    if (auto* v = take("pairs")) {
        cfg.pairs = parse_pairs(*v);
        cfg.has_drift_override = true;
    }
    if (auto* v = take("variant")) {
        if (*v == "A")
            cfg.variant = Variant::A;
        else if (*v == "A*" || *v == "Astar" || *v == "A_star")
            cfg.variant = Variant::A_star;
        else
            throw ConfigError("variant must be A or A*");
        cfg.has_drift_override = true;
    }
    if (auto* v = take("alpha_h")) {
        cfg.alpha_h = parse_num(*v);
        cfg.has_alpha_override = true;
    }
    if (auto* v = take("C_h_budget")) cfg.C_h_budget = parse_num(*v);
    if (auto* v = take("t_report")) cfg.build.t_report = parse_list(*v);
    if (auto* v = take("full_rows")) cfg.build.full_row_times = parse_list(*v);
    if (auto* v = take("x_probes")) cfg.build.x_probes = parse_list(*v);
    if (auto* v = take("eps0")) cfg.build.eps0 = (*v == "auto") ? 0.0 : parse_num(*v);
    if (auto* v = take("n_max")) cfg.build.n_max = int(parse_num(*v));
    if (auto* v = take("series_tol")) cfg.build.series_tol = parse_num(*v);
    if (auto* v = take("dz")) cfg.build.dz = parse_num(*v);
    if (auto* v = take("core_pad")) cfg.build.core_pad = parse_num(*v);
    if (auto* v = take("z_max")) cfg.build.z_max = parse_num(*v);
    if (auto* v = take("mesh_ratio")) cfg.build.mesh_ratio = parse_num(*v);
    if (auto* v = take("chi")) cfg.build.chi = parse_num(*v);
    if (auto* v = take("segment_nodes")) cfg.build.segment_nodes = int(parse_num(*v));
    if (auto* v = take("fourier_tol")) cfg.build.fourier_tol = parse_num(*v);
    if (auto* v = take("shape_du")) cfg.build.shape_du = parse_num(*v);
    if (auto* v = take("shape_n_a")) cfg.build.shape_n_a = int(parse_num(*v));
    if (auto* v = take("moment_nodes")) cfg.build.moment_nodes = int(parse_num(*v));
    if (auto* v = take("threads")) {
        if (*v == "serial")
            cfg.build.mode = ParallelMode::serial;
        else if (*v == "openmp")
            cfg.build.mode = ParallelMode::openmp;
        else
            throw ConfigError("threads must be serial or openmp");
    }
    if (auto* v = take("seed")) cfg.seed = std::uint64_t(parse_num(*v));
    if (auto* v = take("mass_tol")) cfg.mass_tol = parse_num(*v);
    if (auto* v = take("ck_tol")) cfg.ck_tol = parse_num(*v);
    if (auto* v = take("refine")) cfg.refine = parse_num(*v);
    if (auto* v = take("out")) cfg.out_dir = *v;

    for (double t : cfg.build.t_report)
        if (t <= 0.0) throw ConfigError("t_report entries must be positive");
    if (!std::is_sorted(cfg.build.t_report.begin(), cfg.build.t_report.end()))
        throw ConfigError("t_report must be strictly increasing");
    return cfg;
}

CatalogEntry RunConfig::materialize() const {
    CatalogEntry entry;
    if (coefficients.rfind("catalog:", 0) == 0) {
        entry = example_catalog(coefficients.substr(8));
    } else if (coefficients == "product") {
        if (a_pieces.empty() || k_pieces.empty())
            throw ConfigError("product coefficients need a.piece and k.piece lines");
        entry.name = "product";
        auto prof = std::make_shared<LevyProfile>(builtin_profile(profile_spec.rfind("builtin:", 0) == 0
                                                                      ? profile_spec.substr(8)
                                                                      : profile_spec,
                                                                  dimension));
        PiecewiseFn a_fn(a_pieces), k_fn(k_pieces);
        CoefficientSet cs;
        cs.profile = prof;
        cs.b = [](const Point& x) { return Point(x.size(), 0.0); };
        cs.kappa = [a_fn, k_fn](const Point& x, const Point& z) {
            return a_fn(x[0]) * k_fn(z[0]);
        };
        cs.J = [prof](const Point& z) { return prof->nu(norm(z)); };
        cs.c_J = c_J;
        cs.c_kappa = c_kappa;
        cs.eps_kappa = eps_kappa;
        cs.is_product = true;
        cs.a = [a_fn](const Point& x) { return a_fn(x[0]); };
        cs.k_scalar = [k_fn](double z) { return k_fn(z); };
        cs.b_is_zero = true;
        cs.z_breakpoints = k_fn.breakpoints();
        // coarse scan for the a-range over the probe hull
        double lo = 1e300, hi = -1e300;
        for (double x = -50.0; x <= 50.0; x += 0.01) {
            const double v = a_fn(x);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        cs.a_min = lo;
        cs.a_max = hi;
        entry.coeffs = std::move(cs);
        entry.drift.sigma = 1.0;
        entry.drift.pairs = {{1.0, 1.0}};
        entry.claimed_alpha_h = 1.0;
    } else {
        throw ConfigError("coefficients must be catalog:<name> or product");
    }
    if (has_drift_override) {
        entry.drift.sigma = sigma;
        entry.drift.pairs = pairs;
        entry.drift.variant = variant;
    }
    if (has_alpha_override) entry.claimed_alpha_h = alpha_h;
    return entry;
}

BuildConfig RunConfig::build_config(const CatalogEntry& entry) const {
    BuildConfig b = build;
    b.alpha_h = entry.claimed_alpha_h;
    if (refine != 1.0) b = b.refined(refine);
    return b;
}

void write_table_csv(const KernelTable& tab, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot write " + path);
    std::fprintf(f, "t,x,y,value,quad_err\n");
    for (std::size_t ti = 0; ti < tab.t_grid.size(); ++ti)
        for (std::size_t xi = 0; xi < tab.x_grid.size(); ++xi)
            for (std::size_t yi = 0; yi < tab.y_grid.size(); ++yi) {
                const std::size_t k = tab.index(ti, xi, yi);
                // reported kernels are clamped at zero; raw values stay internal
                double v = tab.values[k];
                double err = tab.quad_err[k];
                if ((tab.kind == TableKind::p || tab.kind == TableKind::p0) && v < 0.0) {
                    err += -v;
                    v = 0.0;
                }
                std::fprintf(f, "%.16e,%.16e,%.16e,%.16e,%.16e\n", tab.t_grid[ti],
                             tab.x_grid[xi], tab.y_grid[yi], v, err);
            }
    std::fclose(f);
}

KernelTable read_table_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open table: " + path);
    std::string header;
    std::getline(in, header);
    KernelTable tab;
    std::vector<double> ts, xs, ys, vs, es;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        double t, x, y, v, e;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &t, &x, &y, &v, &e) != 5)
            throw ConfigError("bad CSV row: " + line);
        ts.push_back(t);
        xs.push_back(x);
        ys.push_back(y);
        vs.push_back(v);
        es.push_back(e);
    }
    auto uniq = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    tab.t_grid = uniq(ts);
    tab.x_grid = uniq(xs);
    tab.y_grid = uniq(ys);
    const std::size_t want = tab.t_grid.size() * tab.x_grid.size() * tab.y_grid.size();
    if (vs.size() != want) throw ConfigError("CSV is not a dense (t,x,y) grid: " + path);
    tab.values.resize(want);
    tab.quad_err.resize(want);
    // rows were written lexicographically
    for (std::size_t k = 0; k < want; ++k) {
        tab.values[k] = vs[k];
        tab.quad_err[k] = es[k];
    }
    return tab;
}

void write_manifest(const RunConfig& cfg, const ParametrixEngine& engine,
                    const SeriesBudget& budget, const std::string& path) {
    nlohmann::json j;
    j["coefficients"] = cfg.coefficients;
    j["profile"] = cfg.profile_spec;
    j["t_report"] = cfg.build.t_report;
    j["full_rows"] = cfg.build.full_row_times;
    j["x_probes"] = cfg.build.x_probes;
    j["t_levels"] = engine.dense_times();
    j["spatial_nodes"] = engine.spatial_nodes().size();
    j["dz"] = engine.config().dz;
    j["mesh_ratio"] = engine.config().mesh_ratio;
    j["chi"] = engine.config().chi;
    j["segment_nodes"] = engine.config().segment_nodes;
    j["fourier_tol"] = engine.config().fourier_tol;
    j["shape_du"] = engine.config().shape_du;
    j["shape_n_a"] = engine.config().shape_n_a;
    j["eps0"] = engine.eps0();
    j["t0"] = engine.t0();
    j["n_max"] = budget.n_max;
    j["fitted_C3"] = budget.fitted_C3;
    j["beta_factors"] = budget.beta_factors;
    j["series_tail_bound"] = budget.tail_bound;
    j["series_tol"] = budget.tolerance;
    j["mass_tol"] = cfg.mass_tol;
    j["ck_tol"] = cfg.ck_tol;
    j["seed"] = cfg.seed;
    j["refine"] = cfg.refine;
    j["threads"] = (engine.config().mode == ParallelMode::openmp) ? "openmp" : "serial";
    int workers = 1;
#ifdef _OPENMP
    if (engine.config().mode == ParallelMode::openmp) workers = omp_get_max_threads();
#endif
    j["workers"] = workers;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace levyheat
