#include "homlab/runner.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "homlab/corrector.hpp"
#include "homlab/multiscale.hpp"
#include "homlab/oracle1d.hpp"
#include "homlab/util.hpp"

namespace homlab::runner {

namespace fs = std::filesystem;

namespace {

std::string dump_stable(const json& j) { return j.dump(2); }

// Artifact writer: collects (path, bytes, hash) rows for the manifest.
class Emitter {
  public:
    explicit Emitter(const fs::path& dir) : dir_(dir) { fs::create_directories(dir); }

    void write_text(const std::string& name, const std::string& content) {
        const fs::path p = dir_ / name;
        std::ofstream os(p, std::ios::binary);
        if (!os) throw NumericalError("cannot write " + p.string());
        os << content;
        os.close();
        files_.push_back({{"path", name},
                          {"bytes", content.size()},
                          {"fnv1a64", hex64(fnv1a64(content.data(), content.size()))}});
    }

    void note_binary(const std::string& name) {
        const fs::path p = dir_ / name;
        std::ifstream is(p, std::ios::binary);
        std::ostringstream buf;
        buf << is.rdbuf();
        const std::string content = buf.str();
        files_.push_back({{"path", name},
                          {"bytes", content.size()},
                          {"fnv1a64", hex64(fnv1a64(content.data(), content.size()))}});
    }

    const fs::path& dir() const { return dir_; }
    json files() const { return files_; }

  private:
    fs::path dir_;
    json files_;
};

std::string csv_header(const std::string& config_hash, const std::string& columns) {
    return "# config_hash=" + config_hash + "\n" + columns + "\n";
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

// Minimal SVG polyline plot for the plot-ready columns.
std::string svg_lineplot(const std::vector<double>& xs, const std::vector<double>& ys,
                         const std::string& title) {
    const int W = 640, H = 420, M = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xmin = std::min(xmin, xs[i]);
        xmax = std::max(xmax, xs[i]);
        ymin = std::min(ymin, ys[i]);
        ymax = std::max(ymax, ys[i]);
    }
    if (!(xmax > xmin)) xmax = xmin + 1;
    if (!(ymax > ymin)) ymax = ymin + 1;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
       << "</text>\n";
    os << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double px = M + (xs[i] - xmin) / (xmax - xmin) * (W - 2 * M);
        const double py = H - M - (ys[i] - ymin) / (ymax - ymin) * (H - 2 * M);
        os << px << ',' << py << ' ';
    }
    os << "\"/>\n</svg>\n";
    return os.str();
}

json preset_geometry(int d, double c0, int bound) {
    return json{{"dim", d}, {"c0", c0}, {"index_bound", bound}};
}

json preset_profile_bump(double amplitude, double rho, const std::string& normalization,
                         int max_gen = -1) {
    return json{{"kind", "bump"},          {"amplitude", amplitude},
                {"rho", rho},              {"normalization", normalization},
                {"max_generation", max_gen}};
}

std::shared_ptr<geometry::DefectPointSet> build_set(const json& g) {
    return std::make_shared<geometry::DefectPointSet>(g.at("dim").get<int>(),
                                                      g.at("c0").get<double>(),
                                                      g.at("index_bound").get<int>());
}

coefficients::PerturbedCoefficient build_coefficient(const json& cfg) {
    if (!cfg.contains("geometry") || !cfg.contains("coefficient"))
        throw ConfigError("config: geometry and coefficient blocks are required");
    const json& g = cfg.at("geometry");
    const json& c = cfg.at("coefficient");
    const int d = g.at("dim").get<int>();
    auto per = coefficients::PeriodicCoefficient::preset(
        c.at("periodic").at("preset").get<std::string>(), d,
        c.at("periodic").value("value", 1.0));
    std::optional<coefficients::DefectProfile> profile;
    if (c.contains("profile") && !c.at("profile").is_null()) {
        const json& p = c.at("profile");
        coefficients::DefectProfile dp;
        const std::string kind = p.value("kind", "bump");
        dp.kind = kind == "bump" ? coefficients::ProfileKind::Bump
                                 : coefficients::ProfileKind::Algebraic;
        dp.amplitude = p.value("amplitude", 1.0);
        dp.rho = p.value("rho", 0.35);
        dp.beta = p.value("beta", 1.0);
        dp.r_cut = p.value("r_cut", 1.0);
        dp.max_generation = p.value("max_generation", -1);
        const std::string norm = p.value("normalization", "identical");
        dp.normalization = norm == "cell" ? coefficients::Normalization::CellNormalized
                                          : coefficients::Normalization::Identical;
        profile = dp;
    }
    return coefficients::PerturbedCoefficient(std::move(per), std::move(profile), build_set(g));
}

pde::SolverConfig build_solver(const json& cfg) {
    pde::SolverConfig sc;
    if (cfg.contains("solver")) {
        const json& s = cfg.at("solver");
        sc.rel_tol = s.value("rel_tol", 1e-9);
        sc.max_iter = s.value("max_iter", 2000);
        const std::string p = s.value("precond", "multigrid");
        sc.precond = p == "jacobi" ? pde::SolverConfig::Precond::Jacobi
                                   : pde::SolverConfig::Precond::Multigrid;
    }
    sc.validate();
    return sc;
}

void cmd_geometry_certify(const json& cfg, Emitter& em, const std::string& hash) {
    const auto set = build_set(cfg.at("geometry"));
    const auto cert = geometry::certify_assumptions(*set, cfg.value("min_inclusion_samples", 100000L));
    em.write_text("certificate.json", cert.to_json() + "\n");
    if (cert.inclusion_violations > 0)
        throw NumericalError("geometry-certify: bounding-box inclusion violated at sampled points");
    (void)hash;  // the certificate is a single JSON document, no CSV comment line
}

void cmd_defect_profile(const json& cfg, Emitter& em, const std::string& hash) {
    const auto coef = build_coefficient(cfg);
    const json& blk = cfg.value("defect_profile", json::object());
    const int max_gen = blk.value("max_gen", 8);
    const double r_exp = blk.value("r", 2.0);
    const double resolution = blk.value("resolution", 0.02);

    // Cell norm table.
    {
        std::ostringstream os;
        os << csv_header(hash, "index,r,cell_norm,residual_norm");
        for (const auto& p : coef.set().indices()) {
            const int gen = geometry::max_norm(p);
            if (gen < 1 || gen > max_gen) continue;
            bool positive = true;
            for (int a = 0; a < coef.dim(); ++a) positive = positive && p[std::size_t(a)] >= 0;
            if (!positive) continue;  // symmetric copies add nothing
            const double cn = coefficients::cell_norm(coef, p, r_exp, resolution,
                                                      coefficients::CellField::Defect);
            const double rn = coefficients::cell_norm(coef, p, r_exp, resolution,
                                                      coefficients::CellField::DefectResidual);
            os << '"';
            for (int a = 0; a < coef.dim(); ++a) os << (a ? " " : "") << p[std::size_t(a)];
            os << "\"," << fmt(r_exp) << ',' << fmt(cn) << ',' << fmt(rn) << "\n";
        }
        em.write_text("cell_norms.csv", os.str());
    }
    // Average decay over a dyadic ladder.
    {
        std::vector<double> radii;
        for (int k : blk.value("radii_exps", std::vector<int>{4, 5, 6, 7, 8, 9, 10}))
            radii.push_back(std::ldexp(1.0, k));
        const auto rep = coefficients::average_decay(coef, geometry::Point{}, radii);
        std::ostringstream os;
        os << csv_header(hash, "R,mean,bound_ratio");
        for (const auto& row : rep.rows)
            os << fmt(row.radius) << ',' << fmt(row.mean) << ',' << fmt(row.bound_ratio) << "\n";
        em.write_text("decay.csv", os.str());
        json j{{"fit_slope", rep.fit.slope}, {"fit_intercept", rep.fit.intercept}, {"fit_r2", rep.fit.r2}};
        em.write_text("decay_fit.json", dump_stable(j) + "\n");
    }
    // Uniform tails.
    {
        std::ostringstream os;
        os << csv_header(hash, "R,sup_tail");
        for (double R : {1.0, 2.0, 4.0, 8.0, 16.0})
            os << fmt(R) << ','
               << fmt(coefficients::tail_uniform(coef, R, blk.value("tail_index_bound", 4), resolution))
               << "\n";
        em.write_text("tails.csv", os.str());
    }
    json j{{"lambda_check", coef.lambda_check()},
           {"holder_quotient_alpha_half", coefficients::holder_spot_check(coef, 0.5)}};
    em.write_text("ellipticity.json", dump_stable(j) + "\n");
}

void cmd_corrector(const json& cfg, Emitter& em, const std::string& hash) {
    const auto coef = build_coefficient(cfg);
    const auto solver = build_solver(cfg);
    const json& blk = cfg.value("corrector", json::object());
    const int cell_n = blk.value("cell_n", 64);
    const int direction = blk.value("direction", 0);

    const auto per = corrector::solve_periodic_cell(coef.periodic(), cell_n, solver);
    json manifest;
    manifest["grid"] = {{"cell_n", cell_n}};
    manifest["coefficient_hash"] = hex64(coef.content_hash());
    json astar = json::array();
    for (int i = 0; i < coef.dim(); ++i) {
        json row = json::array();
        for (int j = 0; j < coef.dim(); ++j) row.push_back(per.a_star.at(i, j));
        astar.push_back(row);
    }
    manifest["a_star"] = astar;
    json residuals = json::array();
    for (const auto& st : per.stats) residuals.push_back(st.residual);
    manifest["periodic_residuals"] = residuals;

    for (int j = 0; j < coef.dim(); ++j) {
        const std::string name = "w_per_" + std::to_string(j) + ".fld";
        pde::write_field_dump((em.dir() / name).string(), per.w[std::size_t(j)]);
        em.note_binary(name);
    }

    if (coef.has_defects() && blk.value("box_l", 0.0) > 0.0) {
        corrector::PerturbedSolveOptions opt;
        opt.box_l = blk.value("box_l", 16.0);
        opt.nodes_per_unit = blk.value("nodes_per_unit", 8);
        opt.richardson = blk.value("richardson", false);
        opt.solver = solver;
        const auto wt = corrector::solve_perturbed_corrector(coef, per, direction, opt);
        const std::string name = "w_tilde_" + std::to_string(direction) + ".fld";
        pde::write_field_dump((em.dir() / name).string(), wt.w_tilde);
        em.note_binary(name);
        manifest["perturbed"] = {{"direction", direction},
                                 {"box_l", opt.box_l},
                                 {"residual", wt.stats.residual},
                                 {"iterations", wt.stats.iterations},
                                 {"truncation_error", wt.truncation_error},
                                 {"uncovered_defect", wt.uncovered_defect}};
        const int generations = blk.value("generations", 4);
        const auto diag = corrector::corrector_diagnostics(coef, per, wt, nullptr, generations);
        std::ostringstream os;
        os << csv_header(hash, "index,gen,grad_l2");
        for (const auto& row : diag.cells) {
            os << '"';
            for (int a = 0; a < coef.dim(); ++a) os << (a ? " " : "") << row.p[std::size_t(a)];
            os << "\"," << row.gen << ',' << fmt(row.grad_l2) << "\n";
        }
        em.write_text("cell_gradients.csv", os.str());
        json growth = json::array();
        for (const auto& g : diag.growth) growth.push_back({{"level", g.level}, {"sup", g.sup_abs}});
        manifest["growth"] = growth;
        manifest["growth_fit_slope"] = diag.growth_fit.slope;
    }
    em.write_text("corrector.json", dump_stable(manifest) + "\n");
}

void cmd_potential(const json& cfg, Emitter& em, const std::string& hash) {
    const auto coef = build_coefficient(cfg);
    const auto solver = build_solver(cfg);
    const int cell_n = cfg.value("potential", json::object()).value("cell_n", 64);
    const auto per = corrector::solve_periodic_cell(coef.periodic(), cell_n, solver);
    const auto M = corrector::build_M(coef.periodic(), per.a_star, per);
    const auto B = corrector::solve_potential(M);
    json j{{"cell_n", cell_n},
           {"div_residual", B.div_residual},
           {"curl_residual", B.curl_residual},
           {"M_div_residual", M.max_div_residual},
           {"M_mean_abs", M.max_mean_abs}};
    em.write_text("potential.json", dump_stable(j) + "\n");
    (void)hash;
}

void cmd_homogenize(const json& cfg, Emitter& em, const std::string& hash) {
    const auto coef = build_coefficient(cfg);
    const auto solver = build_solver(cfg);
    const json& blk = cfg.value("homogenize", json::object());
    const int cell_n = blk.value("cell_n", 64);
    const auto per = corrector::solve_periodic_cell(coef.periodic(), cell_n, solver);
    std::vector<double> radii;
    for (int k : blk.value("radii_exps", std::vector<int>{3, 4, 5, 6, 7}))
        radii.push_back(std::ldexp(1.0, k));
    const auto rows = multiscale::flux_average_tensor(coef, per, radii, blk.value("box_l", 128.0),
                                                      blk.value("nodes_per_unit", 8), solver);
    std::ostringstream os;
    os << csv_header(hash, "R,a00,a11,rel_gap");
    for (const auto& row : rows) {
        os << fmt(row.radius) << ',' << fmt(row.estimate.at(0, 0)) << ','
           << fmt(coef.dim() > 1 ? row.estimate.at(1, 1) : row.estimate.at(0, 0)) << ','
           << fmt(row.rel_gap) << "\n";
    }
    em.write_text("flux_average.csv", os.str());
    json j{{"a_star_00", per.a_star.at(0, 0)},
           {"final_rel_gap", rows.empty() ? 0.0 : rows.back().rel_gap}};
    em.write_text("flux_average.json", dump_stable(j) + "\n");
}

oracle1d::Oracle1DConfig build_oracle(const json& cfg) {
    const auto coef = build_coefficient(cfg);
    oracle1d::Oracle1DConfig oc;
    oc.a_per = coef.periodic();
    oc.profile = coef.profile();
    oc.set = coef.set_ptr();
    return oc;
}

void cmd_rates_1d(const json& cfg, Emitter& em, const std::string& hash) {
    auto oc = build_oracle(cfg);
    const json& blk = cfg.value("rates1d", json::object());
    std::vector<double> eps;
    for (int k = blk.value("eps_min_exp", 3); k <= blk.value("eps_max_exp", 12); ++k)
        eps.push_back(std::ldexp(1.0, -k));
    const auto study = oracle1d::rate_study_1d(oc, eps);
    std::ostringstream os;
    os << csv_header(hash, "epsilon,l2_R,h1_R,ratio_vs_bound");
    for (const auto& row : study.rows)
        os << fmt(row.eps) << ',' << fmt(row.l2_R) << ',' << fmt(row.h1_R) << ','
           << fmt(row.ratio_vs_bound) << "\n";
    em.write_text("rates1d.csv", os.str());

    const auto growth = oracle1d::corrector_growth_1d(oc, blk.value("growth_n_max", 14));
    std::ostringstream gs;
    gs << csv_header(hash, "n,sup_w_tilde");
    for (const auto& row : growth.rows) gs << row.n << ',' << fmt(row.sup_w_tilde) << "\n";
    em.write_text("growth1d.csv", gs.str());

    json j{{"l2_slope", study.l2_fit.slope},
           {"l2_r2", study.l2_fit.r2},
           {"h1_slope", study.h1_fit.slope},
           {"h1_r2", study.h1_fit.r2},
           {"growth_slope", growth.fit.slope},
           {"growth_r2", growth.fit.r2}};
    em.write_text("rates1d_summary.json", dump_stable(j) + "\n");
}

void cmd_rates(const json& cfg, Emitter& em, const std::string& hash) {
    auto coef = build_coefficient(cfg);
    const json& blk = cfg.value("rates", json::object());
    multiscale::MultiscaleProblem problem{std::move(coef), nullptr, {}};
    problem.source = [](const geometry::Point&) { return 1.0; };
    for (int k : blk.value("eps_exps", std::vector<int>{2, 3, 4}))
        problem.eps_list.push_back(std::ldexp(1.0, -k));
    problem.min_nodes_per_eps = blk.value("min_nodes_per_eps", 16);
    problem.base_n = blk.value("base_n", 32);
    problem.max_n = blk.value("max_n", 1024);
    problem.cell_n = blk.value("cell_n", 64);
    problem.corrector_box_l = blk.value("corrector_box_l", 0.0);
    problem.corrector_nodes_per_unit = blk.value("corrector_nodes_per_unit", 8);
    problem.compute_h_eps = blk.value("compute_h_eps", true);
    problem.refine_check = blk.value("refine_check", false);
    problem.report_r = blk.value("report_r", 2.0);
    problem.solver = build_solver(cfg);

    const auto rep = multiscale::remainder_study(problem);
    std::ostringstream os;
    os << csv_header(hash, "epsilon,n,l2_R,h1_R_omega1,h_eps,admitted");
    for (const auto& row : rep.rows)
        os << fmt(row.eps) << ',' << row.n << ',' << fmt(row.l2_R) << ',' << fmt(row.h1_R_omega1)
           << ',' << fmt(row.h_eps) << ',' << (row.admitted ? 1 : 0) << "\n";
    em.write_text("rates.csv", os.str());

    // Plot-ready two-column files plus a small SVG.
    std::vector<double> xs, ys_l2, ys_h1;
    std::ostringstream c1, c2;
    for (const auto& row : rep.rows) {
        c1 << fmt(std::log2(row.eps)) << ' ' << fmt(std::log2(std::max(row.l2_R, 1e-300))) << "\n";
        c2 << fmt(std::log2(row.eps)) << ' ' << fmt(std::log2(std::max(row.h1_R_omega1, 1e-300)))
           << "\n";
        xs.push_back(std::log2(row.eps));
        ys_l2.push_back(std::log2(std::max(row.l2_R, 1e-300)));
        ys_h1.push_back(std::log2(std::max(row.h1_R_omega1, 1e-300)));
    }
    em.write_text("l2_vs_eps.dat", c1.str());
    em.write_text("h1_vs_eps.dat", c2.str());
    em.write_text("l2_vs_eps.svg", svg_lineplot(xs, ys_l2, "log2 L2 remainder vs log2 eps"));

    json j{{"l2_slope", rep.l2_fit.slope},
           {"l2_r2", rep.l2_fit.r2},
           {"h1_slope", rep.h1_fit.slope},
           {"h1_r2", rep.h1_fit.r2},
           {"nu_r", rep.nu_r},
           {"mu_r", rep.mu_r},
           {"a_star_00", rep.a_star_00},
           {"corrector_box_covers_domain", rep.corrector_box_covers_domain}};
    em.write_text("rates_summary.json", dump_stable(j) + "\n");
}

}  // namespace

json default_config(const std::string& command, const std::string& preset) {
    json cfg;
    cfg["command"] = command;
    cfg["out_dir"] = "out";
    cfg["workers"] = 0;
    cfg["solver"] = {{"rel_tol", 1e-9}, {"max_iter", 2000}, {"precond", "multigrid"}};
    cfg["geometry"] = preset_geometry(1, 2.0, 16);
    cfg["coefficient"] = {{"periodic", {{"preset", "identity"}, {"value", 1.0}}},
                          {"profile", nullptr}};

    auto bump_identical = preset_profile_bump(1.0, 0.35, "identical");

    // Command baselines: something non-trivial runs even without a preset.
    if (command == "geometry-certify") {
        cfg["geometry"] = preset_geometry(2, 2.0, 16);
    } else if (command == "defect-profile") {
        cfg["coefficient"]["profile"] = bump_identical;
        cfg["defect_profile"] = {{"max_gen", 6}, {"resolution", 0.01}};
    } else if (command == "corrector") {
        cfg["coefficient"] = {{"periodic", {{"preset", "sin1d"}}}, {"profile", bump_identical}};
        cfg["corrector"] = {{"cell_n", 256}, {"direction", 0}, {"box_l", 16.0},
                            {"generations", 3}, {"nodes_per_unit", 16}, {"richardson", false}};
    } else if (command == "potential") {
        cfg["geometry"] = preset_geometry(2, 2.0, 6);
        cfg["coefficient"] = {{"periodic", {{"preset", "product2d"}}}, {"profile", nullptr}};
        cfg["potential"] = {{"cell_n", 64}};
    } else if (command == "homogenize") {
        cfg["geometry"] = preset_geometry(2, 2.0, 8);
        cfg["coefficient"] = {{"periodic", {{"preset", "identity"}}}, {"profile", bump_identical}};
        cfg["homogenize"] = {{"cell_n", 16}, {"box_l", 32.0}, {"nodes_per_unit", 8},
                             {"radii_exps", std::vector<int>{2, 3, 4, 5}}};
    } else if (command == "rates-1d") {
        cfg["coefficient"] = {{"periodic", {{"preset", "sin1d"}}}, {"profile", bump_identical}};
        cfg["rates1d"] = {{"eps_min_exp", 3}, {"eps_max_exp", 10}, {"growth_n_max", 12}};
    } else if (command == "rates") {
        cfg["geometry"] = preset_geometry(2, 2.0, 6);
        cfg["coefficient"] = {{"periodic", {{"preset", "product2d"}}}, {"profile", nullptr}};
        cfg["rates"] = {{"eps_exps", std::vector<int>{2, 3, 4}},
                        {"min_nodes_per_eps", 16},
                        {"base_n", 64},
                        {"max_n", 512},
                        {"cell_n", 64}};
    }
    if (preset.empty()) return cfg;
    if (preset == "sin-bump") {
        cfg["geometry"] = preset_geometry(1, 2.0, 16);
        cfg["coefficient"] = {{"periodic", {{"preset", "sin1d"}}}, {"profile", bump_identical}};
        cfg["rates1d"] = {{"eps_min_exp", 3}, {"eps_max_exp", 12}, {"growth_n_max", 14}};
    } else if (preset == "periodic-1d") {
        cfg["geometry"] = preset_geometry(1, 2.0, 16);
        cfg["coefficient"] = {{"periodic", {{"preset", "sin1d"}}}, {"profile", nullptr}};
        cfg["rates1d"] = {{"eps_min_exp", 3}, {"eps_max_exp", 12}, {"growth_n_max", 8}};
    } else if (preset == "alg-low" || preset == "alg-high") {
        cfg["geometry"] = preset_geometry(1, 2.0, 16);
        json prof{{"kind", "algebraic"}, {"amplitude", 1.0},        {"rho", 0.25},
                  {"r_cut", 0.25},       {"normalization", "cell"}, {"max_generation", -1},
                  {"beta", preset == "alg-low" ? 0.3 : 0.8}};
        cfg["coefficient"] = {{"periodic", {{"preset", "sin1d"}}}, {"profile", prof}};
        cfg["rates1d"] = {{"eps_min_exp", 3}, {"eps_max_exp", 12}, {"growth_n_max", 10}};
    } else if (preset == "decay-1d") {
        cfg["geometry"] = preset_geometry(1, 2.0, 19);
        cfg["coefficient"] = {{"periodic", {{"preset", "identity"}}},
                              {"profile", preset_profile_bump(1.0, 0.25, "cell")}};
        cfg["defect_profile"] = {{"radii_exps", std::vector<int>{4, 6, 8, 10, 12, 14, 16, 18}}};
    } else if (preset == "decay-2d") {
        cfg["geometry"] = preset_geometry(2, 2.0, 13);
        cfg["coefficient"] = {{"periodic", {{"preset", "identity"}}},
                              {"profile", preset_profile_bump(1.0, 0.125, "cell")}};
        cfg["defect_profile"] = {{"radii_exps", std::vector<int>{4, 5, 6, 7, 8, 9, 10, 11, 12}}};
    } else if (preset == "defect-2d") {
        cfg["geometry"] = preset_geometry(2, 2.0, 9);
        cfg["coefficient"] = {{"periodic", {{"preset", "identity"}}}, {"profile", bump_identical}};
        cfg["corrector"] = {{"cell_n", 32}, {"direction", 0},        {"box_l", 128.0},
                            {"generations", 6}, {"nodes_per_unit", 8}, {"richardson", true}};
        cfg["homogenize"] = {{"cell_n", 32},
                             {"box_l", 128.0},
                             {"nodes_per_unit", 8},
                             {"radii_exps", std::vector<int>{3, 4, 5, 6, 7}}};
    } else if (preset == "laminate-2d") {
        cfg["geometry"] = preset_geometry(2, 2.0, 6);
        cfg["coefficient"] = {{"periodic", {{"preset", "laminate2d"}}}, {"profile", nullptr}};
        cfg["corrector"] = {{"cell_n", 128}, {"direction", 0}, {"box_l", 0.0}};
    } else if (preset == "periodic-2d") {
        cfg["geometry"] = preset_geometry(2, 2.0, 6);
        cfg["coefficient"] = {{"periodic", {{"preset", "product2d"}}}, {"profile", nullptr}};
        cfg["rates"] = {{"eps_exps", std::vector<int>{2, 3, 4, 5, 6}},
                        {"min_nodes_per_eps", 16},
                        {"base_n", 64},
                        {"max_n", 1024},
                        {"cell_n", 64}};
    } else if (preset == "periodic-3d-coarse" || preset == "defect-3d-coarse") {
        cfg["geometry"] = preset_geometry(3, 2.0, 6);
        json prof = preset == "defect-3d-coarse"
                        ? preset_profile_bump(1.0, 0.35, "identical", 1)
                        : json(nullptr);
        cfg["coefficient"] = {{"periodic", {{"preset", "checker3d"}}}, {"profile", prof}};
        cfg["rates"] = {{"eps_exps", std::vector<int>{2, 3, 4}},
                        {"min_nodes_per_eps", 6},
                        {"base_n", 32},
                        {"max_n", 96},
                        {"cell_n", 32},
                        {"corrector_box_l", preset == "defect-3d-coarse" ? 8.0 : 0.0},
                        {"corrector_nodes_per_unit", 8},
                        {"compute_h_eps", preset != "defect-3d-coarse"}};
    } else {
        throw ConfigError("unknown preset: " + preset);
    }
    return cfg;
}

RunResult run(const json& config) {
    if (!config.contains("command")) throw ConfigError("config: missing command");
    const std::string command = config.at("command").get<std::string>();
    if (config.contains("workers")) {
        const int w = config.at("workers").get<int>();
        if (w > 0) setenv("HOMLAB_WORKERS", std::to_string(w).c_str(), 1);
    }
    const std::string out_dir = config.value("out_dir", "out");
    Emitter em(out_dir);
    // The hash identifies the experiment, not where it lands on disk.
    json hashed = config;
    hashed.erase("out_dir");
    hashed.erase("workers");
    const std::string hash = hex64(fnv1a64(dump_stable(hashed)));

    if (command == "geometry-certify") cmd_geometry_certify(config, em, hash);
    else if (command == "defect-profile") cmd_defect_profile(config, em, hash);
    else if (command == "corrector") cmd_corrector(config, em, hash);
    else if (command == "potential") cmd_potential(config, em, hash);
    else if (command == "homogenize") cmd_homogenize(config, em, hash);
    else if (command == "rates-1d") cmd_rates_1d(config, em, hash);
    else if (command == "rates") cmd_rates(config, em, hash);
    else throw ConfigError("unknown command: " + command);

    RunResult result;
    result.manifest = json{{"command", command}, {"config_hash", hash}, {"config", config},
                           {"files", em.files()}};
    const std::string manifest_text = dump_stable(result.manifest) + "\n";
    const fs::path mp = fs::path(out_dir) / "manifest.json";
    std::ofstream os(mp, std::ios::binary);
    os << manifest_text;
    result.manifest_path = mp.string();
    return result;
}

}  // namespace homlab::runner

#include "CLI11.hpp"

namespace homlab::runner {

int run_cli(int argc, char** argv) {
    CLI::App app{"homlab: periodic homogenization with defects rare at infinity"};
    app.require_subcommand(1);

    struct Flags {
        std::string preset, config_file, out_dir;
        int workers = -1;
        int dim = -1, index_bound = -1, direction = -1, generations = -1;
        int nodes_per_unit = -1, cell_n = -1, eps_min_exp = -1, eps_max_exp = -1;
        double c0 = -1.0, box_l = -1.0, rel_tol = -1.0;
        std::string precond;
        bool seedless = false;
        bool print_config = false;
    } fl;

    const std::vector<std::string> commands = {"geometry-certify", "defect-profile", "corrector",
                                               "potential",        "homogenize",     "rates-1d",
                                               "rates"};
    std::vector<CLI::App*> subs;
    for (const auto& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--preset", fl.preset, "named preset for this command");
        sub->add_option("--config", fl.config_file, "JSON config file (flags override it)");
        sub->add_option("--out", fl.out_dir, "output directory");
        sub->add_option("--workers", fl.workers, "worker pool size (overrides HOMLAB_WORKERS)");
        sub->add_option("--dim", fl.dim, "ambient dimension");
        sub->add_option("--c0", fl.c0, "index-set constant C0");
        sub->add_option("--index-bound", fl.index_bound, "enumeration bound on |p|");
        sub->add_flag("--seedless", fl.seedless,
                      "sampling is deterministic; flag kept for interface stability");
        sub->add_option("--direction", fl.direction, "corrector direction");
        sub->add_option("--box-l", fl.box_l, "truncation box half-width");
        sub->add_option("--generations", fl.generations, "defect generations in diagnostics");
        sub->add_option("--nodes-per-unit", fl.nodes_per_unit, "grid nodes per unit length");
        sub->add_option("--cell-n", fl.cell_n, "periodic cell grid size");
        sub->add_option("--eps-min-exp", fl.eps_min_exp, "smallest eps exponent (eps = 2^-k)");
        sub->add_option("--eps-max-exp", fl.eps_max_exp, "largest eps exponent");
        sub->add_option("--rel-tol", fl.rel_tol, "solver relative tolerance");
        sub->add_option("--precond", fl.precond, "jacobi | multigrid");
        sub->add_flag("--print-config", fl.print_config, "print the merged config and exit");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        std::string command;
        for (std::size_t i = 0; i < subs.size(); ++i)
            if (subs[i]->parsed()) command = commands[i];

        json cfg;
        if (!fl.config_file.empty()) {
            std::ifstream is(fl.config_file);
            if (!is) throw ConfigError("cannot read config file " + fl.config_file);
            try {
                cfg = json::parse(is);
            } catch (const json::exception& e) {
                throw ConfigError(std::string("config parse error: ") + e.what());
            }
            if (!cfg.contains("command")) cfg["command"] = command;
        } else {
            cfg = default_config(command, fl.preset);
        }

        auto set_path = [&cfg](const std::string& ptr, const json& v) {
            cfg[json::json_pointer(ptr)] = v;
        };
        if (!fl.out_dir.empty()) cfg["out_dir"] = fl.out_dir;
        if (fl.workers >= 0) cfg["workers"] = fl.workers;
        if (fl.dim > 0) set_path("/geometry/dim", fl.dim);
        if (fl.c0 > 0) set_path("/geometry/c0", fl.c0);
        if (fl.index_bound > 0) set_path("/geometry/index_bound", fl.index_bound);
        if (fl.direction >= 0) set_path("/corrector/direction", fl.direction);
        if (fl.generations > 0) set_path("/corrector/generations", fl.generations);
        if (fl.box_l > 0) {
            set_path("/corrector/box_l", fl.box_l);
            set_path("/homogenize/box_l", fl.box_l);
        }
        if (fl.nodes_per_unit > 0) {
            set_path("/corrector/nodes_per_unit", fl.nodes_per_unit);
            set_path("/homogenize/nodes_per_unit", fl.nodes_per_unit);
        }
        if (fl.cell_n > 0)
            for (const char* p : {"/corrector/cell_n", "/potential/cell_n", "/homogenize/cell_n",
                                  "/rates/cell_n"})
                set_path(p, fl.cell_n);
        if (fl.eps_min_exp > 0) set_path("/rates1d/eps_min_exp", fl.eps_min_exp);
        if (fl.eps_max_exp > 0) set_path("/rates1d/eps_max_exp", fl.eps_max_exp);
        if (fl.rel_tol > 0) set_path("/solver/rel_tol", fl.rel_tol);
        if (!fl.precond.empty()) set_path("/solver/precond", fl.precond);

        if (fl.print_config) {
            std::cout << cfg.dump(2) << "\n";
            return 0;
        }
        const RunResult res = run(cfg);
        std::cout << "wrote " << res.manifest_path << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace homlab::runner
