#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "homlab/multiscale.hpp"
#include "homlab/oracle1d.hpp"
#include "homlab/runner.hpp"

using namespace homlab;
using namespace homlab::multiscale;
using coefficients::PeriodicCoefficient;
using coefficients::PerturbedCoefficient;
using geometry::Point;
using geometry::make_point;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

PerturbedCoefficient plain(const std::string& preset, int d, int bound = 6) {
    return PerturbedCoefficient(PeriodicCoefficient::preset(preset, d), std::nullopt,
                                std::make_shared<geometry::DefectPointSet>(d, 2.0, bound));
}

MultiscaleProblem base_problem(PerturbedCoefficient coef) {
    MultiscaleProblem p{std::move(coef), nullptr, {}};
    p.source = [](const Point&) { return 1.0; };
    p.solver.rel_tol = 1e-10;
    p.solver.max_iter = 4000;
    return p;
}

// Truncated double sine series for -c lap u = 1 on the unit square.
double series_poisson2d(double c, double x, double y, int terms = 99) {
    double acc = 0.0;
    for (int i = 1; i <= terms; i += 2)
        for (int j = 1; j <= terms; j += 2) {
            acc += 16.0 / (M_PI * M_PI * M_PI * M_PI) * std::sin(M_PI * i * x) *
                   std::sin(M_PI * j * y) / (double(i) * j * (double(i) * i + double(j) * j));
        }
    return acc / c;
}

}  // namespace

TEST_CASE("oscillatory solve against the sine-series oracle") {
    auto problem = base_problem(plain("constant", 2));
    // constant preset value defaults to 1.0 -> use coefficient 1.
    pde::UniformGrid grid{2, 64, 0.0, 1.0, pde::Bc::Dirichlet0};
    const auto u = solve_oscillatory(problem, 0.25, grid);
    for (std::size_t i = 0; i < u.values.size(); i += 211) {
        const Point x = grid.position(grid.decode(i));
        CHECK(u.values[i] == doctest::Approx(series_poisson2d(1.0, x[0], x[1])).epsilon(2e-3));
    }
}

TEST_CASE("eps independence without oscillation") {
    auto problem = base_problem(plain("constant", 2));
    pde::UniformGrid grid{2, 32, 0.0, 1.0, pde::Bc::Dirichlet0};
    problem.min_nodes_per_eps = 4;
    const auto u1 = solve_oscillatory(problem, 0.5, grid);
    const auto u2 = solve_oscillatory(problem, 0.25, grid);
    for (std::size_t i = 0; i < u1.values.size(); ++i)
        CHECK(u1.values[i] == doctest::Approx(u2.values[i]).epsilon(1e-9));
}

TEST_CASE("unresolved eps is rejected") {
    auto problem = base_problem(plain("product2d", 2));
    pde::UniformGrid grid{2, 32, 0.0, 1.0, pde::Bc::Dirichlet0};
    CHECK_THROWS_AS(solve_oscillatory(problem, 1.0 / 64.0, grid), ConfigError);
}

TEST_CASE("homogenized solve and expansion basics") {
    auto problem = base_problem(plain("product2d", 2));
    const auto per = corrector::solve_periodic_cell(problem.coef.periodic(), 32, problem.solver);
    pde::UniformGrid grid{2, 64, 0.0, 1.0, pde::Bc::Dirichlet0};
    const auto u_star = solve_homogenized(problem, per.a_star, grid);
    SUBCASE("matches the series oracle for the isotropic tensor") {
        // product2d has a scalar a*; compare against the series with that value.
        const double c = per.a_star.at(0, 0);
        for (std::size_t i = 0; i < u_star.values.size(); i += 173) {
            const Point x = grid.position(grid.decode(i));
            CHECK(u_star.values[i] == doctest::Approx(series_poisson2d(c, x[0], x[1])).epsilon(5e-3));
        }
    }
    SUBCASE("zero corrector collapses the expansion to u*") {
        corrector::PeriodicCellSolution zero = per;
        for (auto& w : zero.w)
            for (double& v : w.values) v = 0.0;
        const auto u1 = first_order_expansion(u_star, zero, nullptr, 0.25);
        for (std::size_t i = 0; i < u1.values.size(); ++i)
            CHECK(u1.values[i] == doctest::Approx(u_star.values[i]));
    }
    SUBCASE("triangle bound against eps sup|w| ||grad u*||") {
        const double eps = 0.125;
        const auto u1 = first_order_expansion(u_star, per, nullptr, eps);
        double sup_w = 0.0;
        for (const auto& w : per.w)
            for (double v : w.values) sup_w = std::max(sup_w, std::abs(v));
        double diff2 = 0.0;
        std::vector<pde::GridField> grad;
        const auto norms = pde::norms_and_gradient(u_star, make_point({0.0, 0.0}),
                                                   make_point({1.0, 1.0}), &grad);
        for (std::size_t i = 0; i < u1.values.size(); ++i) {
            const double d = u1.values[i] - u_star.values[i];
            diff2 += d * d;
        }
        diff2 = std::sqrt(diff2 * grid.h() * grid.h());
        // The pointwise bound |u1-u*| <= eps sup|w| |grad u*| integrates to
        // the same inequality in L2.
        CHECK(diff2 <= eps * sup_w * norms.h1_semi * (1.0 + 1e-9) * std::sqrt(2.0));
    }
}

TEST_CASE("one-dimensional pipeline agrees with the oracle") {
    auto coef = PerturbedCoefficient(PeriodicCoefficient::preset("sin1d", 1), std::nullopt,
                                     std::make_shared<geometry::DefectPointSet>(1, 2.0, 8));
    auto problem = base_problem(std::move(coef));
    const double eps = 1.0 / 16.0;
    pde::UniformGrid grid{1, 1024, 0.0, 1.0, pde::Bc::Dirichlet0};
    const auto u = solve_oscillatory(problem, eps, grid);
    oracle1d::Oracle1DConfig oc;
    oc.a_per = problem.coef.periodic();
    oc.set = problem.coef.set_ptr();
    const auto s = oracle1d::exact_fields(oc, eps);
    // The oracle's display formulas solve the sign-flipped source, so the
    // f = 1 pipeline matches -u_oracle.
    for (std::size_t i = 0; i < u.values.size(); i += 37) {
        const double x = grid.position(grid.decode(i))[0];
        const std::size_t k = std::size_t(std::llround(x / s.h));
        CHECK(u.values[i] == doctest::Approx(-s.ueps[k]).epsilon(2e-3));
    }
}

TEST_CASE("linearity of the whole pipeline") {
    auto problem = base_problem(plain("product2d", 2));
    problem.eps_list = {0.25};
    problem.cell_n = 32;
    problem.base_n = 64;
    problem.compute_h_eps = false;
    const auto rep1 = remainder_study(problem);
    problem.source = [](const Point&) { return 3.0; };
    const auto rep3 = remainder_study(problem);
    CHECK(rep3.rows[0].l2_R == doctest::Approx(3.0 * rep1.rows[0].l2_R).epsilon(1e-9));
    CHECK(rep3.rows[0].h1_R_omega1 == doctest::Approx(3.0 * rep1.rows[0].h1_R_omega1).epsilon(1e-9));
}

TEST_CASE("periodic 2D remainder study") {
    auto problem = base_problem(plain("product2d", 2));
    problem.eps_list = {1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0};
    problem.cell_n = 64;
    problem.base_n = 64;
    problem.max_n = 512;
    const auto rep = remainder_study(problem);
    SUBCASE("interior H1 slope is about one") {
        CHECK(rep.h1_fit.slope == doctest::Approx(1.0).epsilon(0.2));
    }
    SUBCASE("H^eps tracks eps ||D2 u*|| with one constant") {
        double lo = 1e300, hi = 0.0;
        for (const auto& row : rep.rows) {
            REQUIRE(row.h_eps > 0.0);
            const double ratio = row.h_eps / row.eps;
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        CHECK(hi / lo <= 5.0);
    }
    SUBCASE("report carries the expected exponents") {
        CHECK(rep.nu_r == doctest::Approx(1.0));
        CHECK(rep.mu_r == doctest::Approx(0.5));
        CHECK(rep.a_star_00 > 1.0);
    }
}

TEST_CASE("boundary layer splits the global and interior H1 rates") {
    auto problem = base_problem(plain("product2d", 2));
    const auto per = corrector::solve_periodic_cell(problem.coef.periodic(), 64, problem.solver);
    Point lo = make_point({0.0, 0.0}), hi = make_point({1.0, 1.0});
    std::vector<double> geps, leps;
    for (double eps : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
        pde::UniformGrid grid{2, int(32.0 / eps), 0.0, 1.0, pde::Bc::Dirichlet0};
        const auto u_eps = solve_oscillatory(problem, eps, grid);
        const auto u_star = solve_homogenized(problem, per.a_star, grid);
        const auto u1 = first_order_expansion(u_star, per, nullptr, eps);
        pde::GridField R = pde::GridField::zeros(grid);
        for (std::size_t i = 0; i < R.values.size(); ++i)
            R.values[i] = u_eps.values[i] - u1.values[i];
        geps.push_back(std::log(pde::norms_and_gradient(R, lo, hi).h1_semi));
        leps.push_back(std::log(eps));
    }
    const auto fit = fit_affine(leps, geps);
    CHECK(fit.slope == doctest::Approx(0.5).epsilon(0.3));
}

TEST_CASE("refinement admission flags unstable rows") {
    auto problem = base_problem(plain("product2d", 2));
    problem.eps_list = {1.0 / 4.0};
    problem.cell_n = 32;
    problem.base_n = 32;
    problem.refine_check = true;
    const auto rep = remainder_study(problem);
    REQUIRE(rep.rows.size() == 1);
    // A resolved configuration passes the 5% doubling test.
    CHECK(rep.rows[0].admitted);
}

TEST_CASE("flux averages") {
    pde::SolverConfig solver;
    solver.rel_tol = 1e-9;
    SUBCASE("no defects: equals a* on every box") {
        auto coef = plain("product2d", 2);
        const auto per = corrector::solve_periodic_cell(coef.periodic(), 32, solver);
        const auto rows = flux_average_tensor(coef, per, {2.0, 4.0, 8.0}, 8.0, 32, solver);
        for (const auto& row : rows) CHECK(row.rel_gap < 0.02);
    }
    SUBCASE("single defect: gap scales like R^-d") {
        auto coef = PerturbedCoefficient(
            PeriodicCoefficient::preset("identity", 2),
            coefficients::DefectProfile{},  // default bump
            std::make_shared<geometry::DefectPointSet>(2, 2.0, 6),
            coefficients::DefectSupport::OriginOnly);
        const auto per = corrector::solve_periodic_cell(coef.periodic(), 16, solver);
        const auto rows = flux_average_tensor(coef, per, {4.0, 8.0, 16.0}, 16.0, 8, solver);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double ratio = rows[i - 1].rel_gap / rows[i].rel_gap;
            CHECK(ratio > 2.0);
            CHECK(ratio < 8.0);
        }
    }
}

TEST_CASE("runner pipelines") {
    namespace fs = std::filesystem;
    const fs::path tmp = fs::temp_directory_path() / "homlab_runner_test";
    fs::remove_all(tmp);

    SUBCASE("geometry-certify writes the certificate") {
        auto cfg = runner::default_config("geometry-certify");
        cfg["geometry"] = {{"dim", 2}, {"c0", 2.0}, {"index_bound", 6}};
        cfg["min_inclusion_samples"] = 5000;
        cfg["out_dir"] = (tmp / "gc").string();
        const auto res = runner::run(cfg);
        CHECK(fs::exists(tmp / "gc" / "certificate.json"));
        std::ifstream is(tmp / "gc" / "certificate.json");
        std::string text((std::istreambuf_iterator<char>(is)), {});
        CHECK(text.find("h2_ratio_min") != std::string::npos);
    }

    SUBCASE("reproducible manifests, hash for hash") {
        auto cfg = runner::default_config("rates-1d", "sin-bump");
        cfg["rates1d"] = {{"eps_min_exp", 3}, {"eps_max_exp", 5}, {"growth_n_max", 6}};
        cfg["out_dir"] = (tmp / "r1").string();
        const auto res1 = runner::run(cfg);
        cfg["out_dir"] = (tmp / "r2").string();
        const auto res2 = runner::run(cfg);
        // Same artifacts bit for bit (config differs only in out_dir).
        CHECK(res1.manifest.at("files") == res2.manifest.at("files"));
        // CSV carries the config-hash comment and a header row.
        std::ifstream is(tmp / "r1" / "rates1d.csv");
        std::string line1, line2;
        std::getline(is, line1);
        std::getline(is, line2);
        CHECK(line1.rfind("# config_hash=", 0) == 0);
        CHECK(line2 == "epsilon,l2_R,h1_R,ratio_vs_bound");
    }

    SUBCASE("schema violations exit with code 2") {
        runner::json bad{{"command", "no-such-command"}, {"out_dir", (tmp / "bad").string()}};
        CHECK_THROWS_AS(runner::run(bad), ConfigError);
    }

    SUBCASE("cli exit codes") {
        const std::string out = (tmp / "cli").string();
        {
            std::vector<const char*> argv = {"homlab", "geometry-certify", "--dim", "1",
                                             "--index-bound", "8", "--seedless", "--out",
                                             out.c_str()};
            CHECK(runner::run_cli(int(argv.size()), const_cast<char**>(argv.data())) == 0);
            CHECK(fs::exists(tmp / "cli" / "certificate.json"));
        }
        {
            std::vector<const char*> argv = {"homlab", "geometry-certify", "--no-such-flag"};
            CHECK(runner::run_cli(int(argv.size()), const_cast<char**>(argv.data())) == 2);
        }
        {
            // Uncertifiable enumeration bound: numerical failure, exit 3.
            std::vector<const char*> argv = {"homlab", "rates-1d", "--preset", "sin-bump",
                                             "--eps-min-exp", "6", "--eps-max-exp", "6",
                                             "--index-bound", "1", "--out", out.c_str()};
            CHECK(runner::run_cli(int(argv.size()), const_cast<char**>(argv.data())) == 3);
        }
        {
            std::vector<const char*> argv = {"homlab", "potential", "--cell-n", "16",
                                             "--print-config", "--out", out.c_str()};
            CHECK(runner::run_cli(int(argv.size()), const_cast<char**>(argv.data())) == 0);
        }
    }

    SUBCASE("defect-profile emits the three tables") {
        auto cfg = runner::default_config("defect-profile");
        cfg["geometry"] = {{"dim", 1}, {"c0", 2.0}, {"index_bound", 8}};
        cfg["coefficient"] = {{"periodic", {{"preset", "identity"}}},
                              {"profile",
                               {{"kind", "bump"}, {"amplitude", 1.0}, {"rho", 0.35},
                                {"normalization", "identical"}}}};
        cfg["defect_profile"] = {{"max_gen", 4},
                                 {"resolution", 0.01},
                                 {"radii_exps", std::vector<int>{4, 5, 6}},
                                 {"tail_index_bound", 3}};
        cfg["out_dir"] = (tmp / "dp").string();
        runner::run(cfg);
        for (const char* name : {"cell_norms.csv", "decay.csv", "tails.csv", "ellipticity.json"})
            CHECK(fs::exists(tmp / "dp" / name));
    }
}
