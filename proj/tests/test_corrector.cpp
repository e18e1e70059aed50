#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "homlab/corrector.hpp"

using namespace homlab;
using namespace homlab::corrector;
using coefficients::PeriodicCoefficient;
using coefficients::PerturbedCoefficient;
using geometry::make_point;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
const double kSqrt3 = std::sqrt(3.0);

pde::SolverConfig tight() {
    pde::SolverConfig cfg;
    cfg.rel_tol = 1e-10;
    cfg.max_iter = 4000;
    return cfg;
}

}  // namespace

TEST_CASE("constant coefficient has a zero corrector") {
    auto per = PeriodicCoefficient::preset("constant", 2, 2.5);
    const auto cell = solve_periodic_cell(per, 16, tight());
    for (const auto& w : cell.w)
        for (double v : w.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cell.a_star.at(0, 0) == doctest::Approx(2.5));
    CHECK(cell.a_star.at(1, 1) == doctest::Approx(2.5));
    CHECK(cell.a_star.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("1D cell problem matches the explicit solution") {
    // w'(y) = a*/a_per(y) - 1 pointwise for a_per = 2 + sin(2 pi y).
    auto per = PeriodicCoefficient::preset("sin1d", 1);
    const int n = 512;
    const auto cell = solve_periodic_cell(per, n, tight());
    CHECK(cell.a_star.at(0, 0) == doctest::Approx(kSqrt3).epsilon(1e-5));
    const auto& w = cell.w[0];
    for (std::size_t i = 0; i < w.values.size(); i += 17) {
        const double y = w.grid.position(w.grid.decode(i))[0];
        const double expect = kSqrt3 / (2.0 + std::sin(kTwoPi * y)) - 1.0;
        CHECK(w.gradient(i, 0) == doctest::Approx(expect).epsilon(5e-4));
    }
}

TEST_CASE("homogenized tensor closed forms") {
    SUBCASE("1D harmonic mean at n=1024 within 1e-4") {
        auto per = PeriodicCoefficient::preset("sin1d", 1);
        const auto cell = solve_periodic_cell(per, 1024, tight());
        // Oracle: a* = 1 / int_0^1 dy/(2+sin 2 pi y) = sqrt(3).
        const double oracle = 1.0 / simpson(
                                        [](double y) { return 1.0 / (2.0 + std::sin(kTwoPi * y)); },
                                        0.0, 1.0, 1 << 15);
        CHECK(oracle == doctest::Approx(kSqrt3).epsilon(1e-10));
        CHECK(std::abs(cell.a_star.at(0, 0) - kSqrt3) < 1e-4);
    }
    SUBCASE("2D laminate: harmonic by the laminate axis, arithmetic across") {
        auto per = PeriodicCoefficient::preset("laminate2d", 2);
        const auto cell = solve_periodic_cell(per, 256, tight());
        CHECK(std::abs(cell.a_star.at(0, 0) - kSqrt3) < 1e-3);
        CHECK(std::abs(cell.a_star.at(1, 1) - 3.0) < 1e-3);
        CHECK(std::abs(cell.a_star.at(0, 1)) < 1e-10);
        // w_{e2} = 0; w_{e1} depends on y1 only.
        for (double v : cell.w[1].values) CHECK(v == doctest::Approx(0.0).epsilon(1e-10));
        const auto& w0 = cell.w[0];
        const int m = w0.grid.points_per_axis();
        for (int i = 0; i < m; i += 7)
            for (int j = 1; j < m; j += 13) {
                const double base = w0.values[w0.grid.encode({i, 0, 0, 0})];
                CHECK(w0.values[w0.grid.encode({i, j, 0, 0})] ==
                      doctest::Approx(base).epsilon(1e-9));
            }
    }
    SUBCASE("eigenvalues sit between harmonic and arithmetic means") {
        auto per = PeriodicCoefficient::preset("product2d", 2);
        const auto cell = solve_periodic_cell(per, 64, tight());
        const double harm = 1.0 / simpson(
                                      [&](double t) {
                                          return simpson(
                                              [&](double u) {
                                                  return 1.0 / ((2.0 + std::cos(kTwoPi * t)) *
                                                                (2.0 + std::cos(kTwoPi * u)));
                                              },
                                              0.0, 1.0, 256);
                                      },
                                      0.0, 1.0, 256);
        const double arith = 4.0;  // mean of (2+cos)(2+cos) over the cell
        const double eig = cell.a_star.min_eigenvalue();
        CHECK(eig >= harm * (1.0 - 1e-6));
        CHECK(eig <= arith * (1.0 + 1e-6));
        CHECK(cell.a_star.at(0, 1) == doctest::Approx(cell.a_star.at(1, 0)));
    }

    SUBCASE("energy form equals the direct formula") {
        auto per = PeriodicCoefficient::preset("product2d", 2);
        const auto cell = solve_periodic_cell(per, 64, tight());
        // e_i^T a* e_j via the symmetric formula int (e_i + grad w_i)^T a (e_j + grad w_j).
        const auto& grid = cell.grid;
        const std::size_t total = grid.num_unknowns();
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                double acc = 0.0;
                for (std::size_t node = 0; node < total; ++node) {
                    const auto y = grid.position(grid.decode(node));
                    for (int k = 0; k < 2; ++k) {
                        const double akk = per.eval_diag(k, y);
                        const double gi = (k == i ? 1.0 : 0.0) + cell.w[std::size_t(i)].gradient(node, k);
                        const double gj = (k == j ? 1.0 : 0.0) + cell.w[std::size_t(j)].gradient(node, k);
                        acc += akk * gi * gj;
                    }
                }
                acc /= double(total);
                CHECK(acc == doctest::Approx(cell.a_star.at(i, j)).epsilon(5e-3));
            }
    }
}

TEST_CASE("perturbed corrector") {
    auto per = PeriodicCoefficient::preset("identity", 2);
    auto set = std::make_shared<geometry::DefectPointSet>(2, 2.0, 8);
    coefficients::DefectProfile bump;
    bump.rho = 0.35;
    SUBCASE("no defects means zero") {
        coefficients::DefectProfile zero = bump;
        zero.amplitude = 0.0;
        PerturbedCoefficient coef(per, zero, set);
        const auto cell = solve_periodic_cell(per, 16, tight());
        PerturbedSolveOptions opt;
        opt.box_l = 4.0;
        opt.nodes_per_unit = 8;
        opt.solver = tight();
        const auto wt = solve_perturbed_corrector(coef, cell, 0, opt);
        for (double v : wt.w_tilde.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("single defect gradient decays outward") {
        PerturbedCoefficient coef(per, bump, set, coefficients::DefectSupport::OriginOnly);
        const auto cell = solve_periodic_cell(per, 16, tight());
        PerturbedSolveOptions opt;
        opt.box_l = 16.0;
        opt.nodes_per_unit = 8;
        opt.solver = tight();
        const auto wt = solve_perturbed_corrector(coef, cell, 0, opt);
        // || grad w~ ||_{L2(B_{2R} \ B_R)} decreasing over the dyadic ladder.
        const auto& grid = wt.grid;
        double prev = 1e300;
        for (double R : {1.0, 2.0, 4.0, 8.0}) {
            double acc = 0.0;
            for (std::size_t i = 0; i < wt.w_tilde.values.size(); ++i) {
                const auto x = grid.position(grid.decode(i));
                const double r = std::hypot(x[0], x[1]);
                if (r < R || r >= 2.0 * R) continue;
                for (int a = 0; a < 2; ++a) {
                    const double ga = wt.w_tilde.gradient(i, a);
                    acc += ga * ga;
                }
            }
            acc = std::sqrt(acc * grid.h() * grid.h());
            CHECK(acc < prev);
            prev = acc;
        }
    }
    SUBCASE("richardson truncation estimate is reported") {
        PerturbedCoefficient coef(per, bump, set, coefficients::DefectSupport::OriginOnly);
        const auto cell = solve_periodic_cell(per, 16, tight());
        PerturbedSolveOptions opt;
        opt.box_l = 8.0;
        opt.nodes_per_unit = 8;
        opt.richardson = true;
        opt.solver = tight();
        const auto wt = solve_perturbed_corrector(coef, cell, 0, opt);
        CHECK(wt.truncation_error > 0.0);
        CHECK(wt.truncation_error < 0.1);
    }
    SUBCASE("uncovered defect support raises the flag") {
        PerturbedCoefficient coef(per, bump, set);
        const auto cell = solve_periodic_cell(per, 16, tight());
        PerturbedSolveOptions opt;
        opt.box_l = 2.0;  // the defect at (2,0) has support crossing the boundary
        opt.nodes_per_unit = 8;
        opt.solver = tight();
        const auto wt = solve_perturbed_corrector(coef, cell, 0, opt);
        CHECK(wt.uncovered_defect);
    }
}

TEST_CASE("divergence-free matrix M") {
    SUBCASE("constant coefficient gives M = 0") {
        auto per = PeriodicCoefficient::preset("constant", 2, 2.0);
        const auto cell = solve_periodic_cell(per, 16, tight());
        const auto M = build_M(per, cell.a_star, cell);
        for (const auto& comp : M.comp)
            for (double v : comp.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-10));
    }
    SUBCASE("cell averages vanish by construction of a*") {
        auto per = PeriodicCoefficient::preset("product2d", 2);
        const auto cell = solve_periodic_cell(per, 32, tight());
        const auto M = build_M(per, cell.a_star, cell);
        CHECK(M.max_mean_abs <= 1e-10 * 9.0);
    }
    SUBCASE("divergence residual decreases at order >= 1 under h-halving") {
        auto per = PeriodicCoefficient::preset("product2d", 2);
        const auto coarse = solve_periodic_cell(per, 32, tight());
        const auto fine = solve_periodic_cell(per, 64, tight());
        const double r1 = build_M(per, coarse.a_star, coarse).max_div_residual;
        const double r2 = build_M(per, fine.a_star, fine).max_div_residual;
        CHECK(std::log2(r1 / r2) >= 1.0);
    }
}

TEST_CASE("potential field") {
    SUBCASE("zero M gives zero B") {
        auto per = PeriodicCoefficient::preset("constant", 2, 1.0);
        const auto cell = solve_periodic_cell(per, 16, tight());
        const auto M = build_M(per, cell.a_star, cell);
        const auto B = solve_potential(M);
        for (const auto& comp : B.comp)
            for (double v : comp.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("single Fourier mode matches the closed form") {
        // Hand-built M: M_0^0 = sin(2 pi y2), M_0^1 = 0 (divergence free).
        // -lap B = d_2 M^0 - d_1 M^1 = 2 pi cos(2 pi y2) => B = cos(2 pi y2)/(2 pi).
        pde::UniformGrid grid{2, 96, 0.0, 1.0, pde::Bc::Periodic};
        MatrixFieldPer M;
        M.grid = grid;
        M.comp.assign(4, pde::GridField::zeros(grid));
        for (std::size_t i = 0; i < grid.num_unknowns(); ++i) {
            const auto y = grid.position(grid.decode(i));
            M.comp[0].values[i] = std::sin(kTwoPi * y[1]);  // (k=0, i=0)
        }
        const auto B = solve_potential(M);
        for (std::size_t i = 0; i < grid.num_unknowns(); i += 41) {
            const auto y = grid.position(grid.decode(i));
            const double expect = std::cos(kTwoPi * y[1]) / kTwoPi;
            CHECK(B.value(0, 0, 1, i) == doctest::Approx(expect).epsilon(3e-3));
        }
        // Antisymmetry is structural.
        for (std::size_t i = 0; i < grid.num_unknowns(); i += 97)
            CHECK(B.value(0, 0, 1, i) == -B.value(0, 1, 0, i));
    }
    SUBCASE("identity residuals drop at order >= 1 under h-halving") {
        auto per = PeriodicCoefficient::preset("product2d", 2);
        const auto coarse = solve_periodic_cell(per, 32, tight());
        const auto fine = solve_periodic_cell(per, 64, tight());
        const auto B1 = solve_potential(build_M(per, coarse.a_star, coarse));
        const auto B2 = solve_potential(build_M(per, fine.a_star, fine));
        CHECK(std::log2(B1.div_residual / B2.div_residual) >= 1.0);
        CHECK(std::log2(B1.curl_residual / B2.curl_residual) >= 1.0);
    }
}
