#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "homlab/coefficients.hpp"

using namespace homlab;
using namespace homlab::coefficients;
using geometry::make_index;
using geometry::make_point;

namespace {

std::shared_ptr<geometry::DefectPointSet> line_set(int bound = 14) {
    return std::make_shared<geometry::DefectPointSet>(1, 2.0, bound);
}

DefectProfile unit_bump(double rho = 0.35) {
    DefectProfile p;
    p.kind = ProfileKind::Bump;
    p.amplitude = 1.0;
    p.rho = rho;
    return p;
}

}  // namespace

TEST_CASE("periodic presets") {
    auto sin1 = PeriodicCoefficient::preset("sin1d", 1);
    CHECK(sin1.eval_diag(0, make_point({0.25})) == doctest::Approx(3.0));
    CHECK(sin1.eval_diag(0, make_point({0.75})) == doctest::Approx(1.0));
    // 1-periodicity to machine precision.
    for (double y : {0.1, 0.3, 0.77}) {
        CHECK(sin1.eval_diag(0, make_point({y})) ==
              doctest::Approx(sin1.eval_diag(0, make_point({y + 1.0}))).epsilon(1e-14));
    }
    auto lam = PeriodicCoefficient::preset("laminate2d", 2);
    CHECK(lam.eval_diag(0, make_point({0.0, 0.3})) == doctest::Approx(3.0));
    CHECK(lam.eval_diag(1, make_point({0.9, 0.1})) == doctest::Approx(3.0));
    CHECK(lam.eval_entry(0, 1, make_point({0.2, 0.4})) == 0.0);
    auto prod = PeriodicCoefficient::preset("product2d", 2);
    CHECK(prod.eval_diag(0, make_point({0.0, 0.0})) == doctest::Approx(9.0));
    CHECK(prod.eval_diag(0, make_point({0.5, 0.5})) == doctest::Approx(1.0));
}

TEST_CASE("coefficient evaluation with defects") {
    auto per = PeriodicCoefficient::preset("identity", 1);
    SUBCASE("zero amplitude gives the periodic part") {
        auto prof = unit_bump();
        prof.amplitude = 0.0;
        PerturbedCoefficient coef(per, prof, line_set());
        CHECK(coef.eval(make_point({2.0})).at(0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("defect center adds phi(0)") {
        PerturbedCoefficient coef(per, unit_bump(0.5), line_set());
        CHECK(coef.eval(make_point({2.0})).at(0, 0) == doctest::Approx(2.0));  // 1 + phi(0), phi(0)=1
        // No defect within the support radius of x=3.
        CHECK(coef.eval(make_point({3.0})).at(0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("profile validation") {
        auto prof = unit_bump(0.7);  // > 1/2
        CHECK_THROWS_AS(PerturbedCoefficient(per, prof, line_set()), ConfigError);
    }
    SUBCASE("ellipticity floor") {
        auto sin1 = PeriodicCoefficient::preset("sin1d", 1);
        PerturbedCoefficient plain(sin1, std::nullopt, line_set());
        CHECK(ellipticity_floor(plain, 512) == doctest::Approx(1.0).epsilon(1e-4));
        PerturbedCoefficient bumped(per, unit_bump(), line_set());
        CHECK(bumped.lambda_check() >= 1.0 - 1e-12);
        auto lam = PeriodicCoefficient::preset("laminate2d", 2);
        PerturbedCoefficient lam2(lam, std::nullopt,
                                  std::make_shared<geometry::DefectPointSet>(2, 2.0, 6));
        CHECK(ellipticity_floor(lam2, 256) == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("cell norms") {
    auto per = PeriodicCoefficient::preset("identity", 1);
    SUBCASE("zero field") {
        auto prof = unit_bump();
        prof.amplitude = 0.0;
        PerturbedCoefficient coef(per, prof, line_set());
        CHECK(cell_norm(coef, make_index({3}), 2.0, 0.01, CellField::Defect) ==
              doctest::Approx(0.0));
    }
    SUBCASE("single bump matches the 1D quadrature oracle") {
        PerturbedCoefficient coef(per, unit_bump(), line_set());
        // High-resolution Simpson oracle for the L2 norm of one copy.
        const double l2 = std::sqrt(simpson(
            [&](double r) {
                const double v = coef.profile()->value(std::abs(r), 3, 1);
                return v * v;
            },
            -0.5, 0.5, 1 << 16));
        const double measured = cell_norm(coef, make_index({3}), 2.0, 0.0005, CellField::Defect);
        CHECK(measured == doctest::Approx(l2).epsilon(1e-4));
        // Residual against the translated copy vanishes (identical copies,
        // disjoint supports).
        CHECK(cell_norm(coef, make_index({3}), 2.0, 0.001, CellField::DefectResidual) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("sup over cells is the single-copy norm for identical bumps") {
        PerturbedCoefficient coef(per, unit_bump(), line_set());
        const double ref = cell_norm(coef, make_index({2}), 2.0, 0.001, CellField::Defect);
        for (int g : {3, 5, 8}) {
            CHECK(cell_norm(coef, make_index({g}), 2.0, 0.001, CellField::Defect) ==
                  doctest::Approx(ref).epsilon(1e-6));
        }
    }
}

TEST_CASE("average decay") {
    auto per = PeriodicCoefficient::preset("identity", 1);
    SUBCASE("zero field means zero everywhere") {
        auto prof = unit_bump();
        prof.amplitude = 0.0;
        PerturbedCoefficient coef(per, prof, line_set());
        const auto rep = average_decay(coef, make_point({0.0}), {16.0, 64.0});
        for (const auto& row : rep.rows) CHECK(row.mean == 0.0);
    }
    SUBCASE("identical copies: mean matches the direct sum oracle") {
        PerturbedCoefficient coef(per, unit_bump(0.25), line_set());
        const double mass = simpson(
            [&](double r) { return coef.profile()->value(std::abs(r), 0, 1); }, -0.25, 0.25, 8192);
        // Defects inside [-64, 64]: 0, +-2, ..., +-32 fully covered; the
        // copies at +-64 sit on the boundary and contribute half each.
        const double expect = 12.0 * mass / 128.0;
        const auto rep = average_decay(coef, make_point({0.0}), {64.0});
        CHECK(rep.rows[0].mean == doctest::Approx(expect).epsilon(1e-3));
    }
    SUBCASE("cell-normalized copies track the bound rate") {
        // Saturating family: amplitude ~ |V_p|^{-1/2}, support ~ cell scale.
        DefectProfile prof = unit_bump(0.25);
        prof.normalization = Normalization::CellNormalized;
        PerturbedCoefficient coef(per, prof, line_set(13));
        std::vector<double> radii;
        for (int k = 4; k <= 12; ++k) radii.push_back(std::ldexp(1.0, k));
        const auto rep = average_decay(coef, make_point({0.0}), radii);
        CHECK(rep.fit.slope == doctest::Approx(-0.5).epsilon(0.4));
        double lo = 1e300, hi = 0.0;
        for (const auto& row : rep.rows) {
            lo = std::min(lo, row.bound_ratio);
            hi = std::max(hi, row.bound_ratio);
        }
        CHECK(hi / lo <= 3.0);
    }
}

TEST_CASE("holder spot check is a bounded diagnostic") {
    auto per = PeriodicCoefficient::preset("sin1d", 1);
    PerturbedCoefficient coef(per, unit_bump(), line_set());
    const double q = holder_spot_check(coef, 0.5);
    CHECK(q > 0.0);
    CHECK(q < 50.0);  // smooth closed forms: the quotient saturates, not blows up
    CHECK_THROWS_AS(holder_spot_check(coef, 1.5), ConfigError);
}

TEST_CASE("uniform tails") {
    auto per = PeriodicCoefficient::preset("identity", 1);
    PerturbedCoefficient coef(per, unit_bump(0.35), line_set(8));
    SUBCASE("vanishes beyond the cell extent") {
        CHECK(tail_uniform(coef, 600.0, 4, 0.02) == doctest::Approx(0.0));
    }
    SUBCASE("matches the single-profile tail when R cuts the support") {
        const double R = 0.2;
        const double tail = std::sqrt(2.0 * simpson(
                                          [&](double r) {
                                              const double v = coef.profile()->value(r, 2, 1);
                                              return v * v;
                                          },
                                          R, 0.35, 8192));
        CHECK(tail_uniform(coef, R, 3, 0.001) == doctest::Approx(tail).epsilon(0.02));
    }
    SUBCASE("nonincreasing in R") {
        double prev = 1e300;
        for (double R : {2.0, 4.0, 8.0, 16.0}) {
            const double v = tail_uniform(coef, R, 4, 0.02);
            CHECK(v <= prev + 1e-12);
            prev = v;
        }
    }
}
