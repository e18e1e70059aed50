#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "homlab/corrector.hpp"

namespace homlab::multiscale {

using coefficients::PerturbedCoefficient;
using coefficients::SymMat;
using corrector::PeriodicCellSolution;
using corrector::PerturbedCorrector;
using geometry::Point;
using pde::GridField;
using pde::UniformGrid;

// The Dirichlet problem on the unit cube with an eps ladder and an interior
// sub-box for the H1 remainder norm.
struct MultiscaleProblem {
    PerturbedCoefficient coef;
    std::function<double(const Point&)> source;  // f on (0,1)^d
    std::vector<double> eps_list;
    double omega1_lo = 0.25;
    double omega1_hi = 0.75;

    int min_nodes_per_eps = 16;  // grid must resolve eps at this density
    int base_n = 32;
    int max_n = 1024;
    int cell_n = 64;  // periodic cell grid for the correctors

    // Truncated box for the perturbed corrector (0 disables it).
    double corrector_box_l = 0.0;
    int corrector_nodes_per_unit = 8;

    bool compute_h_eps = true;
    bool refine_check = false;  // admit rows only when stable under doubling
    double report_r = 2.0;      // exponent for the nu_r / mu_r report fields

    pde::SolverConfig solver;

    int grid_n_for(double eps) const;
    void validate() const;
};

GridField solve_oscillatory(const MultiscaleProblem& problem, double eps, const UniformGrid& grid);
GridField solve_homogenized(const MultiscaleProblem& problem, const SymMat& a_star,
                            const UniformGrid& grid);

// u^{eps,1} = u* + eps sum_i d_i u* w_{e_i}(./eps); the perturbed corrector
// part is zero-extended beyond its truncation box.
GridField first_order_expansion(const GridField& u_star, const PeriodicCellSolution& per,
                                const std::vector<PerturbedCorrector>* w_tilde, double eps);

struct ReportRow {
    double eps = 0.0;
    int n = 0;
    double l2_R = 0.0;        // ||R^eps||_{L2(Omega)}
    double h1_R_omega1 = 0.0; // ||grad R^eps||_{L2(Omega_1)}
    double h_eps = 0.0;       // ||H^eps||_{L2(Omega)} (0 if disabled)
    bool admitted = true;
};

struct ConvergenceReport {
    std::vector<ReportRow> rows;
    AffineFit l2_fit;  // log-log slopes
    AffineFit h1_fit;
    double nu_r = 1.0;
    double mu_r = 0.0;
    double a_star_00 = 0.0;
    bool corrector_box_covers_domain = true;
};

ConvergenceReport remainder_study(const MultiscaleProblem& problem);

struct FluxAverageRow {
    double radius = 0.0;
    SymMat estimate;
    double rel_gap = 0.0;  // Frobenius distance to the periodic a*
};

// Flux averages a(e_j + grad w_j) over nested box-norm balls B_R, compared to
// the periodic homogenized tensor.
std::vector<FluxAverageRow> flux_average_tensor(const PerturbedCoefficient& coef,
                                                const PeriodicCellSolution& per,
                                                const std::vector<double>& radii, double box_l,
                                                int nodes_per_unit, const pde::SolverConfig& solver);

}  // namespace homlab::multiscale
