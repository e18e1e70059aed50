#pragma once

#include <optional>
#include <vector>

#include "homlab/coefficients.hpp"
#include "homlab/pde.hpp"

namespace homlab::corrector {

using coefficients::PerturbedCoefficient;
using coefficients::PeriodicCoefficient;
using coefficients::SymMat;
using geometry::Index;
using geometry::Point;
using pde::GridField;
using pde::UniformGrid;

// Periodic cell problem solved for every direction, plus the homogenized
// tensor from the same nodal quadrature (so the mean of M vanishes exactly).
struct PeriodicCellSolution {
    UniformGrid grid;
    std::vector<GridField> w;  // one field per direction e_j
    std::vector<pde::SolveStats> stats;
    SymMat a_star;
};

PeriodicCellSolution solve_periodic_cell(const PeriodicCoefficient& a_per, int n,
                                         const pde::SolverConfig& cfg);

// Individual cell solve for one direction (mean-zero).
GridField solve_periodic_corrector(const PeriodicCoefficient& a_per, const UniformGrid& grid,
                                   int direction, const pde::SolverConfig& cfg,
                                   pde::SolveStats* stats = nullptr);

// (a*)_{ij} = cell average of e_i^T a (e_j + grad w_j), centered nodal gradient.
SymMat homogenized_tensor(const PeriodicCoefficient& a_per, const std::vector<GridField>& w);

struct PerturbedSolveOptions {
    double box_l = 16.0;       // box half-width; domain is [-L, L]^d
    int nodes_per_unit = 8;    // grid step h = 1/nodes_per_unit
    pde::Bc bc = pde::Bc::Dirichlet0;
    bool richardson = false;   // also solve on the 2L box and report the gap
    pde::SolverConfig solver;
};

struct PerturbedCorrector {
    UniformGrid grid;
    GridField w_tilde;
    int direction = 0;
    double truncation_error = 0.0;  // ||grad w_L - grad w_2L||_{L2(B_{L/2})}
    pde::SolveStats stats;
    bool uncovered_defect = false;  // a copy's support crosses the box boundary
};

// Truncated whole-space corrector: -div(a grad w~) = div(a~ (e_j + grad w_per,j))
// on [-L, L]^d with the requested boundary condition.
PerturbedCorrector solve_perturbed_corrector(const PerturbedCoefficient& coef,
                                             const PeriodicCellSolution& per, int direction,
                                             const PerturbedSolveOptions& opt);

struct SublinearityRow {
    double s = 0.0;
    double max_ratio = 0.0;
};
struct GrowthRow {
    int level = 0;      // box half-width 2^level
    double sup_abs = 0.0;
};
struct CellNormRow {
    Index p{};
    int gen = 0;
    double grad_l2 = 0.0;      // ||grad w~||_{L2(V_p cap box)}
    double residual_l2 = 0.0;  // ||grad w~ - tau_{-p} grad w~_single||
};
struct DiagnosticsReport {
    std::vector<SublinearityRow> sublinearity;
    std::vector<GrowthRow> growth;
    AffineFit growth_fit;  // sup |w~| vs dyadic level
    std::vector<CellNormRow> cells;
};

// Sublinearity ratios for s in {d+1, 2d}, sup |w~| over nested dyadic boxes,
// and per-cell gradient tables (against the translated single-defect solve
// when one is supplied).
DiagnosticsReport corrector_diagnostics(const PerturbedCoefficient& coef,
                                        const PeriodicCellSolution& per,
                                        const PerturbedCorrector& wt,
                                        const PerturbedCorrector* single_reference, int max_gen);

// Divergence-free matrix M_k^i = a*_{ik} - sum_j a_ij (delta_jk + d_j w_k) on
// the periodic cell; component (k,i) stored at index k*d + i.
struct MatrixFieldPer {
    UniformGrid grid;
    std::vector<GridField> comp;
    double max_div_residual = 0.0;
    double max_mean_abs = 0.0;  // cell averages; 0 up to roundoff by construction
    const GridField& at(int k, int i) const { return comp[std::size_t(k * grid.d + i)]; }
};
MatrixFieldPer build_M(const PeriodicCoefficient& a_per, const SymMat& a_star,
                       const PeriodicCellSolution& per);

// Antisymmetric potential: B_k^{i,j} stored once per pair i<j, so the
// antisymmetry is structural. Solved by the spectral periodic Poisson solver.
struct PotentialField {
    UniformGrid grid;
    int d = 1;
    std::vector<GridField> comp;  // k * npairs + pair(i<j)
    double div_residual = 0.0;    // max_kj ||sum_i d_i B_k^{i,j} - M_k^j||_{L2}
    double curl_residual = 0.0;   // wide-stencil residual of -lap B = d_j M^i - d_i M^j

    int pair_index(int i, int j) const;  // requires i < j
    // Signed value of B_k^{i,j} at a node (0 when i == j).
    double value(int k, int i, int j, std::size_t node) const;
};
PotentialField solve_potential(const MatrixFieldPer& M);

}  // namespace homlab::corrector
