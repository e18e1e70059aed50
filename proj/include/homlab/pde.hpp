#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "homlab/coefficients.hpp"
#include "homlab/grid.hpp"

namespace homlab::pde {

// Diagonal coefficient entry sampled at a face midpoint.
using DiagEvaluator = std::function<double(int axis, const Point& x)>;
using TensorEvaluator = std::function<coefficients::SymMat(const Point& x)>;

// Face-midpoint samples, one array per axis. Face (axis a, lattice j) sits
// between extended nodes j and j+e_a; extents follow the grid's bc.
struct FaceField {
    UniformGrid grid;
    std::array<std::vector<double>, 4> axis;

    static FaceField zeros(const UniformGrid& g);
    static FaceField sample(const UniformGrid& g, const DiagEvaluator& fn);
    std::size_t face_index(int a, const std::array<int, 4>& j) const;
    int node_extent() const { return grid.bc == Bc::Dirichlet0 ? grid.n + 1 : grid.n; }
    Point face_midpoint(int a, const std::array<int, 4>& j) const;
};

// Assembled divergence-form operator -div_h(a grad_h .): the 2d+1-point flux
// stencil for diagonal coefficients, or the compact 3^d cell-energy stencil
// for full tensors. Symmetry is structural: each face/cell sample is the
// single source of both (i,j) and (j,i) couplings.
class DivFormSystem {
  public:
    static DivFormSystem assemble_diagonal(FaceField faces, double lambda_floor,
                                           std::uint64_t coefficient_hash);
    static DivFormSystem assemble_tensor(const UniformGrid& grid, const TensorEvaluator& fn,
                                         double lambda_floor, std::uint64_t coefficient_hash);

    const UniformGrid& grid() const { return grid_; }
    bool diagonal_path() const { return diagonal_; }
    std::uint64_t coefficient_hash() const { return hash_; }
    double lambda() const { return lambda_; }
    const FaceField& faces() const { return faces_; }

    void apply(const std::vector<double>& u, std::vector<double>& out) const;
    std::vector<double> diag() const;

    // Energy form <A u, v> h^d; equals the face-flux sum exactly (summation
    // by parts).
    double energy(const std::vector<double>& u, const std::vector<double>& v) const;
    double flux_energy(const std::vector<double>& u, const std::vector<double>& v) const;

    // Dense row extraction for small-grid tests.
    std::vector<double> row(std::size_t i) const;

  private:
    UniformGrid grid_;
    bool diagonal_ = true;
    FaceField faces_;
    // Tensor path: explicit CSR with bitwise-symmetric entries (each unordered
    // node pair is computed once and written to both slots).
    std::vector<std::size_t> csr_ptr_;
    std::vector<std::uint32_t> csr_col_;
    std::vector<double> csr_val_;
    std::uint64_t hash_ = 0;
    double lambda_ = 0.0;
};

// Convenience assembly from a perturbed coefficient evaluated at x/eps. The
// periodic background is sampled per face; defect copies are splatted from
// the enumerated set, which keeps large boxes cheap.
DivFormSystem assemble_divform(const coefficients::PerturbedCoefficient& coef,
                               const UniformGrid& grid, double eps = 1.0);
FaceField sample_scaled_faces(const coefficients::PerturbedCoefficient& coef,
                              const UniformGrid& grid, double eps,
                              const DiagEvaluator& extra = nullptr);

// Discrete divergence of a face field, adjoint-consistent with the operator:
// rhs_i = sum_a (g_a(face_i) - g_a(face_{i-e_a}))/h.
std::vector<double> assemble_rhs_div(const FaceField& g);

struct SolverConfig {
    double rel_tol = 1e-9;
    int max_iter = 2000;
    enum class Precond { Jacobi, Multigrid } precond = Precond::Multigrid;
    void validate() const;
};

struct SolveStats {
    double residual = 0.0;  // relative
    int iterations = 0;
    bool converged = true;
    double mean_projection = 0.0;  // magnitude removed from a periodic rhs
};

// Preconditioned CG. Periodic systems get their rhs projected to mean zero
// (magnitude reported) and return a mean-zero solution.
GridField solve(const DivFormSystem& system, std::vector<double> rhs, const SolverConfig& config,
                SolveStats* stats = nullptr);

// Exact discrete inverse Laplacian on the periodic grid via the DFT symbol of
// the centered flux stencil; mean-zero in and out.
GridField poisson_periodic_spectral(const GridField& rhs);

}  // namespace homlab::pde
