#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "homlab/geometry.hpp"
#include "homlab/util.hpp"

namespace homlab::coefficients {

using geometry::Index;
using geometry::Point;

// Small symmetric matrix, row-major, d <= 4.
struct SymMat {
    int d = 1;
    std::array<double, 16> m{};
    double& at(int i, int j) { return m[std::size_t(i * 4 + j)]; }
    double at(int i, int j) const { return m[std::size_t(i * 4 + j)]; }
    static SymMat scaled_identity(int d, double c);
    double min_eigenvalue() const;  // cyclic Jacobi, exact enough for d <= 4
};

// Periodic background, period 1 per axis. Entries are constants plus sums of
// separable cosine terms coeff * prod_i cos(2 pi freq_i y_i + phase_i).
struct PeriodicCoefficient {
    struct Term {
        double coeff = 0.0;
        std::array<int, 4> freq{};
        std::array<double, 4> phase{};
    };
    struct Entry {
        double constant = 0.0;
        std::vector<Term> terms;
    };

    int d = 1;
    bool diagonal = true;
    std::vector<Entry> entries;  // diagonal: d entries; full: packed upper triangle

    double eval_entry(int i, int j, const Point& y) const;
    double eval_diag(int axis, const Point& y) const { return eval_entry(axis, axis, y); }
    SymMat eval(const Point& y) const;

    // Named presets: identity, constant (value), sin1d, laminate2d, product2d,
    // checker3d.
    static PeriodicCoefficient preset(const std::string& name, int d, double value = 1.0);
};

enum class ProfileKind { Bump, Algebraic };
enum class Normalization { Identical, CellNormalized };

// Scalar per-defect profile, applied as profile * Id. The cell-normalized
// variant rescales copy |p| so that its L^2 cell norm stays constant (bump) or
// extends the cutoff with the cell (algebraic), which is what saturates the
// average-decay bound. Before the cutoff, the algebraic kind lies in L^r iff
// beta r > d; pick beta on either side of d/r for r-sensitive experiments.
struct DefectProfile {
    ProfileKind kind = ProfileKind::Bump;
    double amplitude = 1.0;
    double rho = 0.35;      // bump support radius / algebraic decay length
    double beta = 1.0;      // algebraic exponent
    double r_cut = 1.0;     // algebraic hard cutoff radius
    Normalization normalization = Normalization::Identical;
    int max_generation = -1;  // place copies only on |p| <= this (-1: all)

    double support_radius(int gen) const;
    double peak_amplitude(int gen, int d) const;
    // Scalar value at distance r from the copy centered on a generation-gen defect.
    double value(double r, int gen, int d) const;
    // Mass of the full copy: integral of |value| over R^d (cached per generation).
    double copy_mass(int gen, int d) const;
    void validate() const;
};

// Which defect copies are placed: the whole set, or only the origin copy
// (the single-defect reference field used by decay comparisons).
enum class DefectSupport { Full, OriginOnly };

// a = a_per + sum of profile copies over the defect set.
class PerturbedCoefficient {
  public:
    PerturbedCoefficient(PeriodicCoefficient per,
                         std::optional<DefectProfile> profile,
                         std::shared_ptr<geometry::DefectPointSet> set,
                         DefectSupport support = DefectSupport::Full);

    int dim() const { return per_.d; }
    bool diagonal() const { return per_.diagonal; }
    const PeriodicCoefficient& periodic() const { return per_; }
    const std::optional<DefectProfile>& profile() const { return profile_; }
    const geometry::DefectPointSet& set() const { return *set_; }
    std::shared_ptr<geometry::DefectPointSet> set_ptr() const { return set_; }
    double lambda_check() const { return lambda_check_; }
    bool has_defects() const { return profile_.has_value(); }
    DefectSupport support() const { return support_; }

    // Scalar defect field at x (the copies are disjoint by construction, so
    // only the nearest defect can contribute).
    double defect_scalar(const Point& x) const;
    double eval_diag_entry(int axis, const Point& x) const;
    // Full matrix with the ellipticity check of the module contract.
    SymMat eval(const Point& x) const;

    std::uint64_t content_hash() const;

  private:
    PeriodicCoefficient per_;
    std::optional<DefectProfile> profile_;
    std::shared_ptr<geometry::DefectPointSet> set_;
    DefectSupport support_ = DefectSupport::Full;
    double lambda_check_ = 0.0;
};

// Defect copies (centers scaled by `scale`, e.g. epsilon) whose support meets
// the axis-aligned box [lo, hi]^d; used by assembly to splat the defect field.
struct DefectSplat {
    Point center{};  // scaled position
    double radius = 0.0;
    int gen = 0;
};
std::vector<DefectSplat> active_defects(const PerturbedCoefficient& coef,
                                        const Point& lo, const Point& hi, double scale);

enum class CellField { Defect, DefectResidual };

// L^r norm of the defect field (or of its residual against the translated
// limit profile) over the Voronoi cell V_p, by nearest-point classification of
// a uniform local lattice with the given spacing.
double cell_norm(const PerturbedCoefficient& coef, const Index& p, double r,
                 double resolution, CellField which);

struct DecayRow {
    double radius = 0.0;
    double mean = 0.0;
    double bound_ratio = 0.0;  // mean / sqrt(log R / R^d)
};
struct DecayReport {
    std::vector<DecayRow> rows;
    AffineFit fit;  // log mean vs log R
};
// Mean of |defect field| over the balls B_R(x0); supports are integrated with
// per-copy local quadrature so large radii stay cheap.
DecayReport average_decay(const PerturbedCoefficient& coef, const Point& x0,
                          const std::vector<double>& radii);

// sup over pairs p != q of || a~ - tau_{-p} a~_inf ||_{L^2(V_q \ B_R(x_q))}.
double tail_uniform(const PerturbedCoefficient& coef, double R, int index_bound,
                    double resolution);

// Minimum sampled eigenvalue of the symmetrized coefficient (unit cell plus
// defect supports).
double ellipticity_floor(const PerturbedCoefficient& coef, int samples_per_axis);

// Diagnostic only: max sampled Holder quotient |a(x) - a(y)| / |x - y|^alpha
// over deterministic pairs at dyadic separations (regularity itself is taken
// from the closed forms, not certified).
double holder_spot_check(const PerturbedCoefficient& coef, double alpha, int pairs_per_scale = 64);

}  // namespace homlab::coefficients
