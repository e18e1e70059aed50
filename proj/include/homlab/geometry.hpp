#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "homlab/errors.hpp"

namespace homlab::geometry {

inline constexpr int kMaxDim = 4;

// Lattice index p of a defect point; components beyond the ambient dimension
// stay zero. |p| always means the max-norm of the index.
using Index = std::array<int, kMaxDim>;
using Point = std::array<double, kMaxDim>;

int max_norm(const Index& p);
double norm2(const Point& x, int d);
Index make_index(std::initializer_list<int> c);
Point make_point(std::initializer_list<double> c);

// Membership rule of the index set: among nonzero components,
// max |p_i| <= c0 + min |p_i| (vacuously true for the zero index).
bool in_index_set(const Index& p, int d, double c0);

// The dyadic defect point family. Construction enumerates every member index
// with |p| <= index_bound + 3 (the margin certifies neighbor distances, cell
// extents and annulus counts up to the requested bound); queries that would
// need more throw CertificationError instead of silently truncating.
class DefectPointSet {
  public:
    DefectPointSet(int d, double c0, int index_bound);

    int dim() const { return d_; }
    double c0() const { return c0_; }
    int index_bound() const { return index_bound_; }
    int enumeration_bound() const { return enum_bound_; }

    bool member(const Index& p) const { return in_index_set(p, d_, c0_); }
    // x_p = (sign(p_i) 2^{|p_i|})_i; rejects indices outside the set.
    Point point_of(const Index& p) const;

    const std::vector<Index>& indices() const { return indices_; }
    const std::vector<Point>& points() const { return points_; }

    struct Nearest {
        Index index{};
        double distance = 0.0;
    };
    // Closest defect point to y, ties broken by smallest |p| then
    // lexicographic index order. Certified against the enumeration bound.
    Nearest nearest(const Point& y) const;

    // Distance from x_p to the rest of the set (certified).
    double separation(const Index& p) const;

    // y in W_{x_p}, the 3/2-homothety of V_{x_p} about x_p, decided through
    // the pull-back x_p + (2/3)(y - x_p).
    bool in_dilated_cell(const Index& p, const Point& y) const;

    // Number of defect points with 2^n <= |x| < 2^{n+1} (half-open shell).
    int count_in_annulus(int n) const;

    // Indices p whose cell V_p meets the euclidean ball B_R(x0). Exact in
    // d = 1 (interval Voronoi boundaries); in d >= 2 decided by deterministic
    // low-discrepancy sampling of the ball plus its boundary sphere, after
    // excluding every point outside B_{8 max(R,1)}(x0).
    std::vector<Index> cells_intersecting_ball(const Point& x0, double R) const;

  private:
    void require_bound(int needed, const char* what) const;

    int d_;
    double c0_;
    int index_bound_;
    int enum_bound_;
    std::vector<Index> indices_;  // sorted by |x_p| (then |p|, then lex)
    std::vector<Point> points_;
    std::vector<double> norms_;
};

struct CellCountFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

struct GeometryCertificate {
    double h2_ratio_min = 0.0;
    double h2_ratio_max = 0.0;
    double h3_ratio_max = 0.0;
    int annulus_count_max = 0;
    std::vector<int> annulus_counts;
    CellCountFit cell_count_fit;
    long inclusion_violations = 0;
    long sampled_points = 0;
    std::string to_json() const;
};

// Measures the (H2)/(H3) ratio bounds, per-annulus counts, the log cell-count
// fit and the d=2 bounding-box inclusion over all members with |p| <= the
// set's index bound.
GeometryCertificate certify_assumptions(const DefectPointSet& set,
                                        long min_inclusion_samples = 100000);

// Checks the axis sequence p_n = n e_axis: the recentred cells contain the
// guaranteed balls B_{D/2}, the radii grow, and a fixed test box [-3,3]^d is
// eventually contained.
bool exhaustion_check(const DefectPointSet& set, int axis, int n_max);

}  // namespace homlab::geometry
