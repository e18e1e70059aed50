#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "homlab/errors.hpp"
#include "homlab/geometry.hpp"

namespace homlab::pde {

using geometry::Point;

enum class Bc : int { Dirichlet0 = 0, Periodic = 1 };

// Isotropic uniform grid on [lo, hi]^d with n cells per axis. Dirichlet
// unknowns live on the (n-1)^d interior nodes (the boundary is implicitly
// zero); periodic unknowns on the n^d nodes with wrap-around.
struct UniformGrid {
    int d = 1;
    int n = 4;
    double lo = 0.0;
    double hi = 1.0;
    Bc bc = Bc::Dirichlet0;

    double h() const { return (hi - lo) / double(n); }
    int points_per_axis() const { return bc == Bc::Dirichlet0 ? n - 1 : n; }
    std::size_t num_unknowns() const;
    void validate() const;

    // Physical position of the unknown with per-axis node index j (Dirichlet
    // j in [0, n-2] maps to lattice index j+1; periodic j in [0, n-1]).
    Point position(const std::array<int, 4>& j) const;
    std::array<int, 4> decode(std::size_t flat) const;
    std::size_t encode(const std::array<int, 4>& j) const;

    bool operator==(const UniformGrid& o) const {
        return d == o.d && n == o.n && lo == o.lo && hi == o.hi && bc == o.bc;
    }
};

struct GridField {
    UniformGrid grid;
    std::vector<double> values;

    static GridField zeros(const UniformGrid& g);
    double mean() const;
    void project_mean_zero();

    // Multilinear interpolation at a physical point: periodic fields wrap,
    // Dirichlet fields are zero on and beyond the boundary.
    double interpolate(const Point& x) const;

    // Centered-difference gradient component at unknown `flat`.
    double gradient(std::size_t flat, int axis) const;
};

// Raw field dump: 32-byte header (8-byte magic "HOMLABF1", uint32 d, uint32 bc
// code, uint32 n per axis padded to four) followed by the little-endian f64
// payload. The bounding box travels in the run manifest, not the dump.
void write_field_dump(const std::string& path, const GridField& f);
GridField read_field_dump(const std::string& path, double lo, double hi);

struct SubBoxNorms {
    double l2 = 0.0;
    double h1_semi = 0.0;
};
// Midpoint quadrature of the field and its centered-difference gradient over
// a grid-aligned sub-box.
SubBoxNorms norms_and_gradient(const GridField& f, const Point& sub_lo, const Point& sub_hi,
                               std::vector<GridField>* gradient_out = nullptr);

}  // namespace homlab::pde
