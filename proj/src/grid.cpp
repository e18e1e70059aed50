#include "homlab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace homlab::pde {

void UniformGrid::validate() const {
    if (d < 1 || d > 4) throw ConfigError("UniformGrid: dimension must be in [1,4]");
    if (n < 4) throw ConfigError("UniformGrid: n must be >= 4");
    if (!(hi > lo)) throw ConfigError("UniformGrid: empty box");
}

std::size_t UniformGrid::num_unknowns() const {
    std::size_t m = 1;
    for (int a = 0; a < d; ++a) m *= std::size_t(points_per_axis());
    return m;
}

Point UniformGrid::position(const std::array<int, 4>& j) const {
    Point x{};
    const int off = bc == Bc::Dirichlet0 ? 1 : 0;
    for (int a = 0; a < d; ++a) x[std::size_t(a)] = lo + (double(j[std::size_t(a)] + off)) * h();
    return x;
}

std::array<int, 4> UniformGrid::decode(std::size_t flat) const {
    std::array<int, 4> j{};
    const std::size_t m = std::size_t(points_per_axis());
    for (int a = 0; a < d; ++a) {
        j[std::size_t(a)] = int(flat % m);
        flat /= m;
    }
    return j;
}

std::size_t UniformGrid::encode(const std::array<int, 4>& j) const {
    const std::size_t m = std::size_t(points_per_axis());
    std::size_t flat = 0;
    for (int a = d - 1; a >= 0; --a) flat = flat * m + std::size_t(j[std::size_t(a)]);
    return flat;
}

GridField GridField::zeros(const UniformGrid& g) {
    GridField f;
    f.grid = g;
    f.values.assign(g.num_unknowns(), 0.0);
    return f;
}

double GridField::mean() const {
    double s = 0;
    for (double v : values) s += v;
    return values.empty() ? 0.0 : s / double(values.size());
}

void GridField::project_mean_zero() {
    const double m = mean();
    for (double& v : values) v -= m;
}

double GridField::interpolate(const Point& x) const {
    const int d = grid.d;
    const double h = grid.h();
    const int m = grid.points_per_axis();
    std::array<int, 4> base{};
    std::array<double, 4> w{};
    for (int a = 0; a < d; ++a) {
        // Continuous lattice coordinate in unknown-index space.
        double t = (x[std::size_t(a)] - grid.lo) / h - (grid.bc == Bc::Dirichlet0 ? 1.0 : 0.0);
        if (grid.bc == Bc::Periodic) {
            const double span = double(grid.n);
            t = t - span * std::floor(t / span);
        }
        double fl = std::floor(t);
        base[std::size_t(a)] = int(fl);
        w[std::size_t(a)] = t - fl;
    }
    double acc = 0;
    for (int corner = 0; corner < (1 << d); ++corner) {
        double weight = 1.0;
        std::array<int, 4> j{};
        bool outside = false;
        for (int a = 0; a < d; ++a) {
            const int bit = (corner >> a) & 1;
            weight *= bit ? w[std::size_t(a)] : 1.0 - w[std::size_t(a)];
            int idx = base[std::size_t(a)] + bit;
            if (grid.bc == Bc::Periodic) {
                idx = ((idx % grid.n) + grid.n) % grid.n;
            } else if (idx < 0 || idx >= m) {
                outside = true;  // boundary or beyond: field value 0
            }
            j[std::size_t(a)] = idx;
        }
        if (outside || weight == 0.0) continue;
        acc += weight * values[grid.encode(j)];
    }
    return acc;
}

double GridField::gradient(std::size_t flat, int axis) const {
    const auto j = grid.decode(flat);
    const int m = grid.points_per_axis();
    auto sample = [&](int idx) -> double {
        if (grid.bc == Bc::Periodic) {
            auto jj = j;
            jj[std::size_t(axis)] = ((idx % grid.n) + grid.n) % grid.n;
            return values[grid.encode(jj)];
        }
        if (idx < 0 || idx >= m) return 0.0;
        auto jj = j;
        jj[std::size_t(axis)] = idx;
        return values[grid.encode(jj)];
    };
    return (sample(j[std::size_t(axis)] + 1) - sample(j[std::size_t(axis)] - 1)) / (2.0 * grid.h());
}

void write_field_dump(const std::string& path, const GridField& f) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw NumericalError("write_field_dump: cannot open " + path);
    char header[32] = {0};
    std::memcpy(header, "HOMLABF1", 8);
    const std::uint32_t d = std::uint32_t(f.grid.d);
    const std::uint32_t bc = std::uint32_t(f.grid.bc);
    std::memcpy(header + 8, &d, 4);
    std::memcpy(header + 12, &bc, 4);
    for (int a = 0; a < 4; ++a) {
        const std::uint32_t n = a < f.grid.d ? std::uint32_t(f.grid.n) : 0u;
        std::memcpy(header + 16 + 4 * a, &n, 4);
    }
    std::fwrite(header, 1, 32, fp);
    std::fwrite(f.values.data(), sizeof(double), f.values.size(), fp);
    std::fclose(fp);
}

GridField read_field_dump(const std::string& path, double lo, double hi) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw NumericalError("read_field_dump: cannot open " + path);
    char header[32];
    if (std::fread(header, 1, 32, fp) != 32 || std::memcmp(header, "HOMLABF1", 8) != 0) {
        std::fclose(fp);
        throw NumericalError("read_field_dump: bad header in " + path);
    }
    std::uint32_t d = 0, bc = 0, n = 0;
    std::memcpy(&d, header + 8, 4);
    std::memcpy(&bc, header + 12, 4);
    std::memcpy(&n, header + 16, 4);
    GridField f;
    f.grid = UniformGrid{int(d), int(n), lo, hi, Bc(bc)};
    f.grid.validate();
    f.values.assign(f.grid.num_unknowns(), 0.0);
    const std::size_t got = std::fread(f.values.data(), sizeof(double), f.values.size(), fp);
    std::fclose(fp);
    if (got != f.values.size()) throw NumericalError("read_field_dump: truncated payload in " + path);
    return f;
}

SubBoxNorms norms_and_gradient(const GridField& f, const Point& sub_lo, const Point& sub_hi,
                               std::vector<GridField>* gradient_out) {
    const UniformGrid& g = f.grid;
    const double h = g.h();
    for (int a = 0; a < g.d; ++a) {
        for (double v : {sub_lo[std::size_t(a)], sub_hi[std::size_t(a)]}) {
            const double t = (v - g.lo) / h;
            if (std::abs(t - std::round(t)) > 1e-9)
                throw ConfigError("norms_and_gradient: sub-box is not grid aligned");
        }
        if (sub_lo[std::size_t(a)] < g.lo - 1e-12 || sub_hi[std::size_t(a)] > g.hi + 1e-12)
            throw ConfigError("norms_and_gradient: sub-box exceeds the grid box");
    }
    if (gradient_out) {
        gradient_out->clear();
        for (int a = 0; a < g.d; ++a) gradient_out->push_back(GridField::zeros(g));
    }
    double l2 = 0, h1 = 0;
    const double weight = std::pow(h, g.d);
    const std::size_t total = g.num_unknowns();
    for (std::size_t i = 0; i < total; ++i) {
        const Point x = g.position(g.decode(i));
        bool in = true;
        for (int a = 0; a < g.d; ++a)
            if (x[std::size_t(a)] < sub_lo[std::size_t(a)] - 1e-12 ||
                x[std::size_t(a)] > sub_hi[std::size_t(a)] + 1e-12)
                in = false;
        double gnorm2 = 0;
        if (in || gradient_out) {
            for (int a = 0; a < g.d; ++a) {
                const double ga = f.gradient(i, a);
                if (gradient_out) (*gradient_out)[std::size_t(a)].values[i] = ga;
                gnorm2 += ga * ga;
            }
        }
        if (in) {
            l2 += f.values[i] * f.values[i] * weight;
            h1 += gnorm2 * weight;
        }
    }
    return SubBoxNorms{std::sqrt(l2), std::sqrt(h1)};
}

}  // namespace homlab::pde
