#include "homlab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "homlab/util.hpp"

namespace homlab::pde {

namespace {

// Incrementable multi-index over an unknown lattice.
struct Walker {
    std::array<int, 4> j{};
    int d;
    int extent;
    explicit Walker(int dim, int ext) : d(dim), extent(ext) {}
    void advance() {
        for (int a = 0; a < d; ++a) {
            if (++j[std::size_t(a)] < extent) return;
            j[std::size_t(a)] = 0;
        }
    }
};

}  // namespace

FaceField FaceField::zeros(const UniformGrid& g) {
    FaceField f;
    f.grid = g;
    const int ext = f.node_extent();
    for (int a = 0; a < g.d; ++a) {
        std::size_t total = 1;
        for (int b = 0; b < g.d; ++b) total *= std::size_t(b == a ? g.n : ext);
        f.axis[std::size_t(a)].assign(total, 0.0);
    }
    return f;
}

std::size_t FaceField::face_index(int a, const std::array<int, 4>& j) const {
    const int ext = node_extent();
    std::size_t flat = 0;
    for (int b = grid.d - 1; b >= 0; --b) {
        const int e = b == a ? grid.n : ext;
        flat = flat * std::size_t(e) + std::size_t(j[std::size_t(b)]);
    }
    return flat;
}

Point FaceField::face_midpoint(int a, const std::array<int, 4>& j) const {
    // Coordinates are extended-lattice node indices; the face sits h/2 ahead
    // of node j along axis a.
    Point x{};
    const double h = grid.h();
    for (int b = 0; b < grid.d; ++b) x[std::size_t(b)] = grid.lo + double(j[std::size_t(b)]) * h;
    x[std::size_t(a)] += 0.5 * h;
    return x;
}

FaceField FaceField::sample(const UniformGrid& g, const DiagEvaluator& fn) {
    FaceField f = zeros(g);
    const int ext = f.node_extent();
    for (int a = 0; a < g.d; ++a) {
        auto& arr = f.axis[std::size_t(a)];
        parallel_for(arr.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                std::array<int, 4> j{};
                std::size_t rest = i;
                for (int b = 0; b < g.d; ++b) {
                    const int e = b == a ? g.n : ext;
                    j[std::size_t(b)] = int(rest % std::size_t(e));
                    rest /= std::size_t(e);
                }
                arr[i] = fn(a, f.face_midpoint(a, j));
            }
        });
    }
    return f;
}

DivFormSystem DivFormSystem::assemble_diagonal(FaceField faces, double lambda_floor,
                                               std::uint64_t coefficient_hash) {
    DivFormSystem s;
    s.grid_ = faces.grid;
    s.grid_.validate();
    s.diagonal_ = true;
    s.faces_ = std::move(faces);
    s.hash_ = coefficient_hash;
    s.lambda_ = lambda_floor;
    for (int a = 0; a < s.grid_.d; ++a)
        for (double v : s.faces_.axis[std::size_t(a)])
            if (!(v > 0.0))
                throw NumericalError("assemble_divform: non-elliptic coefficient sample at a face");
    return s;
}

DivFormSystem DivFormSystem::assemble_tensor(const UniformGrid& grid, const TensorEvaluator& fn,
                                             double lambda_floor, std::uint64_t coefficient_hash) {
    DivFormSystem s;
    s.grid_ = grid;
    s.grid_.validate();
    s.diagonal_ = false;
    s.hash_ = coefficient_hash;
    s.lambda_ = lambda_floor;
    const int d = grid.d;
    std::size_t cells = 1;
    for (int a = 0; a < d; ++a) cells *= std::size_t(grid.n);
    const double h = grid.h();
    const double scale = 1.0 / double(1 << (d - 1)) / h;
    const bool per = grid.bc == Bc::Periodic;
    const std::size_t n_unknowns = grid.num_unknowns();

    std::vector<std::map<std::uint32_t, double>> rows(n_unknowns);
    Walker cw(d, grid.n);
    std::vector<std::ptrdiff_t> idx(std::size_t(1) << d);
    for (std::size_t c = 0; c < cells; ++c, cw.advance()) {
        Point x{};
        for (int a = 0; a < d; ++a) x[std::size_t(a)] = grid.lo + (double(cw.j[std::size_t(a)]) + 0.5) * h;
        const coefficients::SymMat m = fn(x);
        if (m.min_eigenvalue() <= 0.0)
            throw NumericalError("assemble_divform: non-elliptic tensor sample at a cell center");
        for (int corner = 0; corner < (1 << d); ++corner) {
            std::array<int, 4> L{};
            bool boundary = false;
            for (int a = 0; a < d; ++a) {
                int v = cw.j[std::size_t(a)] + ((corner >> a) & 1);
                if (per) v %= grid.n;
                else if (v == 0 || v == grid.n) boundary = true;
                L[std::size_t(a)] = v;
            }
            if (boundary) {
                idx[std::size_t(corner)] = -1;
            } else {
                std::array<int, 4> jj = L;
                if (!per)
                    for (int a = 0; a < d; ++a) --jj[std::size_t(a)];
                idx[std::size_t(corner)] = std::ptrdiff_t(grid.encode(jj));
            }
        }
        // One coupling per unordered corner pair, written to both slots so the
        // transposed entries are bitwise equal by construction.
        for (int ci = 0; ci < (1 << d); ++ci) {
            if (idx[std::size_t(ci)] < 0) continue;
            for (int cj = ci; cj < (1 << d); ++cj) {
                if (idx[std::size_t(cj)] < 0) continue;
                double val = 0.0;
                for (int a = 0; a < d; ++a) {
                    const double sa = ((ci >> a) & 1) ? scale : -scale;
                    for (int b = 0; b < d; ++b) {
                        const double sb = ((cj >> b) & 1) ? scale : -scale;
                        val += sa * m.at(a, b) * sb;
                    }
                }
                const auto u = std::uint32_t(idx[std::size_t(ci)]);
                const auto v = std::uint32_t(idx[std::size_t(cj)]);
                rows[u][v] += val;
                if (u != v) rows[v][u] += val;
            }
        }
    }
    s.csr_ptr_.assign(n_unknowns + 1, 0);
    for (std::size_t i = 0; i < n_unknowns; ++i) s.csr_ptr_[i + 1] = s.csr_ptr_[i] + rows[i].size();
    s.csr_col_.reserve(s.csr_ptr_.back());
    s.csr_val_.reserve(s.csr_ptr_.back());
    for (std::size_t i = 0; i < n_unknowns; ++i) {
        for (const auto& [col, val] : rows[i]) {
            s.csr_col_.push_back(col);
            s.csr_val_.push_back(val);
        }
    }
    return s;
}

void DivFormSystem::apply(const std::vector<double>& u, std::vector<double>& out) const {
    const int d = grid_.d;
    const int m = grid_.points_per_axis();
    const double inv_h2 = 1.0 / (grid_.h() * grid_.h());
    out.assign(u.size(), 0.0);

    if (diagonal_) {
        std::array<std::size_t, 4> stride{};
        std::size_t s = 1;
        for (int a = 0; a < d; ++a) {
            stride[std::size_t(a)] = s;
            s *= std::size_t(m);
        }
        const bool per = grid_.bc == Bc::Periodic;
        parallel_for(u.size(), [&](std::size_t lo_i, std::size_t hi_i) {
            std::array<int, 4> j{};
            std::size_t rest = lo_i;
            for (int a = 0; a < d; ++a) {
                j[std::size_t(a)] = int(rest % std::size_t(m));
                rest /= std::size_t(m);
            }
            for (std::size_t i = lo_i; i < hi_i; ++i) {
                // Extended-lattice node of unknown i.
                std::array<int, 4> L = j;
                if (!per)
                    for (int a = 0; a < d; ++a) ++L[std::size_t(a)];
                double acc = 0.0;
                for (int a = 0; a < d; ++a) {
                    auto fplus = L;
                    const double cf_p = faces_.axis[std::size_t(a)][faces_.face_index(a, fplus)];
                    auto fminus = L;
                    fminus[std::size_t(a)] = per ? (L[std::size_t(a)] + grid_.n - 1) % grid_.n
                                                 : L[std::size_t(a)] - 1;
                    const double cf_m = faces_.axis[std::size_t(a)][faces_.face_index(a, fminus)];
                    double up = 0.0, um = 0.0;
                    const int ja = j[std::size_t(a)];
                    if (per) {
                        up = u[i + (ja + 1 == m ? stride[std::size_t(a)] * std::size_t(1 - m)
                                                : stride[std::size_t(a)])];
                        um = u[i - (ja == 0 ? stride[std::size_t(a)] * std::size_t(1 - m)
                                            : stride[std::size_t(a)])];
                    } else {
                        if (ja + 1 < m) up = u[i + stride[std::size_t(a)]];
                        if (ja > 0) um = u[i - stride[std::size_t(a)]];
                    }
                    acc += cf_p * (u[i] - up) + cf_m * (u[i] - um);
                }
                out[i] = acc * inv_h2;
                for (int a = 0; a < d; ++a) {
                    if (++j[std::size_t(a)] < m) break;
                    j[std::size_t(a)] = 0;
                }
            }
        });
        return;
    }

    // Tensor path: CSR SpMV.
    parallel_for(u.size(), [&](std::size_t lo_i, std::size_t hi_i) {
        for (std::size_t i = lo_i; i < hi_i; ++i) {
            double acc = 0.0;
            for (std::size_t k = csr_ptr_[i]; k < csr_ptr_[i + 1]; ++k)
                acc += csr_val_[k] * u[csr_col_[k]];
            out[i] = acc;
        }
    });
}

std::vector<double> DivFormSystem::diag() const {
    const int d = grid_.d;
    const int m = grid_.points_per_axis();
    const double inv_h2 = 1.0 / (grid_.h() * grid_.h());
    std::vector<double> out(grid_.num_unknowns(), 0.0);
    if (diagonal_) {
        const bool per = grid_.bc == Bc::Periodic;
        Walker w(d, m);
        for (std::size_t i = 0; i < out.size(); ++i, w.advance()) {
            std::array<int, 4> L = w.j;
            if (!per)
                for (int a = 0; a < d; ++a) ++L[std::size_t(a)];
            double acc = 0;
            for (int a = 0; a < d; ++a) {
                auto fminus = L;
                fminus[std::size_t(a)] = per ? (L[std::size_t(a)] + grid_.n - 1) % grid_.n
                                             : L[std::size_t(a)] - 1;
                acc += faces_.axis[std::size_t(a)][faces_.face_index(a, L)] +
                       faces_.axis[std::size_t(a)][faces_.face_index(a, fminus)];
            }
            out[i] = acc * inv_h2;
        }
        return out;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t k = csr_ptr_[i]; k < csr_ptr_[i + 1]; ++k)
            if (csr_col_[k] == i) out[i] = csr_val_[k];
    }
    return out;
}

double DivFormSystem::energy(const std::vector<double>& u, const std::vector<double>& v) const {
    std::vector<double> au;
    apply(u, au);
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) s += au[i] * v[i];
    return s * std::pow(grid_.h(), grid_.d);
}

double DivFormSystem::flux_energy(const std::vector<double>& u, const std::vector<double>& v) const {
    if (!diagonal_) throw ConfigError("flux_energy: diagonal path only");
    const int d = grid_.d;
    const bool per = grid_.bc == Bc::Periodic;
    const double scale = std::pow(grid_.h(), grid_.d - 2);
    double s = 0;
    // Sum over faces of cf * du * dv; Dirichlet boundary nodes contribute 0.
    auto value_at = [&](std::array<int, 4> L) -> double {
        if (per) {
            for (int a = 0; a < d; ++a) L[std::size_t(a)] %= grid_.n;
            return u[grid_.encode(L)];
        }
        for (int a = 0; a < d; ++a)
            if (L[std::size_t(a)] <= 0 || L[std::size_t(a)] >= grid_.n) return 0.0;
        std::array<int, 4> jj = L;
        for (int a = 0; a < d; ++a) --jj[std::size_t(a)];
        return u[grid_.encode(jj)];
    };
    auto value_at_v = [&](std::array<int, 4> L) -> double {
        if (per) {
            for (int a = 0; a < d; ++a) L[std::size_t(a)] %= grid_.n;
            return v[grid_.encode(L)];
        }
        for (int a = 0; a < d; ++a)
            if (L[std::size_t(a)] <= 0 || L[std::size_t(a)] >= grid_.n) return 0.0;
        std::array<int, 4> jj = L;
        for (int a = 0; a < d; ++a) --jj[std::size_t(a)];
        return v[grid_.encode(jj)];
    };
    const int ext = per ? grid_.n : grid_.n + 1;
    for (int a = 0; a < d; ++a) {
        std::size_t total = 1;
        for (int b = 0; b < d; ++b) total *= std::size_t(b == a ? grid_.n : ext);
        for (std::size_t f = 0; f < total; ++f) {
            std::array<int, 4> j{};
            std::size_t rest = f;
            for (int b = 0; b < d; ++b) {
                const int e = b == a ? grid_.n : ext;
                j[std::size_t(b)] = int(rest % std::size_t(e));
                rest /= std::size_t(e);
            }
            auto jp = j;
            jp[std::size_t(a)] += 1;
            const double du = value_at(jp) - value_at(j);
            const double dv = value_at_v(jp) - value_at_v(j);
            s += faces_.axis[std::size_t(a)][f] * du * dv;
        }
    }
    return s * scale;
}

std::vector<double> DivFormSystem::row(std::size_t i) const {
    std::vector<double> e(grid_.num_unknowns(), 0.0), out;
    e[i] = 1.0;
    apply(e, out);
    return out;
}

FaceField sample_scaled_faces(const coefficients::PerturbedCoefficient& coef,
                              const UniformGrid& grid, double eps, const DiagEvaluator& extra) {
    // Periodic background sampled per face midpoint at x/eps.
    FaceField f = FaceField::sample(grid, [&](int axis, const Point& x) {
        Point y{};
        for (int b = 0; b < grid.d; ++b) y[std::size_t(b)] = x[std::size_t(b)] / eps;
        double v = coef.periodic().eval_diag(axis, y);
        if (extra) v += extra(axis, x);
        return v;
    });
    if (!coef.has_defects()) return f;
    // Defect copies splatted from the enumerated set.
    Point lo{}, hi{};
    for (int a = 0; a < grid.d; ++a) {
        lo[std::size_t(a)] = grid.lo;
        hi[std::size_t(a)] = grid.hi;
    }
    const auto splats = coefficients::active_defects(coef, lo, hi, eps);
    const double h = grid.h();
    const int ext = f.node_extent();
    for (const auto& s : splats) {
        for (int a = 0; a < grid.d; ++a) {
            // Window of faces along axis a within the copy's support.
            std::array<int, 4> jlo{}, jhi{};
            bool empty = false;
            for (int b = 0; b < grid.d; ++b) {
                const double off = b == a ? 0.5 * h : 0.0;
                const double clo = s.center[std::size_t(b)] - s.radius;
                const double chi = s.center[std::size_t(b)] + s.radius;
                const int e = b == a ? grid.n : ext;
                int ilo = int(std::floor((clo - grid.lo - off) / h)) - 1;
                int ihi = int(std::ceil((chi - grid.lo - off) / h)) + 1;
                ilo = std::max(ilo, 0);
                ihi = std::min(ihi, e - 1);
                if (ilo > ihi) empty = true;
                jlo[std::size_t(b)] = ilo;
                jhi[std::size_t(b)] = ihi;
            }
            if (empty) continue;
            std::array<int, 4> j = jlo;
            while (true) {
                const Point x = f.face_midpoint(a, j);
                double r2 = 0;
                for (int b = 0; b < grid.d; ++b) {
                    const double dd = x[std::size_t(b)] - s.center[std::size_t(b)];
                    r2 += dd * dd;
                }
                if (r2 < s.radius * s.radius) {
                    f.axis[std::size_t(a)][f.face_index(a, j)] +=
                        coef.profile()->value(std::sqrt(r2) / eps, s.gen, grid.d);
                }
                int b = 0;
                for (; b < grid.d; ++b) {
                    if (++j[std::size_t(b)] <= jhi[std::size_t(b)]) break;
                    j[std::size_t(b)] = jlo[std::size_t(b)];
                }
                if (b == grid.d) break;
            }
        }
    }
    return f;
}

DivFormSystem assemble_divform(const coefficients::PerturbedCoefficient& coef,
                               const UniformGrid& grid, double eps) {
    if (!coef.diagonal()) {
        return DivFormSystem::assemble_tensor(
            grid,
            [&](const Point& x) {
                Point y{};
                for (int b = 0; b < grid.d; ++b) y[std::size_t(b)] = x[std::size_t(b)] / eps;
                return coef.eval(y);
            },
            coef.lambda_check(), coef.content_hash());
    }
    FaceField f = sample_scaled_faces(coef, grid, eps);
    return DivFormSystem::assemble_diagonal(std::move(f), coef.lambda_check(), coef.content_hash());
}

std::vector<double> assemble_rhs_div(const FaceField& g) {
    const UniformGrid& grid = g.grid;
    const int d = grid.d;
    const int m = grid.points_per_axis();
    const bool per = grid.bc == Bc::Periodic;
    const double inv_h = 1.0 / grid.h();
    std::vector<double> rhs(grid.num_unknowns(), 0.0);
    Walker w(d, m);
    for (std::size_t i = 0; i < rhs.size(); ++i, w.advance()) {
        std::array<int, 4> L = w.j;
        if (!per)
            for (int a = 0; a < d; ++a) ++L[std::size_t(a)];
        double acc = 0;
        for (int a = 0; a < d; ++a) {
            auto fminus = L;
            fminus[std::size_t(a)] =
                per ? (L[std::size_t(a)] + grid.n - 1) % grid.n : L[std::size_t(a)] - 1;
            acc += g.axis[std::size_t(a)][g.face_index(a, L)] -
                   g.axis[std::size_t(a)][g.face_index(a, fminus)];
        }
        rhs[i] = acc * inv_h;
    }
    return rhs;
}

void SolverConfig::validate() const {
    if (!(rel_tol > 0) || rel_tol > 1e-3)
        throw ConfigError("SolverConfig: rel_tol must lie in (0, 1e-3]");
    if (max_iter < 1) throw ConfigError("SolverConfig: max_iter must be positive");
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void project_mean(std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    s /= double(v.size());
    for (double& x : v) x -= s;
}

// Geometric multigrid hierarchy over rediscretized face coefficients.
struct MgHierarchy {
    std::vector<DivFormSystem> levels;
    std::vector<std::vector<double>> diags;

    static bool coarsenable(const UniformGrid& g) {
        return g.n % 2 == 0 && g.n / 2 >= 4 && g.num_unknowns() > 512;
    }

    explicit MgHierarchy(const DivFormSystem& fine) {
        levels.push_back(fine);
        while (coarsenable(levels.back().grid())) {
            const DivFormSystem& f = levels.back();
            const UniformGrid& fg = f.grid();
            UniformGrid cg = fg;
            cg.n = fg.n / 2;
            FaceField cf = FaceField::zeros(cg);
            const int d = cg.d;
            const int cext = cf.node_extent();
            for (int a = 0; a < d; ++a) {
                auto& arr = cf.axis[std::size_t(a)];
                for (std::size_t idx = 0; idx < arr.size(); ++idx) {
                    std::array<int, 4> J{};
                    std::size_t rest = idx;
                    for (int b = 0; b < d; ++b) {
                        const int e = b == a ? cg.n : cext;
                        J[std::size_t(b)] = int(rest % std::size_t(e));
                        rest /= std::size_t(e);
                    }
                    // Serial harmonic mean of the two stacked fine faces.
                    std::array<int, 4> F1{}, F2{};
                    for (int b = 0; b < d; ++b) F1[std::size_t(b)] = 2 * J[std::size_t(b)];
                    F2 = F1;
                    F2[std::size_t(a)] += 1;
                    const double v1 = f.faces().axis[std::size_t(a)][f.faces().face_index(a, F1)];
                    const double v2 = f.faces().axis[std::size_t(a)][f.faces().face_index(a, F2)];
                    arr[idx] = 2.0 / (1.0 / v1 + 1.0 / v2);
                }
            }
            levels.push_back(DivFormSystem::assemble_diagonal(std::move(cf), f.lambda(), f.coefficient_hash()));
        }
        for (const auto& l : levels) diags.push_back(l.diag());
    }

    // Full-weighting restriction of a residual to the next level.
    std::vector<double> restrict_to(std::size_t lvl, const std::vector<double>& r) const {
        const UniformGrid& fg = levels[lvl].grid();
        const UniformGrid& cg = levels[lvl + 1].grid();
        const int d = cg.d;
        const int cm = cg.points_per_axis();
        const int fm = fg.points_per_axis();
        const bool per = fg.bc == Bc::Periodic;
        std::vector<double> out(cg.num_unknowns(), 0.0);
        Walker w(d, cm);
        for (std::size_t i = 0; i < out.size(); ++i, w.advance()) {
            double acc = 0;
            // Fine node of the coarse unknown: lattice doubling.
            std::array<int, 4> base{};
            for (int a = 0; a < d; ++a)
                base[std::size_t(a)] = per ? 2 * w.j[std::size_t(a)] : 2 * (w.j[std::size_t(a)] + 1) - 1;
            int off[4] = {0, 0, 0, 0};
            const int lim = 3;
            int total = 1;
            for (int a = 0; a < d; ++a) total *= lim;
            for (int t = 0; t < total; ++t) {
                int rest = t;
                double wgt = 1.0;
                std::array<int, 4> jj{};
                bool outside = false;
                for (int a = 0; a < d; ++a) {
                    off[a] = rest % lim - 1;
                    rest /= lim;
                    wgt *= off[a] == 0 ? 0.5 : 0.25;
                    int v = base[std::size_t(a)] + off[a];
                    if (per) v = ((v % fg.n) + fg.n) % fg.n;
                    else if (v < 0 || v >= fm) outside = true;
                    jj[std::size_t(a)] = v;
                }
                if (!outside) acc += wgt * r[fg.encode(jj)];
            }
            out[i] = acc;
        }
        return out;
    }

    // Multilinear prolongation added onto the fine vector.
    void prolong_add(std::size_t lvl, const std::vector<double>& coarse,
                     std::vector<double>& fine) const {
        const UniformGrid& fg = levels[lvl].grid();
        const UniformGrid& cg = levels[lvl + 1].grid();
        const int d = cg.d;
        const int fm = fg.points_per_axis();
        const int cm = cg.points_per_axis();
        const bool per = fg.bc == Bc::Periodic;
        Walker w(d, fm);
        for (std::size_t i = 0; i < fine.size(); ++i, w.advance()) {
            // Coarse lattice coordinate of this fine node (may be half-integer).
            double acc = 0;
            std::array<int, 4> lo{};
            std::array<bool, 4> half{};
            for (int a = 0; a < d; ++a) {
                const int Lf = per ? w.j[std::size_t(a)] : w.j[std::size_t(a)] + 1;
                half[std::size_t(a)] = (Lf % 2) != 0;
                lo[std::size_t(a)] = Lf / 2;
            }
            for (int corner = 0; corner < (1 << d); ++corner) {
                double wgt = 1.0;
                std::array<int, 4> J{};
                bool skip = false, outside = false;
                for (int a = 0; a < d; ++a) {
                    const int bit = (corner >> a) & 1;
                    if (!half[std::size_t(a)]) {
                        if (bit) { skip = true; break; }
                        J[std::size_t(a)] = lo[std::size_t(a)];
                    } else {
                        wgt *= 0.5;
                        J[std::size_t(a)] = lo[std::size_t(a)] + bit;
                    }
                    int v = J[std::size_t(a)];
                    if (per) v = ((v % cg.n) + cg.n) % cg.n;
                    else {
                        // Coarse lattice node v corresponds to unknown v-1.
                        v = v - 1;
                        if (v < 0 || v >= cm) outside = true;
                    }
                    J[std::size_t(a)] = v;
                }
                if (skip || outside) continue;
                acc += wgt * coarse[cg.encode(J)];
            }
            fine[i] += acc;
        }
    }

    void smooth(std::size_t lvl, std::vector<double>& u, const std::vector<double>& b, int sweeps,
                std::vector<double>& work) const {
        const double omega = 0.7;
        for (int s = 0; s < sweeps; ++s) {
            levels[lvl].apply(u, work);
            const auto& D = diags[lvl];
            for (std::size_t i = 0; i < u.size(); ++i) u[i] += omega * (b[i] - work[i]) / D[i];
        }
    }

    void vcycle(std::size_t lvl, std::vector<double>& u, const std::vector<double>& b) const {
        const bool per = levels[lvl].grid().bc == Bc::Periodic;
        std::vector<double> work(u.size());
        if (lvl + 1 == levels.size()) {
            u.assign(b.size(), 0.0);
            smooth(lvl, u, b, 128, work);
            if (per) project_mean(u);
            return;
        }
        u.assign(b.size(), 0.0);
        smooth(lvl, u, b, 2, work);
        levels[lvl].apply(u, work);
        std::vector<double> r(u.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - work[i];
        if (per) project_mean(r);
        std::vector<double> rc = restrict_to(lvl, r);
        std::vector<double> ec(rc.size(), 0.0);
        vcycle(lvl + 1, ec, rc);
        prolong_add(lvl, ec, u);
        smooth(lvl, u, b, 2, work);
        if (per) project_mean(u);
    }
};

}  // namespace

GridField solve(const DivFormSystem& system, std::vector<double> rhs, const SolverConfig& config,
                SolveStats* stats) {
    config.validate();
    const UniformGrid& g = system.grid();
    if (rhs.size() != g.num_unknowns()) throw ConfigError("solve: rhs size mismatch");
    GridField x = GridField::zeros(g);
    SolveStats st;
    const bool per = g.bc == Bc::Periodic;
    if (per) {
        double s = 0;
        for (double v : rhs) s += v;
        s /= double(rhs.size());
        st.mean_projection = std::abs(s);
        for (double& v : rhs) v -= s;
    }
    const double bnorm = std::sqrt(dot(rhs, rhs));
    if (bnorm == 0.0) {
        st.residual = 0.0;
        st.iterations = 0;
        if (stats) *stats = st;
        return x;
    }

    std::unique_ptr<MgHierarchy> mg;
    std::vector<double> jacobi_diag;
    const bool use_mg = config.precond == SolverConfig::Precond::Multigrid && system.diagonal_path();
    if (use_mg) mg = std::make_unique<MgHierarchy>(system);
    else jacobi_diag = system.diag();

    auto precond = [&](const std::vector<double>& r, std::vector<double>& z) {
        if (use_mg) {
            mg->vcycle(0, z, r);
        } else {
            z.resize(r.size());
            for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / jacobi_diag[i];
        }
        if (per) project_mean(z);
    };

    std::vector<double>& u = x.values;
    std::vector<double> r = rhs, z(r.size()), p, Ap(r.size());
    precond(r, z);
    p = z;
    double rz = dot(r, z);
    double best = 1.0;
    for (int it = 1; it <= config.max_iter; ++it) {
        system.apply(p, Ap);
        const double pAp = dot(p, Ap);
        if (!(pAp > 0)) throw NumericalError("solve: operator lost positivity (pAp <= 0)");
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        const double rel = std::sqrt(dot(r, r)) / bnorm;
        best = std::min(best, rel);
        if (rel <= config.rel_tol) {
            st.residual = rel;
            st.iterations = it;
            st.converged = true;
            if (per) project_mean(u);
            if (stats) *stats = st;
            return x;
        }
        precond(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
    }
    std::ostringstream os;
    os << "solve: no convergence within " << config.max_iter
       << " iterations (best relative residual " << best << ")";
    throw NumericalError(os.str());
}

}  // namespace homlab::pde
