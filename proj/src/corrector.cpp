#include "homlab/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "homlab/util.hpp"

namespace homlab::corrector {

namespace {

pde::FaceField periodic_faces(const PeriodicCoefficient& a_per, const UniformGrid& grid) {
    return pde::FaceField::sample(
        grid, [&](int axis, const Point& x) { return a_per.eval_diag(axis, x); });
}

std::uint64_t periodic_hash(const PeriodicCoefficient& a_per) {
    std::string s = "per";
    for (const auto& e : a_per.entries) {
        s += ':' + std::to_string(e.constant);
        for (const auto& t : e.terms) s += ',' + std::to_string(t.coeff);
    }
    return fnv1a64(s);
}

}  // namespace

GridField solve_periodic_corrector(const PeriodicCoefficient& a_per, const UniformGrid& grid,
                                   int direction, const pde::SolverConfig& cfg,
                                   pde::SolveStats* stats) {
    if (grid.bc != pde::Bc::Periodic) throw ConfigError("periodic corrector needs a periodic grid");
    if (direction < 0 || direction >= grid.d) throw ConfigError("corrector: bad direction");
    if (!a_per.diagonal) {
        // Tensor cell problem through the energy-form assembly.
        auto sys = pde::DivFormSystem::assemble_tensor(
            grid, [&](const Point& x) { return a_per.eval(x); }, 0.0, periodic_hash(a_per));
        // rhs: <b, v> h^d = -sum_cells h^d (a_c e_j)^T G_c v
        const int d = grid.d;
        std::vector<double> rhs(grid.num_unknowns(), 0.0);
        const double h = grid.h();
        const double wgt = 1.0 / double(1 << (d - 1));
        std::size_t cells = 1;
        for (int a = 0; a < d; ++a) cells *= std::size_t(grid.n);
        std::array<int, 4> cj{};
        for (std::size_t c = 0; c < cells; ++c) {
            Point x{};
            for (int a = 0; a < d; ++a) x[std::size_t(a)] = grid.lo + (double(cj[std::size_t(a)]) + 0.5) * h;
            const SymMat m = a_per.eval(x);
            for (int a = 0; a < d; ++a) {
                const double flux = m.at(a, direction);
                if (flux == 0.0) continue;
                const double v = flux * wgt / h;
                for (int corner = 0; corner < (1 << d); ++corner) {
                    if ((corner >> a) & 1) continue;
                    for (int bit = 0; bit <= 1; ++bit) {
                        std::array<int, 4> L{};
                        bool skip = false;
                        for (int b = 0; b < d; ++b) {
                            int vv = cj[std::size_t(b)] + (((corner | (bit ? (1 << a) : 0)) >> b) & 1);
                            vv %= grid.n;
                            L[std::size_t(b)] = vv;
                        }
                        if (!skip) rhs[grid.encode(L)] += bit ? -v : v;
                    }
                }
            }
            for (int a = 0; a < d; ++a) {
                if (++cj[std::size_t(a)] < grid.n) break;
                cj[std::size_t(a)] = 0;
            }
        }
        GridField w = pde::solve(sys, std::move(rhs), cfg, stats);
        w.project_mean_zero();
        return w;
    }

    auto faces = periodic_faces(a_per, grid);
    // Flux of the constant field e_j: nonzero only on axis-j faces.
    pde::FaceField g = pde::FaceField::zeros(grid);
    g.axis[std::size_t(direction)] = faces.axis[std::size_t(direction)];
    auto rhs = pde::assemble_rhs_div(g);
    auto sys = pde::DivFormSystem::assemble_diagonal(std::move(faces), 0.0, periodic_hash(a_per));
    GridField w = pde::solve(sys, std::move(rhs), cfg, stats);
    w.project_mean_zero();
    return w;
}

PeriodicCellSolution solve_periodic_cell(const PeriodicCoefficient& a_per, int n,
                                         const pde::SolverConfig& cfg) {
    PeriodicCellSolution out;
    out.grid = UniformGrid{a_per.d, n, 0.0, 1.0, pde::Bc::Periodic};
    out.grid.validate();
    for (int j = 0; j < a_per.d; ++j) {
        pde::SolveStats st;
        out.w.push_back(solve_periodic_corrector(a_per, out.grid, j, cfg, &st));
        out.stats.push_back(st);
    }
    out.a_star = homogenized_tensor(a_per, out.w);
    return out;
}

SymMat homogenized_tensor(const PeriodicCoefficient& a_per, const std::vector<GridField>& w) {
    if (w.empty()) throw ConfigError("homogenized_tensor: no correctors");
    const UniformGrid& grid = w[0].grid;
    const int d = grid.d;
    SymMat a_star;
    a_star.d = d;
    const std::size_t total = grid.num_unknowns();
    for (int j = 0; j < d; ++j) {
        std::vector<double> col(std::size_t(d), 0.0);
        for (std::size_t node = 0; node < total; ++node) {
            const Point y = grid.position(grid.decode(node));
            for (int i = 0; i < d; ++i) {
                double flux = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double aik = a_per.eval_entry(i, k, y);
                    if (aik == 0.0) continue;
                    flux += aik * ((k == j ? 1.0 : 0.0) + w[std::size_t(j)].gradient(node, k));
                }
                col[std::size_t(i)] += flux;
            }
        }
        for (int i = 0; i < d; ++i) a_star.at(i, j) = col[std::size_t(i)] / double(total);
    }
    // Symmetrize roundoff only; the formula is symmetric for symmetric a.
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const double v = 0.5 * (a_star.at(i, j) + a_star.at(j, i));
            a_star.at(i, j) = v;
            a_star.at(j, i) = v;
        }
    return a_star;
}

namespace {

// Face-midpoint value of the periodic corrector gradient along `axis`,
// computed as the two-node difference (exact when grids are commensurate).
double face_gradient(const GridField& w_per, const Point& x, int axis, double h) {
    Point xl = x;
    xl[std::size_t(axis)] -= 0.5 * h;
    Point xr = x;
    xr[std::size_t(axis)] += 0.5 * h;
    return (w_per.interpolate(xr) - w_per.interpolate(xl)) / h;
}

}  // namespace

PerturbedCorrector solve_perturbed_corrector(const PerturbedCoefficient& coef,
                                             const PeriodicCellSolution& per, int direction,
                                             const PerturbedSolveOptions& opt) {
    const int d = coef.dim();
    if (direction < 0 || direction >= d) throw ConfigError("perturbed corrector: bad direction");
    if (!coef.diagonal()) throw ConfigError("perturbed corrector: diagonal coefficients only");
    const double L = opt.box_l;
    const int n = int(std::llround(2.0 * L * opt.nodes_per_unit));
    UniformGrid grid{d, n, -L, L, opt.bc};
    grid.validate();
    const double h = grid.h();

    PerturbedCorrector out;
    out.grid = grid;
    out.direction = direction;

    // Coefficient faces a_per + a~ on the box.
    pde::FaceField faces = pde::sample_scaled_faces(coef, grid, 1.0);

    // rhs flux: a~ (e_j + grad w_per,j), supported on the defect copies.
    pde::FaceField g = pde::FaceField::zeros(grid);
    Point lo{}, hi{};
    for (int a = 0; a < d; ++a) {
        lo[std::size_t(a)] = grid.lo;
        hi[std::size_t(a)] = grid.hi;
    }
    const auto splats = coefficients::active_defects(coef, lo, hi, 1.0);
    const int ext = g.node_extent();
    for (const auto& s : splats) {
        for (int a = 0; a < d; ++a) {
            std::array<int, 4> jlo{}, jhi{};
            bool empty = false;
            for (int b = 0; b < d; ++b) {
                const double off = b == a ? 0.5 * h : 0.0;
                const int e = b == a ? grid.n : ext;
                int ilo = int(std::floor((s.center[std::size_t(b)] - s.radius - grid.lo - off) / h)) - 1;
                int ihi = int(std::ceil((s.center[std::size_t(b)] + s.radius - grid.lo - off) / h)) + 1;
                ilo = std::max(ilo, 0);
                ihi = std::min(ihi, e - 1);
                if (ilo > ihi) empty = true;
                jlo[std::size_t(b)] = ilo;
                jhi[std::size_t(b)] = ihi;
            }
            if (empty) continue;
            std::array<int, 4> j = jlo;
            while (true) {
                const Point x = g.face_midpoint(a, j);
                double r2 = 0;
                for (int b = 0; b < d; ++b) {
                    const double dd = x[std::size_t(b)] - s.center[std::size_t(b)];
                    r2 += dd * dd;
                }
                if (r2 < s.radius * s.radius) {
                    const double tilde = coef.profile()->value(std::sqrt(r2), s.gen, d);
                    const double e_j = a == direction ? 1.0 : 0.0;
                    const double grad_per =
                        per.w.empty() ? 0.0 : face_gradient(per.w[std::size_t(direction)], x, a, h);
                    g.axis[std::size_t(a)][g.face_index(a, j)] += tilde * (e_j + grad_per);
                }
                int b = 0;
                for (; b < d; ++b) {
                    if (++j[std::size_t(b)] <= jhi[std::size_t(b)]) break;
                    j[std::size_t(b)] = jlo[std::size_t(b)];
                }
                if (b == d) break;
            }
        }
        // Support crossing the box boundary leaves a copy partially covered.
        for (int b = 0; b < d; ++b)
            if (s.center[std::size_t(b)] - s.radius < grid.lo || s.center[std::size_t(b)] + s.radius > grid.hi)
                out.uncovered_defect = true;
    }

    auto rhs = pde::assemble_rhs_div(g);
    auto sys = pde::DivFormSystem::assemble_diagonal(std::move(faces), coef.lambda_check(),
                                                     coef.content_hash());
    out.w_tilde = pde::solve(sys, std::move(rhs), opt.solver, &out.stats);
    if (opt.bc == pde::Bc::Periodic) out.w_tilde.project_mean_zero();

    if (opt.richardson) {
        PerturbedSolveOptions big = opt;
        big.box_l = 2.0 * L;
        big.richardson = false;
        const PerturbedCorrector ref = solve_perturbed_corrector(coef, per, direction, big);
        // ||grad w_L - grad w_2L||_{L2(B_{L/2})} over coincident nodes.
        double acc = 0.0;
        const std::size_t total = grid.num_unknowns();
        for (std::size_t i = 0; i < total; ++i) {
            const Point x = grid.position(grid.decode(i));
            bool in = true;
            for (int a = 0; a < d; ++a) in = in && std::abs(x[std::size_t(a)]) <= 0.5 * L + 1e-12;
            if (!in) continue;
            for (int a = 0; a < d; ++a) {
                const double mine = out.w_tilde.gradient(i, a);
                Point xl = x, xr = x;
                xl[std::size_t(a)] -= h;
                xr[std::size_t(a)] += h;
                const double theirs =
                    (ref.w_tilde.interpolate(xr) - ref.w_tilde.interpolate(xl)) / (2.0 * h);
                acc += (mine - theirs) * (mine - theirs);
            }
        }
        out.truncation_error = std::sqrt(acc * std::pow(h, d));
    }
    return out;
}

DiagnosticsReport corrector_diagnostics(const PerturbedCoefficient& coef,
                                        const PeriodicCellSolution& per,
                                        const PerturbedCorrector& wt,
                                        const PerturbedCorrector* single_reference, int max_gen) {
    const int d = coef.dim();
    const UniformGrid& grid = wt.grid;
    const double L = grid.hi;
    DiagnosticsReport rep;

    auto w_total = [&](const Point& x) {
        double v = wt.w_tilde.interpolate(x);
        if (!per.w.empty()) v += per.w[std::size_t(wt.direction)].interpolate(x);
        return v;
    };

    // Sublinearity ratios for s in {d+1, 2d}.
    for (double s : {double(d + 1), double(2 * d)}) {
        double max_ratio = 0.0;
        const double w0 = w_total(Point{});
        for (double t = 1.0; t <= 0.75 * L; t *= 2.0) {
            for (int axis = 0; axis < d; ++axis) {
                for (double sign : {1.0, -1.0}) {
                    Point x{};
                    x[std::size_t(axis)] = sign * t;
                    const double num = std::abs(w_total(x) - w0);
                    const double den =
                        std::pow(std::max(std::abs(std::log(t)), 1.0), 1.0 / s) * std::pow(t, 1.0 - d / s);
                    max_ratio = std::max(max_ratio, num / den);
                }
            }
        }
        rep.sublinearity.push_back(SublinearityRow{s, max_ratio});
    }

    // sup |w~| over nested dyadic boxes.
    {
        const int kmax = int(std::floor(std::log2(L)));
        std::vector<double> xs, ys;
        std::vector<double> sup_at(std::size_t(kmax) + 1, 0.0);
        const std::size_t total = grid.num_unknowns();
        for (std::size_t i = 0; i < total; ++i) {
            const Point x = grid.position(grid.decode(i));
            double norm_inf = 0.0;
            for (int a = 0; a < d; ++a) norm_inf = std::max(norm_inf, std::abs(x[std::size_t(a)]));
            const double v = std::abs(wt.w_tilde.values[i]);
            for (int k = 0; k <= kmax; ++k)
                if (norm_inf <= std::ldexp(1.0, k)) sup_at[std::size_t(k)] = std::max(sup_at[std::size_t(k)], v);
        }
        for (int k = 1; k <= kmax; ++k) {
            rep.growth.push_back(GrowthRow{k, sup_at[std::size_t(k)]});
            xs.push_back(double(k));
            ys.push_back(sup_at[std::size_t(k)]);
        }
        rep.growth_fit = fit_affine(xs, ys);
    }

    // Per-cell gradient tables over the enumerated generations.
    const auto& set = coef.set();
    const double h = grid.h();
    std::map<Index, CellNormRow> rows;
    std::map<Index, Point> centers;
    for (std::size_t ci = 0; ci < set.indices().size(); ++ci) {
        const int gen = geometry::max_norm(set.indices()[ci]);
        if (gen >= 1 && gen <= max_gen) {
            CellNormRow row;
            row.p = set.indices()[ci];
            row.gen = gen;
            rows[row.p] = row;
            centers[row.p] = set.points()[ci];
        }
    }
    const std::size_t total = grid.num_unknowns();
    for (std::size_t i = 0; i < total; ++i) {
        const Point x = grid.position(grid.decode(i));
        const auto nd = set.nearest(x);
        const auto it = rows.find(nd.index);
        if (it == rows.end()) continue;
        auto& row = it->second;
        const Point xp = centers[nd.index];
        for (int a = 0; a < d; ++a) {
            const double ga = wt.w_tilde.gradient(i, a);
            row.grad_l2 += ga * ga;
            if (single_reference) {
                Point shifted = x;
                for (int b = 0; b < d; ++b) shifted[std::size_t(b)] -= xp[std::size_t(b)];
                Point xl = shifted, xr = shifted;
                xl[std::size_t(a)] -= h;
                xr[std::size_t(a)] += h;
                const double gref = (single_reference->w_tilde.interpolate(xr) -
                                     single_reference->w_tilde.interpolate(xl)) /
                                    (2.0 * h);
                row.residual_l2 += (ga - gref) * (ga - gref);
            }
        }
    }
    const double vol_el = std::pow(h, d);
    for (auto& [ci, row] : rows) {
        row.grad_l2 = std::sqrt(row.grad_l2 * vol_el);
        row.residual_l2 = std::sqrt(row.residual_l2 * vol_el);
        rep.cells.push_back(row);
    }
    std::sort(rep.cells.begin(), rep.cells.end(), [](const CellNormRow& a, const CellNormRow& b) {
        if (a.gen != b.gen) return a.gen < b.gen;
        return std::lexicographical_compare(a.p.begin(), a.p.end(), b.p.begin(), b.p.end());
    });
    return rep;
}

MatrixFieldPer build_M(const PeriodicCoefficient& a_per, const SymMat& a_star,
                       const PeriodicCellSolution& per) {
    const UniformGrid& grid = per.grid;
    const int d = grid.d;
    MatrixFieldPer M;
    M.grid = grid;
    M.comp.assign(std::size_t(d * d), GridField::zeros(grid));
    const std::size_t total = grid.num_unknowns();
    for (std::size_t node = 0; node < total; ++node) {
        const Point y = grid.position(grid.decode(node));
        for (int k = 0; k < d; ++k) {
            for (int i = 0; i < d; ++i) {
                double flux = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double aij = a_per.eval_entry(i, j, y);
                    if (aij == 0.0) continue;
                    flux += aij * ((j == k ? 1.0 : 0.0) + per.w[std::size_t(k)].gradient(node, j));
                }
                M.comp[std::size_t(k * d + i)].values[node] = a_star.at(i, k) - flux;
            }
        }
    }
    // Divergence residual and mean per row.
    const double vol_el = std::pow(grid.h(), d);
    for (int k = 0; k < d; ++k) {
        double acc = 0.0;
        for (std::size_t node = 0; node < total; ++node) {
            double div = 0.0;
            for (int i = 0; i < d; ++i) div += M.at(k, i).gradient(node, i);
            acc += div * div;
        }
        M.max_div_residual = std::max(M.max_div_residual, std::sqrt(acc * vol_el));
        for (int i = 0; i < d; ++i)
            M.max_mean_abs = std::max(M.max_mean_abs, std::abs(M.at(k, i).mean()));
    }
    return M;
}

int PotentialField::pair_index(int i, int j) const {
    // packed strictly-upper pairs, rows first
    int idx = 0;
    for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b) {
            if (a == i && b == j) return idx;
            ++idx;
        }
    throw ConfigError("PotentialField: bad pair");
}

double PotentialField::value(int k, int i, int j, std::size_t node) const {
    if (i == j) return 0.0;
    const int npairs = d * (d - 1) / 2;
    if (i < j) return comp[std::size_t(k * npairs + pair_index(i, j))].values[node];
    return -comp[std::size_t(k * npairs + pair_index(j, i))].values[node];
}

PotentialField solve_potential(const MatrixFieldPer& M) {
    const UniformGrid& grid = M.grid;
    const int d = grid.d;
    PotentialField B;
    B.grid = grid;
    B.d = d;
    const int npairs = d * (d - 1) / 2;
    B.comp.assign(std::size_t(d * npairs), GridField::zeros(grid));
    const std::size_t total = grid.num_unknowns();

    for (int k = 0; k < d; ++k) {
        for (int i = 0; i < d; ++i) {
            for (int j = i + 1; j < d; ++j) {
                GridField rhs = GridField::zeros(grid);
                for (std::size_t node = 0; node < total; ++node)
                    rhs.values[node] = M.at(k, i).gradient(node, j) - M.at(k, j).gradient(node, i);
                B.comp[std::size_t(k * npairs + B.pair_index(i, j))] = pde::poisson_periodic_spectral(rhs);
            }
        }
    }

    // divergencepot: sum_i d_i B_k^{i,j} = M_k^j.
    const double vol_el = std::pow(grid.h(), d);
    for (int k = 0; k < d; ++k) {
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t node = 0; node < total; ++node) {
                double div = 0.0;
                for (int i = 0; i < d; ++i) {
                    if (i == j) continue;
                    const int s = i < j ? 1 : -1;
                    const GridField& f = B.comp[std::size_t(
                        k * npairs + (i < j ? B.pair_index(i, j) : B.pair_index(j, i)))];
                    div += s * f.gradient(node, i);
                }
                const double r = div - M.at(k, j).values[node];
                acc += r * r;
            }
            B.div_residual = std::max(B.div_residual, std::sqrt(acc * vol_el));
        }
    }

    // Wide-stencil residual of -lap B^{i,j}_k = d_j M_k^i - d_i M_k^j; the wide
    // Laplacian (centered difference applied twice) is independent of the
    // solver's flux-stencil symbol.
    for (int k = 0; k < d; ++k) {
        for (int i = 0; i < d; ++i) {
            for (int j = i + 1; j < d; ++j) {
                const GridField& f = B.comp[std::size_t(k * npairs + B.pair_index(i, j))];
                // Precompute first derivatives of f per axis.
                std::vector<GridField> df;
                for (int a = 0; a < d; ++a) {
                    GridField g = GridField::zeros(grid);
                    for (std::size_t node = 0; node < total; ++node) g.values[node] = f.gradient(node, a);
                    df.push_back(std::move(g));
                }
                double acc = 0.0;
                for (std::size_t node = 0; node < total; ++node) {
                    double lap = 0.0;
                    for (int a = 0; a < d; ++a) lap += df[std::size_t(a)].gradient(node, a);
                    const double rhs = M.at(k, i).gradient(node, j) - M.at(k, j).gradient(node, i);
                    const double r = -lap - rhs;
                    acc += r * r;
                }
                B.curl_residual = std::max(B.curl_residual, std::sqrt(acc * vol_el));
            }
        }
    }
    return B;
}

}  // namespace homlab::corrector
