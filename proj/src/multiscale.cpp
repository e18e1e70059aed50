#include "homlab/multiscale.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>

#include "homlab/util.hpp"

namespace homlab::multiscale {

int MultiscaleProblem::grid_n_for(double eps) const {
    int n = int(std::ceil(double(min_nodes_per_eps) / eps));
    n = std::max(n, base_n);
    n = std::min(n, max_n);
    n = ((n + 15) / 16) * 16;  // keep a useful multigrid depth
    return n;
}

void MultiscaleProblem::validate() const {
    if (eps_list.empty()) throw ConfigError("multiscale: empty eps list");
    for (double e : eps_list)
        if (!(e > 0) || e > 1.0) throw ConfigError("multiscale: eps must lie in (0,1]");
    if (!(omega1_lo < omega1_hi) || omega1_lo < 0.0 || omega1_hi > 1.0)
        throw ConfigError("multiscale: Omega_1 must sit strictly inside the unit cube");
    if (cell_n < 8) throw ConfigError("multiscale: cell grid too coarse");
}

GridField solve_oscillatory(const MultiscaleProblem& problem, double eps, const UniformGrid& grid) {
    if (double(grid.n) * eps + 1e-9 < problem.min_nodes_per_eps)
        throw ConfigError("solve_oscillatory: grid does not resolve eps at the configured density");
    auto sys = pde::assemble_divform(problem.coef, grid, eps);
    std::vector<double> rhs(grid.num_unknowns());
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = problem.source(grid.position(grid.decode(i)));
    return pde::solve(sys, std::move(rhs), problem.solver);
}

GridField solve_homogenized(const MultiscaleProblem& problem, const SymMat& a_star,
                            const UniformGrid& grid) {
    bool diag = true;
    for (int i = 0; i < a_star.d; ++i)
        for (int j = i + 1; j < a_star.d; ++j)
            if (std::abs(a_star.at(i, j)) > 1e-12 * std::abs(a_star.at(i, i))) diag = false;
    std::vector<double> rhs(grid.num_unknowns());
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = problem.source(grid.position(grid.decode(i)));
    if (diag) {
        auto faces = pde::FaceField::sample(
            grid, [&](int axis, const Point&) { return a_star.at(axis, axis); });
        auto sys = pde::DivFormSystem::assemble_diagonal(std::move(faces), 0.0, 0);
        return pde::solve(sys, std::move(rhs), problem.solver);
    }
    auto sys = pde::DivFormSystem::assemble_tensor(
        grid, [&](const Point&) { return a_star; }, 0.0, 0);
    return pde::solve(sys, std::move(rhs), problem.solver);
}

GridField first_order_expansion(const GridField& u_star, const PeriodicCellSolution& per,
                                const std::vector<PerturbedCorrector>* w_tilde, double eps) {
    const UniformGrid& grid = u_star.grid;
    const int d = grid.d;
    GridField out = GridField::zeros(grid);
    const std::size_t total = grid.num_unknowns();
    for (std::size_t i = 0; i < total; ++i) {
        const Point x = grid.position(grid.decode(i));
        Point y{};
        for (int a = 0; a < d; ++a) y[std::size_t(a)] = x[std::size_t(a)] / eps;
        double corr = 0.0;
        for (int a = 0; a < d; ++a) {
            double w = per.w[std::size_t(a)].interpolate(y);
            if (w_tilde && !w_tilde->empty()) w += (*w_tilde)[std::size_t(a)].w_tilde.interpolate(y);
            corr += u_star.gradient(i, a) * w;
        }
        out.values[i] = u_star.values[i] + eps * corr;
    }
    return out;
}

namespace {

// Second-difference fields d_j d_k u on the same grid.
std::vector<GridField> second_differences(const GridField& u) {
    const UniformGrid& grid = u.grid;
    const int d = grid.d;
    std::vector<GridField> first;
    const std::size_t total = grid.num_unknowns();
    for (int a = 0; a < d; ++a) {
        GridField g = GridField::zeros(grid);
        for (std::size_t i = 0; i < total; ++i) g.values[i] = u.gradient(i, a);
        first.push_back(std::move(g));
    }
    std::vector<GridField> second;  // index j*d + k
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            GridField g = GridField::zeros(grid);
            for (std::size_t i = 0; i < total; ++i) g.values[i] = first[std::size_t(j)].gradient(i, k);
            second.push_back(std::move(g));
        }
    return second;
}

struct EpsOutcome {
    ReportRow row;
    bool covered = true;
};

EpsOutcome run_one_eps(const MultiscaleProblem& problem, double eps,
                       const PeriodicCellSolution& per,
                       const std::vector<PerturbedCorrector>* w_tilde,
                       const corrector::PotentialField* B, int n_override = 0) {
    const int d = problem.coef.dim();
    const int n = n_override > 0 ? n_override : problem.grid_n_for(eps);
    UniformGrid grid{d, n, 0.0, 1.0, pde::Bc::Dirichlet0};
    grid.validate();

    EpsOutcome out;
    out.row.eps = eps;
    out.row.n = n;
    if (w_tilde && !w_tilde->empty()) {
        const double need = 1.0 / eps;
        for (const auto& wt : *w_tilde)
            if (wt.grid.hi < need) out.covered = false;
    }

    const GridField u_eps = solve_oscillatory(problem, eps, grid);
    const GridField u_star = solve_homogenized(problem, per.a_star, grid);
    const GridField u_eps1 = first_order_expansion(u_star, per, w_tilde, eps);

    GridField R = GridField::zeros(grid);
    for (std::size_t i = 0; i < R.values.size(); ++i)
        R.values[i] = u_eps.values[i] - u_eps1.values[i];

    Point lo{}, hi{}, sub_lo{}, sub_hi{};
    for (int a = 0; a < d; ++a) {
        lo[std::size_t(a)] = 0.0;
        hi[std::size_t(a)] = 1.0;
        sub_lo[std::size_t(a)] = problem.omega1_lo;
        sub_hi[std::size_t(a)] = problem.omega1_hi;
    }
    out.row.l2_R = pde::norms_and_gradient(R, lo, hi).l2;
    out.row.h1_R_omega1 = pde::norms_and_gradient(R, sub_lo, sub_hi).h1_semi;

    if (problem.compute_h_eps && B) {
        const auto d2u = second_differences(u_star);
        double acc = 0.0;
        const double vol_el = std::pow(grid.h(), d);
        for (std::size_t node = 0; node < R.values.size(); ++node) {
            const Point x = grid.position(grid.decode(node));
            Point y{};
            for (int a = 0; a < d; ++a) y[std::size_t(a)] = x[std::size_t(a)] / eps;
            // Periodic cell fields sampled at the fast variable.
            std::array<double, 4> w_at{};
            for (int k = 0; k < d; ++k) {
                w_at[std::size_t(k)] = per.w[std::size_t(k)].interpolate(y);
                if (w_tilde && !w_tilde->empty())
                    w_at[std::size_t(k)] += (*w_tilde)[std::size_t(k)].w_tilde.interpolate(y);
            }
            // Nearest cell node for the potential lookup.
            std::size_t cell_node = 0;
            {
                const UniformGrid& cg = B->grid;
                std::array<int, 4> jj{};
                for (int a = 0; a < d; ++a) {
                    double t = (y[std::size_t(a)] - cg.lo) / cg.h();
                    t -= std::floor(t / double(cg.n)) * double(cg.n);
                    int idx = int(std::lround(t)) % cg.n;
                    if (idx < 0) idx += cg.n;
                    jj[std::size_t(a)] = idx;
                }
                cell_node = cg.encode(jj);
            }
            double hnorm2 = 0.0;
            for (int i = 0; i < d; ++i) {
                double hi_acc = 0.0;
                for (int j = 0; j < d; ++j) {
                    for (int k = 0; k < d; ++k) {
                        const double d2 = d2u[std::size_t(j * d + k)].values[node];
                        if (d2 == 0.0) continue;
                        double aij = 0.0;
                        if (i == j) aij = problem.coef.eval_diag_entry(i, y);
                        const double term = aij * w_at[std::size_t(k)] - B->value(k, i, j, cell_node);
                        hi_acc += term * d2;
                    }
                }
                hi_acc *= eps;
                hnorm2 += hi_acc * hi_acc;
            }
            acc += hnorm2 * vol_el;
        }
        out.row.h_eps = std::sqrt(acc);
    }
    return out;
}

}  // namespace

ConvergenceReport remainder_study(const MultiscaleProblem& problem) {
    problem.validate();
    const int d = problem.coef.dim();
    ConvergenceReport rep;
    rep.nu_r = std::min(1.0, double(d) / problem.report_r);
    rep.mu_r = problem.report_r < double(d) ? 0.0 : 1.0 / problem.report_r;

    const PeriodicCellSolution per =
        corrector::solve_periodic_cell(problem.coef.periodic(), problem.cell_n, problem.solver);
    rep.a_star_00 = per.a_star.at(0, 0);

    std::optional<corrector::PotentialField> B;
    if (problem.compute_h_eps) {
        const auto M = corrector::build_M(problem.coef.periodic(), per.a_star, per);
        B = corrector::solve_potential(M);
    }

    std::vector<PerturbedCorrector> w_tilde;
    if (problem.coef.has_defects() && problem.corrector_box_l > 0.0) {
        corrector::PerturbedSolveOptions opt;
        opt.box_l = problem.corrector_box_l;
        opt.nodes_per_unit = problem.corrector_nodes_per_unit;
        opt.solver = problem.solver;
        for (int j = 0; j < d; ++j)
            w_tilde.push_back(corrector::solve_perturbed_corrector(problem.coef, per, j, opt));
    }
    const auto* wt = w_tilde.empty() ? nullptr : &w_tilde;

    // Per-eps pipelines are independent jobs over a bounded pool; shared
    // inputs (correctors, a*, B) are read-only from here on.
    auto one = [&](double eps) {
        EpsOutcome oc = run_one_eps(problem, eps, per, wt, B ? &*B : nullptr);
        if (problem.refine_check) {
            const int n = oc.row.n;
            if (n % 2 == 0 && n / 2 >= problem.base_n) {
                MultiscaleProblem coarse = problem;
                coarse.min_nodes_per_eps = 1;  // the probe intentionally halves resolution
                EpsOutcome half = run_one_eps(coarse, eps, per, wt, B ? &*B : nullptr, n / 2);
                const double rel =
                    std::abs(half.row.l2_R - oc.row.l2_R) / std::max(oc.row.l2_R, 1e-300);
                oc.row.admitted = rel <= 0.05;
            }
        }
        return oc;
    };
    std::vector<EpsOutcome> outcomes(problem.eps_list.size());
    const std::size_t pool = std::min<std::size_t>(std::size_t(std::max(1, worker_count())),
                                                   problem.eps_list.size());
    std::vector<std::future<void>> jobs;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < pool; ++w) {
        jobs.push_back(std::async(std::launch::async, [&] {
            for (std::size_t i = next.fetch_add(1); i < problem.eps_list.size();
                 i = next.fetch_add(1))
                outcomes[i] = one(problem.eps_list[i]);
        }));
    }
    for (auto& j : jobs) j.get();
    for (const auto& oc : outcomes) {
        if (!oc.covered) rep.corrector_box_covers_domain = false;
        rep.rows.push_back(oc.row);
    }

    std::vector<double> lx, l2y, h1y;
    for (const auto& row : rep.rows) {
        if (!row.admitted || row.l2_R <= 0 || row.h1_R_omega1 <= 0) continue;
        lx.push_back(std::log(row.eps));
        l2y.push_back(std::log(row.l2_R));
        h1y.push_back(std::log(row.h1_R_omega1));
    }
    rep.l2_fit = fit_affine(lx, l2y);
    rep.h1_fit = fit_affine(lx, h1y);
    return rep;
}

std::vector<FluxAverageRow> flux_average_tensor(const PerturbedCoefficient& coef,
                                                const PeriodicCellSolution& per,
                                                const std::vector<double>& radii, double box_l,
                                                int nodes_per_unit,
                                                const pde::SolverConfig& solver) {
    const int d = coef.dim();
    if (!coef.diagonal()) throw ConfigError("flux_average_tensor: diagonal coefficients only");
    corrector::PerturbedSolveOptions opt;
    opt.box_l = box_l;
    opt.nodes_per_unit = nodes_per_unit;
    opt.solver = solver;

    std::vector<PerturbedCorrector> wt;
    if (coef.has_defects())
        for (int j = 0; j < d; ++j) wt.push_back(corrector::solve_perturbed_corrector(coef, per, j, opt));

    const UniformGrid grid = coef.has_defects()
                                 ? wt[0].grid
                                 : UniformGrid{d, int(std::llround(2 * box_l * nodes_per_unit)),
                                               -box_l, box_l, pde::Bc::Dirichlet0};
    const double h = grid.h();
    const std::size_t total = grid.num_unknowns();

    // Accumulate per radius bucket, then prefix-sum over the ladder.
    const std::size_t nr = radii.size();
    std::vector<std::vector<double>> sums(nr, std::vector<double>(std::size_t(d * d), 0.0));
    std::vector<long> counts(nr, 0);
    for (std::size_t node = 0; node < total; ++node) {
        const Point x = grid.position(grid.decode(node));
        double norm_inf = 0.0;
        for (int a = 0; a < d; ++a) norm_inf = std::max(norm_inf, std::abs(x[std::size_t(a)]));
        std::size_t bucket = nr;
        for (std::size_t r = 0; r < nr; ++r)
            if (norm_inf <= radii[r]) {
                bucket = r;
                break;
            }
        if (bucket == nr) continue;
        ++counts[bucket];
        for (int j = 0; j < d; ++j) {
            for (int i = 0; i < d; ++i) {
                const double aii = coef.eval_diag_entry(i, x);
                // d_i w_per,j at the node via the two-node difference.
                Point xl = x, xr = x;
                xl[std::size_t(i)] -= h;
                xr[std::size_t(i)] += h;
                double grad = (per.w[std::size_t(j)].interpolate(xr) -
                               per.w[std::size_t(j)].interpolate(xl)) /
                              (2.0 * h);
                if (!wt.empty()) grad += wt[std::size_t(j)].w_tilde.gradient(node, i);
                const double flux = aii * ((i == j ? 1.0 : 0.0) + grad);
                sums[bucket][std::size_t(j * d + i)] += flux;
            }
        }
    }
    std::vector<FluxAverageRow> out;
    std::vector<double> run(std::size_t(d * d), 0.0);
    long run_count = 0;
    double astar_f = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) astar_f += per.a_star.at(i, j) * per.a_star.at(i, j);
    astar_f = std::sqrt(astar_f);
    for (std::size_t r = 0; r < nr; ++r) {
        run_count += counts[r];
        for (std::size_t k = 0; k < run.size(); ++k) run[k] += sums[r][k];
        FluxAverageRow row;
        row.radius = radii[r];
        row.estimate.d = d;
        double gap2 = 0.0;
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) {
                const double v = run_count ? run[std::size_t(j * d + i)] / double(run_count) : 0.0;
                row.estimate.at(i, j) = v;
                const double e = v - per.a_star.at(i, j);
                gap2 += e * e;
            }
        row.rel_gap = std::sqrt(gap2) / astar_f;
        out.push_back(row);
    }
    return out;
}

}  // namespace homlab::multiscale
