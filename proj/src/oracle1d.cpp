#include "homlab/oracle1d.hpp"

#include <algorithm>
#include <cmath>

#include "homlab/errors.hpp"

namespace homlab::oracle1d {

namespace {

// Composite Simpson over an already-sampled uniform array (even interval count).
double array_simpson(const std::vector<double>& v, double h) {
    const std::size_t n = v.size() - 1;
    double odd = 0, even = 0;
    for (std::size_t i = 1; i < n; i += 2) odd += v[i];
    for (std::size_t i = 2; i < n; i += 2) even += v[i];
    return h / 3.0 * (v.front() + v.back() + 4.0 * odd + 2.0 * even);
}

}  // namespace

double Oracle1DConfig::a_tilde(double y) const {
    if (!profile) return 0.0;
    const auto nd = set->nearest(geometry::make_point({y}));
    return profile->value(nd.distance, geometry::max_norm(nd.index), 1);
}

double Oracle1DConfig::a_total(double y) const {
    geometry::Point p{};
    p[0] = y - std::floor(y);
    return a_per.eval_diag(0, p) + a_tilde(y);
}

void Oracle1DConfig::validate() const {
    if (a_per.d != 1) throw ConfigError("oracle1d: a_per must be one-dimensional");
    if (profile && (!set || set->dim() != 1)) throw ConfigError("oracle1d: defect set must be one-dimensional");
    if (samples_per_scale < 32)
        throw NumericalError("oracle1d: needs at least 32 samples per resolved scale");
}

Oracle1DSolution exact_fields(const Oracle1DConfig& config, double eps) {
    config.validate();
    if (!(eps > 0.0) || eps > 1.0) throw ConfigError("oracle1d: eps must lie in (0, 1]");

    const double rho_scale = config.profile ? std::min(1.0, config.profile->rho) : 1.0;
    const double step_target = eps * rho_scale / double(config.samples_per_scale);
    std::size_t n = std::size_t(std::ceil(1.0 / step_target));
    n = std::max<std::size_t>(n, 64);
    if (n % 2) ++n;
    if (n > 40'000'000) throw NumericalError("oracle1d: quadrature grid too large to resolve eps");

    Oracle1DSolution out;
    out.eps = eps;
    out.h = 1.0 / double(n);

    auto f = config.source ? config.source : [](double) { return 1.0; };

    out.x.resize(n + 1);
    std::vector<double> fv(n + 1), inv_aeps(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double x = double(i) * out.h;
        out.x[i] = x;
        fv[i] = f(x);
        inv_aeps[i] = 1.0 / config.a_total(x / eps);
    }
    out.f_cum = cumulative_simpson(fv, out.h);

    // Harmonic mean of the periodic part over one period.
    {
        const std::size_t m = 4096;
        std::vector<double> inv(m + 1);
        for (std::size_t i = 0; i <= m; ++i) {
            geometry::Point p{};
            p[0] = double(i) / double(m);
            inv[i] = 1.0 / config.a_per.eval_diag(0, p);
        }
        out.a_star = 1.0 / array_simpson(inv, 1.0 / double(m));
    }

    // C^eps and C^* from the Remark's integral formulas, evaluated through the
    // same cumulative tables as the fields so that u(1) = 0 closes exactly.
    {
        std::vector<double> weighted(n + 1);
        for (std::size_t i = 0; i <= n; ++i) weighted[i] = inv_aeps[i] * out.f_cum[i];
        const double i1 = cumulative_simpson(inv_aeps, out.h).back();
        const double i2 = cumulative_simpson(weighted, out.h).back();
        out.c_eps = -i2 / i1;
        out.c_star = -cumulative_simpson(out.f_cum, out.h).back();
    }

    out.ueps_prime.resize(n + 1);
    out.ustar_prime.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        out.ueps_prime[i] = inv_aeps[i] * (out.f_cum[i] + out.c_eps);
        out.ustar_prime[i] = (out.f_cum[i] + out.c_star) / out.a_star;
    }
    out.ueps = cumulative_simpson(out.ueps_prime, out.h);
    out.ustar = cumulative_simpson(out.ustar_prime, out.h);

    // Corrector tables on the fast variable: the y-grid y_i = x_i / eps shares
    // the node count, so no interpolation is needed.
    {
        const double hy = out.h / eps;
        std::vector<double> inv_aper(n + 1), defect_part(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            const double y = double(i) * hy;
            geometry::Point p{};
            p[0] = y - std::floor(y);
            const double aper = config.a_per.eval_diag(0, p);
            const double tilde = config.a_tilde(y);
            inv_aper[i] = 1.0 / aper;
            defect_part[i] = tilde / (aper * (aper + tilde));
        }
        const auto cum_inv = cumulative_simpson(inv_aper, hy);
        const auto cum_def = cumulative_simpson(defect_part, hy);
        out.w_scaled.resize(n + 1);
        out.wprime_scaled.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            const double y = double(i) * hy;
            out.w_scaled[i] = -y + out.a_star * cum_inv[i] - out.a_star * cum_def[i];
            out.wprime_scaled[i] = -1.0 + out.a_star * inv_aper[i] - out.a_star * defect_part[i];
        }
    }
    return out;
}

RateStudy rate_study_1d(const Oracle1DConfig& config, const std::vector<double>& eps_list) {
    RateStudy study;
    std::vector<double> lx, l2y, h1y;
    for (double eps : eps_list) {
        const Oracle1DSolution s = exact_fields(config, eps);
        const std::size_t n = s.x.size() - 1;
        std::vector<double> r2(n + 1), dr2(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            const double r = s.ueps[i] - s.ustar[i] - eps * s.w_scaled[i] * s.ustar_prime[i];
            // (u*)'' = f / a*; recover f from the flux identity F' = f.
            const double f_here = i == 0   ? (s.f_cum[1] - s.f_cum[0]) / s.h
                                  : i == n ? (s.f_cum[n] - s.f_cum[n - 1]) / s.h
                                           : (s.f_cum[i + 1] - s.f_cum[i - 1]) / (2.0 * s.h);
            const double ustar_second = f_here / s.a_star;
            const double dr = s.ueps_prime[i] - s.ustar_prime[i] -
                              s.wprime_scaled[i] * s.ustar_prime[i] -
                              eps * s.w_scaled[i] * ustar_second;
            r2[i] = r * r;
            dr2[i] = dr * dr;
        }
        RateRow row;
        row.eps = eps;
        row.l2_R = std::sqrt(array_simpson(r2, s.h));
        row.h1_R = std::sqrt(array_simpson(dr2, s.h));
        const double bound = std::sqrt(eps) * std::sqrt(std::abs(std::log(eps)));
        row.ratio_vs_bound = row.h1_R / bound;
        study.rows.push_back(row);
        if (row.l2_R > 0 && row.h1_R > 0) {
            lx.push_back(std::log(eps));
            l2y.push_back(std::log(row.l2_R));
            h1y.push_back(std::log(row.h1_R));
        }
    }
    study.l2_fit = fit_affine(lx, l2y);
    study.h1_fit = fit_affine(lx, h1y);
    return study;
}

GrowthStudy corrector_growth_1d(const Oracle1DConfig& config, int n_max) {
    config.validate();
    if (n_max < 1 || n_max > 24) throw ConfigError("corrector_growth_1d: n_max must be in [1, 24]");
    GrowthStudy study;
    if (!config.profile) {
        for (int n = 1; n <= n_max; ++n) study.rows.push_back(GrowthRow{n, 0.0});
        study.fit = fit_affine({1.0, double(n_max)}, {0.0, 0.0});
        return study;
    }
    // w~(y) = -a* int_0^y a~/(a_per(a_per+a~)); the integrand is supported on
    // the defect copies, so accumulate per-copy increments.
    const double a_star = [&] {
        const std::size_t m = 4096;
        std::vector<double> inv(m + 1);
        for (std::size_t i = 0; i <= m; ++i) {
            geometry::Point p{};
            p[0] = double(i) / double(m);
            inv[i] = 1.0 / config.a_per.eval_diag(0, p);
        }
        return 1.0 / array_simpson(inv, 1.0 / double(m));
    }();

    auto copy_integral = [&](double center, int gen, double up_to) {
        const double s = config.profile->support_radius(gen);
        const double lo = std::max(0.0, center - s);
        const double hi = std::min(up_to, center + s);
        if (hi <= lo) return 0.0;
        return simpson(
            [&](double y) {
                geometry::Point p{};
                p[0] = y - std::floor(y);
                const double aper = config.a_per.eval_diag(0, p);
                const double tilde = config.profile->value(std::abs(y - center), gen, 1);
                return tilde / (aper * (aper + tilde));
            },
            lo, hi, 2048);
    };

    std::vector<double> xs, ys;
    for (int n = 1; n <= n_max; ++n) {
        const double top = std::ldexp(1.0, n);
        // Defects in [0, top]: 0 and +2^k for k <= n. Track the running value
        // of w~ after each copy; the sup is attained at a copy boundary.
        double running = 0.0, sup = 0.0;
        running += copy_integral(0.0, 0, top);
        sup = std::max(sup, std::abs(running));
        for (int k = 1; k <= n; ++k) {
            running += copy_integral(std::ldexp(1.0, k), k, top);
            sup = std::max(sup, std::abs(running));
        }
        sup *= a_star;
        study.rows.push_back(GrowthRow{n, sup});
        xs.push_back(double(n));
        ys.push_back(sup);
    }
    study.fit = fit_affine(xs, ys);
    return study;
}

}  // namespace homlab::oracle1d
