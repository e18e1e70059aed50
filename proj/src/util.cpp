#include "homlab/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <thread>

namespace homlab {

AffineFit fit_affine(const std::vector<double>& x, const std::vector<double>& y) {
    AffineFit out;
    const std::size_t n = x.size();
    if (n != y.size()) throw std::invalid_argument("fit_affine: size mismatch");
    if (n < 2) return out;
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) { sx += x[i]; sy += y[i]; }
    const double mx = sx / double(n), my = sy / double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) return out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    if (syy == 0.0) { out.r2 = 1.0; return out; }
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (out.slope * x[i] + out.intercept);
        ss_res += e * e;
    }
    out.r2 = 1.0 - ss_res / syy;
    return out;
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n < 2) n = 2;
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double odd = 0, even = 0;
    for (int i = 1; i < n; i += 2) odd += f(a + i * h);
    for (int i = 2; i < n; i += 2) even += f(a + i * h);
    return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

std::vector<double> cumulative_simpson(const std::vector<double>& v, double h) {
    const std::size_t n = v.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    // Integral over [x_{i}, x_{i+2}] of the quadratic through (v_i, v_{i+1}, v_{i+2}),
    // split at the midpoint node: left half h/12*(5 v_i + 8 v_{i+1} - v_{i+2}).
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double inc;
        if (i + 2 < n) {
            inc = h / 12.0 * (5.0 * v[i] + 8.0 * v[i + 1] - v[i + 2]);
        } else {
            inc = h / 12.0 * (-v[i - 1] + 8.0 * v[i] + 5.0 * v[i + 1]);
        }
        out[i + 1] = out[i] + inc;
    }
    return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) { s[std::size_t(i)] = digits[v & 0xf]; v >>= 4; }
    return s;
}

int worker_count() {
    if (const char* env = std::getenv("HOMLAB_WORKERS")) {
        const int w = std::atoi(env);
        if (w >= 1) return w;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn) {
    const int workers = std::min<std::size_t>(std::size_t(worker_count()), std::max<std::size_t>(n, 1));
    if (workers <= 1 || n < 2048) {
        chunk_fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    const std::size_t chunk = (n + std::size_t(workers) - 1) / std::size_t(workers);
    for (int w = 0; w < workers; ++w) {
        const std::size_t lo = std::size_t(w) * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&chunk_fn, lo, hi] { chunk_fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

std::array<double, 4> halton_point(std::uint64_t i, int d) {
    static const int bases[4] = {2, 3, 5, 7};
    std::array<double, 4> out{0, 0, 0, 0};
    for (int axis = 0; axis < d && axis < 4; ++axis) {
        const int b = bases[axis];
        double f = 1.0, r = 0.0;
        std::uint64_t k = i + 1;
        while (k > 0) {
            f /= b;
            r += f * double(k % std::uint64_t(b));
            k /= std::uint64_t(b);
        }
        out[std::size_t(axis)] = r;
    }
    return out;
}

}  // namespace homlab
