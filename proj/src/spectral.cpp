#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <vector>

#include "homlab/pde.hpp"

namespace homlab::pde {

namespace {
std::mutex fftw_plan_mutex;  // FFTW planning is not thread safe
}

GridField poisson_periodic_spectral(const GridField& rhs) {
    const UniformGrid& g = rhs.grid;
    if (g.bc != Bc::Periodic) throw ConfigError("poisson_periodic_spectral: periodic grid required");
    const int d = g.d;
    const int n = g.n;
    const double h = g.h();
    const std::size_t total = rhs.values.size();

    fftw_complex* buf = fftw_alloc_complex(total);
    fftw_plan fwd, bwd;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        // Our axis 0 is the fastest-varying index; FFTW's row-major order has
        // the last dimension fastest, and all extents are equal anyway.
        int dims[4] = {n, n, n, n};
        fwd = fftw_plan_dft(d, dims, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft(d, dims, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < total; ++i) {
        buf[i][0] = rhs.values[i];
        buf[i][1] = 0.0;
    }
    fftw_execute(fwd);

    // Divide by the centered flux-stencil symbol; the k=0 mode carries the
    // mean and is projected out.
    const double inv_h2 = 1.0 / (h * h);
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rest = i;
        double sym = 0.0;
        for (int a = 0; a < d; ++a) {
            const int k = int(rest % std::size_t(n));
            rest /= std::size_t(n);
            sym += (2.0 - 2.0 * std::cos(2.0 * M_PI * double(k) / double(n))) * inv_h2;
        }
        if (sym == 0.0) {
            buf[i][0] = 0.0;
            buf[i][1] = 0.0;
        } else {
            buf[i][0] /= sym;
            buf[i][1] /= sym;
        }
    }
    fftw_execute(bwd);

    GridField out = GridField::zeros(g);
    const double scale = 1.0 / double(total);
    for (std::size_t i = 0; i < total; ++i) out.values[i] = buf[i][0] * scale;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    fftw_free(buf);
    out.project_mean_zero();
    return out;
}

}  // namespace homlab::pde
