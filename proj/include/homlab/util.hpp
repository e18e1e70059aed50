#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace homlab {

// Affine least-squares fit y = slope*x + intercept with coefficient of
// determination r2. Degenerate inputs (fewer than two points, zero variance)
// yield slope = 0, r2 = 1.
struct AffineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 1.0;
};

AffineFit fit_affine(const std::vector<double>& x, const std::vector<double>& y);

// Composite Simpson on a uniform grid of n intervals (n rounded up to even).
double simpson(const std::function<double(double)>& f, double a, double b, int n);

// Cumulative integral of the sampled values (uniform spacing h) at every node,
// Simpson on even nodes, quadratic sub-interval correction on odd ones.
std::vector<double> cumulative_simpson(const std::vector<double>& values, double h);

// FNV-1a 64-bit content hash, used for config and artifact manifests.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

// Chunked parallel loop over [0, n). Worker count comes from HOMLAB_WORKERS
// (falling back to hardware concurrency). Chunks are assigned statically so
// results that are reduced in index order stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn);
int worker_count();

// Deterministic low-discrepancy points in [0,1)^d (Halton, bases 2/3/5/7).
std::array<double, 4> halton_point(std::uint64_t i, int d);

}  // namespace homlab
