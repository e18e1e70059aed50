#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "homlab/coefficients.hpp"
#include "homlab/util.hpp"

namespace homlab::oracle1d {

struct Oracle1DConfig {
    coefficients::PeriodicCoefficient a_per;  // d = 1
    std::optional<coefficients::DefectProfile> profile;
    std::shared_ptr<geometry::DefectPointSet> set;
    std::function<double(double)> source;  // f on (0,1); defaults to 1
    int samples_per_scale = 32;            // nodes per resolved scale min(eps, rho*eps)

    double a_tilde(double y) const;
    double a_total(double y) const;  // a_per + a~ at the fast variable y
    void validate() const;
};

// Quadrature-backed closed-form fields at the shared node set on [0,1].
struct Oracle1DSolution {
    double eps = 1.0;
    double h = 0.0;          // node spacing on [0,1]
    double a_star = 1.0;     // harmonic mean of a_per
    double c_eps = 0.0;
    double c_star = 0.0;
    std::vector<double> x;
    std::vector<double> f_cum;        // F
    std::vector<double> ueps_prime;
    std::vector<double> ustar_prime;
    std::vector<double> ueps;
    std::vector<double> ustar;
    std::vector<double> w_scaled;       // w(x/eps) = w_per + w~ at the nodes
    std::vector<double> wprime_scaled;  // w'(x/eps)
};

Oracle1DSolution exact_fields(const Oracle1DConfig& config, double eps);

struct RateRow {
    double eps = 0.0;
    double l2_R = 0.0;
    double h1_R = 0.0;
    double ratio_vs_bound = 0.0;  // h1_R / (sqrt(eps) sqrt(|log eps|))
};
struct RateStudy {
    std::vector<RateRow> rows;
    AffineFit l2_fit;  // log ||R||_L2 vs log eps
    AffineFit h1_fit;
};
RateStudy rate_study_1d(const Oracle1DConfig& config, const std::vector<double>& eps_list);

struct GrowthRow {
    int n = 0;
    double sup_w_tilde = 0.0;  // over [0, 2^n]
};
struct GrowthStudy {
    std::vector<GrowthRow> rows;
    AffineFit fit;  // sup vs n
};
GrowthStudy corrector_growth_1d(const Oracle1DConfig& config, int n_max);

}  // namespace homlab::oracle1d
