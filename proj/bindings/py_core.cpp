#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <vector>

#include "homlab/corrector.hpp"
#include "homlab/multiscale.hpp"
#include "homlab/oracle1d.hpp"
#include "homlab/runner.hpp"

namespace py = pybind11;
using namespace homlab;

namespace {

geometry::Index to_index(const std::vector<int>& v) {
    geometry::Index p{};
    for (std::size_t i = 0; i < v.size() && i < geometry::kMaxDim; ++i) p[i] = v[i];
    return p;
}

geometry::Point to_point(const std::vector<double>& v) {
    geometry::Point x{};
    for (std::size_t i = 0; i < v.size() && i < geometry::kMaxDim; ++i) x[i] = v[i];
    return x;
}

std::vector<int> from_index(const geometry::Index& p, int d) {
    return std::vector<int>(p.begin(), p.begin() + d);
}

coefficients::DefectProfile make_profile(const std::string& kind, double amplitude, double rho,
                                         double beta, double r_cut,
                                         const std::string& normalization, int max_generation) {
    coefficients::DefectProfile prof;
    prof.kind = kind == "algebraic" ? coefficients::ProfileKind::Algebraic
                                    : coefficients::ProfileKind::Bump;
    prof.amplitude = amplitude;
    prof.rho = rho;
    prof.beta = beta;
    prof.r_cut = r_cut;
    prof.normalization = normalization == "cell" ? coefficients::Normalization::CellNormalized
                                                 : coefficients::Normalization::Identical;
    prof.max_generation = max_generation;
    return prof;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Periodic homogenization with defects rare at infinity (C++ core)";

    py::register_exception<ConfigError>(m, "HomlabConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "HomlabNumericalError", PyExc_RuntimeError);

    py::class_<geometry::GeometryCertificate>(m, "GeometryCertificate")
        .def_readonly("h2_ratio_min", &geometry::GeometryCertificate::h2_ratio_min)
        .def_readonly("h2_ratio_max", &geometry::GeometryCertificate::h2_ratio_max)
        .def_readonly("h3_ratio_max", &geometry::GeometryCertificate::h3_ratio_max)
        .def_readonly("annulus_count_max", &geometry::GeometryCertificate::annulus_count_max)
        .def_readonly("annulus_counts", &geometry::GeometryCertificate::annulus_counts)
        .def_readonly("inclusion_violations", &geometry::GeometryCertificate::inclusion_violations)
        .def_property_readonly("cell_count_fit",
                               [](const geometry::GeometryCertificate& c) {
                                   return py::make_tuple(c.cell_count_fit.slope,
                                                         c.cell_count_fit.intercept,
                                                         c.cell_count_fit.r2);
                               })
        .def("to_json", &geometry::GeometryCertificate::to_json);

    m.def("in_index_set",
          [](const std::vector<int>& p, int dim, double c0) {
              return geometry::in_index_set(to_index(p), dim, c0);
          },
          py::arg("p"), py::arg("dim"), py::arg("c0") = 2.0);

    m.def("point_of",
          [](const std::vector<int>& p, double c0) {
              const int d = int(p.size());
              geometry::DefectPointSet set(d, c0, std::max(4, geometry::max_norm(to_index(p))));
              const auto x = set.point_of(to_index(p));
              return std::vector<double>(x.begin(), x.begin() + d);
          },
          py::arg("p"), py::arg("c0") = 2.0);

    m.def("nearest_defect",
          [](const std::vector<double>& y, double c0, int index_bound) {
              const int d = int(y.size());
              geometry::DefectPointSet set(d, c0, index_bound);
              const auto nd = set.nearest(to_point(y));
              return py::make_tuple(from_index(nd.index, d), nd.distance);
          },
          py::arg("y"), py::arg("c0") = 2.0, py::arg("index_bound") = 16);

    m.def("count_in_annulus",
          [](int n, int dim, double c0, int index_bound) {
              geometry::DefectPointSet set(dim, c0, index_bound);
              return set.count_in_annulus(n);
          },
          py::arg("n"), py::arg("dim"), py::arg("c0") = 2.0, py::arg("index_bound") = 16);

    m.def("cells_intersecting_ball",
          [](const std::vector<double>& x0, double R, double c0, int index_bound) {
              const int d = int(x0.size());
              geometry::DefectPointSet set(d, c0, index_bound);
              const auto cells = set.cells_intersecting_ball(to_point(x0), R);
              std::vector<std::vector<int>> out;
              for (const auto& p : cells) out.push_back(from_index(p, d));
              return out;
          },
          py::arg("x0"), py::arg("r"), py::arg("c0") = 2.0, py::arg("index_bound") = 16);

    m.def("certify_geometry",
          [](int dim, double c0, int index_bound, long min_inclusion_samples) {
              geometry::DefectPointSet set(dim, c0, index_bound);
              return geometry::certify_assumptions(set, min_inclusion_samples);
          },
          py::arg("dim"), py::arg("c0") = 2.0, py::arg("index_bound") = 8,
          py::arg("min_inclusion_samples") = 20000);

    m.def("homogenized_tensor",
          [](const std::string& preset, int dim, int n, double rel_tol) {
              auto per = coefficients::PeriodicCoefficient::preset(preset, dim);
              pde::SolverConfig cfg;
              cfg.rel_tol = rel_tol;
              const auto cell = corrector::solve_periodic_cell(per, n, cfg);
              std::vector<std::vector<double>> out(std::size_t(dim),
                                                   std::vector<double>(std::size_t(dim), 0.0));
              for (int i = 0; i < dim; ++i)
                  for (int j = 0; j < dim; ++j) out[std::size_t(i)][std::size_t(j)] = cell.a_star.at(i, j);
              return out;
          },
          py::arg("preset"), py::arg("dim"), py::arg("n") = 128, py::arg("rel_tol") = 1e-9);

    m.def("average_decay",
          [](int dim, double c0, int index_bound, double amplitude, double rho,
             const std::string& normalization, const std::vector<double>& radii) {
              auto per = coefficients::PeriodicCoefficient::preset("identity", dim);
              auto set = std::make_shared<geometry::DefectPointSet>(dim, c0, index_bound);
              coefficients::PerturbedCoefficient coef(
                  per, make_profile("bump", amplitude, rho, 1.0, 1.0, normalization, -1), set);
              const auto rep = coefficients::average_decay(coef, geometry::Point{}, radii);
              py::list rows;
              for (const auto& r : rep.rows)
                  rows.append(py::make_tuple(r.radius, r.mean, r.bound_ratio));
              py::dict out;
              out["rows"] = rows;
              out["slope"] = rep.fit.slope;
              out["r2"] = rep.fit.r2;
              return out;
          },
          py::arg("dim"), py::arg("c0") = 2.0, py::arg("index_bound") = 12,
          py::arg("amplitude") = 1.0, py::arg("rho") = 0.25, py::arg("normalization") = "cell",
          py::arg("radii") = std::vector<double>{16.0, 64.0, 256.0, 1024.0});

    m.def("rate_study_1d",
          [](const std::string& periodic, bool with_defects, const std::string& profile_kind,
             double amplitude, double rho, double beta, double r_cut,
             const std::string& normalization, int eps_min_exp, int eps_max_exp, int index_bound) {
              oracle1d::Oracle1DConfig oc;
              oc.a_per = coefficients::PeriodicCoefficient::preset(periodic, 1);
              oc.set = std::make_shared<geometry::DefectPointSet>(1, 2.0, index_bound);
              if (with_defects)
                  oc.profile =
                      make_profile(profile_kind, amplitude, rho, beta, r_cut, normalization, -1);
              std::vector<double> eps;
              for (int k = eps_min_exp; k <= eps_max_exp; ++k) eps.push_back(std::ldexp(1.0, -k));
              const auto study = oracle1d::rate_study_1d(oc, eps);
              py::list rows;
              for (const auto& r : study.rows)
                  rows.append(py::make_tuple(r.eps, r.l2_R, r.h1_R, r.ratio_vs_bound));
              py::dict out;
              out["rows"] = rows;
              out["l2_slope"] = study.l2_fit.slope;
              out["h1_slope"] = study.h1_fit.slope;
              return out;
          },
          py::arg("periodic") = "sin1d", py::arg("with_defects") = true,
          py::arg("profile_kind") = "bump", py::arg("amplitude") = 1.0, py::arg("rho") = 0.35,
          py::arg("beta") = 1.0, py::arg("r_cut") = 1.0, py::arg("normalization") = "identical",
          py::arg("eps_min_exp") = 3, py::arg("eps_max_exp") = 8, py::arg("index_bound") = 16);

    m.def("corrector_growth_1d",
          [](const std::string& periodic, double amplitude, double rho, int n_max,
             int index_bound) {
              oracle1d::Oracle1DConfig oc;
              oc.a_per = coefficients::PeriodicCoefficient::preset(periodic, 1);
              oc.set = std::make_shared<geometry::DefectPointSet>(1, 2.0, index_bound);
              oc.profile = make_profile("bump", amplitude, rho, 1.0, 1.0, "identical", -1);
              const auto study = oracle1d::corrector_growth_1d(oc, n_max);
              py::list rows;
              for (const auto& r : study.rows) rows.append(py::make_tuple(r.n, r.sup_w_tilde));
              py::dict out;
              out["rows"] = rows;
              out["slope"] = study.fit.slope;
              out["r2"] = study.fit.r2;
              return out;
          },
          py::arg("periodic") = "identity", py::arg("amplitude") = 1.0, py::arg("rho") = 0.35,
          py::arg("n_max") = 10, py::arg("index_bound") = 14);

    m.def("potential_residuals",
          [](const std::string& periodic, int dim, int cell_n) {
              auto per = coefficients::PeriodicCoefficient::preset(periodic, dim);
              pde::SolverConfig cfg;
              const auto cell = corrector::solve_periodic_cell(per, cell_n, cfg);
              const auto M = corrector::build_M(per, cell.a_star, cell);
              const auto B = corrector::solve_potential(M);
              py::dict out;
              out["div_residual"] = B.div_residual;
              out["curl_residual"] = B.curl_residual;
              out["m_div_residual"] = M.max_div_residual;
              out["m_mean_abs"] = M.max_mean_abs;
              return out;
          },
          py::arg("periodic") = "product2d", py::arg("dim") = 2, py::arg("cell_n") = 32);

    m.def("run_config",
          [](const std::string& config_json) {
              const auto cfg = runner::json::parse(config_json);
              const auto res = runner::run(cfg);
              return res.manifest.dump();
          },
          py::arg("config_json"),
          "Run a full pipeline from a JSON config; returns the manifest as JSON text.");

    m.def("default_config",
          [](const std::string& command, const std::string& preset) {
              return runner::default_config(command, preset).dump();
          },
          py::arg("command"), py::arg("preset") = "");

    m.attr("__version__") = "0.1.0";
}
