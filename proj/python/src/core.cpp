// pybind11 module skewfit._core.
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "skewfit/bench.hpp"
#include "skewfit/divergence.hpp"
#include "skewfit/errors.hpp"
#include "skewfit/skew.hpp"
#include "skewfit/symmetric.hpp"
#include "skewfit/verify.hpp"

namespace py = pybind11;
using namespace skewfit;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Matrix draws_to_matrix(int n, const std::function<Vector(Rng&)>& draw, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("n must be non-negative");
  Rng rng(seed);
  std::vector<Vector> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(draw(rng));
  return stack_samples(out);
}

GridSpec make_grid(const Vector& lo, const Vector& hi, int points) {
  GridSpec g{lo, hi, points};
  g.validate();
  return g;
}

DivergenceEstimate divergence(const std::string& kind, const LogDensityFn& log_p,
                              const LogDensityFn& log_q, const GridSpec& grid, double alpha) {
  if (kind == "tv") return tv_grid(log_p, log_q, grid);
  if (kind == "alpha") return alpha_div_grid(log_p, log_q, alpha, grid);
  if (kind == "kl_forward") return kl_grid(log_p, log_q, KlDirection::forward, grid);
  if (kind == "kl_reverse") return kl_grid(log_p, log_q, KlDirection::reverse, grid);
  throw std::invalid_argument("unknown divergence kind: " + kind);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Skew-symmetric approximations for Bayesian GLMs";
  m.attr("__version__") = version_string();

  py::register_exception<Error>(m, "SkewfitError", PyExc_RuntimeError);

  py::class_<GlmModel>(m, "GlmModel")
      .def(py::init([](const Matrix& x, const Vector& y, const std::string& family,
                       const Vector& prior_mean, const Vector& prior_var) {
             return GlmModel(x, y, family_from_string(family), prior_mean, prior_var);
           }),
           py::arg("design"), py::arg("response"), py::arg("family"), py::arg("prior_mean"),
           py::arg("prior_var"))
      .def_static(
          "from_csv",
          [](const std::string& path, const std::string& response, const std::string& family,
             bool add_intercept, double prior_mean, double prior_var) {
            return GlmModel(read_csv_dataset(path, response, add_intercept),
                            family_from_string(family), prior_mean, prior_var);
          },
          py::arg("path"), py::arg("response"), py::arg("family"),
          py::arg("add_intercept") = true, py::arg("prior_mean") = 0.0,
          py::arg("prior_var") = 4.0)
      .def_property_readonly("dim", &GlmModel::dim)
      .def_property_readonly("n_obs", &GlmModel::n_obs)
      .def_property_readonly("family", [](const GlmModel& g) { return to_string(g.family()); })
      .def_property_readonly("names", &GlmModel::names)
      .def("log_posterior",
           [](const GlmModel& g, const Vector& t) { return log_unnorm_posterior(g.spec(), t); })
      .def("gradient", &GlmModel::gradient)
      .def("hessian", &GlmModel::hessian);

  py::class_<SymmetricApproximation>(m, "SymmetricApproximation")
      .def_property_readonly("kind",
                             [](const SymmetricApproximation& a) { return to_string(a.kind()); })
      .def_property_readonly("dim", &SymmetricApproximation::dim)
      .def_property_readonly("center", &SymmetricApproximation::center)
      .def_property_readonly("covariance", &SymmetricApproximation::covariance)
      .def("log_pdf", &SymmetricApproximation::log_pdf)
      .def(
          "sample",
          [](const SymmetricApproximation& a, int n, std::uint64_t seed) {
            return draws_to_matrix(n, [&](Rng& r) { return a.draw(r); }, seed);
          },
          py::arg("n"), py::arg("seed") = 1)
      .def("to_json", [](const SymmetricApproximation& a) { return to_py(a.to_json()); })
      .def_property_readonly("iterations",
                             [](const SymmetricApproximation& a) { return a.diagnostics.iterations; });

  py::class_<SkewSymmetricApproximation>(m, "SkewSymmetricApproximation")
      .def_property_readonly("dim", &SkewSymmetricApproximation::dim)
      .def_property_readonly("center", &SkewSymmetricApproximation::center)
      .def_property_readonly("symmetric", &SkewSymmetricApproximation::symmetric)
      .def("weight", &SkewSymmetricApproximation::weight)
      .def("log_pdf", [](const SkewSymmetricApproximation& q, const Vector& t) {
        return skew_logpdf(q, t);
      })
      .def(
          "sample",
          [](const SkewSymmetricApproximation& q, int n, std::uint64_t seed) {
            Rng rng(seed);
            return stack_samples(sample_skew(q, n, rng));
          },
          py::arg("n"), py::arg("seed") = 1);

  m.def(
      "fit_laplace",
      [](const GlmModel& g, std::optional<Vector> init) {
        return fit_laplace(g.spec(), init ? *init : Vector::Zero(g.dim()));
      },
      py::arg("model"), py::arg("init") = py::none());
  m.def(
      "fit_gvb",
      [](const GlmModel& g, int iterations, int mc_samples, std::uint64_t seed) {
        GvbOptions o;
        o.iterations = iterations;
        o.mc_samples = mc_samples;
        o.seed = seed;
        const auto la = fit_laplace(g.spec(), Vector::Zero(g.dim()));
        return fit_gvb(g.spec(), *la.gaussian(), o);
      },
      py::arg("model"), py::arg("iterations") = 5000, py::arg("mc_samples") = 8,
      py::arg("seed") = 1);
  m.def("fit_gep", [](const GlmModel& g) { return fit_gep(g); }, py::arg("model"));
  m.def(
      "build_snp",
      [](const GlmModel& g, const SymmetricApproximation& laplace) {
        return build_snp(g.spec(), laplace);
      },
      py::arg("model"), py::arg("laplace"));
  m.def(
      "make_skew",
      [](const SymmetricApproximation& base, const GlmModel& g) { return make_skew(base, g); },
      py::arg("base"), py::arg("model"), py::keep_alive<0, 2>());
  m.def("factor_from_log_ratio", &factor_from_log_ratio, py::arg("delta"));

  m.def(
      "divergence",
      [](const std::string& kind, const LogDensityFn& log_p, const LogDensityFn& log_q,
         const Vector& lo, const Vector& hi, int points, double alpha) {
        return to_py(divergence(kind, log_p, log_q, make_grid(lo, hi, points), alpha).to_json());
      },
      py::arg("kind"), py::arg("log_p"), py::arg("log_q"), py::arg("lo"), py::arg("hi"),
      py::arg("points") = 4096, py::arg("alpha") = 0.5,
      "Divergence between two log densities on a d <= 2 trapezoid grid. kind: tv, alpha, "
      "kl_forward, kl_reverse.");

  m.def(
      "run_verify",
      [](const std::vector<std::string>& suites, bool conjugate_only, int random_skewing_functions,
         int ks_draws) {
        VerifyOptions o;
        o.suites = suites;
        o.battery.conjugate_only = conjugate_only;
        o.random_skewing_functions = random_skewing_functions;
        o.ks_draws = ks_draws;
        VerifyReport r;
        {
          py::gil_scoped_release release;
          r = run_verify(o);
        }
        return to_py(r.to_json());
      },
      py::arg("suites") = std::vector<std::string>{}, py::arg("conjugate_only") = false,
      py::arg("random_skewing_functions") = 50, py::arg("ks_draws") = 100000);

  m.def(
      "rate_experiment",
      [](const std::string& family, const std::vector<int>& sample_sizes, int replicates,
         std::uint64_t seed, int grid_points) {
        RateFamily fam;
        if (family == "exponential") fam = exponential_rate_family();
        else if (family == "gaussian") fam = gaussian_mean_family();
        else throw std::invalid_argument("unknown rate family: " + family);
        RateOptions o;
        o.sample_sizes = sample_sizes;
        o.replicates = replicates;
        o.seed = seed;
        o.grid_points = grid_points;
        std::vector<RateCurve> curves;
        {
          py::gil_scoped_release release;
          curves = rate_experiment(fam, o);
        }
        py::list out;
        for (const auto& c : curves) out.append(to_py(c.to_json()));
        return out;
      },
      py::arg("family") = "exponential",
      py::arg("sample_sizes") = RateOptions{}.sample_sizes, py::arg("replicates") = 20,
      py::arg("seed") = 1, py::arg("grid_points") = 4096);
}
