#include <agmm/baseline.hpp>
#include <agmm/benchmark.hpp>
#include <agmm/core.hpp>
#include <agmm/datagen.hpp>
#include <agmm/em_nonparametric.hpp>
#include <agmm/em_parametric.hpp>
#include <agmm/gibbs.hpp>
#include <agmm/init.hpp>
#include <agmm/io.hpp>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace agmm;

namespace {

Dataset make_dataset(const Eigen::MatrixXd& x, const std::vector<double>& theta) {
  if (x.cols() == 1 || x.rows() == 1) {
    const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    if (static_cast<std::size_t>(flat.size()) == theta.size())
      return Dataset::from_radians(Eigen::MatrixXd(flat), theta);
  }
  return Dataset::from_radians(x, theta);
}

std::vector<double> angles(const std::vector<Angle>& a) {
  std::vector<double> out;
  out.reserve(a.size());
  for (const auto& v : a) out.push_back(v.value());
  return out;
}

std::vector<double> predict_rows(const Eigen::MatrixXd& x, const std::function<Angle(std::span<const double>)>& f) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  Eigen::RowVectorXd row;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    row = x.row(i);
    out.push_back(f(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))).value());
  }
  return out;
}

Eigen::MatrixXd as_rows(const Eigen::MatrixXd& x, std::size_t p) {
  if (p == 1 && x.cols() != 1) return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  return x;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Angular Gaussian mixture regression for circular responses";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  auto fit_error = py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  (void)fit_error;

  m.attr("PI") = kPi;

  m.def("wrap_to_circle", [](double y) { return wrap_to_circle(y).value(); }, py::arg("y"));
  m.def("principal", [](double a) { return Angle::principal(a).value(); }, py::arg("a"));
  m.def("unwrap", [](double theta, long z) { return unwrap(Angle::principal(theta), z); }, py::arg("theta"),
        py::arg("z"));
  m.def("mean_circular_error",
        [](const std::vector<double>& a, const std::vector<double>& b) { return mean_circular_error(a, b); },
        py::arg("truth"), py::arg("estimate"));
  m.def("bessel_ratio", &bessel_ratio, py::arg("kappa"));

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("x"), py::arg("theta"))
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("p", &Dataset::p)
      .def_property_readonly("x", &Dataset::x)
      .def_property_readonly("theta", [](const Dataset& d) { return angles(d.thetas()); })
      .def("__len__", &Dataset::n);

  py::class_<Basis>(m, "Basis")
      .def_static("polynomial", &Basis::polynomial, py::arg("degree"), py::arg("p") = 1)
      .def_property_readonly("degree", &Basis::degree)
      .def_property_readonly("q", &Basis::q)
      .def("design", &Basis::design, py::arg("data"));

  py::class_<ParametricAgmm>(m, "ParametricAgmm")
      .def(py::init<Basis, Eigen::VectorXd, double, Eigen::VectorXd>(), py::arg("basis"), py::arg("beta"),
           py::arg("sigma2"), py::arg("r"))
      .def_property_readonly("basis", &ParametricAgmm::basis)
      .def_property_readonly("beta", &ParametricAgmm::beta)
      .def_property_readonly("sigma2", &ParametricAgmm::sigma2)
      .def_property_readonly("r", &ParametricAgmm::r)
      .def_property_readonly("K", &ParametricAgmm::K)
      .def("predict", [](const ParametricAgmm& mdl, const Eigen::MatrixXd& x) {
        return predict_rows(as_rows(x, mdl.basis().p()), [&](std::span<const double> r) { return predict_mean(mdl, r); });
      }, py::arg("x"));

  py::class_<CandidateScore>(m, "CandidateScore")
      .def_readonly("K", &CandidateScore::K)
      .def_readonly("h", &CandidateScore::h)
      .def_readonly("loglik", &CandidateScore::loglik)
      .def_readonly("bic", &CandidateScore::bic)
      .def_readonly("ok", &CandidateScore::ok)
      .def_readonly("message", &CandidateScore::message);

  py::class_<FitReport>(m, "FitReport")
      .def_readonly("loglik_trace", &FitReport::loglik_trace)
      .def_readonly("iterations", &FitReport::iterations)
      .def_readonly("converged", &FitReport::converged)
      .def_readonly("bic", &FitReport::bic)
      .def_readonly("selected_K", &FitReport::selected_K)
      .def_readonly("selected_h", &FitReport::selected_h)
      .def_readonly("candidates", &FitReport::candidates);

  py::class_<ParametricFit>(m, "ParametricFit")
      .def_readonly("model", &ParametricFit::model)
      .def_readonly("report", &ParametricFit::report);

  m.def("mixture_loglik", &mixture_loglik, py::arg("model"), py::arg("data"));
  m.def("e_step", [](const ParametricAgmm& mdl, const Dataset& d) { return e_step(mdl, d).psi(); },
        py::arg("model"), py::arg("data"));
  m.def("m_step", [](const Dataset& d, const Eigen::MatrixXd& psi, const Basis& b) {
    return m_step(d, Responsibilities(psi), b);
  }, py::arg("data"), py::arg("psi"), py::arg("basis"));
  m.def("fit_em", [](const Dataset& d, const ParametricAgmm& init, double tol, int max_iter) {
    return fit_em(d, init, EmOptions{tol, max_iter});
  }, py::arg("data"), py::arg("init"), py::arg("tol") = 1e-8, py::arg("max_iter") = 500);
  m.def("select_K", [](const Dataset& d, const Basis& b, const std::vector<int>& Ks) {
    Selection s = select_K(d, b, Ks);
    return py::make_tuple(s.best_K, s.best);
  }, py::arg("data"), py::arg("basis"), py::arg("K_range"));
  m.def("initial_offsets", [](const Dataset& d, double eps, int min_pts) {
    return initial_offsets(d, InitOptions{eps, min_pts}).z;
  }, py::arg("data"), py::arg("eps") = 0.3, py::arg("min_pts") = 4);

  py::class_<Example>(m, "Example")
      .def_readonly("id", &Example::id)
      .def_readonly("data", &Example::data)
      .def_readonly("sigma2_truth", &Example::sigma2_truth)
      .def("truth", [](const Example& e, double x) { return e.truth(x).value(); }, py::arg("x"));
  m.def("gen_example", &gen_example, py::arg("id"), py::arg("seed"));

  m.def("fit", [](const std::string& method, const Dataset& d, std::uint64_t seed, int degree,
                  std::vector<int> K_range, std::vector<double> h, int iters, int burn_in) {
    FitConfig cfg;
    cfg.basis = Basis::polynomial(degree, d.p());
    cfg.K_range = std::move(K_range);
    if (!h.empty()) {
      cfg.h_range = h;
      cfg.smooth_h = h;
    }
    cfg.iters = iters;
    cfg.burn_in = burn_in;
    FitOutcome out = fit_method(parse_method(method), d, cfg, seed);
    return py::make_tuple(model_to_json(out.saved), out.report);
  }, py::arg("method"), py::arg("data"), py::arg("seed") = 1, py::arg("degree") = 3,
     py::arg("K_range") = std::vector<int>{1, 2, 3, 4, 5}, py::arg("h") = std::vector<double>{},
     py::arg("iters") = 30000, py::arg("burn_in") = 10000,
     "Fits with the named method and returns (model JSON, FitReport).");

  m.def("predict", [](const std::string& model_json, const Eigen::MatrixXd& x) {
    const SavedModel saved = model_from_json(model_json);
    const std::size_t p = std::visit(
        [](const auto& mm) -> std::size_t {
          using T = std::decay_t<decltype(mm)>;
          if constexpr (std::is_same_v<T, ParametricAgmm>)
            return mm.basis().p();
          else if constexpr (std::is_same_v<T, KernelModel>)
            return mm.model.p();
          else
            return mm.data().p();
        },
        saved.model);
    return predict_rows(as_rows(x, p), [&](std::span<const double> r) { return predict(saved.model, r); });
  }, py::arg("model_json"), py::arg("x"));

  m.def("evaluate", [](const std::string& model_json, int example, std::uint64_t seed, std::size_t T) {
    const Metrics mt = evaluate(model_from_json(model_json).model, example, seed, T);
    py::dict out;
    out["mce"] = mt.mce;
    out["variance_mse"] = mt.variance_mse ? py::cast(*mt.variance_mse) : py::none();
    out["T"] = mt.T;
    return out;
  }, py::arg("model_json"), py::arg("example"), py::arg("seed") = 1, py::arg("T") = 200);

  m.def("gibbs_summary", [](const Dataset& d, int degree, int K, int total, int burn_in, std::uint64_t seed) {
    const Basis b = Basis::polynomial(degree, d.p());
    const PosteriorSummary s = posterior_summary(gibbs_sample(d, b, K, Priors{}, total, burn_in, seed));
    py::dict out;
    out["beta_mean"] = s.beta_mean;
    out["beta_sd"] = s.beta_sd;
    out["sigma2_mean"] = s.sigma2_mean;
    out["r_mean"] = s.r_mean;
    return out;
  }, py::arg("data"), py::arg("degree"), py::arg("K"), py::arg("total"), py::arg("burn_in"), py::arg("seed"));
}
