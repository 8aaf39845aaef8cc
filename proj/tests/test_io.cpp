#include <agmm/benchmark.hpp>
#include <agmm/datagen.hpp>
#include <agmm/io.hpp>

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace agmm;

TEST_CASE("dataset CSV round trip is exact") {
  const Example ex = gen_example(4, 2);
  std::stringstream ss;
  write_dataset_csv(ss, ex.data);
  const CsvDataset back = parse_dataset_csv(ss);
  CHECK(back.wrapped == 0);
  CHECK(back.data.x() == ex.data.x());
  CHECK(back.data.thetas() == ex.data.thetas());
}

TEST_CASE("CSV parser wraps out-of-range angles and counts them") {
  std::istringstream in("x1,theta\n0.1,0.5\n\n0.2,4.0\n0.3,-3.5\r\n");
  const CsvDataset d = parse_dataset_csv(in);
  CHECK(d.data.n() == 3);
  CHECK(d.wrapped == 2);
  CHECK(d.data.theta(1) == doctest::Approx(4.0 - kTwoPi));
  CHECK(d.data.theta(2) == doctest::Approx(-3.5 + kTwoPi));
}

TEST_CASE("CSV parser errors") {
  std::istringstream bad_header("a,theta\n1,2\n");
  CHECK_THROWS_AS(parse_dataset_csv(bad_header), IoError);
  std::istringstream bad_value("x1,theta\n1,abc\n");
  CHECK_THROWS_AS(parse_dataset_csv(bad_value), IoError);
  std::istringstream ragged("x1,theta\n1,2,3\n");
  CHECK_THROWS_AS(parse_dataset_csv(ragged), IoError);
  std::istringstream empty("x1,theta\n");
  CHECK_THROWS_AS(parse_dataset_csv(empty), IoError);
  std::istringstream two("x1,x2,theta\n1,2,0.5\n");
  CHECK(parse_dataset_csv(two).data.p() == 2);
}

TEST_CASE("parametric model JSON round trip is bit exact") {
  Eigen::VectorXd beta(4), r(3);
  beta << 1.0 / 3.0, -2.718281828459045, 1e-300, 12345.678901234567;
  r << 0.1, 0.2, 0.7;
  const ParametricAgmm m(Basis::polynomial(3), beta, 0.123456789012345678, r);
  const SavedModel back = model_from_json(model_to_json({"em", m}));
  CHECK(back.method == "em");
  const auto& p = std::get<ParametricAgmm>(back.model);
  CHECK(p.beta() == m.beta());
  CHECK(p.sigma2() == m.sigma2());
  CHECK(p.r() == m.r());
  CHECK(p.basis().degree() == 3);
}

TEST_CASE("every fitted model survives a round trip") {
  const Example ex = gen_example(5, 3);
  FitConfig cfg;
  cfg.iters = 400;
  cfg.burn_in = 100;
  cfg.h_range = {0.05};
  for (Method method : {Method::em, Method::npem, Method::gibbs, Method::smoothing}) {
    const FitOutcome fit = fit_method(method, ex.data, cfg, 1);
    const SavedModel back = model_from_json(model_to_json(fit.saved));
    CHECK(back.method == method_name(method));
    const Metrics a = evaluate(fit.saved.model, 5, 9), b = evaluate(back.model, 5, 9);
    CHECK(std::abs(a.mce - b.mce) < 1e-12);
    CHECK(a.variance_mse.has_value() == b.variance_mse.has_value());
    if (a.variance_mse) CHECK(std::abs(*a.variance_mse - *b.variance_mse) < 1e-12);
  }
}

TEST_CASE("malformed model files") {
  CHECK_THROWS_AS(model_from_json("{"), IoError);
  CHECK_THROWS_AS(model_from_json("{\"type\": \"other\"}"), IoError);
  CHECK_THROWS_AS(model_from_json("{\"type\": \"parametric\"}"), IoError);
}

TEST_CASE("truth metadata and reports") {
  const TruthInfo t{4, 18446744073709551615ull, 0.7};
  const TruthInfo back = truth_from_json(truth_to_json(t));
  CHECK(back.example == 4);
  CHECK(back.seed == t.seed);
  CHECK(back.sigma2_truth == 0.7);

  FitReport r;
  r.loglik_trace = {-10.0, -9.5};
  r.selected_K = 2;
  r.candidates.push_back(CandidateScore{1, std::nullopt, -12.0, 30.0, true, ""});
  r.candidates.push_back(CandidateScore{2, std::nullopt, 0.0, std::numeric_limits<double>::infinity(), false, "x"});
  const std::string js = report_to_json(r);
  CHECK(js.find("\"selected_K\": 2") != std::string::npos);
  CHECK(js.find("null") != std::string::npos);
}

TEST_CASE("trace CSV has one row per retained draw") {
  const Example ex = gen_example(3, 1);
  const GibbsTrace tr = gibbs_sample(ex.data, Basis::polynomial(1), 2, Priors{}, 30, 10, 1);
  std::ostringstream out;
  const std::vector<GibbsTrace> chains{tr, tr};
  write_trace_csv(out, chains);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "chain,iter,beta0,beta1,sigma2,r1,r2,sigma0_2");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 40);
}

TEST_CASE("atomic writes replace the target") {
  const auto dir = std::filesystem::temp_directory_path() / "agmm_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "out.txt";
  write_text_atomic(path, "one");
  write_text_atomic(path, "two");
  CHECK(read_text(path) == "two");
  CHECK(!std::filesystem::exists(dir / "out.txt.tmp"));
  CHECK_THROWS_AS(read_text(dir / "missing.txt"), IoError);
  CHECK_THROWS_AS(write_text_atomic(dir / "no" / "such" / "dir.txt", "x"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -1e-310, 6.02214076e23, kPi}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
}
