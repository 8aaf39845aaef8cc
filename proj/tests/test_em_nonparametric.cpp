#include <agmm/datagen.hpp>
#include <agmm/em_nonparametric.hpp>
#include <agmm/em_parametric.hpp>
#include <agmm/init.hpp>
#include <agmm/rng.hpp>

#include <doctest.h>

#include <cmath>

using namespace agmm;

TEST_CASE("kernel weights") {
  const Kernel g{Kernel::Shape::gaussian, 0.5};
  CHECK(kernel_weight(g, 0.0) == doctest::Approx(0.3989422804014327 / 0.5));
  CHECK(kernel_weight(g, 0.5) == doctest::Approx(0.24197072451914337 / 0.5));
  const Kernel t{Kernel::Shape::triangular, 2.0};
  CHECK(kernel_weight(t, 1.0) == doctest::Approx(0.25));
  CHECK(kernel_weight(t, 2.0) == 0.0);
  CHECK(kernel_weight(t, 3.0) == 0.0);
  CHECK_THROWS_AS(kernel_weight(t, -1.0), InvalidArgument);
  CHECK(Kernel::parse_shape("triangular", 1.0).shape == Kernel::Shape::triangular);
  CHECK_THROWS_AS(Kernel::parse_shape("box", 1.0), InvalidArgument);
}

TEST_CASE("interpolation in one dimension") {
  Eigen::MatrixXd grid(3, 1);
  grid << 0.0, 1.0, -1.0;
  Eigen::VectorXd mu(3), s2(3);
  mu << 1.0, 3.0, 0.0;
  s2 << 0.5, 0.5, 1.0;
  Eigen::MatrixXd r(3, 2);
  r << 0.5, 0.5, 1.0, 0.0, 0.2, 0.8;
  const NonparametricAgmm m(grid, mu, s2, r);
  const double a = 0.25, lo = -5.0, hi = 7.0, at = 1.0;
  CHECK(m.interpolate({&a, 1}).mu == doctest::Approx(1.5));
  CHECK(m.interpolate({&a, 1}).r(0) == doctest::Approx(0.625));
  CHECK(m.interpolate({&lo, 1}).mu == 0.0);
  CHECK(m.interpolate({&hi, 1}).mu == 3.0);
  CHECK(m.interpolate({&at, 1}).mu == 3.0);
}

TEST_CASE("model validation") {
  Eigen::MatrixXd grid(2, 1);
  grid << 0.0, 0.0;
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(2, 1, 1.0);
  CHECK_THROWS_AS(NonparametricAgmm(grid, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), r), InvalidArgument);
  grid << 0.0, 1.0;
  CHECK_THROWS_AS(NonparametricAgmm(grid, Eigen::VectorXd::Zero(2), -Eigen::VectorXd::Ones(2), r), InvalidArgument);
  const NonparametricAgmm empty(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), Eigen::VectorXd(0), Eigen::MatrixXd(0, 1));
  const double x = 0.0;
  CHECK_THROWS_AS(empty.interpolate({&x, 1}), InvalidState);
}

TEST_CASE("grids") {
  const std::vector<double> x{0.1, 0.1, 0.5, -0.2};
  const std::vector<double> th{0.0, 0.1, 0.2, 0.3};
  const Dataset d = Dataset::from_radians(x, th);
  CHECK(grid_all_points(d).rows() == 3);
  const Eigen::MatrixXd u = grid_uniform(d, 5);
  CHECK(u.rows() == 5);
  CHECK(u(0, 0) == -0.2);
  CHECK(u(4, 0) == 0.5);
  CHECK(GridSpec::parse("uniform:7").J == 7);
  CHECK_THROWS_AS(GridSpec::parse("uniform:"), InvalidArgument);
  CHECK_THROWS_AS(GridSpec::parse("sparse"), InvalidArgument);
}

TEST_CASE("local M-step with a huge bandwidth reduces to the global constant fit") {
  const Example ex = gen_example(3, 2);
  const std::vector<int> z(ex.data.n(), 1);
  const Responsibilities psi = Responsibilities::hard(z, 1);
  const Eigen::MatrixXd grid = grid_uniform(ex.data, 4);
  const NonparametricAgmm m = local_m_step(ex.data, psi, grid, Kernel{Kernel::Shape::triangular, 1e6});
  double mean = 0.0;
  for (std::size_t i = 0; i < ex.data.n(); ++i) mean += ex.data.theta(i) + 3.0 * kPi;
  mean /= static_cast<double>(ex.data.n());
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(m.mu()(j) == doctest::Approx(mean).epsilon(1e-6));
}

TEST_CASE("identical kernel weights reproduce the constant parametric M-step") {
  // With one distinct x every point gets the same weight at each grid point.
  Rng rng(12);
  std::uniform_real_distribution<double> u(-kPi, kPi), w(0.05, 1.0);
  const std::size_t n = 50;
  std::vector<double> x(n, 0.3), th(n);
  Eigen::MatrixXd psi(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    th[i] = u(rng);
    for (Eigen::Index k = 0; k < 3; ++k) psi(static_cast<Eigen::Index>(i), k) = w(rng);
    psi.row(static_cast<Eigen::Index>(i)) /= psi.row(static_cast<Eigen::Index>(i)).sum();
  }
  const Dataset d = Dataset::from_radians(x, th);
  Eigen::MatrixXd grid(3, 1);
  grid << 0.3, -0.4, 0.9;
  const NonparametricAgmm local = local_m_step(d, Responsibilities(psi), grid, Kernel{Kernel::Shape::gaussian, 0.5});
  const ParametricAgmm global = m_step(d, Responsibilities(psi), Basis::polynomial(0));
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(std::abs(local.mu()(j) - global.beta()(0)) < 1e-10);
    CHECK(std::abs(local.sigma2()(j) - global.sigma2()) < 1e-10);
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(std::abs(local.r()(j, k) - global.r()(k)) < 1e-10);
  }
}

TEST_CASE("local weights stay in the simplex and grid points interpolate exactly") {
  const Example ex = gen_example(5, 6);
  const auto z = initial_offsets(ex.data);
  const Eigen::MatrixXd grid = grid_all_points(ex.data);
  const NonparametricFit fit = fit_local_em_auto(ex.data, 3, Kernel{Kernel::Shape::gaussian, 0.05}, grid, &z);
  for (Eigen::Index j = 0; j < fit.model.r().rows(); ++j) {
    CHECK(fit.model.r().row(j).minCoeff() >= 0.0);
    CHECK(std::abs(fit.model.r().row(j).sum() - 1.0) < 1e-12);
    const double g = grid(j, 0);
    CHECK(fit.model.interpolate({&g, 1}).mu == fit.model.mu()(j));
  }
}

TEST_CASE("global log-likelihood drift is monitored") {
  // The local updates need not raise the interpolated global likelihood.  On
  // the smooth examples it stays monotone within 1e-6; on the wrapped cubic
  // with h = 0.01 it can fall, and the monitor must say by how much.
  for (int id : {2, 3, 4, 5}) {
    for (std::uint64_t s = 0; s < 3; ++s) {
      const Example ex = gen_example(id, derive_seed(41, {static_cast<std::uint64_t>(id), s}));
      const auto z = initial_offsets(ex.data);
      const int K = select_K(ex.data, Basis::polynomial(3), std::vector<int>{1, 2, 3, 4, 5}).best_K;
      const NonparametricFit fit =
          fit_local_em_auto(ex.data, K, Kernel{Kernel::Shape::gaussian, 0.01}, grid_all_points(ex.data), &z);
      const auto& tr = fit.report.loglik_trace;
      double worst = 0.0;
      for (std::size_t t = 1; t < tr.size(); ++t) worst = std::max(worst, tr[t - 1] - tr[t]);
      CHECK(fit.max_loglik_decrease == worst);
      if (id != 4) CHECK(fit.max_loglik_decrease <= 1e-6);
    }
  }
}

TEST_CASE("isolated grid points are reported") {
  const std::vector<double> x{-1.0, -0.9, 0.9, 1.0};
  const std::vector<double> th{0.0, 0.1, 0.2, 0.3};
  const Dataset d = Dataset::from_radians(x, th);
  Eigen::MatrixXd grid(1, 1);
  grid << 0.0;
  const std::vector<int> z(4, 1);
  CHECK_THROWS_AS(local_m_step(d, Responsibilities::hard(z, 1), grid, Kernel{Kernel::Shape::triangular, 0.1}),
                  IsolatedGridPoint);
}

TEST_CASE("kernel EM on the wrapped cubic") {
  const Example ex = gen_example(4, 3);
  const auto z = initial_offsets(ex.data);
  const NonparametricFit fit =
      fit_local_em_auto(ex.data, 3, Kernel{Kernel::Shape::gaussian, 0.01}, grid_all_points(ex.data), &z);
  CHECK(fit.report.converged);
  CHECK(fit.report.iterations <= 10);
  CHECK(fit.model.J() == ex.data.n());
  CHECK(local_degrees_of_freedom(fit.model) == static_cast<int>(ex.data.n()) + 3);

  const auto g = truth_grid(ex.truth, 200, 1);
  std::vector<Angle> a, b;
  for (const auto& p : g) {
    a.push_back(p.theta);
    const double x = p.x;
    b.push_back(predict_mean(fit.model, {&x, 1}));
  }
  CHECK(mean_circular_error(a, b) < 0.4);
}

TEST_CASE("tune selects K by BIC and h by cross-validation") {
  const Example ex = gen_example(5, 4);
  TuneOptions opts;
  opts.grid = GridSpec::parse("uniform:40");
  const std::vector<int> Ks{1, 3};
  const std::vector<double> hs{0.05, 0.2};
  const TuneResult res = tune(ex.data, Ks, hs, 4, opts);
  CHECK(res.K == 3);
  CHECK(res.bic_scores.size() == 4);
  CHECK(res.cv_scores.size() == 2);
  CHECK((res.h == 0.05 || res.h == 0.2));

  const std::vector<double> one{0.1};
  CHECK(tune(ex.data, Ks, one, 4, opts).h == 0.1);
  CHECK_THROWS_AS(tune(ex.data, Ks, one, 1, opts), InvalidArgument);
}

TEST_CASE("fold assignment is balanced and seeded") {
  const auto f = fold_assignment(23, 5, 9);
  std::vector<int> counts(5, 0);
  for (int v : f) ++counts[static_cast<std::size_t>(v)];
  for (int c : counts) CHECK((c == 4 || c == 5));
  CHECK(f == fold_assignment(23, 5, 9));
  CHECK(f != fold_assignment(23, 5, 10));
}
