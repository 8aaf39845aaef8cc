#include <agmm/datagen.hpp>
#include <agmm/em_parametric.hpp>
#include <agmm/rng.hpp>

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace agmm;

namespace {

Dataset small_data() {
  const std::vector<double> x{-0.8, -0.1, 0.4, 0.9};
  const std::vector<double> th{-2.5, 0.3, 1.2, -3.0};
  return Dataset::from_radians(x, th);
}

}  // namespace

TEST_CASE("e_step matches high-precision responsibilities") {
  Eigen::VectorXd beta(2), r(3);
  beta << 12.0, 2.0;
  r << 0.2, 0.5, 0.3;
  const ParametricAgmm m(Basis::polynomial(1), beta, 0.3, r);
  const Responsibilities psi = e_step(m, small_data());
  // mpmath, 40 digits.
  CHECK(psi(0, 0) == doctest::Approx(0.00036919798576080289).epsilon(1e-12));
  CHECK(psi(0, 1) == doctest::Approx(0.9996308020142392).epsilon(1e-12));
  CHECK(psi(1, 1) == doctest::Approx(4.9934534314127224e-10).epsilon(1e-9));
  CHECK(psi(3, 2) == doctest::Approx(1.3668274187537055e-19).epsilon(1e-9));
  for (std::size_t i = 0; i < 4; ++i) CHECK(psi.psi().row(static_cast<Eigen::Index>(i)).sum() == doctest::Approx(1.0));
}

TEST_CASE("m_step agrees with the normal-equations oracle") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto inst = oracle::random_instance(rng);
    const ParametricAgmm m = m_step(inst.data, Responsibilities(inst.psi), inst.basis);
    const auto ref = oracle::m_step(inst.data, inst.psi, inst.basis);
    for (Eigen::Index j = 0; j < m.beta().size(); ++j)
      CHECK(std::abs(m.beta()(j) - ref.beta[static_cast<std::size_t>(j)]) < 1e-8);
    CHECK(std::abs(m.sigma2() - ref.sigma2) < 1e-10);
    for (Eigen::Index k = 0; k < m.r().size(); ++k)
      CHECK(std::abs(m.r()(k) - ref.r[static_cast<std::size_t>(k)]) < 1e-10);
  }
}

TEST_CASE("m_step rejects a rank-deficient design") {
  const std::vector<double> x{0.5, 0.5, 0.5, 0.5};
  const std::vector<double> th{0.1, 0.2, 0.3, 0.4};
  const Dataset d = Dataset::from_radians(x, th);
  const std::vector<int> z{1, 1, 1, 1};
  CHECK_THROWS_AS(m_step(d, Responsibilities::hard(z, 1), Basis::polynomial(1)), SingularDesign);
}

TEST_CASE("m_step floors the variance") {
  std::vector<double> x, th;
  for (int i = 0; i < 6; ++i) {
    x.push_back(-1.0 + 0.4 * i);
    th.push_back(wrap_to_circle(5.0 * kPi + 0.5 * x.back()).value());
  }
  const Dataset d = Dataset::from_radians(x, th);
  const std::vector<int> z(6, 2);
  const ParametricAgmm m = m_step(d, Responsibilities::hard(z, 2), Basis::polynomial(1));
  CHECK(m.sigma2() == kVarianceFloor);
}

TEST_CASE("EM log-likelihood traces never decrease") {
  Rng rng(17);
  for (int t = 0; t < 25; ++t) {
    const auto inst = oracle::random_problem(rng);
    const ParametricFit fit = fit_em(inst.data, inst.init);
    const auto& tr = fit.report.loglik_trace;
    REQUIRE(!tr.empty());
    for (std::size_t s = 1; s < tr.size(); ++s) CHECK(tr[s] >= tr[s - 1] - 1e-8);
  }
}

TEST_CASE("fit_em recovers a wrapped cubic") {
  const Example ex = gen_example(4, 99);
  const Selection sel = select_K(ex.data, Basis::polynomial(3), std::vector<int>{1, 2, 3, 4});
  CHECK(sel.best_K == 3);
  CHECK(sel.best.report.converged);
  CHECK(sel.best.model.sigma2() == doctest::Approx(0.7).epsilon(0.35));
  CHECK(sel.scores.size() == 4);
  for (const auto& s : sel.scores) CHECK(s.ok);
}

TEST_CASE("BIC uses q + K degrees of freedom") {
  const Example ex = gen_example(3, 5);
  const Selection sel = select_K(ex.data, Basis::polynomial(2), std::vector<int>{2});
  const double ll = sel.best.report.final_loglik();
  CHECK(sel.best.report.bic == doctest::Approx(-2.0 * ll + std::log(static_cast<double>(ex.data.n())) * (3 + 2)));
}

TEST_CASE("select_K picks one component for a single unwrapped piece") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> e(0.0, 0.2);
  std::vector<double> x, th;
  for (int i = 0; i < 120; ++i) {
    x.push_back(u(rng));
    th.push_back(0.8 * x.back() + e(rng));
  }
  const Selection sel = select_K(Dataset::from_radians(x, th), Basis::polynomial(1), std::vector<int>{1, 2, 3});
  CHECK(sel.best_K == 1);
  CHECK(sel.best.model.beta()(1) == doctest::Approx(0.8).epsilon(0.15));
}

TEST_CASE("fit_em option validation") {
  const Example ex = gen_example(3, 1);
  const ParametricAgmm init = init_parameters(ex.data, quantile_split(ex.data, 2), Basis::polynomial(1));
  CHECK_THROWS_AS(fit_em(ex.data, init, EmOptions{-1.0, 10}), InvalidArgument);
  CHECK_THROWS_AS(fit_em(ex.data, init, EmOptions{1e-8, -1}), InvalidArgument);
  const ParametricFit none = fit_em(ex.data, init, EmOptions{1e-8, 0});
  CHECK(!none.report.converged);
  CHECK(none.model.beta() == init.beta());
  CHECK_THROWS_AS(select_K(ex.data, Basis::polynomial(1), std::vector<int>{}), InvalidArgument);
  CHECK_THROWS_AS(select_K(ex.data, Basis::polynomial(1), std::vector<int>{0}), InvalidArgument);
}

TEST_CASE("predict_mean wraps the latent mean") {
  Eigen::VectorXd beta(2), r(1);
  beta << 4.0, 1.0;
  r << 1.0;
  const ParametricAgmm m(Basis::polynomial(1), beta, 0.1, r);
  const double x = 0.5;
  CHECK(predict_mean(m, {&x, 1}).value() == doctest::Approx(wrap_to_circle(4.5).value()));
}

TEST_CASE("offset candidates cover every admissible shift") {
  ZAssignment z{{1, 1, 2, 2}};
  const std::vector<double> x{0.0, 0.1, 0.2, 0.3};
  const std::vector<double> th{0.0, 0.1, 0.2, 0.3};
  const auto c = offset_candidates(Dataset::from_radians(x, th), 3, &z);
  int shifted = 0;
  for (const auto& cand : c)
    if (cand.z == std::vector<int>{1, 1, 2, 2} || cand.z == std::vector<int>{2, 2, 3, 3}) ++shifted;
  CHECK(shifted == 2);
}
