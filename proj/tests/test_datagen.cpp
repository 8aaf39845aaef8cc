#include <agmm/datagen.hpp>

#include <doctest.h>

#include <cmath>

using namespace agmm;

namespace {

// (1/pi) int_0^pi exp(k cos t) cos(nu t) dt, composite trapezoid.  The
// integrand is smooth and periodic, so the rule converges geometrically; the
// exp(-k) scaling keeps large k finite.
double scaled_bessel_i(int nu, double kappa, int steps = 20000) {
  const double h = kPi / steps;
  double s = 0.0;
  for (int j = 0; j <= steps; ++j) {
    const double t = j * h;
    const double f = std::exp(kappa * (std::cos(t) - 1.0)) * std::cos(nu * t);
    s += (j == 0 || j == steps) ? 0.5 * f : f;
  }
  return s * h / kPi;
}

double quadrature_ratio(double kappa) { return scaled_bessel_i(1, kappa) / scaled_bessel_i(0, kappa); }

}  // namespace

TEST_CASE("bessel_ratio agrees with quadrature") {
  for (double k : {0.01, 0.5, 1.0, 2.0, 8.0, 20.0, 50.0, 120.0, 300.0, 500.0})
    CHECK(std::abs(bessel_ratio(k) - quadrature_ratio(k)) < 1e-10);
}

TEST_CASE("bessel_ratio reference values") {
  // mpmath besseli, 40 digits.
  CHECK(std::abs(bessel_ratio(0.5) - 0.2424996125808019453507024) < 1e-14);
  CHECK(std::abs(bessel_ratio(8.0) - 0.9352354935294386052996753) < 1e-14);
  CHECK(std::abs(bessel_ratio(500.0) - 0.9989994989968619325225406) < 1e-13);
  CHECK_THROWS_AS(bessel_ratio(0.0), InvalidArgument);
  CHECK_THROWS_AS(bessel_ratio(-1.0), InvalidArgument);
  CHECK_THROWS_AS(bessel_ratio(501.0), OutOfRange);
}

TEST_CASE("von Mises draws have the right resultant length") {
  const auto draws = sample_von_mises(Angle::principal(1.0), 8.0, 40000, 3);
  double c = 0.0, s = 0.0;
  for (const auto& a : draws) {
    c += std::cos(a.value());
    s += std::sin(a.value());
  }
  c /= draws.size();
  s /= draws.size();
  CHECK(std::atan2(s, c) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::hypot(c, s) == doctest::Approx(bessel_ratio(8.0)).epsilon(0.003));
}

TEST_CASE("von Mises sampler bookkeeping") {
  VonMisesSampler vm(8.0);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) vm(rng, 0.0);
  CHECK(vm.proposals() >= 1000);
  // Best-Fisher accepts at least ~65.6% of proposals for any kappa.
  CHECK(vm.proposals() < 1650);
  CHECK_THROWS_AS(VonMisesSampler(-1.0), InvalidArgument);
}

TEST_CASE("examples have the documented sizes") {
  CHECK(gen_example(2, 1).data.n() == 80);
  CHECK(gen_example(3, 1).data.n() == 160);
  CHECK(gen_example(4, 1).data.n() == 300);
  CHECK(gen_example(5, 1).data.n() == 160);
  CHECK_THROWS_AS(gen_example(1, 1), InvalidArgument);
  CHECK_THROWS_AS(gen_example(9, 1), InvalidArgument);
}

TEST_CASE("examples are reproducible and seed dependent") {
  const Example a = gen_example(4, 7), b = gen_example(4, 7), c = gen_example(4, 8);
  CHECK(a.data.x() == b.data.x());
  CHECK(a.data.thetas() == b.data.thetas());
  CHECK(a.data.x() != c.data.x());
  for (std::size_t i = 0; i < a.data.n(); ++i) {
    const double x = a.data.x()(static_cast<Eigen::Index>(i), 0);
    CHECK(x > -1.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("variance truth") {
  CHECK(example_sigma2_truth(4) == 0.7);
  // 1 - I1(8)/I0(8) from mpmath.
  CHECK(std::abs(example_sigma2_truth(5) - 0.06476450647056139470032468) < 1e-13);
}

TEST_CASE("truth is the wrapped latent mean") {
  for (int id : {2, 3, 4, 5}) {
    const auto mean = example_latent_mean(id);
    const auto truth = example_truth(id);
    for (double x : {-0.9, -0.3, 0.2, 0.8}) {
      const double a = truth(x).value();
      const double d = std::remainder(a - mean(x), kTwoPi);
      if (id == 4)
        CHECK(std::abs(a - wrap_to_circle(mean(x)).value()) < 1e-12);
      else
        CHECK(std::abs(d) < 1e-12);
    }
  }
}

TEST_CASE("truth grid is seeded") {
  const auto g1 = truth_grid(example_truth(5), 200, 4);
  const auto g2 = truth_grid(example_truth(5), 200, 4);
  REQUIRE(g1.size() == 200);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(g1[i].x == g2[i].x);
    CHECK(g1[i].theta == g2[i].theta);
  }
}
