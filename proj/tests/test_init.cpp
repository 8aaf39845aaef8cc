#include <agmm/init.hpp>
#include <agmm/rng.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace agmm;

namespace {

struct Line {
  Dataset data;
  std::vector<long> z;
};

// y = a + b x on x ~ U(-1, 1), wrapped.  Returns the true floor offsets.
Line wrapped_line(double a, double b, std::size_t n, std::uint64_t seed, double noise = 0.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> e(0.0, 1.0);
  std::vector<double> x(n), th(n);
  std::vector<long> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = u(rng);
    const double y = a + b * x[i] + noise * e(rng);
    th[i] = wrap_to_circle(y).value();
    z[i] = static_cast<long>(std::floor(y / kTwoPi));
  }
  return {Dataset::from_radians(x, th), z};
}

bool equal_up_to_shift(const std::vector<int>& est, const std::vector<long>& truth) {
  const long shift = est[0] - truth[0];
  for (std::size_t i = 0; i < est.size(); ++i)
    if (est[i] - truth[i] != shift) return false;
  return true;
}

}  // namespace

TEST_CASE("density_cluster separates well spaced groups") {
  std::vector<double> x, th;
  for (int i = 0; i < 20; ++i) {
    x.push_back(-1.0 + 0.01 * i);
    th.push_back(-2.0);
    x.push_back(1.0 - 0.01 * i);
    th.push_back(2.0);
  }
  const Dataset d = Dataset::from_radians(x, th);
  const ClusterAssignment c = density_cluster(d, 0.3, 4);
  CHECK(c.num_clusters == 2);
  CHECK(c.labels[0] != c.labels[1]);
  CHECK(std::count(c.labels.begin(), c.labels.end(), 0) == 0);
}

TEST_CASE("density_cluster fails when everything is noise") {
  const std::vector<double> x{-1.0, 0.0, 1.0};
  const std::vector<double> th{-3.0, 0.0, 3.0};
  CHECK_THROWS_AS(density_cluster(Dataset::from_radians(x, th), 0.01, 4), InitFailure);
}

TEST_CASE("attach_noise uses the nearest clustered point") {
  std::vector<double> x, th;
  for (int i = 0; i < 10; ++i) {
    x.push_back(-1.0 + 0.01 * i);
    th.push_back(-2.0);
  }
  for (int i = 0; i < 10; ++i) {
    x.push_back(1.0 - 0.01 * i);
    th.push_back(2.0);
  }
  x.push_back(0.7);
  th.push_back(1.9);
  const Dataset d = Dataset::from_radians(x, th);
  ClusterAssignment c = density_cluster(d, 0.3, 4);
  c.labels.back() = 0;
  const ClusterAssignment a = attach_noise(c, d);
  CHECK(a.labels.back() == a.labels[10]);
  CHECK(a.num_clusters == c.num_clusters);
}

TEST_CASE("cluster_gap measures predictor distance with a stable tie-break") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> th{-3.0, 3.0, -3.0, 3.0};
  const Dataset d = Dataset::from_radians(x, th);
  const std::vector<std::size_t> a{0, 2}, b{1, 3};
  const ClusterGap g = cluster_gap(a, b, d);
  CHECK(g.distance == 1.0);
  CHECK(g.i == 0);
  CHECK(g.j == 1);
}

TEST_CASE("assign_offsets steps by the wrap count between neighbours") {
  // Two pieces of a line crossing the cut at x = 0.
  std::vector<double> x, th;
  for (int i = 0; i < 10; ++i) {
    x.push_back(-0.5 + 0.05 * i);
    th.push_back(2.5 + 0.05 * i);
  }
  for (int i = 0; i < 10; ++i) {
    x.push_back(0.05 + 0.05 * i);
    th.push_back(-3.0 + 0.05 * i);
  }
  const Dataset d = Dataset::from_radians(x, th);
  ClusterAssignment c;
  c.num_clusters = 2;
  for (int i = 0; i < 20; ++i) c.labels.push_back(i < 10 ? 1 : 2);
  const ZAssignment z = assign_offsets(c, d);
  CHECK(z.K() == 2);
  // Crossing +pi upwards moves one turn up.
  CHECK(z.z[0] == 1);
  CHECK(z.z[19] == 2);

  c.labels[3] = 0;
  CHECK_THROWS_AS(assign_offsets(c, d), InvalidArgument);
}

TEST_CASE("noiseless three-turn line is recovered up to a shift") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Line l = wrapped_line(5.0 * kPi, 3.0 * kPi, 200, seed);
    const ZAssignment z = initial_offsets(l.data);
    CHECK(equal_up_to_shift(z.z, l.z));
    CHECK(*std::min_element(z.z.begin(), z.z.end()) == 1);
  }
}

TEST_CASE("quantile_split") {
  const std::vector<double> x{0, 1, 2, 3, 4, 5};
  const std::vector<double> th{0.5, -0.5, 1.5, -1.5, 2.5, -2.5};
  const ZAssignment z = quantile_split(Dataset::from_radians(x, th), 3);
  CHECK(z.K() == 3);
  CHECK(std::set<int>(z.z.begin(), z.z.end()).size() == 3);
  CHECK(z.z[5] == z.z[3]);
  CHECK(z.z[4] == z.z[2]);
  CHECK_THROWS_AS(quantile_split(Dataset::from_radians(x, th), 0), InvalidArgument);
}

TEST_CASE("init_parameters solves the hard M-step") {
  const Line l = wrapped_line(5.0 * kPi, 3.0 * kPi, 100, 4, 0.05);
  const ZAssignment z = initial_offsets(l.data);
  const ParametricAgmm m = init_parameters(l.data, z, Basis::polynomial(1));
  CHECK(m.K() == z.K());
  CHECK(m.beta()(1) == doctest::Approx(3.0 * kPi).epsilon(0.02));
  CHECK(m.sigma2() < 0.01);

  // A basis richer than the data can support.
  const std::vector<double> x{0.0, 0.0, 1.0, 1.0};
  const std::vector<double> th{0.1, 0.2, 0.3, 0.4};
  const ZAssignment one{{1, 1, 1, 1}};
  CHECK_THROWS_AS(init_parameters(Dataset::from_radians(x, th), one, Basis::polynomial(3)), InitFailure);
}
