#include <agmm/datagen.hpp>

#include <algorithm>
#include <cmath>

namespace agmm {

VonMisesSampler::VonMisesSampler(double kappa) : kappa_(kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw InvalidArgument("von Mises concentration must be a finite value >= 0");
  if (kappa_ > 0.0) {
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa_ * kappa_);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa_);
    r_ = (1.0 + rho * rho) / (2.0 * rho);
  }
}

Angle VonMisesSampler::operator()(Rng& rng, double omega) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (kappa_ < 1e-8) {
    ++proposals_;
    return Angle::principal(omega + kPi * (2.0 * unif(rng) - 1.0));
  }
  for (;;) {
    ++proposals_;
    const double u1 = unif(rng);
    const double u2 = unif(rng);
    const double u3 = unif(rng);
    const double z = std::cos(kPi * u1);
    const double f = (1.0 + r_ * z) / (r_ + z);
    const double c = kappa_ * (r_ - f);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double dev = std::acos(std::clamp(f, -1.0, 1.0));
      return Angle::principal(u3 > 0.5 ? omega + dev : omega - dev);
    }
  }
}

std::vector<Angle> sample_von_mises(Angle omega, double kappa, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample_von_mises: n must be >= 1");
  VonMisesSampler sampler(kappa);
  Rng rng(seed);
  std::vector<Angle> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sampler(rng, omega.value()));
  return out;
}

double bessel_ratio(double kappa) {
  if (!(kappa > 0.0)) throw InvalidArgument("bessel_ratio: kappa must be positive");
  if (kappa > 500.0) throw OutOfRange("bessel_ratio: kappa > 500 overflows the unscaled series");
  // term_m(nu) = (kappa/2)^(2m+nu) / (m! (m+nu)!)
  const double half = 0.5 * kappa;
  const double q = half * half;
  double t0 = 1.0, t1 = half;
  double i0 = t0, i1 = t1;
  for (int m = 1; m < 10000; ++m) {
    t0 *= q / (static_cast<double>(m) * m);
    t1 *= q / (static_cast<double>(m) * (m + 1));
    i0 += t0;
    i1 += t1;
    if (t0 < 1e-16 * i0 && t1 < 1e-16 * i1) break;
  }
  return i1 / i0;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kVonMisesKappa = 8.0;
constexpr double kExample4Variance = 0.7;

void check_id(int id) {
  if (id < 2 || id > 5) throw InvalidArgument("unknown example id " + std::to_string(id) + " (expected 2-5)");
}

}  // namespace

int example_size(int id) {
  check_id(id);
  switch (id) {
    case 2: return 80;
    case 4: return 300;
    default: return 160;
  }
}

std::function<double(double)> example_latent_mean(int id) {
  check_id(id);
  switch (id) {
    case 2: return [](double x) { return 0.1 + std::atan(5.0 * x); };
    case 3: return [](double x) { return 0.1 + 5.0 * x; };
    case 4:
      return [](double x) {
        return (std::atan(2.0 * x) + std::asin(x / 2.0) - std::asin(x) + std::acos(x / 3.0) - kPi / 2.0) * 7.85 +
               kPi;
      };
    default: return [](double x) { return 0.1 + 8.0 * x; };
  }
}

std::function<Angle(double)> example_truth(int id) {
  auto mean = example_latent_mean(id);
  // Example 4 observes (y mod 2pi) - pi; the others observe the angle itself.
  if (id == 4) return [mean](double x) { return wrap_to_circle(mean(x)); };
  return [mean](double x) { return Angle::principal(mean(x)); };
}

double example_sigma2_truth(int id) {
  check_id(id);
  return id == 4 ? kExample4Variance : 1.0 - bessel_ratio(kVonMisesKappa);
}

Example gen_example(int id, std::uint64_t seed) {
  check_id(id);
  const auto n = static_cast<std::size_t>(example_size(id));
  auto mean = example_latent_mean(id);
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  VonMisesSampler vm(kVonMisesKappa);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  std::vector<Angle> theta;
  theta.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double xi = unif(rng);
    while (xi == -1.0) xi = unif(rng);
    x(static_cast<Eigen::Index>(i), 0) = xi;
    if (id == 4)
      theta.push_back(wrap_to_circle(mean(xi) + std::sqrt(kExample4Variance) * normal(rng)));
    else
      theta.push_back(vm(rng, mean(xi)));
  }
  return Example{id, Dataset(std::move(x), std::move(theta)), mean, example_truth(id), example_sigma2_truth(id)};
}

std::vector<TruthPoint> truth_grid(const std::function<Angle(double)>& truth, std::size_t T,
                                   std::uint64_t seed) {
  if (T < 1) throw InvalidArgument("truth_grid: T must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<TruthPoint> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    double x = unif(rng);
    while (x == -1.0) x = unif(rng);
    out.push_back({x, truth(x)});
  }
  return out;
}

}  // namespace agmm
