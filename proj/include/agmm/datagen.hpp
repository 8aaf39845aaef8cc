#pragma once

// Seeded synthetic data for the benchmark examples 2-5.

#include <agmm/core.hpp>
#include <agmm/rng.hpp>

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace agmm {

/// Best-Fisher rejection sampler for VM(omega, kappa).  Counts proposals so the
/// rejection overhead can be audited.
class VonMisesSampler {
 public:
  VonMisesSampler(double kappa);

  Angle operator()(Rng& rng, double omega);
  double kappa() const noexcept { return kappa_; }
  std::uint64_t proposals() const noexcept { return proposals_; }

 private:
  double kappa_;
  double r_ = 0.0;
  std::uint64_t proposals_ = 0;
};

std::vector<Angle> sample_von_mises(Angle omega, double kappa, std::size_t n, std::uint64_t seed);

/// I_1(kappa) / I_0(kappa) by power series; kappa in (0, 500].
double bessel_ratio(double kappa);

struct Example {
  int id = 0;
  Dataset data;
  /// Unwrapped mean function (von Mises mean for 2, 3, 5; latent Gaussian mean for 4).
  std::function<double(double)> latent_mean;
  /// Ground-truth mean angle at x, as an Angle.
  std::function<Angle(double)> truth;
  double sigma2_truth = 0.0;
};

/// Example metadata without data: size, truth and variance.
int example_size(int id);
std::function<double(double)> example_latent_mean(int id);
std::function<Angle(double)> example_truth(int id);
double example_sigma2_truth(int id);

Example gen_example(int id, std::uint64_t seed);

struct TruthPoint {
  double x;
  Angle theta;
};

/// T uniform test locations on (-1, 1) with their true mean angles.
std::vector<TruthPoint> truth_grid(const std::function<Angle(double)>& truth, std::size_t T,
                                   std::uint64_t seed);

}  // namespace agmm
