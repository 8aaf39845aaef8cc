#pragma once

// Conjugate Gibbs sampler for the parametric model:
//   beta ~ N(0, s0 I),  sigma2 ~ IG(alpha, lambda),  r ~ Dirichlet(gamma),
//   s0 ~ IG(alpha0, lambda0),
// with the latent offsets Z sampled explicitly.

#include <agmm/core.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace agmm {

struct Priors {
  double alpha0 = 1.0;   // hyperprior on the beta prior variance
  double lambda0 = 1.0;
  double alpha = 1.0;    // prior on sigma2
  double lambda = 1.0;
  Eigen::VectorXd gamma;  // Dirichlet concentration; empty means all ones

  /// Holds sigma2 at this value instead of sampling it.
  std::optional<double> fixed_sigma2;

  Eigen::VectorXd concentration(int K) const;
  void validate(int K) const;
};

struct GibbsDraw {
  Eigen::VectorXd beta;
  double sigma2 = 0.0;
  Eigen::VectorXd r;
  std::vector<int> z;  // 1..K
  double sigma0_2 = 0.0;
};

struct GibbsTrace {
  std::vector<GibbsDraw> draws;  // one per iteration, burn-in included
  int burn_in = 0;
  int total = 0;
};

/// Runs `total` sweeps; draws[t] is the state after sweep t + 1.  The chain
/// starts from `init` when given, otherwise from the clustering initialiser.
GibbsTrace gibbs_sample(const Dataset& data, const Basis& basis, int K, const Priors& priors, int total,
                        int burn_in, std::uint64_t seed, const std::optional<ParametricAgmm>& init = std::nullopt);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct PosteriorSummary {
  Eigen::VectorXd beta_mean;
  Eigen::VectorXd beta_sd;
  double sigma2_mean = 0.0;
  Eigen::VectorXd r_mean;
  std::vector<Interval> beta_ci;  // 95%
  Interval sigma2_ci;
  std::vector<Interval> r_ci;
  std::size_t retained = 0;

  /// Posterior-mean model for prediction.
  ParametricAgmm model(const Basis& basis) const;
};

/// Means, standard deviations and 2.5/97.5% empirical quantiles over the
/// post-burn-in draws.  Needs at least 100 retained draws.
PosteriorSummary posterior_summary(const GibbsTrace& trace);

/// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> values, double prob);

}  // namespace agmm
