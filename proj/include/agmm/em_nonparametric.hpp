#pragma once

// Kernel-local EM: mu(.), sigma2(.) and r_k(.) are local constants at J grid
// points, estimated by maximising kernel-weighted local likelihoods and read
// back at arbitrary x by interpolation.

#include <agmm/core.hpp>
#include <agmm/em_parametric.hpp>
#include <agmm/init.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace agmm {

struct Kernel {
  enum class Shape { gaussian, triangular };

  Shape shape = Shape::gaussian;
  double h = 1.0;

  static Kernel parse_shape(const std::string& name, double h);
  std::string shape_name() const;
};

/// K_h(d) = K(d / h) / h.
double kernel_weight(const Kernel& kernel, double d);

struct LocalValues {
  double mu = 0.0;
  double sigma2 = 1.0;
  Eigen::VectorXd r;
};

class NonparametricAgmm {
 public:
  /// grid is J-by-p, r is J-by-K.
  NonparametricAgmm(Eigen::MatrixXd grid, Eigen::VectorXd mu, Eigen::VectorXd sigma2, Eigen::MatrixXd r);

  const Eigen::MatrixXd& grid() const noexcept { return grid_; }
  const Eigen::VectorXd& mu() const noexcept { return mu_; }
  const Eigen::VectorXd& sigma2() const noexcept { return sigma2_; }
  const Eigen::MatrixXd& r() const noexcept { return r_; }
  std::size_t J() const noexcept { return static_cast<std::size_t>(grid_.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(grid_.cols()); }
  int K() const noexcept { return static_cast<int>(r_.cols()); }

  /// Piecewise-linear for p = 1 (constant beyond the ends); inverse-distance
  /// weighting over the min(2p, J) nearest grid points otherwise.
  LocalValues interpolate(std::span<const double> x) const;

 private:
  LocalValues at(std::size_t j) const;

  Eigen::MatrixXd grid_;
  Eigen::VectorXd mu_;
  Eigen::VectorXd sigma2_;
  Eigen::MatrixXd r_;
  std::vector<std::size_t> order_;  // grid rows sorted by x when p == 1
};

LocalValues interpolate(const NonparametricAgmm& model, std::span<const double> x);

/// Grid builders.  all_points de-duplicates repeated predictor rows.
Eigen::MatrixXd grid_all_points(const Dataset& data);
Eigen::MatrixXd grid_uniform(const Dataset& data, std::size_t J);

/// Global mixture log-likelihood with interpolated local constants.
double local_mixture_loglik(const NonparametricAgmm& model, const Dataset& data);

Responsibilities local_e_step(const NonparametricAgmm& model, const Dataset& data);

NonparametricAgmm local_m_step(const Dataset& data, const Responsibilities& psi,
                               const Eigen::MatrixXd& grid, const Kernel& kernel);

struct LocalEmOptions {
  // Stop when |delta loglik| < tol * max(1, |loglik|).  The local updates do
  // not maximise the global likelihood, which keeps drifting by a small
  // relative amount long after the fit has settled.
  double tol = 1e-5;
  int max_iter = 200;
};

struct NonparametricFit {
  NonparametricAgmm model;
  FitReport report;
  // Largest single-step fall of the global log-likelihood over the trace,
  // 0 when it never fell.  Monitored only: the local updates can lower it.
  double max_loglik_decrease = 0.0;
};

/// BIC for the kernel fit uses df = J + K (grid size stands in for q).
int local_degrees_of_freedom(const NonparametricAgmm& model);

NonparametricFit fit_local_em(const Dataset& data, const Kernel& kernel, const Eigen::MatrixXd& grid,
                              const NonparametricAgmm& init, const LocalEmOptions& options = {});
NonparametricFit fit_local_em(const Dataset& data, int K, const Kernel& kernel, const Eigen::MatrixXd& grid,
                              const NonparametricAgmm& init, double tol, int max_iter);

/// Best-likelihood kernel fit for a fixed K over the shared offset candidates.
NonparametricFit fit_local_em_auto(const Dataset& data, int K, const Kernel& kernel, const Eigen::MatrixXd& grid,
                                   const ZAssignment* clustered, const LocalEmOptions& options = {});

struct GridSpec {
  enum class Kind { all, uniform };
  Kind kind = Kind::all;
  std::size_t J = 0;

  static GridSpec parse(const std::string& text);  // "all" | "uniform:J"
  Eigen::MatrixXd build(const Dataset& data) const;
};

struct TuneOptions {
  Kernel::Shape shape = Kernel::Shape::gaussian;
  GridSpec grid;
  LocalEmOptions em;
  InitOptions init;
  std::uint64_t seed = 0;  // fold assignment
};

struct TuneResult {
  int K = 0;
  double h = 0.0;
  std::vector<CandidateScore> bic_scores;          // stage 1, one per (K, h)
  std::vector<std::pair<double, double>> cv_scores;  // stage 2, (h, mean held-out MCE)
};

/// Stage 1: BIC over the (K, h) grid fixes K.  Stage 2: folds-fold CV of
/// held-out MCE picks h.  Ties go to smaller K, then larger h.
TuneResult tune(const Dataset& data, std::span<const int> K_range, std::span<const double> h_range, int folds,
                const TuneOptions& options = {});

Angle predict_mean(const NonparametricAgmm& model, std::span<const double> x);

/// Fold index per observation; balanced, shuffled with the seed.
std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed);

}  // namespace agmm
