#pragma once

// Domain types and likelihood primitives shared by every fitter.
//
// A circular response theta in [-pi, pi) is modelled as the wrapped value of
// a latent linear response y:  theta = (y mod 2pi) - pi,  y = theta + 2 z pi + pi.
// With Z in {1..K} the conditional law of theta is a K-component Gaussian
// mixture whose means are tied copies  mu(x) - (2k+1) pi  of one function.

#include <agmm/errors.hpp>

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace agmm {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// An angle in radians, always in [-pi, pi).
class Angle {
 public:
  Angle() = default;

  /// (y mod 2pi) - pi with floored modulo.
  static Angle from_linear(double y);
  /// Principal value of an angle: a + 2 pi m for the m that lands in [-pi, pi).
  static Angle principal(double a);

  double value() const noexcept { return value_; }
  explicit operator double() const noexcept { return value_; }

  friend bool operator==(Angle, Angle) = default;

 private:
  explicit Angle(double v) noexcept : value_(v) {}
  double value_ = -kPi;
};

Angle wrap_to_circle(double y);
double unwrap(Angle theta, long z);
/// Mean of component k for a latent mean mu: mu - (2k + 1) pi.
double component_mean(double mu, int k);

/// Paired predictors and angular responses.
class Dataset {
 public:
  Dataset() = default;
  /// x is n-by-p; throws InvalidArgument on shape mismatch, n == 0 or
  /// non-finite entries.
  Dataset(Eigen::MatrixXd x, std::vector<Angle> thetas);

  /// Builds a dataset from raw radians, mapping each to its principal value.
  static Dataset from_radians(Eigen::MatrixXd x, std::span<const double> thetas);
  static Dataset from_radians(std::span<const double> x, std::span<const double> thetas);

  std::size_t n() const noexcept { return thetas_.size(); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(x_.cols()); }
  const Eigen::MatrixXd& x() const noexcept { return x_; }
  double theta(std::size_t i) const { return thetas_[i].value(); }
  const std::vector<Angle>& thetas() const noexcept { return thetas_; }

  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  Eigen::MatrixXd x_;
  std::vector<Angle> thetas_;
};

/// Feature map phi: R^p -> R^q.
///
/// The polynomial kind of degree d emits (1, x_1, ..., x_1^d, x_2, ..., x_p^d),
/// without cross terms, so q = 1 + p d.  A custom basis wraps user functions.
class Basis {
 public:
  enum class Kind { polynomial, custom };
  using Function = std::function<double(std::span<const double>)>;

  static Basis polynomial(int degree, std::size_t p = 1);
  static Basis custom(std::vector<Function> functions, std::size_t p);

  Kind kind() const noexcept { return kind_; }
  int degree() const noexcept { return degree_; }
  std::size_t p() const noexcept { return p_; }
  std::size_t q() const noexcept;

  Eigen::VectorXd expand(std::span<const double> x) const;
  Eigen::VectorXd expand(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  /// n-by-q design matrix for the rows of data.
  Eigen::MatrixXd design(const Dataset& data) const;

 private:
  Kind kind_ = Kind::polynomial;
  int degree_ = 1;
  std::size_t p_ = 1;
  std::vector<Function> functions_;
};

Eigen::VectorXd expand_basis(const Basis& basis, std::span<const double> x);

/// Tied-mean mixture with a parametric mean phi(x)' beta, one shared variance
/// and constant weights.
class ParametricAgmm {
 public:
  ParametricAgmm(Basis basis, Eigen::VectorXd beta, double sigma2, Eigen::VectorXd r);

  const Basis& basis() const noexcept { return basis_; }
  const Eigen::VectorXd& beta() const noexcept { return beta_; }
  double sigma2() const noexcept { return sigma2_; }
  const Eigen::VectorXd& r() const noexcept { return r_; }
  int K() const noexcept { return static_cast<int>(r_.size()); }

  /// Latent mean phi(x)' beta.
  double mean(std::span<const double> x) const;

 private:
  Basis basis_;
  Eigen::VectorXd beta_;
  double sigma2_;
  Eigen::VectorXd r_;
};

/// n-by-K matrix of posterior component memberships.
class Responsibilities {
 public:
  explicit Responsibilities(Eigen::MatrixXd psi);
  /// Indicator responsibilities: psi(i, z_i - 1) = 1.  z values in 1..K.
  static Responsibilities hard(std::span<const int> z, int K);

  const Eigen::MatrixXd& psi() const noexcept { return psi_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(psi_.rows()); }
  int K() const noexcept { return static_cast<int>(psi_.cols()); }
  double operator()(std::size_t i, int k) const { return psi_(static_cast<Eigen::Index>(i), k); }

 private:
  Eigen::MatrixXd psi_;
};

/// One entry of a model-selection sweep.
struct CandidateScore {
  int K = 0;
  std::optional<double> h;
  double loglik = 0.0;
  double bic = 0.0;
  bool ok = false;
  std::string message;
};

struct FitReport {
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  double bic = 0.0;
  int selected_K = 0;
  std::optional<double> selected_h;
  std::vector<CandidateScore> candidates;

  double final_loglik() const { return loglik_trace.empty() ? 0.0 : loglik_trace.back(); }
};

inline constexpr double kVarianceFloor = 1e-8;
inline constexpr double kDegenerateVariance = 1e-12;

double gaussian_pdf(double theta, double mu, double sigma2);
double log_gaussian_pdf(double theta, double mu, double sigma2);

/// log(sum exp(v)), robust to -inf entries and underflow.
double log_sum_exp(std::span<const double> v);

double mixture_loglik(const ParametricAgmm& model, const Dataset& data);

/// (1/T) sum |sin((a_i - b_i) / 2)|, in [0, 1].
double mean_circular_error(std::span<const Angle> truth, std::span<const Angle> estimate);
double mean_circular_error(std::span<const double> truth, std::span<const double> estimate);

/// -2 loglik + ln(n) df.
double bic(double loglik, int df, std::size_t n);

}  // namespace agmm
