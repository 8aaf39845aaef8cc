#include <agmm/core.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace agmm {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be finite");
}

}  // namespace

Angle Angle::from_linear(double y) {
  require_finite(y, "wrap_to_circle input");
  double r = std::fmod(y, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // r + 2pi can round up to exactly 2pi for tiny negative r
  if (r >= kTwoPi) r = 0.0;
  return Angle(r - kPi);
}

Angle Angle::principal(double a) {
  require_finite(a, "angle");
  if (a >= -kPi && a < kPi) return Angle(a);
  double r = std::fmod(a + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  double v = r - kPi;
  if (v >= kPi) v = -kPi;
  return Angle(v);
}

Angle wrap_to_circle(double y) { return Angle::from_linear(y); }

double unwrap(Angle theta, long z) {
  return theta.value() + 2.0 * static_cast<double>(z) * kPi + kPi;
}

double component_mean(double mu, int k) { return mu - (2.0 * k + 1.0) * kPi; }

// ---------------------------------------------------------------------------

Dataset::Dataset(Eigen::MatrixXd x, std::vector<Angle> thetas)
    : x_(std::move(x)), thetas_(std::move(thetas)) {
  if (thetas_.empty()) throw InvalidArgument("dataset must contain at least one observation");
  if (static_cast<std::size_t>(x_.rows()) != thetas_.size())
    throw InvalidArgument("dataset: " + std::to_string(x_.rows()) + " predictor rows but " +
                          std::to_string(thetas_.size()) + " responses");
  if (x_.cols() < 1) throw InvalidArgument("dataset: predictor dimension must be >= 1");
  if (!x_.allFinite()) throw InvalidArgument("dataset: non-finite predictor");
}

Dataset Dataset::from_radians(Eigen::MatrixXd x, std::span<const double> thetas) {
  std::vector<Angle> a;
  a.reserve(thetas.size());
  for (double t : thetas) a.push_back(Angle::principal(t));
  return Dataset(std::move(x), std::move(a));
}

Dataset Dataset::from_radians(std::span<const double> x, std::span<const double> thetas) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
  return from_radians(std::move(m), thetas);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), x_.cols());
  std::vector<Angle> t;
  t.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = x_.row(static_cast<Eigen::Index>(rows[r]));
    t.push_back(thetas_.at(rows[r]));
  }
  return Dataset(std::move(x), std::move(t));
}

// ---------------------------------------------------------------------------

Basis Basis::polynomial(int degree, std::size_t p) {
  if (degree < 0) throw InvalidArgument("polynomial degree must be >= 0");
  if (p < 1) throw InvalidArgument("basis input dimension must be >= 1");
  Basis b;
  b.kind_ = Kind::polynomial;
  b.degree_ = degree;
  b.p_ = p;
  return b;
}

Basis Basis::custom(std::vector<Function> functions, std::size_t p) {
  if (functions.empty()) throw InvalidArgument("custom basis needs at least one function");
  if (p < 1) throw InvalidArgument("basis input dimension must be >= 1");
  Basis b;
  b.kind_ = Kind::custom;
  b.degree_ = -1;
  b.p_ = p;
  b.functions_ = std::move(functions);
  return b;
}

std::size_t Basis::q() const noexcept {
  if (kind_ == Kind::custom) return functions_.size();
  return 1 + p_ * static_cast<std::size_t>(degree_);
}

Eigen::VectorXd Basis::expand(std::span<const double> x) const {
  if (x.size() != p_)
    throw InvalidArgument("basis expects a " + std::to_string(p_) + "-vector, got " +
                          std::to_string(x.size()));
  Eigen::VectorXd phi(static_cast<Eigen::Index>(q()));
  if (kind_ == Kind::custom) {
    for (std::size_t j = 0; j < functions_.size(); ++j)
      phi(static_cast<Eigen::Index>(j)) = functions_[j](x);
    return phi;
  }
  Eigen::Index col = 0;
  phi(col++) = 1.0;
  for (std::size_t d = 0; d < p_; ++d) {
    double power = 1.0;
    for (int e = 1; e <= degree_; ++e) {
      power *= x[d];
      phi(col++) = power;
    }
  }
  return phi;
}

Eigen::VectorXd Basis::expand(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  Eigen::RowVectorXd copy = x;
  return expand(std::span<const double>(copy.data(), static_cast<std::size_t>(copy.size())));
}

Eigen::MatrixXd Basis::design(const Dataset& data) const {
  if (data.p() != p_) throw InvalidArgument("basis dimension does not match dataset");
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(data.n()), static_cast<Eigen::Index>(q()));
  for (Eigen::Index i = 0; i < phi.rows(); ++i) phi.row(i) = expand(data.x().row(i)).transpose();
  return phi;
}

Eigen::VectorXd expand_basis(const Basis& basis, std::span<const double> x) {
  return basis.expand(x);
}

// ---------------------------------------------------------------------------

ParametricAgmm::ParametricAgmm(Basis basis, Eigen::VectorXd beta, double sigma2,
                               Eigen::VectorXd r)
    : basis_(std::move(basis)), beta_(std::move(beta)), sigma2_(sigma2), r_(std::move(r)) {
  if (static_cast<std::size_t>(beta_.size()) != basis_.q())
    throw InvalidArgument("beta has length " + std::to_string(beta_.size()) + ", basis has q = " +
                          std::to_string(basis_.q()));
  if (!beta_.allFinite()) throw InvalidArgument("beta must be finite");
  if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) throw InvalidArgument("sigma2 must be positive");
  if (r_.size() < 1) throw InvalidArgument("mixture needs K >= 1 components");
  for (double w : r_)
    if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument("mixture weights must lie in [0, 1]");
  if (std::abs(r_.sum() - 1.0) > 1e-12) throw InvalidArgument("mixture weights must sum to 1");
}

double ParametricAgmm::mean(std::span<const double> x) const {
  return basis_.expand(x).dot(beta_);
}

// ---------------------------------------------------------------------------

Responsibilities::Responsibilities(Eigen::MatrixXd psi) : psi_(std::move(psi)) {
  if (psi_.cols() < 1) throw InvalidArgument("responsibilities need K >= 1 columns");
  for (Eigen::Index i = 0; i < psi_.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < psi_.cols(); ++k) {
      double v = psi_(i, k);
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("responsibility outside [0, 1]");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-10)
      throw InvalidArgument("responsibility row " + std::to_string(i) + " does not sum to 1");
  }
}

Responsibilities Responsibilities::hard(std::span<const int> z, int K) {
  if (K < 1) throw InvalidArgument("K must be >= 1");
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(z.size()), K);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] < 1 || z[i] > K)
      throw InvalidArgument("label " + std::to_string(z[i]) + " outside 1.." + std::to_string(K));
    psi(static_cast<Eigen::Index>(i), z[i] - 1) = 1.0;
  }
  return Responsibilities(std::move(psi));
}

// ---------------------------------------------------------------------------

double log_gaussian_pdf(double theta, double mu, double sigma2) {
  if (!(sigma2 > 0.0)) throw InvalidArgument("gaussian variance must be positive");
  const double d = theta - mu;
  return -0.5 * (kLogTwoPi + std::log(sigma2)) - 0.5 * d * d / sigma2;
}

double gaussian_pdf(double theta, double mu, double sigma2) {
  return std::exp(log_gaussian_pdf(theta, mu, sigma2));
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double a : v) m = std::max(m, a);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double a : v) s += std::exp(a - m);
  return m + std::log(s);
}

double mixture_loglik(const ParametricAgmm& model, const Dataset& data) {
  if (model.sigma2() < kDegenerateVariance)
    throw DegenerateVariance("sigma2 = " + std::to_string(model.sigma2()) + " is degenerate");
  const Eigen::MatrixXd phi = model.basis().design(data);
  const Eigen::VectorXd mu = phi * model.beta();
  const int K = model.K();
  std::vector<double> terms(static_cast<std::size_t>(K));
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (int k = 1; k <= K; ++k) {
      const double w = model.r()(k - 1);
      terms[static_cast<std::size_t>(k - 1)] =
          w > 0.0 ? std::log(w) + log_gaussian_pdf(data.theta(i),
                                                   component_mean(mu(static_cast<Eigen::Index>(i)), k),
                                                   model.sigma2())
                  : -std::numeric_limits<double>::infinity();
    }
    total += log_sum_exp(terms);
  }
  return total;
}

double mean_circular_error(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size())
    throw InvalidArgument("mean_circular_error: length mismatch (" + std::to_string(truth.size()) +
                          " vs " + std::to_string(estimate.size()) + ")");
  if (truth.empty()) throw InvalidArgument("mean_circular_error: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(std::sin(0.5 * (truth[i] - estimate[i])));
  return s / static_cast<double>(truth.size());
}

double mean_circular_error(std::span<const Angle> truth, std::span<const Angle> estimate) {
  std::vector<double> a(truth.size()), b(estimate.size());
  std::transform(truth.begin(), truth.end(), a.begin(), [](Angle t) { return t.value(); });
  std::transform(estimate.begin(), estimate.end(), b.begin(), [](Angle t) { return t.value(); });
  return mean_circular_error(std::span<const double>(a), std::span<const double>(b));
}

double bic(double loglik, int df, std::size_t n) {
  return -2.0 * loglik + std::log(static_cast<double>(n)) * df;
}

}  // namespace agmm
