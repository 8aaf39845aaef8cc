#include <agmm/em_nonparametric.hpp>

#include <agmm/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>

namespace agmm {

Kernel Kernel::parse_shape(const std::string& name, double h) {
  if (name == "gaussian") return Kernel{Shape::gaussian, h};
  if (name == "triangular") return Kernel{Shape::triangular, h};
  throw InvalidArgument("unknown kernel '" + name + "' (expected gaussian or triangular)");
}

std::string Kernel::shape_name() const { return shape == Shape::gaussian ? "gaussian" : "triangular"; }

double kernel_weight(const Kernel& kernel, double d) {
  if (!(kernel.h > 0.0)) throw InvalidArgument("kernel bandwidth h must be positive");
  if (!(d >= 0.0)) throw InvalidArgument("kernel distance must be >= 0");
  const double u = d / kernel.h;
  switch (kernel.shape) {
    case Kernel::Shape::triangular: return std::max(0.0, 1.0 - u) / kernel.h;
    case Kernel::Shape::gaussian: break;
  }
  constexpr double kInvSqrtTwoPi = 0.39894228040143267794;
  return kInvSqrtTwoPi * std::exp(-0.5 * u * u) / kernel.h;
}

// ---------------------------------------------------------------------------

NonparametricAgmm::NonparametricAgmm(Eigen::MatrixXd grid, Eigen::VectorXd mu, Eigen::VectorXd sigma2,
                                     Eigen::MatrixXd r)
    : grid_(std::move(grid)), mu_(std::move(mu)), sigma2_(std::move(sigma2)), r_(std::move(r)) {
  const auto J = grid_.rows();
  if (mu_.size() != J || sigma2_.size() != J || r_.rows() != J)
    throw InvalidArgument("nonparametric model: grid, mu, sigma2 and r must have J rows");
  if (r_.cols() < 1) throw InvalidArgument("nonparametric model: K must be >= 1");
  if (J > 0 && grid_.cols() < 1) throw InvalidArgument("nonparametric model: grid dimension must be >= 1");
  if (!grid_.allFinite() || !mu_.allFinite()) throw InvalidArgument("nonparametric model: non-finite values");
  for (Eigen::Index j = 0; j < J; ++j) {
    if (!(sigma2_(j) > 0.0) || !std::isfinite(sigma2_(j)))
      throw InvalidArgument("nonparametric model: sigma2 must be positive at every grid point");
    double s = 0.0;
    for (Eigen::Index k = 0; k < r_.cols(); ++k) {
      if (!(r_(j, k) >= 0.0 && r_(j, k) <= 1.0)) throw InvalidArgument("nonparametric model: weight outside [0, 1]");
      s += r_(j, k);
    }
    if (std::abs(s - 1.0) > 1e-10) throw InvalidArgument("nonparametric model: weight row does not sum to 1");
  }
  if (J == 0) return;
  if (grid_.cols() == 1) {
    order_.resize(static_cast<std::size_t>(J));
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return grid_(static_cast<Eigen::Index>(a), 0) < grid_(static_cast<Eigen::Index>(b), 0);
    });
    for (std::size_t t = 1; t < order_.size(); ++t)
      if (grid_(static_cast<Eigen::Index>(order_[t]), 0) == grid_(static_cast<Eigen::Index>(order_[t - 1]), 0))
        throw InvalidArgument("nonparametric model: grid points must be distinct");
  } else {
    for (Eigen::Index a = 0; a < J; ++a)
      for (Eigen::Index b = a + 1; b < J; ++b)
        if (grid_.row(a) == grid_.row(b)) throw InvalidArgument("nonparametric model: grid points must be distinct");
  }
}

LocalValues NonparametricAgmm::at(std::size_t j) const {
  const auto jj = static_cast<Eigen::Index>(j);
  return LocalValues{mu_(jj), sigma2_(jj), r_.row(jj).transpose()};
}

LocalValues NonparametricAgmm::interpolate(std::span<const double> x) const {
  if (J() == 0) throw InvalidState("interpolate: model has an empty grid");
  if (x.size() != p()) throw InvalidArgument("interpolate: dimension mismatch");

  if (p() == 1) {
    const double v = x[0];
    auto value = [&](std::size_t t) { return grid_(static_cast<Eigen::Index>(order_[t]), 0); };
    if (v <= value(0)) return at(order_.front());
    if (v >= value(order_.size() - 1)) return at(order_.back());
    // first sorted position with grid > v; its predecessor has grid <= v
    std::size_t lo = 0, hi = order_.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (value(mid) > v) hi = mid;
      else lo = mid;
    }
    if (value(lo) == v) return at(order_[lo]);
    const double t = (v - value(lo)) / (value(hi) - value(lo));
    const LocalValues a = at(order_[lo]);
    const LocalValues b = at(order_[hi]);
    LocalValues out{(1.0 - t) * a.mu + t * b.mu, (1.0 - t) * a.sigma2 + t * b.sigma2,
                    (1.0 - t) * a.r + t * b.r};
    out.r /= out.r.sum();
    return out;
  }

  Eigen::Map<const Eigen::RowVectorXd> q(x.data(), static_cast<Eigen::Index>(x.size()));
  std::vector<std::pair<double, std::size_t>> dist(J());
  for (std::size_t j = 0; j < J(); ++j) {
    const double d = (grid_.row(static_cast<Eigen::Index>(j)) - q).norm();
    if (d == 0.0) return at(j);
    dist[j] = {d, j};
  }
  const std::size_t m = std::min(2 * p(), J());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m), dist.end());
  double wsum = 0.0;
  LocalValues out{0.0, 0.0, Eigen::VectorXd::Zero(K())};
  for (std::size_t t = 0; t < m; ++t) {
    const double w = 1.0 / dist[t].first;
    const LocalValues v = at(dist[t].second);
    out.mu += w * v.mu;
    out.sigma2 += w * v.sigma2;
    out.r += w * v.r;
    wsum += w;
  }
  out.mu /= wsum;
  out.sigma2 /= wsum;
  out.r /= out.r.sum();
  return out;
}

LocalValues interpolate(const NonparametricAgmm& model, std::span<const double> x) {
  return model.interpolate(x);
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd grid_all_points(const Dataset& data) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < data.x().rows(); ++i) {
    bool seen = false;
    for (Eigen::Index k : keep)
      if (data.x().row(k) == data.x().row(i)) {
        seen = true;
        break;
      }
    if (!seen) keep.push_back(i);
  }
  Eigen::MatrixXd grid(static_cast<Eigen::Index>(keep.size()), data.x().cols());
  for (std::size_t t = 0; t < keep.size(); ++t) grid.row(static_cast<Eigen::Index>(t)) = data.x().row(keep[t]);
  return grid;
}

Eigen::MatrixXd grid_uniform(const Dataset& data, std::size_t J) {
  if (data.p() != 1) throw InvalidArgument("uniform grids are only available for p = 1");
  if (J < 1) throw InvalidArgument("uniform grid needs J >= 1");
  const double lo = data.x().col(0).minCoeff();
  const double hi = data.x().col(0).maxCoeff();
  Eigen::MatrixXd grid(static_cast<Eigen::Index>(J), 1);
  if (J == 1 || lo == hi) {
    grid.resize(1, 1);
    grid(0, 0) = 0.5 * (lo + hi);
    return grid;
  }
  for (std::size_t j = 0; j < J; ++j)
    grid(static_cast<Eigen::Index>(j), 0) = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(J - 1);
  grid(static_cast<Eigen::Index>(J - 1), 0) = hi;
  return grid;
}

GridSpec GridSpec::parse(const std::string& text) {
  if (text == "all") return GridSpec{};
  const std::string prefix = "uniform:";
  if (text.rfind(prefix, 0) == 0) {
    std::size_t used = 0;
    long J = 0;
    try {
      J = std::stol(text.substr(prefix.size()), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() - prefix.size() || J < 1)
      throw InvalidArgument("bad grid '" + text + "' (expected all or uniform:J)");
    return GridSpec{Kind::uniform, static_cast<std::size_t>(J)};
  }
  throw InvalidArgument("bad grid '" + text + "' (expected all or uniform:J)");
}

Eigen::MatrixXd GridSpec::build(const Dataset& data) const {
  return kind == Kind::all ? grid_all_points(data) : grid_uniform(data, J);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<LocalValues> values_at_data(const NonparametricAgmm& model, const Dataset& data) {
  if (data.p() != model.p()) throw InvalidArgument("nonparametric model dimension does not match dataset");
  std::vector<LocalValues> out;
  out.reserve(data.n());
  Eigen::RowVectorXd row;
  for (Eigen::Index i = 0; i < data.x().rows(); ++i) {
    row = data.x().row(i);
    out.push_back(model.interpolate(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
  }
  return out;
}

void component_logs(const LocalValues& v, double theta, std::vector<double>& logw) {
  const int K = static_cast<int>(v.r.size());
  logw.resize(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    const double w = v.r(k - 1);
    logw[static_cast<std::size_t>(k - 1)] = w > 0.0
                                                ? std::log(w) + log_gaussian_pdf(theta, component_mean(v.mu, k), v.sigma2)
                                                : -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

double local_mixture_loglik(const NonparametricAgmm& model, const Dataset& data) {
  const auto values = values_at_data(model, data);
  std::vector<double> logw;
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    component_logs(values[i], data.theta(i), logw);
    total += log_sum_exp(logw);
  }
  return total;
}

Responsibilities local_e_step(const NonparametricAgmm& model, const Dataset& data) {
  const auto values = values_at_data(model, data);
  const int K = model.K();
  Eigen::MatrixXd psi(static_cast<Eigen::Index>(data.n()), K);
  std::vector<double> logw;
  for (std::size_t i = 0; i < data.n(); ++i) {
    component_logs(values[i], data.theta(i), logw);
    const double norm = log_sum_exp(logw);
    const auto ii = static_cast<Eigen::Index>(i);
    for (int k = 0; k < K; ++k) psi(ii, k) = std::exp(logw[static_cast<std::size_t>(k)] - norm);
    psi.row(ii) /= psi.row(ii).sum();
  }
  return Responsibilities(std::move(psi));
}

namespace {

// J-by-n matrix of K_h(||x_i - x^(j)||).
Eigen::MatrixXd kernel_matrix(const Dataset& data, const Eigen::MatrixXd& grid, const Kernel& kernel) {
  Eigen::MatrixXd w(grid.rows(), data.x().rows());
  for (Eigen::Index j = 0; j < grid.rows(); ++j)
    for (Eigen::Index i = 0; i < data.x().rows(); ++i)
      w(j, i) = kernel_weight(kernel, (data.x().row(i) - grid.row(j)).norm());
  return w;
}

NonparametricAgmm m_step_with_weights(const Dataset& data, const Responsibilities& psi, const Eigen::MatrixXd& grid,
                                      const Eigen::MatrixXd& weights) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto J = grid.rows();
  const int K = psi.K();

  Eigen::VectorXd shift(K);
  for (int k = 1; k <= K; ++k) shift(k - 1) = (2.0 * k + 1.0) * kPi;
  Eigen::VectorXd expected_y = psi.psi() * shift;
  Eigen::VectorXd theta(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    theta(i) = data.theta(static_cast<std::size_t>(i));
    expected_y(i) += theta(i);
  }

  Eigen::VectorXd mu(J), sigma2(J);
  Eigen::MatrixXd r(J, K);
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto w = weights.row(j);
    const double mass = w.sum();
    if (!(mass > 0.0)) throw IsolatedGridPoint(static_cast<std::size_t>(j));

    mu(j) = w.dot(expected_y) / mass;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w(i) == 0.0) continue;
      const double base = theta(i) - mu(j);
      double inner = 0.0;
      for (int k = 0; k < K; ++k) {
        const double res = base + shift(k);
        inner += psi.psi()(i, k) * res * res;
      }
      ss += w(i) * inner;
    }
    sigma2(j) = std::max(ss / mass, kVarianceFloor);
    r.row(j) = (w * psi.psi()) / mass;
    r.row(j) /= r.row(j).sum();
  }
  return NonparametricAgmm(grid, std::move(mu), std::move(sigma2), std::move(r));
}

void check_m_step_inputs(const Dataset& data, const Responsibilities& psi, const Eigen::MatrixXd& grid) {
  if (psi.n() != data.n()) throw InvalidArgument("local_m_step: responsibilities do not match dataset");
  if (grid.rows() < 1) throw InvalidArgument("local_m_step: grid is empty");
  if (static_cast<std::size_t>(grid.cols()) != data.p()) throw InvalidArgument("local_m_step: grid dimension mismatch");
}

}  // namespace

NonparametricAgmm local_m_step(const Dataset& data, const Responsibilities& psi, const Eigen::MatrixXd& grid,
                               const Kernel& kernel) {
  check_m_step_inputs(data, psi, grid);
  return m_step_with_weights(data, psi, grid, kernel_matrix(data, grid, kernel));
}

int local_degrees_of_freedom(const NonparametricAgmm& model) {
  return static_cast<int>(model.J()) + model.K();
}

NonparametricFit fit_local_em(const Dataset& data, const Kernel& kernel, const Eigen::MatrixXd& grid,
                              const NonparametricAgmm& init, const LocalEmOptions& options) {
  if (grid.rows() < 1) throw InvalidArgument("fit_local_em: grid is empty");
  if (!(options.tol > 0.0)) throw InvalidArgument("fit_local_em: tol must be positive");
  if (static_cast<std::size_t>(grid.cols()) != data.p()) throw InvalidArgument("fit_local_em: grid dimension mismatch");
  const Eigen::MatrixXd weights = kernel_matrix(data, grid, kernel);
  NonparametricAgmm model = init;
  double current = local_mixture_loglik(model, data);
  FitReport report;
  report.loglik_trace.push_back(current);
  for (int it = 1; it <= options.max_iter; ++it) {
    model = m_step_with_weights(data, local_e_step(model, data), grid, weights);
    const double next = local_mixture_loglik(model, data);
    report.loglik_trace.push_back(next);
    report.iterations = it;
    if (std::abs(next - current) < options.tol * std::max(1.0, std::abs(next))) {
      report.converged = true;
      break;
    }
    current = next;
  }
  double worst = 0.0;
  for (std::size_t s = 1; s < report.loglik_trace.size(); ++s)
    worst = std::max(worst, report.loglik_trace[s - 1] - report.loglik_trace[s]);
  report.bic = bic(report.final_loglik(), local_degrees_of_freedom(model), data.n());
  report.selected_K = model.K();
  report.selected_h = kernel.h;
  return NonparametricFit{std::move(model), std::move(report), worst};
}

NonparametricFit fit_local_em(const Dataset& data, int K, const Kernel& kernel, const Eigen::MatrixXd& grid,
                              const NonparametricAgmm& init, double tol, int max_iter) {
  if (K < 1 || init.K() != K) throw InvalidArgument("fit_local_em: initial model has a different K");
  return fit_local_em(data, kernel, grid, init, LocalEmOptions{tol, max_iter});
}

NonparametricFit fit_local_em_auto(const Dataset& data, int K, const Kernel& kernel, const Eigen::MatrixXd& grid,
                                   const ZAssignment* clustered, const LocalEmOptions& options) {
  constexpr double kWeightSmoothing = 1e-3;
  if (grid.rows() < 1) throw InvalidArgument("fit_local_em: grid is empty");
  if (static_cast<std::size_t>(grid.cols()) != data.p()) throw InvalidArgument("fit_local_em: grid dimension mismatch");
  const Eigen::MatrixXd weights = kernel_matrix(data, grid, kernel);
  std::optional<NonparametricFit> best;
  std::string last_error = "no starting point";
  for (const auto& z : offset_candidates(data, K, clustered)) {
    try {
      const NonparametricAgmm hard = m_step_with_weights(data, Responsibilities::hard(z.z, K), grid, weights);
      Eigen::MatrixXd r = (1.0 - kWeightSmoothing) * hard.r().array() + kWeightSmoothing / K;
      for (Eigen::Index j = 0; j < r.rows(); ++j) r.row(j) /= r.row(j).sum();
      NonparametricAgmm start(grid, hard.mu(), hard.sigma2(), std::move(r));
      NonparametricFit fit = fit_local_em(data, kernel, grid, start, options);
      if (!best || fit.report.final_loglik() > best->report.final_loglik()) best = std::move(fit);
    } catch (const FitError& e) {
      last_error = e.what();
    }
  }
  if (!best) throw FitError("kernel EM failed for K = " + std::to_string(K) + ": " + last_error);
  return std::move(*best);
}

// ---------------------------------------------------------------------------

Angle predict_mean(const NonparametricAgmm& model, std::span<const double> x) {
  return wrap_to_circle(model.interpolate(x).mu);
}

std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("cross-validation needs at least 2 folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold(n);
  for (std::size_t t = 0; t < n; ++t) fold[perm[t]] = static_cast<int>(t % static_cast<std::size_t>(folds));
  return fold;
}

namespace {

std::optional<ZAssignment> try_offsets(const Dataset& data, const InitOptions& init) {
  try {
    return initial_offsets(data, init);
  } catch (const InitFailure&) {
    return std::nullopt;
  }
}

}  // namespace

TuneResult tune(const Dataset& data, std::span<const int> K_range, std::span<const double> h_range, int folds,
                const TuneOptions& options) {
  if (K_range.empty() || h_range.empty()) throw InvalidArgument("tune: K and h ranges must be non-empty");
  if (folds < 2) throw InvalidArgument("tune: folds must be >= 2");
  const std::set<int> Ks(K_range.begin(), K_range.end());
  const std::set<double> hs(h_range.begin(), h_range.end());
  if (*Ks.begin() < 1) throw InvalidArgument("tune: every K must be >= 1");
  if (!(*hs.begin() > 0.0)) throw InvalidArgument("tune: every h must be positive");

  TuneResult result;
  const auto clustered = try_offsets(data, options.init);
  const Eigen::MatrixXd grid = options.grid.build(data);

  // Stage 1: K by BIC.  K ascending, h descending, strict improvement only.
  double best_bic = std::numeric_limits<double>::infinity();
  for (int K : Ks) {
    for (auto h = hs.rbegin(); h != hs.rend(); ++h) {
      CandidateScore score;
      score.K = K;
      score.h = *h;
      try {
        const auto fit = fit_local_em_auto(data, K, Kernel{options.shape, *h}, grid,
                                           clustered ? &*clustered : nullptr, options.em);
        score.loglik = fit.report.final_loglik();
        score.bic = fit.report.bic;
        score.ok = true;
        if (score.bic < best_bic) {
          best_bic = score.bic;
          result.K = K;
          result.h = *h;
        }
      } catch (const FitError& e) {
        score.message = e.what();
      }
      result.bic_scores.push_back(std::move(score));
    }
  }
  if (result.K == 0) throw FitError("tune: no (K, h) cell could be fitted");
  if (hs.size() == 1) return result;

  // Stage 2: h by cross-validated held-out MCE with K fixed.
  const auto fold = fold_assignment(data.n(), folds, options.seed);
  double best_cv = std::numeric_limits<double>::infinity();
  for (auto h = hs.rbegin(); h != hs.rend(); ++h) {
    double total = 0.0;
    bool ok = true;
    for (int f = 0; f < folds && ok; ++f) {
      std::vector<std::size_t> train, test;
      for (std::size_t i = 0; i < data.n(); ++i) (fold[i] == f ? test : train).push_back(i);
      if (train.empty() || test.empty()) continue;
      try {
        const Dataset tr = data.subset(train);
        const auto z = try_offsets(tr, options.init);
        const auto fit = fit_local_em_auto(tr, result.K, Kernel{options.shape, *h}, options.grid.build(tr),
                                           z ? &*z : nullptr, options.em);
        std::vector<double> truth, est;
        Eigen::RowVectorXd row;
        for (std::size_t i : test) {
          row = data.x().row(static_cast<Eigen::Index>(i));
          truth.push_back(data.theta(i));
          est.push_back(predict_mean(fit.model, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())))
                            .value());
        }
        total += mean_circular_error(truth, est);
      } catch (const FitError&) {
        ok = false;
      }
    }
    const double score = ok ? total / folds : std::numeric_limits<double>::infinity();
    result.cv_scores.emplace_back(*h, score);
    if (score < best_cv) {
      best_cv = score;
      result.h = *h;
    }
  }
  return result;
}

}  // namespace agmm
