#include <agmm/em_parametric.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

namespace agmm {

Responsibilities e_step(const ParametricAgmm& model, const Dataset& data) {
  const Eigen::MatrixXd phi = model.basis().design(data);
  const Eigen::VectorXd mu = phi * model.beta();
  if (!mu.allFinite()) throw InvalidArgument("e_step: non-finite mean");
  const int K = model.K();
  const auto n = static_cast<Eigen::Index>(data.n());

  Eigen::MatrixXd psi(n, K);
  std::vector<double> logw(static_cast<std::size_t>(K));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double theta = data.theta(static_cast<std::size_t>(i));
    for (int k = 1; k <= K; ++k) {
      const double w = model.r()(k - 1);
      logw[static_cast<std::size_t>(k - 1)] =
          w > 0.0 ? std::log(w) + log_gaussian_pdf(theta, component_mean(mu(i), k), model.sigma2())
                  : -std::numeric_limits<double>::infinity();
    }
    const double norm = log_sum_exp(logw);
    for (int k = 0; k < K; ++k) psi(i, k) = std::exp(logw[static_cast<std::size_t>(k)] - norm);
    psi.row(i) /= psi.row(i).sum();
  }
  return Responsibilities(std::move(psi));
}

ParametricAgmm m_step(const Dataset& data, const Responsibilities& psi, const Basis& basis) {
  if (psi.n() != data.n()) throw InvalidArgument("m_step: responsibilities do not match dataset");
  const Eigen::MatrixXd phi = basis.design(data);
  const auto n = phi.rows();
  const auto q = phi.cols();
  const int K = psi.K();

  // Each row of psi sums to one, so the pooled objective
  //   sum_{i,k} psi_ik (theta_i + (2k+1) pi - phi_i' beta)^2
  // is minimised by ordinary least squares on the expected latent response.
  Eigen::VectorXd shift(K);
  for (int k = 1; k <= K; ++k) shift(k - 1) = (2.0 * k + 1.0) * kPi;
  Eigen::VectorXd expected_y = psi.psi() * shift;
  for (Eigen::Index i = 0; i < n; ++i) expected_y(i) += data.theta(static_cast<std::size_t>(i));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
  if (qr.rank() < q)
    throw SingularDesign("design matrix has rank " + std::to_string(qr.rank()) + " < q = " +
                         std::to_string(q));
  Eigen::VectorXd beta = qr.solve(expected_y);

  const Eigen::VectorXd fitted = phi * beta;
  double ss = 0.0, mass = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double base = data.theta(static_cast<std::size_t>(i)) - fitted(i);
    for (int k = 0; k < K; ++k) {
      const double w = psi.psi()(i, k);
      const double res = base + shift(k);
      ss += w * res * res;
      mass += w;
    }
  }
  const double sigma2 = std::max(ss / mass, kVarianceFloor);

  Eigen::VectorXd r = psi.psi().colwise().sum().transpose() / static_cast<double>(n);
  r /= r.sum();
  return ParametricAgmm(basis, std::move(beta), sigma2, std::move(r));
}

ParametricFit fit_em(const Dataset& data, const ParametricAgmm& init, const EmOptions& options) {
  if (!(options.tol > 0.0)) throw InvalidArgument("fit_em: tol must be positive");
  if (options.max_iter < 0) throw InvalidArgument("fit_em: max_iter must be >= 0");

  ParametricAgmm model = init;
  ParametricAgmm best = init;
  double current = mixture_loglik(model, data);
  double best_loglik = current;

  FitReport report;
  report.loglik_trace.push_back(current);
  for (int it = 1; it <= options.max_iter; ++it) {
    model = m_step(data, e_step(model, data), model.basis());
    const double next = mixture_loglik(model, data);
    report.loglik_trace.push_back(next);
    report.iterations = it;
    if (next > best_loglik) {
      best = model;
      best_loglik = next;
    }
    if (std::abs(next - current) < options.tol) {
      report.converged = true;
      break;
    }
    current = next;
  }
  const int df = static_cast<int>(best.basis().q()) + best.K();
  report.bic = bic(best_loglik, df, data.n());
  report.selected_K = best.K();
  return ParametricFit{std::move(best), std::move(report)};
}

ParametricFit fit_em(const Dataset& data, int K, const Basis& basis, const ParametricAgmm& init,
                     double tol, int max_iter) {
  if (K < 1) throw InvalidArgument("fit_em: K must be >= 1");
  if (init.K() != K) throw InvalidArgument("fit_em: initial model has a different K");
  if (init.basis().q() != basis.q()) throw InvalidArgument("fit_em: initial model has a different basis");
  return fit_em(data, init, EmOptions{tol, max_iter});
}

std::vector<ZAssignment> offset_candidates(const Dataset& data, int K, const ZAssignment* clustered) {
  if (K < 1) throw InvalidArgument("offset_candidates: K must be >= 1");
  std::vector<ZAssignment> out;
  auto push_unique = [&](ZAssignment z) {
    for (const auto& seen : out)
      if (seen.z == z.z) return;
    out.push_back(std::move(z));
  };
  const int found = clustered ? clustered->K() : 0;
  if (clustered) {
    if (K >= found) {
      for (int s = 0; s <= K - found; ++s) {
        ZAssignment z = *clustered;
        for (int& v : z.z) v += s;
        push_unique(std::move(z));
      }
    } else {
      for (int s = 0; s <= found - K; ++s) {
        ZAssignment z = *clustered;
        for (int& v : z.z) v = std::clamp(v - s, 1, K);
        push_unique(std::move(z));
      }
    }
  }
  if (!clustered || found < K) push_unique(quantile_split(data, K));
  return out;
}

std::vector<ParametricAgmm> starting_models(const Dataset& data, const Basis& basis, int K,
                                            const ZAssignment* clustered, double weight_smoothing) {
  std::vector<ParametricAgmm> out;
  for (const auto& z : offset_candidates(data, K, clustered)) {
    ParametricAgmm hard = m_step(data, Responsibilities::hard(z.z, K), basis);
    Eigen::VectorXd r = (1.0 - weight_smoothing) * hard.r().array() + weight_smoothing / K;
    r /= r.sum();
    out.emplace_back(basis, hard.beta(), hard.sigma2(), std::move(r));
  }
  return out;
}

Selection select_K(const Dataset& data, const Basis& basis, std::span<const int> K_range,
                   const SelectOptions& options) {
  if (K_range.empty()) throw InvalidArgument("select_K: K_range is empty");
  const std::set<int> Ks(K_range.begin(), K_range.end());
  if (*Ks.begin() < 1) throw InvalidArgument("select_K: every K must be >= 1");

  std::optional<ZAssignment> clustered;
  try {
    clustered = initial_offsets(data, options.init);
  } catch (const InitFailure&) {
    // quantile starts only
  }

  std::vector<CandidateScore> scores;
  std::optional<ParametricFit> best;
  for (int K : Ks) {
    CandidateScore score;
    score.K = K;
    try {
      std::optional<ParametricFit> fit_K;
      for (const auto& start :
           starting_models(data, basis, K, clustered ? &*clustered : nullptr, options.weight_smoothing)) {
        ParametricFit fit = fit_em(data, start, options.em);
        if (!fit_K || fit.report.final_loglik() > fit_K->report.final_loglik()) fit_K = std::move(fit);
      }
      if (!fit_K) throw FitError("no starting model");
      score.loglik = *std::max_element(fit_K->report.loglik_trace.begin(), fit_K->report.loglik_trace.end());
      score.bic = fit_K->report.bic;
      score.ok = true;
      if (!best || score.bic < best->report.bic) best = std::move(fit_K);
    } catch (const FitError& e) {
      score.message = e.what();
    }
    scores.push_back(std::move(score));
  }
  if (!best) {
    std::string why = scores.empty() ? "" : scores.front().message;
    throw FitError("select_K: no candidate K could be fitted: " + why);
  }
  const int best_K = best->model.K();
  best->report.candidates = scores;
  best->report.selected_K = best_K;
  return Selection{best_K, std::move(*best), std::move(scores)};
}

Angle predict_mean(const ParametricAgmm& model, std::span<const double> x) {
  return wrap_to_circle(model.mean(x));
}

}  // namespace agmm
