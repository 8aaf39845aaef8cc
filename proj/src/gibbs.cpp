#include <agmm/gibbs.hpp>

#include <agmm/em_parametric.hpp>
#include <agmm/init.hpp>
#include <agmm/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace agmm {

Eigen::VectorXd Priors::concentration(int K) const {
  if (gamma.size() == 0) return Eigen::VectorXd::Ones(K);
  return gamma;
}

void Priors::validate(int K) const {
  if (K < 1) throw InvalidArgument("gibbs: K must be >= 1");
  if (!(alpha0 > 0.0 && lambda0 > 0.0 && alpha > 0.0 && lambda > 0.0))
    throw InvalidArgument("gibbs: hyperparameters must be positive");
  if (gamma.size() != 0) {
    if (gamma.size() != K) throw InvalidArgument("gibbs: Dirichlet concentration must have length K");
    if (!(gamma.array() > 0.0).all()) throw InvalidArgument("gibbs: Dirichlet concentration must be positive");
  }
  if (fixed_sigma2 && !(*fixed_sigma2 > 0.0)) throw InvalidArgument("gibbs: fixed sigma2 must be positive");
}

namespace {

double draw_inverse_gamma(Rng& rng, double shape, double scale) {
  std::gamma_distribution<double> g(shape, 1.0);
  return scale / g(rng);
}

Eigen::VectorXd draw_dirichlet(Rng& rng, const Eigen::VectorXd& a) {
  Eigen::VectorXd out(a.size());
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    std::gamma_distribution<double> g(a(k), 1.0);
    out(k) = g(rng);
  }
  const double s = out.sum();
  if (!(s > 0.0)) {
    // every gamma draw underflowed; fall back to the mean
    return a / a.sum();
  }
  return out / s;
}

ParametricAgmm default_start(const Dataset& data, const Basis& basis, int K) {
  std::optional<ZAssignment> z;
  try {
    z = initial_offsets(data);
  } catch (const InitFailure&) {
  }
  const auto starts = starting_models(data, basis, K, z ? &*z : nullptr, 1e-3);
  const ParametricAgmm* best = nullptr;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const double ll = mixture_loglik(s, data);
    if (!best || ll > best_ll) {
      best = &s;
      best_ll = ll;
    }
  }
  return *best;
}

}  // namespace

GibbsTrace gibbs_sample(const Dataset& data, const Basis& basis, int K, const Priors& priors, int total, int burn_in,
                        std::uint64_t seed, const std::optional<ParametricAgmm>& init) {
  priors.validate(K);
  if (burn_in < 0 || total <= burn_in) throw InvalidArgument("gibbs: need total > burn_in >= 0");
  if (init && (init->K() != K || init->basis().q() != basis.q()))
    throw InvalidArgument("gibbs: initial model does not match K or basis");

  const Eigen::MatrixXd phi = basis.design(data);
  const Eigen::MatrixXd gram = phi.transpose() * phi;
  const auto n = phi.rows();
  const auto q = phi.cols();
  const Eigen::VectorXd gamma = priors.concentration(K);

  const ParametricAgmm start = init ? *init : default_start(data, basis, K);
  Eigen::VectorXd beta = start.beta();
  double sigma2 = priors.fixed_sigma2.value_or(start.sigma2());
  Eigen::VectorXd r = start.r();
  double sigma0_2 = std::max(beta.squaredNorm() / static_cast<double>(q), 1.0);
  std::vector<int> z(static_cast<std::size_t>(n), 1);

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> logp(static_cast<std::size_t>(K));

  GibbsTrace trace;
  trace.burn_in = burn_in;
  trace.total = total;
  trace.draws.reserve(static_cast<std::size_t>(total));
  Eigen::VectorXd y(n);
  for (int sweep = 0; sweep < total; ++sweep) {
    // Z | beta, sigma2, r
    const Eigen::VectorXd mu = phi * beta;
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double theta = data.theta(static_cast<std::size_t>(i));
      for (int k = 1; k <= K; ++k)
        logp[static_cast<std::size_t>(k - 1)] =
            r(k - 1) > 0.0 ? std::log(r(k - 1)) + log_gaussian_pdf(theta, component_mean(mu(i), k), sigma2)
                           : -std::numeric_limits<double>::infinity();
      const double norm = log_sum_exp(logp);
      const double u = unif(rng);
      double acc = 0.0;
      int pick = K;
      for (int k = 1; k <= K; ++k) {
        acc += std::exp(logp[static_cast<std::size_t>(k - 1)] - norm);
        if (u < acc) {
          pick = k;
          break;
        }
      }
      z[static_cast<std::size_t>(i)] = pick;
      counts(pick - 1) += 1.0;
      y(i) = theta + (2.0 * pick + 1.0) * kPi;
    }

    // beta | Z, sigma2, sigma0_2
    Eigen::MatrixXd precision = gram / sigma2;
    precision.diagonal().array() += 1.0 / sigma0_2;
    const Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw SingularDesign("gibbs: posterior precision is not positive definite");
    const Eigen::VectorXd mean = llt.solve(phi.transpose() * y / sigma2);
    Eigen::VectorXd eps(q);
    for (Eigen::Index j = 0; j < q; ++j) eps(j) = normal(rng);
    beta = mean + llt.matrixU().solve(eps);

    // sigma2 | Z, beta
    if (!priors.fixed_sigma2) {
      const double ssr = (y - phi * beta).squaredNorm();
      sigma2 = std::max(draw_inverse_gamma(rng, priors.alpha + 0.5 * static_cast<double>(n), priors.lambda + 0.5 * ssr),
                        kVarianceFloor);
    }

    // r | Z
    r = draw_dirichlet(rng, gamma + counts);

    // sigma0_2 | beta
    sigma0_2 = draw_inverse_gamma(rng, priors.alpha0 + 0.5 * static_cast<double>(q),
                                  priors.lambda0 + 0.5 * beta.squaredNorm());

    trace.draws.push_back(GibbsDraw{beta, sigma2, r, z, sigma0_2});
  }
  return trace;
}

// ---------------------------------------------------------------------------

double empirical_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw InvalidArgument("empirical_quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return values[lo] + t * (values[hi] - values[lo]);
}

PosteriorSummary posterior_summary(const GibbsTrace& trace) {
  const auto first = static_cast<std::size_t>(trace.burn_in);
  if (trace.draws.size() < first + 100)
    throw InvalidArgument("posterior_summary: need at least 100 draws after burn-in");
  const std::size_t m = trace.draws.size() - first;
  const auto& head = trace.draws[first];
  const auto q = head.beta.size();
  const auto K = head.r.size();

  PosteriorSummary s;
  s.retained = m;
  s.beta_mean = Eigen::VectorXd::Zero(q);
  s.r_mean = Eigen::VectorXd::Zero(K);
  for (std::size_t t = first; t < trace.draws.size(); ++t) {
    s.beta_mean += trace.draws[t].beta;
    s.sigma2_mean += trace.draws[t].sigma2;
    s.r_mean += trace.draws[t].r;
  }
  const auto dm = static_cast<double>(m);
  s.beta_mean /= dm;
  s.sigma2_mean /= dm;
  s.r_mean /= dm;

  s.beta_sd = Eigen::VectorXd::Zero(q);
  for (std::size_t t = first; t < trace.draws.size(); ++t)
    s.beta_sd += (trace.draws[t].beta - s.beta_mean).array().square().matrix();
  s.beta_sd = (s.beta_sd / (dm - 1.0)).array().sqrt().matrix();

  auto interval = [&](auto&& get) {
    std::vector<double> v;
    v.reserve(m);
    for (std::size_t t = first; t < trace.draws.size(); ++t) v.push_back(get(trace.draws[t]));
    return Interval{empirical_quantile(v, 0.025), empirical_quantile(std::move(v), 0.975)};
  };
  for (Eigen::Index j = 0; j < q; ++j) s.beta_ci.push_back(interval([j](const GibbsDraw& d) { return d.beta(j); }));
  s.sigma2_ci = interval([](const GibbsDraw& d) { return d.sigma2; });
  for (Eigen::Index k = 0; k < K; ++k) s.r_ci.push_back(interval([k](const GibbsDraw& d) { return d.r(k); }));
  return s;
}

ParametricAgmm PosteriorSummary::model(const Basis& basis) const {
  Eigen::VectorXd r = r_mean / r_mean.sum();
  return ParametricAgmm(basis, beta_mean, sigma2_mean, std::move(r));
}

}  // namespace agmm
