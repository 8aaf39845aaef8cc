#pragma once

#include <agmm/core.hpp>
#include <agmm/init.hpp>

#include <span>
#include <vector>

namespace agmm {

struct EmOptions {
  double tol = 1e-8;  // absolute change in log-likelihood
  int max_iter = 500;
};

struct ParametricFit {
  ParametricAgmm model;
  FitReport report;
};

Responsibilities e_step(const ParametricAgmm& model, const Dataset& data);

/// Weighted least squares for beta, pooled residual variance (floored at
/// kVarianceFloor) and column-mean weights.  Throws SingularDesign when the
/// design matrix is rank deficient.
ParametricAgmm m_step(const Dataset& data, const Responsibilities& psi, const Basis& basis);

/// EM from init until |delta loglik| < tol or max_iter.  The returned model is
/// the best one visited; report.bic uses df = q + K.
ParametricFit fit_em(const Dataset& data, const ParametricAgmm& init, const EmOptions& options = {});
ParametricFit fit_em(const Dataset& data, int K, const Basis& basis, const ParametricAgmm& init,
                     double tol, int max_iter);

struct SelectOptions {
  EmOptions em;
  InitOptions init;
  // Initial weights are mixed with this much uniform mass so that components
  // left empty by the hard start can still be populated by EM.
  double weight_smoothing = 1e-3;
};

struct Selection {
  int best_K = 0;
  ParametricFit best;
  std::vector<CandidateScore> scores;  // one per K, sorted by K
};

/// Fits every K in K_range and returns the BIC minimiser (ties -> smaller K).
/// Throws FitError only when no K could be fitted.
Selection select_K(const Dataset& data, const Basis& basis, std::span<const int> K_range,
                   const SelectOptions& options = {});

/// Starting models for a K-component fit: the clustering offsets placed at
/// every admissible shift within 1..K, plus the theta-quantile split when the
/// clustering found fewer than K offsets (or failed).
std::vector<ParametricAgmm> starting_models(const Dataset& data, const Basis& basis, int K,
                                            const ZAssignment* clustered,
                                            double weight_smoothing);

/// Latent-offset candidates shared by the parametric and kernel fitters.
std::vector<ZAssignment> offset_candidates(const Dataset& data, int K, const ZAssignment* clustered);

Angle predict_mean(const ParametricAgmm& model, std::span<const double> x);

}  // namespace agmm
