#pragma once

// Method dispatch, truth-based evaluation and the replicated benchmark.

#include <agmm/baseline.hpp>
#include <agmm/em_nonparametric.hpp>
#include <agmm/em_parametric.hpp>
#include <agmm/gibbs.hpp>
#include <agmm/io.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace agmm {

enum class Method { em, npem, gibbs, smoothing };

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct FitConfig {
  Basis basis = Basis::polynomial(3);
  std::vector<int> K_range{1, 2, 3, 4, 5};
  InitOptions init;
  EmOptions em;

  // npem
  std::vector<double> h_range{0.01};
  GridSpec grid;
  Kernel::Shape npem_kernel = Kernel::Shape::gaussian;
  LocalEmOptions local_em;
  int folds = 5;

  // gibbs; K is picked by the EM sweep over K_range
  Priors priors;
  int iters = 30000;
  int burn_in = 10000;
  int chains = 1;

  // smoothing
  Kernel::Shape smooth_kernel = Kernel::Shape::triangular;
  std::vector<double> smooth_h = log_spaced(0.01, 2.0, 20);
  bool allow_degenerate = false;
};

struct FitOutcome {
  SavedModel saved;
  FitReport report;
  std::vector<GibbsTrace> chains;  // gibbs only
};

/// All randomness (CV folds, chains) is derived from seed.
FitOutcome fit_method(Method method, const Dataset& data, const FitConfig& config, std::uint64_t seed);

struct Metrics {
  double mce = 0.0;
  std::optional<double> variance_mse;  // absent for the smoothing baseline
  std::size_t T = 0;
};

/// MCE against the example's truth on T seeded test locations, and the mean
/// squared error of the fitted variance against sigma2_truth.
Metrics evaluate(const Model& model, int example, std::uint64_t seed, std::size_t T = 200);

struct CellResult {
  int example = 0;
  Method method = Method::em;
  std::vector<std::optional<double>> mce;  // one per replication; nullopt = failed
  std::vector<std::optional<double>> variance_mse;
  std::vector<int> selected_K;  // 0 when not applicable or failed
  std::vector<std::string> errors;

  std::size_t ok() const;
  std::optional<double> mce_mean() const;
  std::optional<double> mce_sd() const;
  std::optional<double> variance_mse_mean() const;
  std::optional<double> variance_mse_sd() const;
};

struct PlotSeries {
  int example = 0;
  std::vector<double> x;  // sorted evaluation grid
  std::vector<double> truth;
  std::vector<std::pair<Method, std::vector<std::optional<double>>>> predictions;  // replication 0
};

struct BenchmarkConfig {
  std::vector<int> examples{2, 3, 4, 5};
  std::vector<Method> methods{Method::em, Method::npem, Method::gibbs, Method::smoothing};
  int reps = 20;
  std::uint64_t seed = 1;
  std::size_t T = 200;
  std::size_t plot_points = 201;
  FitConfig fit;
  unsigned threads = 0;  // 0 = AGMM_THREADS or hardware concurrency
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::vector<CellResult> cells;  // example-major, then method in the given order
  std::vector<PlotSeries> plots;  // one per example
};

BenchmarkReport run_benchmark(const BenchmarkConfig& config);

std::string benchmark_json(const BenchmarkReport& report);
std::string benchmark_csv(const BenchmarkReport& report);
std::string plot_csv(const PlotSeries& series);

/// Worker count: explicit value, else AGMM_THREADS, else hardware concurrency.
unsigned worker_count(unsigned requested);

/// Seeds used by the benchmark for one replication.
std::uint64_t data_seed(std::uint64_t base, int example, int rep);
std::uint64_t eval_seed(std::uint64_t base, int example, int rep);
std::uint64_t method_seed(std::uint64_t base, int example, int rep, Method method);

}  // namespace agmm
