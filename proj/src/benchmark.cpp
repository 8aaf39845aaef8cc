#include <agmm/benchmark.hpp>

#include <agmm/datagen.hpp>
#include <agmm/rng.hpp>

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace agmm {

using nlohmann::json;

Method parse_method(const std::string& name) {
  if (name == "em") return Method::em;
  if (name == "npem") return Method::npem;
  if (name == "gibbs") return Method::gibbs;
  if (name == "smoothing") return Method::smoothing;
  throw InvalidArgument("unknown method '" + name + "' (expected em, npem, gibbs or smoothing)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::em: return "em";
    case Method::npem: return "npem";
    case Method::gibbs: return "gibbs";
    case Method::smoothing: return "smoothing";
  }
  return "?";
}

namespace {

std::optional<ZAssignment> try_initial_offsets(const Dataset& data, const InitOptions& init) {
  try {
    return initial_offsets(data, init);
  } catch (const InitFailure&) {
    return std::nullopt;
  }
}

FitOutcome fit_gibbs(const Dataset& data, const FitConfig& config, std::uint64_t seed) {
  SelectOptions sel_opts;
  sel_opts.em = config.em;
  sel_opts.init = config.init;
  const Selection sel = select_K(data, config.basis, config.K_range, sel_opts);
  if (config.chains < 1) throw InvalidArgument("gibbs: chains must be >= 1");

  std::vector<GibbsTrace> chains;
  GibbsTrace pooled;
  for (int c = 0; c < config.chains; ++c) {
    auto trace = gibbs_sample(data, config.basis, sel.best_K, config.priors, config.iters, config.burn_in,
                              derive_seed(seed, {static_cast<std::uint64_t>(c)}), sel.best.model);
    pooled.draws.insert(pooled.draws.end(), trace.draws.begin() + trace.burn_in, trace.draws.end());
    chains.push_back(std::move(trace));
  }
  pooled.total = static_cast<int>(pooled.draws.size());
  const PosteriorSummary summary = posterior_summary(pooled);
  ParametricAgmm model = summary.model(config.basis);

  FitReport report = sel.best.report;
  const double ll = mixture_loglik(model, data);
  report.loglik_trace = {ll};
  report.iterations = config.iters;
  report.converged = true;
  report.bic = bic(ll, static_cast<int>(config.basis.q()) + model.K(), data.n());
  return FitOutcome{SavedModel{"gibbs", std::move(model)}, std::move(report), std::move(chains)};
}

FitOutcome fit_npem(const Dataset& data, const FitConfig& config, std::uint64_t seed) {
  TuneOptions opts;
  opts.shape = config.npem_kernel;
  opts.grid = config.grid;
  opts.em = config.local_em;
  opts.init = config.init;
  opts.seed = seed;
  const TuneResult tuned = tune(data, config.K_range, config.h_range, config.folds, opts);
  const auto clustered = try_initial_offsets(data, config.init);
  const Kernel kernel{config.npem_kernel, tuned.h};
  auto fit = fit_local_em_auto(data, tuned.K, kernel, config.grid.build(data), clustered ? &*clustered : nullptr,
                               config.local_em);
  FitOutcome out{SavedModel{"npem", KernelModel{std::move(fit.model), kernel}}, std::move(fit.report), {}};
  out.report.selected_K = tuned.K;
  out.report.selected_h = tuned.h;
  out.report.candidates = tuned.bic_scores;
  return out;
}

}  // namespace

FitOutcome fit_method(Method method, const Dataset& data, const FitConfig& config, std::uint64_t seed) {
  switch (method) {
    case Method::em: {
      SelectOptions opts;
      opts.em = config.em;
      opts.init = config.init;
      Selection sel = select_K(data, config.basis, config.K_range, opts);
      return FitOutcome{SavedModel{"em", std::move(sel.best.model)}, std::move(sel.best.report), {}};
    }
    case Method::npem: return fit_npem(data, config, seed);
    case Method::gibbs: return fit_gibbs(data, config, seed);
    case Method::smoothing: {
      const auto cv = smooth_cv(data, config.smooth_h, config.folds, config.smooth_kernel, seed);
      FitOutcome out{SavedModel{"smoothing", Smoother(data, Kernel{config.smooth_kernel, cv.h}, config.allow_degenerate)},
                     FitReport{}, {}};
      out.report.selected_h = cv.h;
      out.report.converged = true;
      for (const auto& [h, score] : cv.scores) {
        CandidateScore c;
        c.h = h;
        c.loglik = std::numeric_limits<double>::quiet_NaN();
        c.bic = score;  // held-out MCE stands in for the criterion
        c.ok = std::isfinite(score);
        c.message = "cv_mce";
        out.report.candidates.push_back(c);
      }
      out.report.bic = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
  }
  throw InvalidArgument("unknown method");
}

Metrics evaluate(const Model& model, int example, std::uint64_t seed, std::size_t T) {
  const auto truth = example_truth(example);
  const double s2 = example_sigma2_truth(example);
  const auto grid = truth_grid(truth, T, seed);
  std::vector<Angle> a, b;
  a.reserve(T);
  b.reserve(T);
  double var_sum = 0.0;
  bool has_var = true;
  for (const auto& pt : grid) {
    const double x = pt.x;
    a.push_back(pt.theta);
    b.push_back(predict(model, {&x, 1}));
    if (has_var) {
      const auto v = variance_at(model, {&x, 1});
      if (v) {
        var_sum += (*v - s2) * (*v - s2);
      } else {
        has_var = false;
      }
    }
  }
  Metrics m;
  m.T = T;
  m.mce = mean_circular_error(a, b);
  if (has_var) m.variance_mse = var_sum / static_cast<double>(T);
  return m;
}

// ---- benchmark -------------------------------------------------------------

namespace {

std::optional<double> mean_of(const std::vector<std::optional<double>>& v) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& x : v)
    if (x) {
      s += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

std::optional<double> sd_of(const std::vector<std::optional<double>>& v) {
  const auto m = mean_of(v);
  if (!m) return std::nullopt;
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& x : v)
    if (x) {
      s += (*x - *m) * (*x - *m);
      ++n;
    }
  if (n < 2) return std::nullopt;
  return std::sqrt(s / static_cast<double>(n - 1));
}

json opt(const std::optional<double>& v) { return v && std::isfinite(*v) ? json(*v) : json(nullptr); }

std::string csv_opt(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::uint64_t method_code(Method m) { return static_cast<std::uint64_t>(m); }

}  // namespace

std::size_t CellResult::ok() const {
  std::size_t n = 0;
  for (const auto& x : mce) n += x.has_value();
  return n;
}
std::optional<double> CellResult::mce_mean() const { return mean_of(mce); }
std::optional<double> CellResult::mce_sd() const { return sd_of(mce); }
std::optional<double> CellResult::variance_mse_mean() const { return mean_of(variance_mse); }
std::optional<double> CellResult::variance_mse_sd() const { return sd_of(variance_mse); }

std::uint64_t data_seed(std::uint64_t base, int example, int rep) {
  return derive_seed(base, {static_cast<std::uint64_t>(example), static_cast<std::uint64_t>(rep), 0});
}
std::uint64_t eval_seed(std::uint64_t base, int example, int rep) {
  return derive_seed(base, {static_cast<std::uint64_t>(example), static_cast<std::uint64_t>(rep), 1});
}
std::uint64_t method_seed(std::uint64_t base, int example, int rep, Method method) {
  return derive_seed(base, {static_cast<std::uint64_t>(example), static_cast<std::uint64_t>(rep), 2, method_code(method)});
}

unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("AGMM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

BenchmarkReport run_benchmark(const BenchmarkConfig& config) {
  if (config.reps < 1) throw InvalidArgument("benchmark: reps must be >= 1");
  if (config.examples.empty() || config.methods.empty())
    throw InvalidArgument("benchmark: need at least one example and one method");
  for (int ex : config.examples)
    if (ex < 2 || ex > 5) throw InvalidArgument("benchmark: examples must be in {2, 3, 4, 5}");

  BenchmarkReport report;
  report.config = config;
  const auto reps = static_cast<std::size_t>(config.reps);
  for (int ex : config.examples)
    for (Method m : config.methods) {
      CellResult c;
      c.example = ex;
      c.method = m;
      c.mce.resize(reps);
      c.variance_mse.resize(reps);
      c.selected_K.assign(reps, 0);
      c.errors.resize(reps);
      report.cells.push_back(std::move(c));
    }

  std::vector<double> plot_x(config.plot_points);
  for (std::size_t t = 0; t < plot_x.size(); ++t)
    plot_x[t] = plot_x.size() == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(t) / static_cast<double>(plot_x.size() - 1);
  std::vector<std::vector<std::optional<double>>> plot_pred(report.cells.size());

  const std::size_t tasks = report.cells.size() * reps;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t ci = t / reps, rep = t % reps;
      CellResult& cell = report.cells[ci];
      const int r = static_cast<int>(rep);
      try {
        const Example ex = gen_example(cell.example, data_seed(config.seed, cell.example, r));
        const FitOutcome fit =
            fit_method(cell.method, ex.data, config.fit, method_seed(config.seed, cell.example, r, cell.method));
        const Metrics m = evaluate(fit.saved.model, cell.example, eval_seed(config.seed, cell.example, r), config.T);
        cell.mce[rep] = m.mce;
        cell.variance_mse[rep] = m.variance_mse;
        cell.selected_K[rep] = fit.report.selected_K;
        if (rep == 0) {
          auto& out = plot_pred[ci];
          for (double x : plot_x) {
            try {
              out.push_back(predict(fit.saved.model, {&x, 1}).value());
            } catch (const std::exception&) {
              out.push_back(std::nullopt);
            }
          }
        }
      } catch (const std::exception& e) {
        cell.errors[rep] = e.what();
      }
    }
  };
  const unsigned n_workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(config.threads), tasks));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (int ex : config.examples) {
    PlotSeries s;
    s.example = ex;
    s.x = plot_x;
    const auto truth = example_truth(ex);
    for (double x : plot_x) s.truth.push_back(truth(x).value());
    for (std::size_t ci = 0; ci < report.cells.size(); ++ci) {
      if (report.cells[ci].example != ex) continue;
      auto pred = plot_pred[ci];
      if (pred.empty()) pred.assign(plot_x.size(), std::nullopt);
      s.predictions.emplace_back(report.cells[ci].method, std::move(pred));
    }
    report.plots.push_back(std::move(s));
  }
  return report;
}

std::string benchmark_json(const BenchmarkReport& report) {
  const auto& c = report.config;
  json j;
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(method_name(m));
  j["config"] = {{"examples", c.examples}, {"methods", methods}, {"reps", c.reps}, {"seed", c.seed}, {"T", c.T},
                 {"basis_degree", c.fit.basis.degree()}, {"K_range", c.fit.K_range}, {"npem_h", c.fit.h_range},
                 {"gibbs_iters", c.fit.iters}, {"gibbs_burnin", c.fit.burn_in}};
  j["rows"] = json::array();
  for (const auto& cell : report.cells) {
    json row{{"example", cell.example},
             {"method", method_name(cell.method)},
             {"reps", cell.mce.size()},
             {"ok", cell.ok()},
             {"mce_mean", opt(cell.mce_mean())},
             {"mce_sd", opt(cell.mce_sd())},
             {"variance_mse_mean", opt(cell.variance_mse_mean())},
             {"variance_mse_sd", opt(cell.variance_mse_sd())}};
    row["mce"] = json::array();
    row["variance_mse"] = json::array();
    row["errors"] = json::array();
    for (std::size_t r = 0; r < cell.mce.size(); ++r) {
      row["mce"].push_back(opt(cell.mce[r]));
      row["variance_mse"].push_back(opt(cell.variance_mse[r]));
      if (!cell.errors[r].empty()) row["errors"].push_back({{"rep", r}, {"message", cell.errors[r]}});
    }
    row["selected_K"] = cell.selected_K;
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

std::string benchmark_csv(const BenchmarkReport& report) {
  std::ostringstream out;
  out << "example,method,reps,ok,mce_mean,mce_sd,variance_mse_mean,variance_mse_sd\n";
  for (const auto& cell : report.cells)
    out << cell.example << ',' << method_name(cell.method) << ',' << cell.mce.size() << ',' << cell.ok() << ','
        << csv_opt(cell.mce_mean()) << ',' << csv_opt(cell.mce_sd()) << ',' << csv_opt(cell.variance_mse_mean()) << ','
        << csv_opt(cell.variance_mse_sd()) << '\n';
  return out.str();
}

std::string plot_csv(const PlotSeries& series) {
  std::ostringstream out;
  out << "x,truth";
  for (const auto& [m, _] : series.predictions) out << ',' << method_name(m);
  out << '\n';
  for (std::size_t t = 0; t < series.x.size(); ++t) {
    out << format_double(series.x[t]) << ',' << format_double(series.truth[t]);
    for (const auto& [_, pred] : series.predictions) out << ',' << csv_opt(pred[t]);
    out << '\n';
  }
  return out.str();
}

}  // namespace agmm
