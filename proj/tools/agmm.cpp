// agmm: generate, fit, evaluate, benchmark.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <agmm/benchmark.hpp>
#include <agmm/datagen.hpp>
#include <agmm/io.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace agmm;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Basis parse_basis(const std::string& spec, std::size_t p) {
  const std::string prefix = "poly:";
  if (spec.rfind(prefix, 0) != 0) throw UsageError("--basis must look like poly:d");
  const std::string d = spec.substr(prefix.size());
  if (d.empty() || d.find_first_not_of("0123456789") != std::string::npos)
    throw UsageError("--basis degree must be a non-negative integer");
  return Basis::polynomial(std::stoi(d), p);
}

std::vector<int> parse_K(const std::string& spec, int K_max) {
  if (spec == "auto") {
    std::vector<int> out;
    for (int k = 1; k <= K_max; ++k) out.push_back(k);
    return out;
  }
  if (spec.empty() || spec.find_first_not_of("0123456789") != std::string::npos || std::stoi(spec) < 1)
    throw UsageError("--K must be 'auto' or a positive integer");
  return {std::stoi(spec)};
}

Kernel::Shape parse_kernel(const std::string& name) {
  try {
    return Kernel::parse_shape(name, 1.0).shape;
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  p += suffix;
  return p;
}

std::string report_csv(const FitReport& r) {
  std::ostringstream out;
  out << "K,h,loglik,bic,ok,selected\n";
  for (const auto& c : r.candidates) {
    const bool sel = c.K == r.selected_K && (!c.h || !r.selected_h || *c.h == *r.selected_h);
    out << c.K << ',' << (c.h ? format_double(*c.h) : "NA") << ','
        << (std::isfinite(c.loglik) ? format_double(c.loglik) : "NA") << ','
        << (std::isfinite(c.bic) ? format_double(c.bic) : "NA") << ',' << (c.ok ? 1 : 0) << ',' << (sel ? 1 : 0)
        << '\n';
  }
  return out.str();
}

void add_format(CLI::App* cmd, std::string& format) {
  cmd->add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  int example = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  const Example ex = gen_example(a.example, a.seed);
  std::ostringstream csv;
  write_dataset_csv(csv, ex.data);
  const fs::path out(a.out);
  const fs::path truth = sibling(out, ".truth.json");
  write_text_atomic(out, csv.str());
  write_text_atomic(truth, truth_to_json(TruthInfo{a.example, a.seed, ex.sigma2_truth}));
  std::cout << "wrote " << ex.data.n() << " rows to " << out.string() << " and truth to " << truth.string() << "\n";
  return 0;
}

// ---- fit --------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string method = "em";
  std::string basis = "poly:3";
  std::string K = "auto";
  int K_max = 5;
  std::vector<double> h;
  std::string grid = "all";
  std::string kernel;
  int folds = 5;
  int iters = 30000;
  int burnin = 10000;
  int chains = 1;
  double init_eps = 0.3;
  int init_minpts = 4;
  std::string trace;
  std::string report;
  bool allow_degenerate = false;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "json";
};

int run_fit(const FitArgs& a) {
  // Everything up to the fit itself is argument interpretation.
  Method method;
  FitConfig cfg;
  CsvDataset csv;
  try {
    method = parse_method(a.method);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  csv = read_dataset_csv(a.data);
  if (csv.wrapped > 0)
    std::cerr << "warning: " << csv.wrapped << " theta value(s) outside [-pi, pi) were wrapped\n";
  cfg.basis = parse_basis(a.basis, csv.data.p());
  cfg.K_range = parse_K(a.K, a.K_max);
  cfg.init = InitOptions{a.init_eps, a.init_minpts};
  cfg.folds = a.folds;
  try {
    cfg.grid = GridSpec::parse(a.grid);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  if (!a.kernel.empty()) {
    cfg.npem_kernel = parse_kernel(a.kernel);
    cfg.smooth_kernel = cfg.npem_kernel;
  }
  if (!a.h.empty()) {
    for (double h : a.h)
      if (!(h > 0.0)) throw UsageError("--h values must be positive");
    cfg.h_range = a.h;
    cfg.smooth_h = a.h;
  }
  if (a.burnin < 0 || a.iters <= a.burnin) throw UsageError("--iters must exceed --burnin");
  if (a.iters - a.burnin < 100) throw UsageError("need at least 100 retained Gibbs draws");
  cfg.iters = a.iters;
  cfg.burn_in = a.burnin;
  cfg.chains = a.chains;
  cfg.allow_degenerate = a.allow_degenerate;

  const FitOutcome fit = fit_method(method, csv.data, cfg, a.seed);

  const fs::path out(a.out);
  const fs::path report = a.report.empty() ? sibling(out, a.format == "csv" ? ".report.csv" : ".report.json")
                                           : fs::path(a.report);
  write_text_atomic(out, model_to_json(fit.saved));
  write_text_atomic(report, a.format == "csv" ? report_csv(fit.report) : report_to_json(fit.report));
  if (!a.trace.empty()) {
    if (fit.chains.empty()) throw UsageError("--trace only applies to --method gibbs");
    std::ostringstream tr;
    write_trace_csv(tr, fit.chains);
    write_text_atomic(a.trace, tr.str());
  }

  std::cout << "method " << a.method;
  if (fit.report.selected_K > 0) std::cout << "  K " << fit.report.selected_K;
  if (fit.report.selected_h) std::cout << "  h " << *fit.report.selected_h;
  if (std::isfinite(fit.report.bic)) std::cout << "  bic " << fit.report.bic;
  std::cout << "\nmodel  " << out.string() << "\nreport " << report.string() << "\n";
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string truth;
  int example = 0;
  std::size_t T = 200;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "json";
};

int run_evaluate(const EvaluateArgs& a) {
  if (a.truth.empty() == (a.example == 0)) throw UsageError("give exactly one of --truth or --example");
  const int example = a.example != 0 ? a.example : truth_from_json(read_text(a.truth)).example;
  if (example < 2 || example > 5) throw std::runtime_error("truth metadata names an unknown example");
  const SavedModel saved = model_from_json(read_text(a.model));
  const std::size_t p = std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ParametricAgmm>)
          return m.basis().p();
        else if constexpr (std::is_same_v<T, KernelModel>)
          return m.model.p();
        else
          return m.data().p();
      },
      saved.model);
  if (p != 1) throw std::runtime_error("model has " + std::to_string(p) + " predictors; the examples have one");

  const Metrics m = evaluate(saved.model, example, a.seed, a.T);
  std::string text;
  if (a.format == "csv") {
    text = "method,example,T,mce,variance_mse\n" + saved.method + ',' + std::to_string(example) + ',' +
           std::to_string(m.T) + ',' + format_double(m.mce) + ',' +
           (m.variance_mse ? format_double(*m.variance_mse) : "NA") + '\n';
  } else {
    json j{{"method", saved.method}, {"example", example}, {"T", m.T}, {"seed", a.seed}, {"mce", m.mce}};
    j["variance_mse"] = m.variance_mse ? json(*m.variance_mse) : json(nullptr);
    text = j.dump(2) + "\n";
  }
  if (a.out.empty())
    std::cout << text;
  else
    write_text_atomic(a.out, text);
  return 0;
}

// ---- benchmark --------------------------------------------------------------

struct BenchmarkArgs {
  std::vector<int> examples{2, 3, 4, 5};
  std::vector<std::string> methods{"em", "npem", "gibbs", "smoothing"};
  int reps = 20;
  std::string basis = "poly:3";
  std::string K = "auto";
  int K_max = 5;
  std::vector<double> h;
  int iters = 30000;
  int burnin = 10000;
  unsigned threads = 0;
  std::uint64_t seed = 1;
  std::string out = ".";
  std::string format = "json";
};

int run_benchmark_cmd(const BenchmarkArgs& a) {
  BenchmarkConfig cfg;
  cfg.examples = a.examples;
  cfg.methods.clear();
  try {
    for (const auto& m : a.methods) cfg.methods.push_back(parse_method(m));
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  cfg.reps = a.reps;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.fit.basis = parse_basis(a.basis, 1);
  cfg.fit.K_range = parse_K(a.K, a.K_max);
  if (!a.h.empty()) cfg.fit.h_range = a.h;
  if (a.burnin < 0 || a.iters - a.burnin < 100) throw UsageError("need at least 100 retained Gibbs draws");
  cfg.fit.iters = a.iters;
  cfg.fit.burn_in = a.burnin;

  const BenchmarkReport report = run_benchmark(cfg);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  const std::string js = benchmark_json(report), cs = benchmark_csv(report);
  write_text_atomic(dir / "report.json", js);
  write_text_atomic(dir / "report.csv", cs);
  for (const auto& series : report.plots)
    write_text_atomic(dir / ("plot_ex" + std::to_string(series.example) + ".csv"), plot_csv(series));
  std::cout << (a.format == "csv" ? cs : js);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Angular Gaussian mixture regression for circular responses"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a simulated example as CSV plus truth metadata");
  g->add_option("--example", gen.example, "Example id")->required()->check(CLI::Range(2, 5));
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out, "Output CSV")->required();

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit a model to a dataset CSV");
  f->set_help_flag("--help", "Print this help message and exit");  // --h is the bandwidth
  f->add_option("--data", fit.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  f->add_option("--method", fit.method)->check(CLI::IsMember({"em", "npem", "gibbs", "smoothing"}))->capture_default_str();
  f->add_option("--basis", fit.basis, "poly:d")->capture_default_str();
  f->add_option("--K", fit.K, "auto or a fixed K")->capture_default_str();
  f->add_option("--K-max", fit.K_max, "Largest K tried by --K auto")->check(CLI::PositiveNumber)->capture_default_str();
  f->add_option("--h", fit.h, "Bandwidth(s); several values trigger CV")->delimiter(',');
  f->add_option("--grid", fit.grid, "all | uniform:J")->capture_default_str();
  f->add_option("--kernel", fit.kernel, "gaussian | triangular")->check(CLI::IsMember({"gaussian", "triangular"}));
  f->add_option("--folds,--cv-folds", fit.folds)->check(CLI::Range(2, 1000))->capture_default_str();
  f->add_option("--iters", fit.iters)->check(CLI::PositiveNumber)->capture_default_str();
  f->add_option("--burnin", fit.burnin)->check(CLI::NonNegativeNumber)->capture_default_str();
  f->add_option("--chains", fit.chains)->check(CLI::PositiveNumber)->capture_default_str();
  f->add_option("--init-eps", fit.init_eps)->check(CLI::PositiveNumber)->capture_default_str();
  f->add_option("--init-minpts", fit.init_minpts)->check(CLI::PositiveNumber)->capture_default_str();
  f->add_option("--trace", fit.trace, "Gibbs trace CSV");
  f->add_option("--report", fit.report, "Report path (default: next to --out)");
  f->add_flag("--allow-degenerate", fit.allow_degenerate, "Smoothing: map an undefined mean direction to 0");
  f->add_option("--seed", fit.seed)->capture_default_str();
  f->add_option("--out", fit.out, "Model JSON")->required();
  add_format(f, fit.format);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a fitted model against an example's truth");
  e->add_option("--model", ev.model)->required()->check(CLI::ExistingFile);
  e->add_option("--truth", ev.truth, "Truth JSON written by generate")->check(CLI::ExistingFile);
  e->add_option("--example", ev.example)->check(CLI::Range(2, 5));
  e->add_option("--T", ev.T, "Test locations")->check(CLI::PositiveNumber)->capture_default_str();
  e->add_option("--seed", ev.seed)->capture_default_str();
  e->add_option("--out", ev.out, "Metrics file (default: stdout)");
  add_format(e, ev.format);

  BenchmarkArgs bm;
  auto* b = app.add_subcommand("benchmark", "Replicated accuracy table over examples and methods");
  b->set_help_flag("--help", "Print this help message and exit");
  b->add_option("--examples", bm.examples)->delimiter(',')->check(CLI::Range(2, 5))->capture_default_str();
  b->add_option("--methods", bm.methods)
      ->delimiter(',')
      ->check(CLI::IsMember({"em", "npem", "gibbs", "smoothing"}))
      ->capture_default_str();
  b->add_option("--reps", bm.reps)->check(CLI::PositiveNumber)->capture_default_str();
  b->add_option("--basis", bm.basis)->capture_default_str();
  b->add_option("--K", bm.K)->capture_default_str();
  b->add_option("--K-max", bm.K_max)->check(CLI::PositiveNumber)->capture_default_str();
  b->add_option("--h", bm.h, "npem bandwidth(s)")->delimiter(',');
  b->add_option("--iters", bm.iters)->check(CLI::PositiveNumber)->capture_default_str();
  b->add_option("--burnin", bm.burnin)->check(CLI::NonNegativeNumber)->capture_default_str();
  b->add_option("--threads", bm.threads, "Worker threads (default: AGMM_THREADS or all cores)");
  b->add_option("--seed", bm.seed)->capture_default_str();
  b->add_option("--out", bm.out, "Output directory")->capture_default_str();
  add_format(b, bm.format);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return run_generate(gen);
    if (*f) return run_fit(fit);
    if (*e) return run_evaluate(ev);
    if (*b) return run_benchmark_cmd(bm);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
