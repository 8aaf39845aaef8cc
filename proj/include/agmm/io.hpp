#pragma once

// File formats: dataset CSV, model / report / truth JSON, Gibbs trace CSV.
// Doubles are written in shortest round-trip form, so save -> load is exact.

#include <agmm/baseline.hpp>
#include <agmm/core.hpp>
#include <agmm/em_nonparametric.hpp>
#include <agmm/gibbs.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>

namespace agmm {

// ---- datasets --------------------------------------------------------------

struct CsvDataset {
  Dataset data;
  std::size_t wrapped = 0;  // theta values outside [-pi, pi) that were wrapped
};

/// Header `x1,...,xp,theta`.  Blank lines are skipped.
CsvDataset parse_dataset_csv(std::istream& in);
CsvDataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);

// ---- models ----------------------------------------------------------------

struct KernelModel {
  NonparametricAgmm model;
  Kernel kernel;
};

using Model = std::variant<ParametricAgmm, KernelModel, Smoother>;

/// A fitted model plus the method that produced it (em, gibbs, npem, smoothing).
struct SavedModel {
  std::string method;
  Model model;
};

std::string model_to_json(const SavedModel& saved);
SavedModel model_from_json(const std::string& text);

Angle predict(const Model& model, std::span<const double> x);
/// Fitted sigma2 at x; nullopt for the smoothing baseline.
std::optional<double> variance_at(const Model& model, std::span<const double> x);

// ---- reports and metadata ---------------------------------------------------

std::string report_to_json(const FitReport& report);

struct TruthInfo {
  int example = 0;
  std::uint64_t seed = 0;
  double sigma2_truth = 0.0;
};

std::string truth_to_json(const TruthInfo& info);
TruthInfo truth_from_json(const std::string& text);

/// One row per retained draw: chain, iter, beta0.., sigma2, r1.., sigma0_2.
void write_trace_csv(std::ostream& out, std::span<const GibbsTrace> chains);

// ---- files -----------------------------------------------------------------

std::string read_text(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it over path.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace agmm
