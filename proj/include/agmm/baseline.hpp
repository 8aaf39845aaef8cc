#pragma once

// Nonparametric circular smoothing: Nadaraya-Watson estimates of
// s(x) = E[sin theta | x] and c(x) = E[cos theta | x], combined by atan2.

#include <agmm/core.hpp>
#include <agmm/em_nonparametric.hpp>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace agmm {

struct SmoothComponents {
  double s = 0.0;
  double c = 0.0;
  double mass = 0.0;  // total kernel weight at the query point
};

class Smoother {
 public:
  /// allow_degenerate maps atan2(0, 0) to 0 instead of throwing NoSupport.
  Smoother(Dataset data, Kernel kernel, bool allow_degenerate = false);

  const Dataset& data() const noexcept { return data_; }
  const Kernel& kernel() const noexcept { return kernel_; }
  bool allow_degenerate() const noexcept { return allow_degenerate_; }

  SmoothComponents components(std::span<const double> x) const;
  Angle predict(std::span<const double> x) const;

 private:
  Dataset data_;
  Kernel kernel_;
  bool allow_degenerate_;
};

Smoother smooth_fit(const Dataset& data, const Kernel& kernel, bool allow_degenerate = false);
Angle smooth_predict(const Smoother& smoother, std::span<const double> x);

struct SmoothCvResult {
  double h = 0.0;
  std::vector<std::pair<double, double>> scores;  // (h, mean held-out MCE); +inf when unsupported
};

/// Picks h minimising mean held-out MCE over folds; ties go to larger h.
SmoothCvResult smooth_cv(const Dataset& data, std::span<const double> h_range, int folds,
                         Kernel::Shape shape = Kernel::Shape::triangular, std::uint64_t seed = 0);

/// n log-spaced bandwidths over [lo, hi].
std::vector<double> log_spaced(double lo, double hi, std::size_t n);

}  // namespace agmm
