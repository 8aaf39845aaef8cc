#include <agmm/baseline.hpp>

#include <cmath>
#include <limits>
#include <set>

namespace agmm {

Smoother::Smoother(Dataset data, Kernel kernel, bool allow_degenerate)
    : data_(std::move(data)), kernel_(kernel), allow_degenerate_(allow_degenerate) {
  if (data_.n() < 2) throw InvalidArgument("smoother needs at least two observations");
  if (!(kernel_.h > 0.0)) throw InvalidArgument("kernel bandwidth h must be positive");
}

SmoothComponents Smoother::components(std::span<const double> x) const {
  if (x.size() != data_.p()) throw InvalidArgument("smoother: query dimension mismatch");
  Eigen::Map<const Eigen::RowVectorXd> q(x.data(), static_cast<Eigen::Index>(x.size()));
  SmoothComponents out;
  double ws = 0.0, wc = 0.0;
  for (std::size_t i = 0; i < data_.n(); ++i) {
    const double w = kernel_weight(kernel_, (data_.x().row(static_cast<Eigen::Index>(i)) - q).norm());
    if (w == 0.0) continue;
    out.mass += w;
    ws += w * std::sin(data_.theta(i));
    wc += w * std::cos(data_.theta(i));
  }
  if (out.mass > 0.0) {
    out.s = ws / out.mass;
    out.c = wc / out.mass;
  }
  return out;
}

Angle Smoother::predict(std::span<const double> x) const {
  const SmoothComponents sc = components(x);
  if (!(sc.mass > 0.0)) throw NoSupport("smoother: no kernel mass at the query point; increase h");
  if (std::hypot(sc.s, sc.c) <= 1e-12) {
    if (allow_degenerate_) return Angle::principal(0.0);
    throw NoSupport("smoother: sine and cosine estimates cancel; the mean direction is undefined");
  }
  return Angle::principal(std::atan2(sc.s, sc.c));
}

Smoother smooth_fit(const Dataset& data, const Kernel& kernel, bool allow_degenerate) {
  return Smoother(data, kernel, allow_degenerate);
}

Angle smooth_predict(const Smoother& smoother, std::span<const double> x) { return smoother.predict(x); }

SmoothCvResult smooth_cv(const Dataset& data, std::span<const double> h_range, int folds, Kernel::Shape shape,
                         std::uint64_t seed) {
  if (h_range.empty()) throw InvalidArgument("smooth_cv: h_range is empty");
  if (folds < 2) throw InvalidArgument("smooth_cv: folds must be >= 2");
  const std::set<double> hs(h_range.begin(), h_range.end());
  if (!(*hs.begin() > 0.0)) throw InvalidArgument("smooth_cv: every h must be positive");

  SmoothCvResult result;
  result.h = *hs.rbegin();
  if (hs.size() == 1) {
    result.scores.emplace_back(result.h, std::numeric_limits<double>::quiet_NaN());
    return result;
  }

  const auto fold = fold_assignment(data.n(), folds, seed);
  std::vector<Dataset> train(static_cast<std::size_t>(folds));
  std::vector<std::vector<std::size_t>> test(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.n(); ++i) (fold[i] == f ? test[static_cast<std::size_t>(f)] : rows).push_back(i);
    if (rows.size() >= 2) train[static_cast<std::size_t>(f)] = data.subset(rows);
  }

  double best = std::numeric_limits<double>::infinity();
  Eigen::RowVectorXd row;
  for (auto h = hs.rbegin(); h != hs.rend(); ++h) {
    double total = 0.0;
    int used = 0;
    bool ok = true;
    for (int f = 0; f < folds && ok; ++f) {
      const auto& rows = test[static_cast<std::size_t>(f)];
      if (rows.empty() || train[static_cast<std::size_t>(f)].n() < 2) continue;
      const Smoother sm(train[static_cast<std::size_t>(f)], Kernel{shape, *h});
      std::vector<double> truth, est;
      try {
        for (std::size_t i : rows) {
          row = data.x().row(static_cast<Eigen::Index>(i));
          est.push_back(sm.predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))).value());
          truth.push_back(data.theta(i));
        }
      } catch (const NoSupport&) {
        ok = false;
        break;
      }
      total += mean_circular_error(truth, est);
      ++used;
    }
    const double score = ok && used > 0 ? total / used : std::numeric_limits<double>::infinity();
    result.scores.emplace_back(*h, score);
    if (score < best) {
      best = score;
      result.h = *h;
    }
  }
  return result;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw InvalidArgument("log_spaced: need 0 < lo <= hi and n >= 1");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t t = 0; t < n; ++t) out[t] = std::exp(a + (b - a) * static_cast<double>(t) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace agmm
