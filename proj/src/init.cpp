#include <agmm/init.hpp>

#include <agmm/em_parametric.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace agmm {

namespace {

// Rows are (x_1, ..., x_p, theta), each column divided by its sample sd.
Eigen::MatrixXd scaled_points(const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto p = static_cast<Eigen::Index>(data.p());
  Eigen::MatrixXd pts(n, p + 1);
  pts.leftCols(p) = data.x();
  for (Eigen::Index i = 0; i < n; ++i) pts(i, p) = data.theta(static_cast<std::size_t>(i));
  if (n < 2) return pts;
  for (Eigen::Index c = 0; c < pts.cols(); ++c) {
    const double mean = pts.col(c).mean();
    const double var = (pts.col(c).array() - mean).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    if (sd > 0.0) pts.col(c) /= sd;
  }
  return pts;
}

std::vector<std::size_t> region_query(const Eigen::MatrixXd& pts, Eigen::Index i, double eps2) {
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < pts.rows(); ++j)
    if ((pts.row(i) - pts.row(j)).squaredNorm() <= eps2) out.push_back(static_cast<std::size_t>(j));
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(num_clusters));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 0) out[static_cast<std::size_t>(labels[i] - 1)].push_back(i);
  return out;
}

int ZAssignment::K() const { return z.empty() ? 0 : *std::max_element(z.begin(), z.end()); }

ClusterAssignment density_cluster(const Dataset& data, double eps, int min_pts) {
  if (!(eps > 0.0)) throw InvalidArgument("density_cluster: eps must be positive");
  if (min_pts < 1) throw InvalidArgument("density_cluster: min_pts must be >= 1");

  constexpr int kUnvisited = -1;
  constexpr int kNoise = 0;
  const Eigen::MatrixXd pts = scaled_points(data);
  const double eps2 = eps * eps;
  const auto need = static_cast<std::size_t>(min_pts);

  ClusterAssignment out;
  out.labels.assign(data.n(), kUnvisited);
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (out.labels[i] != kUnvisited) continue;
    auto seeds = region_query(pts, static_cast<Eigen::Index>(i), eps2);
    if (seeds.size() < need) {
      out.labels[i] = kNoise;
      continue;
    }
    const int id = ++out.num_clusters;
    out.labels[i] = id;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (out.labels[j] == kNoise) out.labels[j] = id;  // border point
      if (out.labels[j] != kUnvisited) continue;
      out.labels[j] = id;
      auto more = region_query(pts, static_cast<Eigen::Index>(j), eps2);
      if (more.size() >= need) queue.insert(queue.end(), more.begin(), more.end());
    }
  }
  if (out.num_clusters == 0)
    throw InitFailure("density clustering labelled every point as noise (eps = " +
                      std::to_string(eps) + ", min_pts = " + std::to_string(min_pts) +
                      "); increase eps or lower min_pts");
  return out;
}

ClusterAssignment attach_noise(const ClusterAssignment& clusters, const Dataset& data) {
  if (clusters.num_clusters < 1) throw InvalidArgument("attach_noise: no clusters to attach to");
  const Eigen::MatrixXd pts = scaled_points(data);
  ClusterAssignment out = clusters;
  for (std::size_t i = 0; i < clusters.labels.size(); ++i) {
    if (clusters.labels[i] != 0) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < clusters.labels.size(); ++j) {
      if (clusters.labels[j] == 0) continue;
      const double d = (pts.row(static_cast<Eigen::Index>(i)) - pts.row(static_cast<Eigen::Index>(j)))
                           .squaredNorm();
      if (d < best) {
        best = d;
        out.labels[i] = clusters.labels[j];
      }
    }
  }
  return out;
}

ClusterGap cluster_gap(std::span<const std::size_t> a, std::span<const std::size_t> b,
                       const Dataset& data) {
  if (a.empty() || b.empty()) throw InvalidArgument("cluster_gap: clusters must be non-empty");
  ClusterGap gap;
  gap.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i : a) {
    for (std::size_t j : b) {
      const double d = (data.x().row(static_cast<Eigen::Index>(i)) -
                        data.x().row(static_cast<Eigen::Index>(j)))
                           .norm();
      if (d < gap.distance || (d == gap.distance && std::pair(i, j) < std::pair(gap.i, gap.j))) {
        gap.distance = d;
        gap.i = i;
        gap.j = j;
      }
    }
  }
  return gap;
}

ZAssignment assign_offsets(const ClusterAssignment& clusters, const Dataset& data) {
  if (clusters.num_clusters < 1) throw InvalidArgument("assign_offsets: need at least one cluster");
  if (clusters.labels.size() != data.n())
    throw InvalidArgument("assign_offsets: label count does not match dataset");
  for (int l : clusters.labels)
    if (l < 1 || l > clusters.num_clusters)
      throw InvalidArgument("assign_offsets: unattached noise or invalid label " + std::to_string(l));

  const auto members = clusters.members();
  const auto C = static_cast<std::size_t>(clusters.num_clusters);
  for (std::size_t c = 0; c < C; ++c)
    if (members[c].empty()) throw InvalidArgument("assign_offsets: empty cluster " + std::to_string(c + 1));

  // gaps[k][k'] with the closest pair oriented as (row in k, row in k')
  std::vector<std::vector<ClusterGap>> gaps(C, std::vector<ClusterGap>(C));
  for (std::size_t a = 0; a < C; ++a)
    for (std::size_t b = 0; b < C; ++b)
      if (a != b) gaps[a][b] = cluster_gap(members[a], members[b], data);

  // Clusters are visited nearest-first from cluster 1, so that each newly
  // assigned cluster is anchored to its closest already-assigned neighbour.
  std::vector<long> offset(C, 0);
  std::vector<bool> done(C, false);
  offset[0] = 1;
  done[0] = true;
  for (std::size_t step = 1; step < C; ++step) {
    std::size_t best_k = C, best_anchor = C;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < C; ++k) {
      if (done[k]) continue;
      for (std::size_t a = 0; a < C; ++a) {
        if (!done[a]) continue;
        if (gaps[k][a].distance < best) {
          best = gaps[k][a].distance;
          best_k = k;
          best_anchor = a;
        }
      }
    }
    const ClusterGap& g = gaps[best_k][best_anchor];
    const double jump = (data.theta(g.j) - data.theta(g.i)) / kTwoPi;
    offset[best_k] = offset[best_anchor] + std::lround(jump);
    done[best_k] = true;
  }

  const long lowest = *std::min_element(offset.begin(), offset.end());
  ZAssignment z;
  z.z.reserve(data.n());
  for (int l : clusters.labels) z.z.push_back(static_cast<int>(offset[static_cast<std::size_t>(l - 1)] - lowest + 1));
  return z;
}

ZAssignment initial_offsets(const Dataset& data, const InitOptions& options) {
  const auto clusters = density_cluster(data, options.eps, options.min_pts);
  return assign_offsets(attach_noise(clusters, data), data);
}

ZAssignment quantile_split(const Dataset& data, int K) {
  if (K < 1) throw InvalidArgument("quantile_split: K must be >= 1");
  std::vector<std::size_t> order(data.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data.theta(a) < data.theta(b); });
  ZAssignment z;
  z.z.assign(data.n(), 1);
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    z.z[order[rank]] = 1 + static_cast<int>(rank * static_cast<std::size_t>(K) / order.size());
  return z;
}

ParametricAgmm init_parameters(const Dataset& data, const ZAssignment& z, const Basis& basis) {
  if (z.z.size() != data.n()) throw InvalidArgument("init_parameters: label count does not match dataset");
  const int K = z.K();
  if (K < 1) throw InvalidArgument("init_parameters: offsets must be positive");
  try {
    return m_step(data, Responsibilities::hard(z.z, K), basis);
  } catch (const SingularDesign& e) {
    throw InitFailure(std::string("initial M-step failed (") + e.what() +
                      "); try a lower basis degree");
  }
}

}  // namespace agmm
