#pragma once

// Initial latent offsets from density-based clustering.
//
// Clusters of (x, theta) are found with DBSCAN, then each cluster receives an
// integer offset s_k so that neighbouring clusters (closest in predictor
// space) join continuously once unwrapped:
//   s_k = s_k* + round((theta_j - theta_i) / 2pi)
// where (i, j) is the closest predictor pair between cluster k and its
// nearest already-assigned cluster k*.

#include <agmm/core.hpp>

#include <cstddef>
#include <span>
#include <vector>

namespace agmm {

/// labels[i] in {0 (noise), 1..num_clusters}.
struct ClusterAssignment {
  std::vector<int> labels;
  int num_clusters = 0;

  std::vector<std::vector<std::size_t>> members() const;
};

/// Offsets z_i >= 1 with min z == 1.
struct ZAssignment {
  std::vector<int> z;

  int K() const;
};

struct ClusterGap {
  double distance = 0.0;
  std::size_t i = 0;  // data row in the first cluster
  std::size_t j = 0;  // data row in the second cluster
};

struct InitOptions {
  double eps = 0.3;
  int min_pts = 4;
};

/// DBSCAN on (x, theta) with every coordinate scaled to unit sample
/// standard deviation.  Noise stays labelled 0.
ClusterAssignment density_cluster(const Dataset& data, double eps, int min_pts);

/// Moves every noise point into the cluster holding its nearest non-noise
/// point (same scaled space as density_cluster).
ClusterAssignment attach_noise(const ClusterAssignment& clusters, const Dataset& data);

/// min over i in a, j in b of ||x_i - x_j||; lowest (i, j) wins ties.
ClusterGap cluster_gap(std::span<const std::size_t> a, std::span<const std::size_t> b,
                       const Dataset& data);

/// Sequential offset assignment.  Every label must be >= 1.
ZAssignment assign_offsets(const ClusterAssignment& clusters, const Dataset& data);

/// density_cluster -> attach_noise -> assign_offsets.
ZAssignment initial_offsets(const Dataset& data, const InitOptions& options = {});

/// K groups of (as near as possible) equal size by increasing theta.
ZAssignment quantile_split(const Dataset& data, int K);

/// One hard-assignment M-step with psi(i, k) = [z_i == k].
ParametricAgmm init_parameters(const Dataset& data, const ZAssignment& z, const Basis& basis);

}  // namespace agmm
