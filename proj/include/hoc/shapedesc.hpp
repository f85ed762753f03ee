#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hoc/types.hpp"

namespace hoc::desc {

inline constexpr int kGridDim = 4;
inline constexpr int kHistogramBins = kGridDim * kGridDim * kGridDim;
inline constexpr int kDescriptorDims = kHistogramBins + 3;

// Occupancy histogram over the cloud's bounding box, normalized to the unit
// cube with aspect ratio preserved, followed by the three per-axis extent
// ratios (widest axis = 1). Bin (bx,by,bz) lives at index (bz*4 + by)*4 + bx.
// The histogram part sums to 1. Throws on an empty cloud.
Eigen::VectorXd descriptor(const Eigen::Ref<const PointCloud>& cloud);

struct KMeansResult {
  std::vector<int> assignment;            // cluster per input column
  Eigen::MatrixXd means;                  // one column per cluster
  std::vector<double> objective_history;  // sum of squared distances, per iteration
};

// Lloyd's algorithm from k-means++ initialization, run to assignment fixpoint
// or 100 iterations. Empty clusters are repaired by stealing the farthest
// point from the largest cluster, so all clusters end non-empty. When n <= k
// each vector becomes its own cluster. Deterministic in (vectors, k, seed).
KMeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& vectors, int k,
                    uint64_t seed);

struct ClusterNode {
  std::vector<int> members;   // shape ids, ascending
  std::vector<int> children;  // indices into ClusterTree::nodes; empty for leaves
  int centroid = -1;          // member id nearest the members' descriptor mean
};

// nodes[0] is the root. Children partition their parent's members and every
// leaf holds exactly one member.
struct ClusterTree {
  std::vector<ClusterNode> nodes;

  int depth() const;  // levels, counting the root as 1
  int leaf_count() const;
};

// Recursive k-means over descriptors (column i belongs to ids[i]); groups of
// at most k members become leaf children. Requires unique ids and k >= 2.
ClusterTree hierarchical_cluster(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                                 const std::vector<int>& ids, int k, uint64_t seed);

// Member id whose descriptor is nearest (L2) the members' mean; ties break to
// the lowest id. Column i of `vectors` belongs to ids[i].
int centroid_of(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                const std::vector<int>& ids, const std::vector<int>& members);

// Descriptor cache: JSON array of {shape_id, vector}.
void save_descriptors(const std::string& path, const std::vector<int>& ids,
                      const Eigen::MatrixXd& vectors);
std::pair<std::vector<int>, Eigen::MatrixXd> load_descriptors(const std::string& path);

}  // namespace hoc::desc
