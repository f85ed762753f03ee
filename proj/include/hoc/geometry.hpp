#pragma once

#include <cstdint>
#include <vector>

#include "hoc/types.hpp"

namespace hoc::geom {

// Transform every column of `cloud` by `pose` (scale, rotate, translate).
PointCloud apply_pose(const Pose& pose, const Eigen::Ref<const PointCloud>& cloud);

// Number of surface samples for a box of the given extents: N = m * sx*sy*sz,
// floored at kMinSurfaceSamples so tiny boxes never produce empty clouds.
inline constexpr int kMinSurfaceSamples = 64;
int sample_count(const OrientedBox& box, double m);

// Draw `n` points area-uniformly from the mesh surface. Deterministic in
// (mesh, n, seed); zero-area triangles get zero weight.
PointCloud sample_surface_n(const TriangleMesh& mesh, int n, uint64_t seed);

// Density-based variant: n from sample_count(box, m). Throws on empty mesh.
PointCloud sample_surface(const TriangleMesh& mesh, const OrientedBox& box,
                          double m, uint64_t seed);

// Immutable nearest-neighbor index over a point cloud.
// Queries return exactly the brute-force nearest distance.
class KdIndex {
 public:
  explicit KdIndex(const Eigen::Ref<const PointCloud>& cloud);

  // Index and Euclidean distance of the nearest point to q.
  std::pair<int, double> nearest(const Vector3& q) const;
  double nearest_distance(const Vector3& q) const { return nearest(q).second; }

  int size() const { return static_cast<int>(points_.cols()); }

 private:
  struct Node {
    int axis = -1;        // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };

  int build(int begin, int end);
  void search(int node, const Vector3& q, int& best, double& best_sq) const;

  PointCloud points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Symmetric chamfer distance, plain Euclidean form:
//   (1/|P|) sum_p min_q ||p-q|| + (1/|Q|) sum_q min_p ||p-q||.
// Throws if either cloud is empty.
double chamfer(const Eigen::Ref<const PointCloud>& P,
               const Eigen::Ref<const PointCloud>& Q);

// Forward term only: (1/|P|) sum_p min_q ||p-q||. Not symmetric.
double single_direction_chamfer(const Eigen::Ref<const PointCloud>& P,
                                const Eigen::Ref<const PointCloud>& Q);

// Variant reusing a prebuilt index over Q.
double single_direction_chamfer(const Eigen::Ref<const PointCloud>& P,
                                const KdIndex& q_index);

}  // namespace hoc::geom
