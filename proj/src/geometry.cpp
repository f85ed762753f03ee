#include "hoc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hoc/rng.hpp"

namespace hoc::geom {

PointCloud apply_pose(const Pose& pose, const Eigen::Ref<const PointCloud>& cloud) {
  const Eigen::Matrix3d r = pose.rotation_matrix();
  return ((r * (pose.scale.asDiagonal() * cloud)).colwise() + pose.translation)
      .eval();
}

int sample_count(const OrientedBox& box, double m) {
  const double n = m * box.extents.x() * box.extents.y() * box.extents.z();
  return std::max(static_cast<int>(std::lround(n)), kMinSurfaceSamples);
}

PointCloud sample_surface_n(const TriangleMesh& mesh, int n, uint64_t seed) {
  if (mesh.empty()) throw std::invalid_argument("empty mesh");
  if (n <= 0) throw std::invalid_argument("sample count must be positive");

  const int tri_count = static_cast<int>(mesh.F.cols());
  std::vector<double> cum_area(tri_count);
  double total = 0.0;
  for (int t = 0; t < tri_count; ++t) {
    const Vector3 a = mesh.V.col(mesh.F(0, t));
    const Vector3 b = mesh.V.col(mesh.F(1, t));
    const Vector3 c = mesh.V.col(mesh.F(2, t));
    total += 0.5 * (b - a).cross(c - a).norm();
    cum_area[t] = total;
  }
  if (total <= 0.0) throw std::invalid_argument("mesh has zero surface area");

  PointCloud out(3, n);
  CounterRng rng(seed);
  for (int i = 0; i < n; ++i) {
    // Cumulative-area inversion picks the triangle, then uniform barycentric.
    const double u = rng.uniform() * total;
    const int t = static_cast<int>(
        std::lower_bound(cum_area.begin(), cum_area.end(), u) -
        cum_area.begin());
    const int tc = std::min(t, tri_count - 1);
    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    const Vector3 a = mesh.V.col(mesh.F(0, tc));
    const Vector3 b = mesh.V.col(mesh.F(1, tc));
    const Vector3 c = mesh.V.col(mesh.F(2, tc));
    out.col(i) = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c;
  }
  return out;
}

PointCloud sample_surface(const TriangleMesh& mesh, const OrientedBox& box,
                          double m, uint64_t seed) {
  if (m <= 0.0) throw std::invalid_argument("sample density must be positive");
  return sample_surface_n(mesh, sample_count(box, m), seed);
}

KdIndex::KdIndex(const Eigen::Ref<const PointCloud>& cloud) : points_(cloud) {
  if (points_.cols() == 0)
    throw std::invalid_argument("empty cloud");
  order_.resize(points_.cols());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.cols() / 8 + 4);
  root_ = build(0, static_cast<int>(points_.cols()));
}

int KdIndex::build(int begin, int end) {
  constexpr int kLeafSize = 12;
  const int idx = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[idx].begin = begin;
    nodes_[idx].end = end;
    return idx;
  }
  // Split on the widest axis at the median.
  Vector3 lo = points_.col(order_[begin]);
  Vector3 hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_.col(order_[i]));
    hi = hi.cwiseMax(points_.col(order_[i]));
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     return points_(axis, a) < points_(axis, b);
                   });
  nodes_[idx].axis = axis;
  nodes_[idx].split = points_(axis, order_[mid]);
  const int l = build(begin, mid);
  const int r = build(mid, end);
  nodes_[idx].left = l;
  nodes_[idx].right = r;
  return idx;
}

void KdIndex::search(int node, const Vector3& q, int& best,
                     double& best_sq) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const double d = (points_.col(order_[i]) - q).squaredNorm();
      if (d < best_sq) {
        best_sq = d;
        best = order_[i];
      }
    }
    return;
  }
  const double delta = q[n.axis] - n.split;
  const int near_child = delta < 0.0 ? n.left : n.right;
  const int far_child = delta < 0.0 ? n.right : n.left;
  search(near_child, q, best, best_sq);
  if (delta * delta < best_sq) search(far_child, q, best, best_sq);
}

std::pair<int, double> KdIndex::nearest(const Vector3& q) const {
  int best = -1;
  double best_sq = std::numeric_limits<double>::infinity();
  search(root_, q, best, best_sq);
  return {best, std::sqrt(best_sq)};
}

double single_direction_chamfer(const Eigen::Ref<const PointCloud>& P,
                                const KdIndex& q_index) {
  if (P.cols() == 0) throw std::invalid_argument("empty cloud");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < P.cols(); ++i)
    sum += q_index.nearest_distance(P.col(i));
  return sum / static_cast<double>(P.cols());
}

double single_direction_chamfer(const Eigen::Ref<const PointCloud>& P,
                                const Eigen::Ref<const PointCloud>& Q) {
  KdIndex index(Q);
  return single_direction_chamfer(P, index);
}

double chamfer(const Eigen::Ref<const PointCloud>& P,
               const Eigen::Ref<const PointCloud>& Q) {
  return single_direction_chamfer(P, Q) + single_direction_chamfer(Q, P);
}

}  // namespace hoc::geom
