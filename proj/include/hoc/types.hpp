#pragma once

#include <Eigen/Dense>
#include <string>

namespace hoc {

using Vector3 = Eigen::Vector3d;

// Point cloud as a dense 3xN matrix, one point per column.
using PointCloud = Eigen::Matrix3Xd;

// Triangle soup. Columns of F index columns of V. The category label is
// carried by database meshes and empty otherwise.
struct TriangleMesh {
  Eigen::Matrix3Xd V;
  Eigen::Matrix3Xi F;
  std::string category;

  bool empty() const { return F.cols() == 0; }
};

// Rotation matrix for Euler XYZ angles (rx, ry, rz): R = Rz * Ry * Rx.
// With rx = ry = 0 this reduces to a yaw about the vertical +z axis, the
// convention used everywhere in this project.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> euler_xyz_to_matrix(
    const Eigen::Matrix<Scalar, 3, 1>& r) {
  using std::cos;
  using std::sin;
  Eigen::Matrix<Scalar, 3, 3> rx, ry, rz;
  rx << Scalar(1), Scalar(0), Scalar(0),
        Scalar(0), cos(r.x()), -sin(r.x()),
        Scalar(0), sin(r.x()), cos(r.x());
  ry << cos(r.y()), Scalar(0), sin(r.y()),
        Scalar(0), Scalar(1), Scalar(0),
        -sin(r.y()), Scalar(0), cos(r.y());
  rz << cos(r.z()), -sin(r.z()), Scalar(0),
        sin(r.z()), cos(r.z()), Scalar(0),
        Scalar(0), Scalar(0), Scalar(1);
  return rz * ry * rx;
}

// 9-DOF pose: per-axis scale, Euler XYZ rotation, translation.
// Applied as p' = R * (scale .* p) + t  (scale, then rotate, then translate).
struct Pose {
  Vector3 scale = Vector3::Ones();
  Vector3 rotation = Vector3::Zero();    // radians
  Vector3 translation = Vector3::Zero(); // meters

  Eigen::Matrix3d rotation_matrix() const {
    return euler_xyz_to_matrix<double>(rotation);
  }

  // Full affine transform (not rigid when scale != 1).
  Eigen::Affine3d transform() const {
    Eigen::Affine3d t = Eigen::Affine3d::Identity();
    t.linear() = rotation_matrix() * scale.asDiagonal();
    t.translation() = translation;
    return t;
  }

  bool valid() const {
    return scale.minCoeff() > 0.0 && scale.allFinite() &&
           rotation.allFinite() && translation.allFinite();
  }
};

// Box proposal for a target object: center, full extents along the box axes,
// and a yaw about the vertical +z axis.
struct OrientedBox {
  Vector3 center = Vector3::Zero();
  Vector3 extents = Vector3::Ones();  // meters, > 0
  double yaw = 0.0;                   // radians

  bool valid() const {
    return extents.minCoeff() > 0.0 && extents.allFinite() &&
           center.allFinite() && std::isfinite(yaw);
  }
};

inline double deg_to_rad(double deg) { return deg * M_PI / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / M_PI; }

}  // namespace hoc
