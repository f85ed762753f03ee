#pragma once

#include <string>
#include <vector>

#include "hoc/types.hpp"

namespace hoc {

// One database entry. Meshes are stored canonically: AABB centered at the
// origin and uniformly scaled so the widest extent is 1, with `extents`
// holding the canonical AABB size. A box proposal then maps to a 9-DOF pose
// by scale = box.extents / extents, yaw rotation, and translation to center.
struct ShapeRecord {
  int id = -1;
  std::string category;
  TriangleMesh mesh;
  Vector3 extents = Vector3::Ones();
  Eigen::VectorXd descriptor;
  PointCloud samples;  // pre-sampled canonical surface points
};

struct ShapeDatabase {
  std::vector<ShapeRecord> shapes;  // ascending unique ids

  const ShapeRecord* find(int id) const;  // nullptr when absent
  const ShapeRecord& at(int id) const;    // throws when absent
  bool empty() const { return shapes.empty(); }
  int size() const { return static_cast<int>(shapes.size()); }

  std::vector<int> all_ids() const;
  std::vector<std::string> categories() const;            // distinct, sorted
  std::vector<int> ids_of(const std::string& category) const;

  // Descriptor columns for the given ids, in the given order.
  Eigen::MatrixXd descriptor_matrix(const std::vector<int>& ids) const;

  // Sorts by id and rejects duplicates. Called by generators and loaders.
  void normalize();
};

// Centers the mesh AABB at the origin and scales the widest extent to 1.
// Returns the canonical extents. Throws on empty or degenerate meshes.
Vector3 canonicalize(TriangleMesh& mesh);

// Directory layout: db.json (version, shape table), descriptors.json,
// meshes/NNNN.obj, samples/NNNN.xyz.
void save_database(const ShapeDatabase& db, const std::string& dir);
ShapeDatabase load_database(const std::string& dir);

}  // namespace hoc
