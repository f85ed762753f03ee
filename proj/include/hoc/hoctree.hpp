#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hoc/database.hpp"
#include "hoc/objective.hpp"
#include "hoc/types.hpp"

namespace hoc::tree {

enum class NodeKind : uint8_t { Root, Category, Pose, Cluster, Leaf };

// Property nodes (category, pose) above per-group cluster trees, flattened
// into one array. Children always follow their parent, so child lists are
// ascending and reconstructible from parent indices alone.
struct HocNode {
  NodeKind kind = NodeKind::Root;
  int parent = -1;
  std::vector<int> children;
  int shape_id = -1;     // Leaf
  int centroid = -1;     // Pose/Cluster/Leaf: member nearest the cluster mean
  int angle_index = -1;  // Pose and all its descendants
  std::string label;     // Category

  // Search statistics. score starts at -inf so any evaluation dominates.
  int64_t visits = 0;
  double score = -std::numeric_limits<double>::infinity();
  bool locked = false;
};

struct HocTree {
  std::vector<double> pose_angles_deg;
  std::vector<std::string> categories;  // group labels; {""} without the level
  bool with_category_level = false;
  int k = 5;
  std::string db_dir;  // where the database lives, for CLI convenience
  std::vector<HocNode> nodes;  // nodes[0] is the root

  int leaf_count() const;
  // Descent decisions per pose-angle branch: the category pick when that
  // level exists, plus cluster levels below a pose node (leaf-only = 1).
  int cluster_depth() const;
  void reset_stats();
};

// Cluster topology is computed once per group and stamped under each pose
// node with independent statistics. A pose node adopts the cluster root's
// children; a single-shape group hangs its leaf directly under the pose node.
HocTree build_tree(const ShapeDatabase& db,
                   const std::vector<double>& pose_angles_deg,
                   bool with_category_level, int k, uint64_t seed);

// Box-derived 9-DOF pose: per-axis scale box.extents / record.extents,
// rotation (0, 0, box.yaw + angle), translation to the box center. The posed
// canonical model's bounding box reproduces the proposal exactly.
Pose box_pose(const ShapeRecord& record, const OrientedBox& box, double angle_deg);

// Sampling seed for a candidate's fresh surface points, a function of the
// shape and the pose angle value only, so identical candidates get identical
// seeds no matter which angle list produced them.
uint64_t candidate_sample_seed(int shape_id, double angle_deg);

objective::Candidate candidate_of(const HocTree& tree, int leaf_index,
                                  const ShapeDatabase& db, const OrientedBox& box);

// Versioned JSON: {version, k, with_category_level, pose_angles, categories,
// db, nodes}. Node scores of -inf serialize as null. Malformed input raises
// a descriptive error (with byte offset for syntax errors); a version
// mismatch raises "unsupported version".
std::string serialize(const HocTree& tree);
HocTree deserialize(const std::string& bytes);
void save_tree(const HocTree& tree, const std::string& path);
HocTree load_tree(const std::string& path);

}  // namespace hoc::tree
