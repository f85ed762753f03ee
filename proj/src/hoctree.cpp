#include "hoc/hoctree.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hoc/rng.hpp"
#include "hoc/shapedesc.hpp"
#include "json.hpp"

namespace hoc::tree {

namespace {

constexpr uint64_t kSampleSeedBase = 0x9e3779b97f4a7c15ull;

int stamp(HocTree& t, const desc::ClusterTree& topo, int topo_index, int parent,
          int angle_index) {
  const desc::ClusterNode& src = topo.nodes[static_cast<size_t>(topo_index)];
  HocNode node;
  node.parent = parent;
  node.angle_index = angle_index;
  node.centroid = src.centroid;
  if (src.children.empty()) {
    node.kind = NodeKind::Leaf;
    node.shape_id = src.members.front();
  } else {
    node.kind = NodeKind::Cluster;
  }
  t.nodes.push_back(std::move(node));
  const int index = static_cast<int>(t.nodes.size()) - 1;
  for (int c : src.children) {
    const int child = stamp(t, topo, c, index, angle_index);
    t.nodes[static_cast<size_t>(index)].children.push_back(child);
  }
  return index;
}

}  // namespace

int HocTree::leaf_count() const {
  int out = 0;
  for (const auto& n : nodes)
    if (n.kind == NodeKind::Leaf) ++out;
  return out;
}

int HocTree::cluster_depth() const {
  // Levels below each pose node: level(pose) = 0, leaves count their
  // cluster ancestry. Children follow parents, so one forward pass works.
  // A category level adds one descent decision per branch.
  std::vector<int> level(nodes.size(), 0);
  int out = 0;
  bool has_categories = false;
  for (size_t i = 0; i < nodes.size(); ++i) {
    const HocNode& n = nodes[i];
    has_categories = has_categories || n.kind == NodeKind::Category;
    if (n.parent < 0) continue;
    if (n.kind == NodeKind::Cluster || n.kind == NodeKind::Leaf) {
      level[i] = level[static_cast<size_t>(n.parent)] + 1;
      out = std::max(out, level[i]);
    }
  }
  return out + (has_categories ? 1 : 0);
}

void HocTree::reset_stats() {
  for (auto& n : nodes) {
    n.visits = 0;
    n.score = -std::numeric_limits<double>::infinity();
    n.locked = false;
  }
}

HocTree build_tree(const ShapeDatabase& db,
                   const std::vector<double>& pose_angles_deg,
                   bool with_category_level, int k, uint64_t seed) {
  if (db.empty()) throw std::invalid_argument("empty database");
  if (pose_angles_deg.empty()) throw std::invalid_argument("no pose angles");

  HocTree t;
  t.pose_angles_deg = pose_angles_deg;
  t.with_category_level = with_category_level;
  t.k = k;
  t.categories = with_category_level ? db.categories()
                                     : std::vector<std::string>{""};
  t.nodes.push_back(HocNode{});  // root

  for (size_t g = 0; g < t.categories.size(); ++g) {
    const std::vector<int> ids =
        with_category_level ? db.ids_of(t.categories[g]) : db.all_ids();
    const Eigen::MatrixXd vectors = db.descriptor_matrix(ids);
    const desc::ClusterTree topo =
        desc::hierarchical_cluster(vectors, ids, k, derive_seed(seed, g));

    int group_parent = 0;
    if (with_category_level) {
      HocNode cat;
      cat.kind = NodeKind::Category;
      cat.parent = 0;
      cat.label = t.categories[g];
      cat.centroid = topo.nodes[0].centroid;
      t.nodes.push_back(std::move(cat));
      group_parent = static_cast<int>(t.nodes.size()) - 1;
      t.nodes[0].children.push_back(group_parent);
    }

    for (size_t a = 0; a < pose_angles_deg.size(); ++a) {
      HocNode pose;
      pose.kind = NodeKind::Pose;
      pose.parent = group_parent;
      pose.angle_index = static_cast<int>(a);
      pose.centroid = topo.nodes[0].centroid;
      t.nodes.push_back(std::move(pose));
      const int pose_index = static_cast<int>(t.nodes.size()) - 1;
      t.nodes[static_cast<size_t>(group_parent)].children.push_back(pose_index);

      if (topo.nodes[0].children.empty()) {
        // Single-shape group: the leaf hangs directly under the pose node.
        const int leaf = stamp(t, topo, 0, pose_index, static_cast<int>(a));
        t.nodes[static_cast<size_t>(pose_index)].children.push_back(leaf);
      } else {
        for (int c : topo.nodes[0].children) {
          const int child = stamp(t, topo, c, pose_index, static_cast<int>(a));
          t.nodes[static_cast<size_t>(pose_index)].children.push_back(child);
        }
      }
    }
  }
  return t;
}

Pose box_pose(const ShapeRecord& record, const OrientedBox& box, double angle_deg) {
  if (!(record.extents.minCoeff() > 0))
    throw std::invalid_argument("shape " + std::to_string(record.id) +
                                " has degenerate extents");
  Pose p;
  p.scale = box.extents.cwiseQuotient(record.extents);
  p.rotation = Vector3(0, 0, box.yaw + deg_to_rad(angle_deg));
  p.translation = box.center;
  return p;
}

uint64_t candidate_sample_seed(int shape_id, double angle_deg) {
  double a = std::fmod(angle_deg, 360.0);
  if (a < 0) a += 360.0;
  return derive_seed(kSampleSeedBase, static_cast<uint64_t>(shape_id),
                     static_cast<uint64_t>(std::llround(a * 1000.0)));
}

objective::Candidate candidate_of(const HocTree& tree, int leaf_index,
                                  const ShapeDatabase& db, const OrientedBox& box) {
  const HocNode& leaf = tree.nodes.at(static_cast<size_t>(leaf_index));
  if (leaf.kind != NodeKind::Leaf) throw std::invalid_argument("not a leaf node");
  const double angle =
      tree.pose_angles_deg.at(static_cast<size_t>(leaf.angle_index));
  objective::Candidate c;
  c.shape = &db.at(leaf.shape_id);
  c.pose = box_pose(*c.shape, box, angle);
  c.sample_seed = candidate_sample_seed(leaf.shape_id, angle);
  return c;
}

namespace {

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Root: return "root";
    case NodeKind::Category: return "category";
    case NodeKind::Pose: return "pose";
    case NodeKind::Cluster: return "cluster";
    case NodeKind::Leaf: return "leaf";
  }
  throw std::logic_error("bad node kind");
}

NodeKind kind_from(const std::string& s) {
  if (s == "root") return NodeKind::Root;
  if (s == "category") return NodeKind::Category;
  if (s == "pose") return NodeKind::Pose;
  if (s == "cluster") return NodeKind::Cluster;
  if (s == "leaf") return NodeKind::Leaf;
  throw std::runtime_error("unknown node kind \"" + s + "\"");
}

}  // namespace

std::string serialize(const HocTree& t) {
  nlohmann::json root;
  root["version"] = 1;
  root["k"] = t.k;
  root["with_category_level"] = t.with_category_level;
  root["pose_angles"] = t.pose_angles_deg;
  root["categories"] = t.categories;
  root["db"] = t.db_dir;
  auto& nodes = root["nodes"] = nlohmann::json::array();
  for (const HocNode& n : t.nodes) {
    nlohmann::json j;
    j["kind"] = kind_name(n.kind);
    j["parent"] = n.parent;
    if (n.kind == NodeKind::Category) j["label"] = n.label;
    if (n.angle_index >= 0) j["angle_index"] = n.angle_index;
    if (n.shape_id >= 0) j["shape"] = n.shape_id;
    if (n.centroid >= 0) j["centroid"] = n.centroid;
    j["visits"] = n.visits;
    if (std::isinf(n.score))
      j["score"] = nullptr;
    else
      j["score"] = n.score;
    j["locked"] = n.locked;
    nodes.push_back(std::move(j));
  }
  return root.dump();
}

HocTree deserialize(const std::string& bytes) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("tree parse error: ") + e.what());
  }
  if (!root.contains("version"))
    throw std::runtime_error("tree parse error: missing version");
  if (root["version"].get<int>() != 1)
    throw std::runtime_error("unsupported version " +
                             root["version"].dump());

  HocTree t;
  t.k = root.at("k").get<int>();
  t.with_category_level = root.at("with_category_level").get<bool>();
  t.pose_angles_deg = root.at("pose_angles").get<std::vector<double>>();
  t.categories = root.at("categories").get<std::vector<std::string>>();
  t.db_dir = root.value("db", std::string());

  const auto& nodes = root.at("nodes");
  t.nodes.reserve(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    const auto& j = nodes[i];
    HocNode n;
    n.kind = kind_from(j.at("kind").get<std::string>());
    n.parent = j.at("parent").get<int>();
    if ((i == 0) != (n.parent < 0))
      throw std::runtime_error("tree parse error: bad parent at node " +
                               std::to_string(i));
    if (n.parent >= static_cast<int>(i))
      throw std::runtime_error("tree parse error: forward parent at node " +
                               std::to_string(i));
    n.label = j.value("label", std::string());
    n.angle_index = j.value("angle_index", -1);
    n.shape_id = j.value("shape", -1);
    n.centroid = j.value("centroid", -1);
    n.visits = j.at("visits").get<int64_t>();
    n.score = j.at("score").is_null()
                  ? -std::numeric_limits<double>::infinity()
                  : j.at("score").get<double>();
    n.locked = j.at("locked").get<bool>();
    const int parent = n.parent;
    t.nodes.push_back(std::move(n));
    if (parent >= 0)
      t.nodes[static_cast<size_t>(parent)].children.push_back(static_cast<int>(i));
  }
  if (t.nodes.empty()) throw std::runtime_error("tree parse error: no nodes");
  return t;
}

void save_tree(const HocTree& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize(t) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

HocTree load_tree(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace hoc::tree
