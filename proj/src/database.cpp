#include "hoc/database.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "hoc/mesh_io.hpp"
#include "hoc/shapedesc.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace hoc {

const ShapeRecord* ShapeDatabase::find(int id) const {
  const auto it = std::lower_bound(
      shapes.begin(), shapes.end(), id,
      [](const ShapeRecord& r, int want) { return r.id < want; });
  return (it != shapes.end() && it->id == id) ? &*it : nullptr;
}

const ShapeRecord& ShapeDatabase::at(int id) const {
  const ShapeRecord* r = find(id);
  if (!r) throw std::out_of_range("unknown shape id " + std::to_string(id));
  return *r;
}

std::vector<int> ShapeDatabase::all_ids() const {
  std::vector<int> out;
  out.reserve(shapes.size());
  for (const auto& s : shapes) out.push_back(s.id);
  return out;
}

std::vector<std::string> ShapeDatabase::categories() const {
  std::set<std::string> labels;
  for (const auto& s : shapes) labels.insert(s.category);
  return {labels.begin(), labels.end()};
}

std::vector<int> ShapeDatabase::ids_of(const std::string& category) const {
  std::vector<int> out;
  for (const auto& s : shapes)
    if (s.category == category) out.push_back(s.id);
  return out;
}

Eigen::MatrixXd ShapeDatabase::descriptor_matrix(const std::vector<int>& ids) const {
  Eigen::MatrixXd m(desc::kDescriptorDims, static_cast<Eigen::Index>(ids.size()));
  for (size_t i = 0; i < ids.size(); ++i) {
    const ShapeRecord& r = at(ids[i]);
    if (r.descriptor.size() != desc::kDescriptorDims)
      throw std::runtime_error("shape " + std::to_string(r.id) + " has no descriptor");
    m.col(static_cast<Eigen::Index>(i)) = r.descriptor;
  }
  return m;
}

void ShapeDatabase::normalize() {
  std::sort(shapes.begin(), shapes.end(),
            [](const ShapeRecord& a, const ShapeRecord& b) { return a.id < b.id; });
  for (size_t i = 1; i < shapes.size(); ++i)
    if (shapes[i].id == shapes[i - 1].id)
      throw std::runtime_error("duplicate shape id " + std::to_string(shapes[i].id));
}

Vector3 canonicalize(TriangleMesh& mesh) {
  if (mesh.empty()) throw std::invalid_argument("empty mesh");
  const Vector3 lo = mesh.V.rowwise().minCoeff();
  const Vector3 hi = mesh.V.rowwise().maxCoeff();
  const Vector3 ext = hi - lo;
  const double max_ext = ext.maxCoeff();
  if (!(max_ext > 0)) throw std::invalid_argument("degenerate mesh extents");
  const Vector3 center = 0.5 * (lo + hi);
  mesh.V = (mesh.V.colwise() - center) / max_ext;
  return ext / max_ext;
}

namespace {

std::string shape_stem(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d", id);
  return buf;
}

}  // namespace

void save_database(const ShapeDatabase& db, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "meshes");
  fs::create_directories(fs::path(dir) / "samples");

  nlohmann::json root;
  root["version"] = 1;
  auto& arr = root["shapes"] = nlohmann::json::array();
  std::vector<int> ids;
  Eigen::MatrixXd descriptors(desc::kDescriptorDims,
                              static_cast<Eigen::Index>(db.shapes.size()));
  for (size_t i = 0; i < db.shapes.size(); ++i) {
    const ShapeRecord& s = db.shapes[i];
    const std::string stem = shape_stem(s.id);
    const std::string mesh_rel = "meshes/" + stem + ".obj";
    const std::string samples_rel = "samples/" + stem + ".xyz";
    io::save_obj(s.mesh, fs::path(dir) / mesh_rel);
    io::save_xyz(s.samples, fs::path(dir) / samples_rel);
    arr.push_back({{"id", s.id},
                   {"category", s.category},
                   {"extents", {s.extents.x(), s.extents.y(), s.extents.z()}},
                   {"mesh", mesh_rel},
                   {"samples", samples_rel}});
    ids.push_back(s.id);
    descriptors.col(static_cast<Eigen::Index>(i)) = s.descriptor;
  }
  desc::save_descriptors((fs::path(dir) / "descriptors.json").string(), ids,
                         descriptors);

  std::ofstream out(fs::path(dir) / "db.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + dir + "/db.json");
  out << root.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + dir + "/db.json");
}

ShapeDatabase load_database(const std::string& dir) {
  const std::string db_path = (fs::path(dir) / "db.json").string();
  std::ifstream in(db_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + db_path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(db_path + ": " + e.what());
  }
  if (!root.contains("version") || root["version"].get<int>() != 1)
    throw std::runtime_error(db_path + ": unsupported version");

  ShapeDatabase db;
  for (const auto& entry : root["shapes"]) {
    ShapeRecord s;
    s.id = entry["id"].get<int>();
    s.category = entry["category"].get<std::string>();
    const auto& e = entry["extents"];
    s.extents = Vector3(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
    s.mesh = io::load_obj(fs::path(dir) / entry["mesh"].get<std::string>());
    s.mesh.category = s.category;
    s.samples = io::load_xyz(fs::path(dir) / entry["samples"].get<std::string>());
    db.shapes.push_back(std::move(s));
  }
  db.normalize();

  const auto [ids, vectors] =
      desc::load_descriptors((fs::path(dir) / "descriptors.json").string());
  for (size_t i = 0; i < ids.size(); ++i) {
    auto it = std::lower_bound(
        db.shapes.begin(), db.shapes.end(), ids[i],
        [](const ShapeRecord& r, int want) { return r.id < want; });
    if (it == db.shapes.end() || it->id != ids[i])
      throw std::runtime_error(dir + ": descriptor for unknown shape id " +
                               std::to_string(ids[i]));
    it->descriptor = vectors.col(static_cast<Eigen::Index>(i));
  }
  for (const auto& s : db.shapes)
    if (s.descriptor.size() != desc::kDescriptorDims)
      throw std::runtime_error(dir + ": missing descriptor for shape id " +
                               std::to_string(s.id));
  return db;
}

}  // namespace hoc
