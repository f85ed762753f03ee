#include "hoc/mesh_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hoc::io {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& msg) {
  throw std::runtime_error(path.string() + ": " + msg);
}

int parse_face_index(const std::string& token, int vertex_count,
                     const std::filesystem::path& path) {
  // "3", "3/1", "3//2", "3/1/2" all address vertex 3 (1-based).
  const size_t slash = token.find('/');
  const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
  int idx = 0;
  try {
    idx = std::stoi(head);
  } catch (const std::exception&) {
    fail(path, "bad face index '" + token + "'");
  }
  if (idx < 0) idx = vertex_count + idx + 1;  // negative = relative
  if (idx < 1 || idx > vertex_count)
    fail(path, "face index out of range: " + token);
  return idx - 1;
}

}  // namespace

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");

  std::vector<Vector3> vertices;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vector3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) fail(path, "bad vertex line: " + line);
      vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string token;
      while (ls >> token)
        poly.push_back(parse_face_index(token, static_cast<int>(vertices.size()), path));
      if (poly.size() < 3) fail(path, "face with fewer than 3 vertices");
      for (size_t i = 1; i + 1 < poly.size(); ++i)
        faces.push_back({poly[0], poly[i], poly[i + 1]});
    }
    // Anything else (vn, vt, comments, groups) is ignored.
  }

  TriangleMesh mesh;
  mesh.V.resize(3, vertices.size());
  for (size_t i = 0; i < vertices.size(); ++i) mesh.V.col(i) = vertices[i];
  mesh.F.resize(3, faces.size());
  for (size_t i = 0; i < faces.size(); ++i) mesh.F.col(i) = faces[i];
  return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  char buf[128];
  for (Eigen::Index i = 0; i < mesh.V.cols(); ++i) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", mesh.V(0, i),
                  mesh.V(1, i), mesh.V(2, i));
    out << buf;
  }
  for (Eigen::Index i = 0; i < mesh.F.cols(); ++i)
    out << "f " << mesh.F(0, i) + 1 << ' ' << mesh.F(1, i) + 1 << ' '
        << mesh.F(2, i) + 1 << '\n';
  if (!out) fail(path, "write failed");
}

PointCloud load_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  std::vector<Vector3> pts;
  double x, y, z;
  while (in >> x >> y >> z) pts.push_back({x, y, z});
  PointCloud cloud(3, pts.size());
  for (size_t i = 0; i < pts.size(); ++i) cloud.col(i) = pts[i];
  return cloud;
}

void save_xyz(const Eigen::Ref<const PointCloud>& cloud,
              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  char buf[128];
  for (Eigen::Index i = 0; i < cloud.cols(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", cloud(0, i),
                  cloud(1, i), cloud(2, i));
    out << buf;
  }
  if (!out) fail(path, "write failed");
}

}  // namespace hoc::io
