#include "hoc/render.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace hoc::render {

bool Camera::valid(double tol) const {
  if (!(fx > 0.0) || !(fy > 0.0) || width <= 0 || height <= 0) return false;
  if (!(0.0 < near_z && near_z < far_z)) return false;
  const Eigen::Matrix3d r = world_to_cam.topLeftCorner<3, 3>();
  if ((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() > tol) return false;
  if (std::abs(r.determinant() - 1.0) > tol) return false;
  if (world_to_cam.row(3) != Eigen::RowVector4d(0, 0, 0, 1)) return false;
  return true;
}

Eigen::Matrix4d Camera::cam_to_world() const {
  const Eigen::Matrix3d r = world_to_cam.topLeftCorner<3, 3>();
  const Vector3 t = world_to_cam.topRightCorner<3, 1>();
  Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
  inv.topLeftCorner<3, 3>() = r.transpose();
  inv.topRightCorner<3, 1>() = -r.transpose() * t;
  return inv;
}

Vector3 Camera::unproject(int ix, int iy, double d) const {
  const double xc = (ix + 0.5 - cx) / fx * d;
  const double yc = (iy + 0.5 - cy) / fy * d;
  const Eigen::Vector4d cam(xc, yc, d, 1.0);
  return (cam_to_world() * cam).head<3>();
}

size_t Mask::count() const {
  size_t n = 0;
  for (uint8_t b : bits) n += b != 0;
  return n;
}

namespace {

// Clip a camera-space polygon against the plane z = near (keep z >= near).
// Sutherland-Hodgman; a triangle yields at most 4 vertices.
int clip_near(const Vector3* in, int n, double near_z, Vector3* out) {
  int m = 0;
  for (int i = 0; i < n; ++i) {
    const Vector3& a = in[i];
    const Vector3& b = in[(i + 1) % n];
    const bool a_in = a.z() >= near_z;
    const bool b_in = b.z() >= near_z;
    if (a_in) out[m++] = a;
    if (a_in != b_in) {
      const double t = (near_z - a.z()) / (b.z() - a.z());
      out[m++] = a + t * (b - a);
    }
  }
  return m;
}

void raster_triangle(const Vector3& a, const Vector3& b, const Vector3& c,
                     const Camera& cam, DepthMap& depth, Mask& mask) {
  // Projected positions and inverse depths; z >= near guaranteed by clipping.
  const double za = a.z(), zb = b.z(), zc = c.z();
  const Eigen::Vector2d pa(cam.fx * a.x() / za + cam.cx, cam.fy * a.y() / za + cam.cy);
  const Eigen::Vector2d pb(cam.fx * b.x() / zb + cam.cx, cam.fy * b.y() / zb + cam.cy);
  const Eigen::Vector2d pc(cam.fx * c.x() / zc + cam.cx, cam.fy * c.y() / zc + cam.cy);

  const double area = (pb - pa).x() * (pc - pa).y() - (pb - pa).y() * (pc - pa).x();
  if (area == 0.0) return;

  const int x0 = std::max(0, static_cast<int>(std::floor(std::min({pa.x(), pb.x(), pc.x()}))));
  const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({pa.x(), pb.x(), pc.x()}))));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min({pa.y(), pb.y(), pc.y()}))));
  const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({pa.y(), pb.y(), pc.y()}))));

  const double inv_za = 1.0 / za, inv_zb = 1.0 / zb, inv_zc = 1.0 / zc;
  for (int iy = y0; iy <= y1; ++iy) {
    for (int ix = x0; ix <= x1; ++ix) {
      const Eigen::Vector2d p(ix + 0.5, iy + 0.5);
      // Barycentric in screen space; inclusive edges (no back-face culling,
      // so accept either orientation).
      const double w0 = (pb - p).x() * (pc - p).y() - (pb - p).y() * (pc - p).x();
      const double w1 = (pc - p).x() * (pa - p).y() - (pc - p).y() * (pa - p).x();
      const double w2 = (pa - p).x() * (pb - p).y() - (pa - p).y() * (pb - p).x();
      const bool inside = (w0 >= 0 && w1 >= 0 && w2 >= 0) ||
                          (w0 <= 0 && w1 <= 0 && w2 <= 0);
      if (!inside) continue;
      const double b0 = w0 / area, b1 = w1 / area, b2 = w2 / area;
      // Perspective-correct depth: 1/z is affine in screen space.
      const double inv_z = b0 * inv_za + b1 * inv_zb + b2 * inv_zc;
      if (inv_z <= 0.0) continue;
      const double z = 1.0 / inv_z;
      if (z < cam.near_z || z > cam.far_z) continue;
      const float zf = static_cast<float>(z);
      float& d = depth.at(ix, iy);
      if (!(zf >= d)) {  // NaN-aware: write when invalid or nearer
        d = zf;
        mask.at(ix, iy) = 1;
      }
    }
  }
}

}  // namespace

std::pair<DepthMap, Mask> rasterize(const TriangleMesh& mesh, const Pose& pose,
                                    const Camera& cam) {
  if (!cam.valid()) throw std::invalid_argument("invalid camera");
  DepthMap depth(cam.width, cam.height);
  Mask mask(cam.width, cam.height);
  if (mesh.empty()) return {std::move(depth), std::move(mask)};

  const Eigen::Affine3d obj_to_world = pose.transform();
  const Eigen::Matrix4d w2c = cam.world_to_cam;
  Eigen::Matrix4d obj_to_cam = w2c * obj_to_world.matrix();

  Eigen::Matrix3Xd cam_pts(3, mesh.V.cols());
  for (Eigen::Index i = 0; i < mesh.V.cols(); ++i) {
    const Eigen::Vector4d h = obj_to_cam * mesh.V.col(i).homogeneous();
    cam_pts.col(i) = h.head<3>();
  }

  Vector3 poly[3], clipped[4];
  for (Eigen::Index t = 0; t < mesh.F.cols(); ++t) {
    poly[0] = cam_pts.col(mesh.F(0, t));
    poly[1] = cam_pts.col(mesh.F(1, t));
    poly[2] = cam_pts.col(mesh.F(2, t));
    const int n = clip_near(poly, 3, cam.near_z, clipped);
    for (int i = 1; i + 1 < n; ++i)
      raster_triangle(clipped[0], clipped[i], clipped[i + 1], cam, depth, mask);
  }
  return {std::move(depth), std::move(mask)};
}

DepthMap composite_min(const DepthMap& a, const DepthMap& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("depth map dimension mismatch");
  DepthMap out(a.width, a.height);
  for (size_t i = 0; i < out.size(); ++i) {
    const float da = a.depth[i], db = b.depth[i];
    const bool va = std::isfinite(da), vb = std::isfinite(db);
    if (va && vb)
      out.depth[i] = std::min(da, db);
    else if (va)
      out.depth[i] = da;
    else if (vb)
      out.depth[i] = db;
  }
  return out;
}

Mask winner_mask(const DepthMap& background, const DepthMap& candidate) {
  if (background.width != candidate.width || background.height != candidate.height)
    throw std::invalid_argument("depth map dimension mismatch");
  Mask out(candidate.width, candidate.height);
  for (size_t i = 0; i < candidate.depth.size(); ++i) {
    const float dc = candidate.depth[i], dbg = background.depth[i];
    if (std::isfinite(dc) && (!std::isfinite(dbg) || dc <= dbg))
      out.bits[i] = 1;
  }
  return out;
}

double silhouette_iou(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("mask dimension mismatch");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.bits.size(); ++i) {
    const bool ba = a.bits[i] != 0, bb = b.bits[i] != 0;
    inter += ba && bb;
    uni += ba || bb;
  }
  if (uni == 0) return 1.0;  // no pixels claimed by either: no disagreement
  return static_cast<double>(inter) / static_cast<double>(uni);
}

void save_depth(const DepthMap& map, const std::filesystem::path& path,
                double near_z, double far_z) {
  nlohmann::json sidecar = {{"width", map.width},
                            {"height", map.height},
                            {"near", near_z},
                            {"far", far_z}};
  std::ofstream js(path.string() + ".json");
  js << sidecar.dump(2) << '\n';
  std::ofstream raw(path, std::ios::binary);
  if (!raw) throw std::runtime_error(path.string() + ": cannot open for writing");
  raw.write(reinterpret_cast<const char*>(map.depth.data()),
            static_cast<std::streamsize>(map.depth.size() * sizeof(float)));
  if (!raw) throw std::runtime_error(path.string() + ": write failed");
}

DepthMap load_depth(const std::filesystem::path& path) {
  std::ifstream js(path.string() + ".json");
  if (!js) throw std::runtime_error(path.string() + ".json: cannot open");
  const nlohmann::json sidecar = nlohmann::json::parse(js);
  DepthMap map(sidecar.at("width").get<int>(), sidecar.at("height").get<int>());
  std::ifstream raw(path, std::ios::binary);
  if (!raw) throw std::runtime_error(path.string() + ": cannot open");
  raw.read(reinterpret_cast<char*>(map.depth.data()),
           static_cast<std::streamsize>(map.depth.size() * sizeof(float)));
  if (raw.gcount() != static_cast<std::streamsize>(map.depth.size() * sizeof(float)))
    throw std::runtime_error(path.string() + ": truncated depth file");
  return map;
}

void save_mask(const Mask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << "P4\n" << mask.width << ' ' << mask.height << '\n';
  const int row_bytes = (mask.width + 7) / 8;
  std::vector<uint8_t> row(row_bytes);
  for (int y = 0; y < mask.height; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y)) row[x / 8] |= static_cast<uint8_t>(0x80u >> (x % 8));
    out.write(reinterpret_cast<const char*>(row.data()), row_bytes);
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Mask load_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::string magic;
  int w = 0, h = 0;
  in >> magic >> w >> h;
  if (magic != "P4" || w <= 0 || h <= 0)
    throw std::runtime_error(path.string() + ": not a P4 PBM file");
  in.get();  // single whitespace after header
  Mask mask(w, h);
  const int row_bytes = (w + 7) / 8;
  std::vector<uint8_t> row(row_bytes);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), row_bytes);
    if (in.gcount() != row_bytes)
      throw std::runtime_error(path.string() + ": truncated PBM file");
    for (int x = 0; x < w; ++x)
      mask.at(x, y) = (row[x / 8] >> (7 - x % 8)) & 1u;
  }
  return mask;
}

}  // namespace hoc::render
