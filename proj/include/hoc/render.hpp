#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "hoc/types.hpp"

namespace hoc::render {

// Pinhole camera. world_to_cam is rigid; the camera looks along +z with x
// right and y down, so a world point X maps to pixel
//   u = fx * Xc.x / Xc.z + cx,  v = fy * Xc.y / Xc.z + cy.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Eigen::Matrix4d world_to_cam = Eigen::Matrix4d::Identity();
  double near_z = 0.1, far_z = 100.0;

  bool valid(double tol = 1e-9) const;
  Eigen::Matrix4d cam_to_world() const;

  // Back-project pixel (ix, iy) at camera depth d to a world point, using the
  // pixel-center convention of the rasterizer.
  Vector3 unproject(int ix, int iy, double d) const;
};

// Per-pixel depth in meters, row-major, NaN marking invalid pixels.
struct DepthMap {
  int width = 0, height = 0;
  std::vector<float> depth;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h),
        depth(static_cast<size_t>(w) * h,
              std::numeric_limits<float>::quiet_NaN()) {}

  float& at(int x, int y) { return depth[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return depth[static_cast<size_t>(y) * width + x]; }
  bool valid(int x, int y) const { return std::isfinite(at(x, y)); }
  size_t size() const { return depth.size(); }
};

struct Mask {
  int width = 0, height = 0;
  std::vector<uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {}

  uint8_t& at(int x, int y) { return bits[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x]; }
  size_t count() const;
  bool operator==(const Mask& other) const = default;
};

// Z-buffer rasterization of the posed mesh. No back-face culling, pixel-center
// sampling, triangles clipped at the near plane, fragments beyond far_z
// rejected. The mask marks covered pixels. Deterministic: triangles in order,
// pixels row-major.
std::pair<DepthMap, Mask> rasterize(const TriangleMesh& mesh, const Pose& pose,
                                    const Camera& cam);

// Per pixel: min of the valid depths; invalid only if both inputs are.
DepthMap composite_min(const DepthMap& a, const DepthMap& b);

// Pixels where `candidate` survives the z-test against `background`:
// candidate valid and (background invalid or candidate <= background).
// This is the silhouette a candidate would show in the composited scene.
Mask winner_mask(const DepthMap& background, const DepthMap& candidate);

// |a AND b| / |a OR b|; 1.0 when both masks are empty.
double silhouette_iou(const Mask& a, const Mask& b);

// File formats: raw little-endian float32 row-major (invalid = NaN) with a
// JSON sidecar {width, height, near, far} at path + ".json"; masks as PBM P4.
void save_depth(const DepthMap& map, const std::filesystem::path& path,
                double near_z, double far_z);
DepthMap load_depth(const std::filesystem::path& path);
void save_mask(const Mask& mask, const std::filesystem::path& path);
Mask load_mask(const std::filesystem::path& path);

}  // namespace hoc::render
