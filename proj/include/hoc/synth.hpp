#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hoc/database.hpp"
#include "hoc/objective.hpp"
#include "hoc/render.hpp"
#include "hoc/types.hpp"

namespace hoc::synth {

enum class ShapeFamily { Box, Cylinder, TableLike, ChairLike, ShelfLike };

ShapeFamily parse_family(const std::string& name);  // box|cylinder|table|chair|shelf
std::string family_name(ShapeFamily family);

// Raw parametric instance, not yet canonicalized. Triangle soup; every family
// produces positive extents for any seed.
TriangleMesh make_family_mesh(ShapeFamily family, uint64_t seed);

// Deterministic database: families assigned round-robin over `count` shapes,
// meshes canonicalized, default surface samples and descriptors precomputed.
ShapeDatabase gen_database(const std::vector<ShapeFamily>& families, int count,
                           uint64_t seed);

// Ground-truth placement plus acquisition parameters. The pose is expected to
// rotate about z only; otherwise the recorded box cannot represent it.
struct SceneSpec {
  int shape_id = -1;
  Pose pose;
  int cameras = 14;
  double ring_radius = 2.5;
  double sigma = 0.0;      // depth noise stddev, meters
  double occluders = 0.0;  // fraction of cameras with a box in their line of sight
  double dropout = 0.0;    // target cloud thinning fraction
  uint64_t seed = 0;

  bool valid() const {
    return shape_id >= 0 && pose.valid() && cameras >= 1 && ring_radius > 0 &&
           sigma >= 0 && occluders >= 0 && occluders < 1 && dropout >= 0 &&
           dropout < 1;
  }
};

struct GeneratedScene {
  objective::Scene scene;  // scene.box starts as the exact ground-truth box
  SceneSpec spec;
  OrientedBox gt_box;
};

// Cameras on a ring around the box center, floor and walls as background,
// optional static occluder boxes between cameras and the target. The scan is
// the ground-truth render composited over the background; the sensor adds
// N(0, sigma^2) to valid scan pixels; the target cloud back-projects the
// target-mask pixels of the sensor depth, thinned by the dropout fraction.
GeneratedScene gen_scene(const ShapeDatabase& db, const SceneSpec& spec);

// Uniform perturbations: yaw within +-yaw_max_deg, center per axis within
// +-trans_frac * extent, extents scaled per axis by [1-scale_frac,
// 1+scale_frac]. Axis-aligned mode zeroes the output yaw entirely.
OrientedBox perturb_box(const OrientedBox& box, double yaw_max_deg,
                        double trans_frac, double scale_frac, bool axis_aligned,
                        uint64_t seed);

// Rigid look-at frame for the render camera convention (+z forward, y down).
Eigen::Matrix4d look_at(const Vector3& eye, const Vector3& target);

// Directory layout: scene.json + frames/*.f32(+.json)/*.pbm + target.xyz.
// Depth maps round-trip bit-exactly.
void save_scene(const GeneratedScene& gs, const std::filesystem::path& dir);
GeneratedScene load_scene(const std::filesystem::path& dir);

}  // namespace hoc::synth
