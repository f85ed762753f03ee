#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "hoc/geometry.hpp"
#include "hoc/hoctree.hpp"
#include "hoc/objective.hpp"
#include "hoc/rng.hpp"
#include "hoc/synth.hpp"

using namespace hoc;
using namespace hoc::synth;
namespace fs = std::filesystem;

namespace {

const std::vector<ShapeFamily> kAllFamilies{
    ShapeFamily::Box, ShapeFamily::Cylinder, ShapeFamily::TableLike,
    ShapeFamily::ChairLike, ShapeFamily::ShelfLike};

bool same_mesh(const TriangleMesh& a, const TriangleMesh& b) {
  return a.V.cols() == b.V.cols() && a.F.cols() == b.F.cols() && a.V == b.V &&
         a.F == b.F;
}

SceneSpec basic_spec(int shape_id, int cameras = 4, uint64_t seed = 5) {
  SceneSpec spec;
  spec.shape_id = shape_id;
  spec.pose.scale = Vector3(0.9, 0.9, 0.9);
  spec.pose.rotation = Vector3(0, 0, 0.4);
  spec.pose.translation = Vector3(0.2, -0.1, 0.45);
  spec.cameras = cameras;
  spec.seed = seed;
  return spec;
}

objective::Candidate gt_candidate(const ShapeDatabase& db, const GeneratedScene& gs) {
  objective::Candidate c;
  c.shape = &db.at(gs.spec.shape_id);
  c.pose = tree::box_pose(*c.shape, gs.gt_box, 0.0);
  c.sample_seed = tree::candidate_sample_seed(gs.spec.shape_id, 0.0);
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("gen_database is deterministic and respects families") {
  const ShapeDatabase a = gen_database(kAllFamilies, 15, 42);
  const ShapeDatabase b = gen_database(kAllFamilies, 15, 42);
  REQUIRE(a.size() == 15);
  for (size_t i = 0; i < a.shapes.size(); ++i) {
    CHECK(a.shapes[i].id == static_cast<int>(i));
    CHECK(same_mesh(a.shapes[i].mesh, b.shapes[i].mesh));
    CHECK(a.shapes[i].descriptor == b.shapes[i].descriptor);
    CHECK(a.shapes[i].extents == b.shapes[i].extents);
  }

  const ShapeDatabase c = gen_database(kAllFamilies, 15, 43);
  bool any_diff = false;
  for (size_t i = 0; i < a.shapes.size(); ++i)
    any_diff = any_diff || !same_mesh(a.shapes[i].mesh, c.shapes[i].mesh);
  CHECK(any_diff);

  const ShapeDatabase chairs = gen_database({ShapeFamily::ChairLike}, 10, 1);
  for (const auto& s : chairs.shapes) CHECK(s.category == "chair");

  // Round-robin family assignment.
  CHECK(a.shapes[0].category == "box");
  CHECK(a.shapes[1].category == "cylinder");
  CHECK(a.shapes[5].category == "box");
}

TEST_CASE("generated shapes are canonical with sane geometry") {
  const ShapeDatabase db = gen_database(kAllFamilies, 20, 7);
  for (const auto& s : db.shapes) {
    REQUIRE(s.mesh.V.cols() >= 8);
    REQUIRE(s.mesh.F.cols() >= 12);
    CHECK(s.mesh.F.minCoeff() >= 0);
    CHECK(s.mesh.F.maxCoeff() < s.mesh.V.cols());

    const Vector3 mx = s.mesh.V.rowwise().maxCoeff();
    const Vector3 mn = s.mesh.V.rowwise().minCoeff();
    CHECK((mx + mn).norm() < 1e-12);                  // centered
    CHECK((mx - mn).maxCoeff() == doctest::Approx(1.0));  // max extent 1
    CHECK(((mx - mn) - s.extents).norm() < 1e-12);
    CHECK(s.extents.minCoeff() > 0);
    CHECK(s.samples.cols() == 4096);
    CHECK(s.descriptor.size() == 67);
  }
}

TEST_CASE("family parsing round-trips") {
  for (const ShapeFamily f : kAllFamilies) CHECK(parse_family(family_name(f)) == f);
  CHECK_THROWS_AS(parse_family("sofa"), std::invalid_argument);
}

TEST_CASE("scenes have the requested frames and an exact ground-truth box") {
  const ShapeDatabase db = gen_database(kAllFamilies, 5, 11);
  SceneSpec spec = basic_spec(3, 14);
  const GeneratedScene gs = gen_scene(db, spec);

  CHECK(gs.scene.frames.size() == 14);
  for (const auto& f : gs.scene.frames) {
    CHECK(f.camera.width == 96);
    CHECK(f.camera.height == 96);
    CHECK(f.camera.valid());
    CHECK(f.background_depth.width == 96);
    CHECK(f.target_mask.count() > 0);  // target visible from a ring camera
  }
  CHECK(gs.scene.target_points.cols() > 0);
  CHECK(gs.scene.category_hint == db.at(3).category);

  CHECK(gs.gt_box.center == spec.pose.translation);
  CHECK(gs.gt_box.yaw == spec.pose.rotation.z());
  CHECK((gs.gt_box.extents -
         spec.pose.scale.cwiseProduct(db.at(3).extents)).norm() < 1e-15);
  // The scene starts with the exact box as the proposal.
  CHECK(gs.scene.box.center == gs.gt_box.center);

  CHECK_THROWS_AS(gen_scene(db, basic_spec(99)), std::invalid_argument);
  SceneSpec bad = basic_spec(3);
  bad.dropout = 1.0;
  CHECK_THROWS_AS(gen_scene(db, bad), std::invalid_argument);
  bad = basic_spec(3);
  bad.sigma = -0.1;
  CHECK_THROWS_AS(gen_scene(db, bad), std::invalid_argument);
}

TEST_CASE("noiseless scenes are bit-exact self-consistent") {
  const ShapeDatabase db = gen_database(kAllFamilies, 5, 13);
  const GeneratedScene gs = gen_scene(db, basic_spec(2, 6));
  const objective::Candidate gt = gt_candidate(db, gs);

  // The ground-truth candidate pose reconstructed from the box equals the
  // spec pose, so its render composited over the background must reproduce
  // the scan exactly, including NaN patterns.
  CHECK((gt.pose.scale - gs.spec.pose.scale).norm() < 1e-15);
  for (const auto& f : gs.scene.frames) {
    const render::DepthMap cand =
        render::rasterize(gt.shape->mesh, gt.pose, f.camera).first;
    const render::DepthMap composite =
        render::composite_min(f.background_depth, cand);
    REQUIRE(composite.size() == f.scan_depth_with_target.size());
    CHECK(std::memcmp(composite.depth.data(), f.scan_depth_with_target.depth.data(),
                      composite.size() * sizeof(float)) == 0);
    CHECK(render::winner_mask(f.background_depth, cand) == f.target_mask);
    // sigma = 0: sensor equals scan bit for bit
    CHECK(std::memcmp(f.sensor_depth.depth.data(),
                      f.scan_depth_with_target.depth.data(),
                      composite.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("perfect evidence scores near zero under the full objective") {
  const ShapeDatabase db = gen_database(kAllFamilies, 5, 17);
  const GeneratedScene gs = gen_scene(db, basic_spec(0, 6));
  const objective::Candidate gt = gt_candidate(db, gs);
  const objective::ObjectiveWeights w;

  CHECK(objective::loss_depth(gt, gs.scene, w) == 0.0);
  CHECK(objective::loss_silhouette(gt, gs.scene) == 0.0);

  // The chamfer term cannot beat the fresh-sampling floor; measure it.
  const auto& mesh = gt.shape->mesh;
  const double eps = geom::single_direction_chamfer(
      geom::sample_surface_n(mesh, 10000, 1), geom::sample_surface_n(mesh, 10000, 2));
  CHECK(objective::loss_rac(gt, gs.scene, w) <= w.lambda_cd * eps * 2.0 + 1e-9);
}

TEST_CASE("dropout thins the target cloud by the requested fraction") {
  const ShapeDatabase db = gen_database(kAllFamilies, 5, 19);
  const GeneratedScene full = gen_scene(db, basic_spec(1, 6));
  SceneSpec spec = basic_spec(1, 6);
  spec.dropout = 0.5;
  const GeneratedScene half = gen_scene(db, spec);

  const double ratio = static_cast<double>(half.scene.target_points.cols()) /
                       static_cast<double>(full.scene.target_points.cols());
  CHECK(ratio > 0.45);
  CHECK(ratio < 0.55);
}

TEST_CASE("sensor noise perturbs only valid pixels") {
  const ShapeDatabase db = gen_database(kAllFamilies, 5, 23);
  SceneSpec spec = basic_spec(2, 4);
  spec.sigma = 0.01;
  const GeneratedScene gs = gen_scene(db, spec);

  double sum_abs = 0;
  int64_t n = 0;
  for (const auto& f : gs.scene.frames) {
    REQUIRE(f.sensor_depth.size() == f.scan_depth_with_target.size());
    for (size_t i = 0; i < f.sensor_depth.size(); ++i) {
      const float scan = f.scan_depth_with_target.depth[i];
      const float sns = f.sensor_depth.depth[i];
      if (std::isfinite(scan)) {
        sum_abs += std::abs(static_cast<double>(sns) - scan);
        ++n;
      } else {
        CHECK(!std::isfinite(sns));
      }
    }
  }
  REQUIRE(n > 0);
  // Mean |N(0, sigma)| = sigma * sqrt(2/pi) ~ 0.00798.
  const double mean_abs = sum_abs / static_cast<double>(n);
  CHECK(mean_abs > 0.006);
  CHECK(mean_abs < 0.010);
}

TEST_CASE("occluders carve the target silhouette") {
  const ShapeDatabase db = gen_database(kAllFamilies, 5, 29);
  const GeneratedScene clear = gen_scene(db, basic_spec(3, 8));
  SceneSpec spec = basic_spec(3, 8);
  spec.occluders = 0.5;
  const GeneratedScene blocked = gen_scene(db, spec);

  size_t clear_px = 0, blocked_px = 0;
  for (size_t i = 0; i < clear.scene.frames.size(); ++i) {
    clear_px += clear.scene.frames[i].target_mask.count();
    blocked_px += blocked.scene.frames[i].target_mask.count();
  }
  CHECK(blocked_px < clear_px);
  CHECK(blocked.scene.target_points.cols() < clear.scene.target_points.cols());
}

TEST_CASE("perturb_box respects bounds and modes") {
  OrientedBox box;
  box.center = Vector3(1.0, -2.0, 0.5);
  box.extents = Vector3(0.8, 0.5, 1.2);
  box.yaw = deg_to_rad(37.0);

  const OrientedBox same = perturb_box(box, 0, 0, 0, false, 9);
  CHECK(same.center == box.center);
  CHECK(same.extents == box.extents);
  CHECK(same.yaw == box.yaw);

  const OrientedBox aligned = perturb_box(box, 10.0, 0.05, 0.05, true, 9);
  CHECK(aligned.yaw == 0.0);

  const OrientedBox again = perturb_box(box, 10.0, 0.05, 0.05, false, 9);
  const OrientedBox again2 = perturb_box(box, 10.0, 0.05, 0.05, false, 9);
  CHECK(again.center == again2.center);
  CHECK(again.yaw == again2.yaw);

  // Monte Carlo over 1000 draws: all within bounds, mean |offset| near half
  // the bound (uniform distribution).
  double mean_dx = 0;
  double max_yaw = 0;
  for (int i = 0; i < 1000; ++i) {
    const OrientedBox p = perturb_box(box, 15.0, 0.1, 0.1, false, 100 + i);
    for (int a = 0; a < 3; ++a) {
      CHECK(std::abs(p.center[a] - box.center[a]) <= 0.1 * box.extents[a]);
      CHECK(p.extents[a] >= 0.9 * box.extents[a]);
      CHECK(p.extents[a] <= 1.1 * box.extents[a]);
    }
    CHECK(std::abs(p.yaw - box.yaw) <= deg_to_rad(15.0) + 1e-12);
    mean_dx += std::abs(p.center.x() - box.center.x());
    max_yaw = std::max(max_yaw, std::abs(p.yaw - box.yaw));
  }
  mean_dx /= 1000.0;
  CHECK(mean_dx == doctest::Approx(0.5 * 0.1 * box.extents.x()).epsilon(0.10));
  CHECK(max_yaw > deg_to_rad(12.0));  // the range is actually exercised
}

TEST_CASE("scenes round-trip through disk exactly") {
  const ShapeDatabase db = gen_database(kAllFamilies, 5, 31);
  SceneSpec spec = basic_spec(4, 3);
  spec.sigma = 0.005;
  spec.dropout = 0.2;
  spec.occluders = 0.4;
  const GeneratedScene gs = gen_scene(db, spec);

  TempDir tmp("hoc_scene_roundtrip");
  save_scene(gs, tmp.path);
  const GeneratedScene back = load_scene(tmp.path);

  CHECK(back.spec.shape_id == gs.spec.shape_id);
  CHECK(back.spec.cameras == gs.spec.cameras);
  CHECK(back.spec.sigma == gs.spec.sigma);
  CHECK(back.spec.dropout == gs.spec.dropout);
  CHECK(back.spec.occluders == gs.spec.occluders);
  CHECK(back.spec.seed == gs.spec.seed);
  CHECK(back.spec.pose.scale == gs.spec.pose.scale);
  CHECK(back.spec.pose.rotation == gs.spec.pose.rotation);
  CHECK(back.spec.pose.translation == gs.spec.pose.translation);
  CHECK(back.gt_box.center == gs.gt_box.center);
  CHECK(back.gt_box.extents == gs.gt_box.extents);
  CHECK(back.gt_box.yaw == gs.gt_box.yaw);
  CHECK(back.scene.category_hint == gs.scene.category_hint);
  CHECK(back.scene.target_points == gs.scene.target_points);

  REQUIRE(back.scene.frames.size() == gs.scene.frames.size());
  for (size_t i = 0; i < gs.scene.frames.size(); ++i) {
    const auto& a = gs.scene.frames[i];
    const auto& b = back.scene.frames[i];
    CHECK(a.camera.fx == b.camera.fx);
    CHECK(a.camera.world_to_cam == b.camera.world_to_cam);
    CHECK(a.camera.near_z == b.camera.near_z);
    CHECK(std::memcmp(a.background_depth.depth.data(), b.background_depth.depth.data(),
                      a.background_depth.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(a.scan_depth_with_target.depth.data(),
                      b.scan_depth_with_target.depth.data(),
                      a.scan_depth_with_target.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(a.sensor_depth.depth.data(), b.sensor_depth.depth.data(),
                      a.sensor_depth.size() * sizeof(float)) == 0);
    CHECK(a.target_mask == b.target_mask);
  }

  CHECK_THROWS(load_scene(tmp.path / "missing"));
}

TEST_CASE("scene generation is reproducible from the spec") {
  const ShapeDatabase db = gen_database(kAllFamilies, 5, 37);
  SceneSpec spec = basic_spec(2, 5);
  spec.sigma = 0.01;
  spec.dropout = 0.3;
  const GeneratedScene a = gen_scene(db, spec);
  const GeneratedScene b = gen_scene(db, spec);
  CHECK(a.scene.target_points == b.scene.target_points);
  for (size_t i = 0; i < a.scene.frames.size(); ++i)
    CHECK(std::memcmp(a.scene.frames[i].sensor_depth.depth.data(),
                      b.scene.frames[i].sensor_depth.depth.data(),
                      a.scene.frames[i].sensor_depth.size() * sizeof(float)) == 0);
}
