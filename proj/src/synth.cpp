#include "hoc/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "hoc/geometry.hpp"
#include "hoc/mesh_io.hpp"
#include "hoc/rng.hpp"
#include "hoc/shapedesc.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hoc::synth {

namespace {

constexpr int kImageSize = 96;
constexpr double kFocal = 100.0;
constexpr int kDefaultSamples = 4096;

void append_cuboid(TriangleMesh& m, const Vector3& center, const Vector3& size) {
  const int base = static_cast<int>(m.V.cols());
  m.V.conservativeResize(3, base + 8);
  int v = base;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z)
        m.V.col(v++) = center + Vector3((x - 0.5) * size.x(), (y - 0.5) * size.y(),
                                        (z - 0.5) * size.z());
  const int faces[12][3] = {{0, 1, 3}, {0, 3, 2}, {4, 7, 5}, {4, 6, 7},
                            {0, 5, 1}, {0, 4, 5}, {2, 3, 7}, {2, 7, 6},
                            {0, 2, 6}, {0, 6, 4}, {1, 5, 7}, {1, 7, 3}};
  const int fbase = static_cast<int>(m.F.cols());
  m.F.conservativeResize(3, fbase + 12);
  for (int f = 0; f < 12; ++f)
    m.F.col(fbase + f) = Eigen::Vector3i(base + faces[f][0], base + faces[f][1],
                                         base + faces[f][2]);
}

void append_cylinder(TriangleMesh& m, const Vector3& center, double radius,
                     double height, int segments) {
  const int base = static_cast<int>(m.V.cols());
  m.V.conservativeResize(3, base + 2 * segments + 2);
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * M_PI * i / segments;
    const Vector3 rim(radius * std::cos(a), radius * std::sin(a), 0.0);
    m.V.col(base + i) = center + rim + Vector3(0, 0, -height / 2);
    m.V.col(base + segments + i) = center + rim + Vector3(0, 0, height / 2);
  }
  const int cb = base + 2 * segments;      // bottom center
  const int ct = cb + 1;                    // top center
  m.V.col(cb) = center + Vector3(0, 0, -height / 2);
  m.V.col(ct) = center + Vector3(0, 0, height / 2);

  const int fbase = static_cast<int>(m.F.cols());
  m.F.conservativeResize(3, fbase + 4 * segments);
  int f = fbase;
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    const int b0 = base + i, b1 = base + j;
    const int t0 = base + segments + i, t1 = base + segments + j;
    m.F.col(f++) = Eigen::Vector3i(b0, b1, t1);
    m.F.col(f++) = Eigen::Vector3i(b0, t1, t0);
    m.F.col(f++) = Eigen::Vector3i(cb, b1, b0);
    m.F.col(f++) = Eigen::Vector3i(ct, t0, t1);
  }
}

void append_legs(TriangleMesh& m, double sx, double sy, double leg_w,
                 double leg_h, double inset) {
  for (int ix = 0; ix < 2; ++ix)
    for (int iy = 0; iy < 2; ++iy) {
      const double px = (ix - 0.5) * (sx - 2 * inset - leg_w);
      const double py = (iy - 0.5) * (sy - 2 * inset - leg_w);
      append_cuboid(m, Vector3(px, py, leg_h / 2), Vector3(leg_w, leg_w, leg_h));
    }
}

}  // namespace

ShapeFamily parse_family(const std::string& name) {
  if (name == "box") return ShapeFamily::Box;
  if (name == "cylinder") return ShapeFamily::Cylinder;
  if (name == "table") return ShapeFamily::TableLike;
  if (name == "chair") return ShapeFamily::ChairLike;
  if (name == "shelf") return ShapeFamily::ShelfLike;
  throw std::invalid_argument("unknown shape family: " + name);
}

std::string family_name(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::Box: return "box";
    case ShapeFamily::Cylinder: return "cylinder";
    case ShapeFamily::TableLike: return "table";
    case ShapeFamily::ChairLike: return "chair";
    case ShapeFamily::ShelfLike: return "shelf";
  }
  throw std::logic_error("bad shape family");
}

TriangleMesh make_family_mesh(ShapeFamily family, uint64_t seed) {
  CounterRng rng(seed);
  TriangleMesh m;
  switch (family) {
    case ShapeFamily::Box: {
      append_cuboid(m, Vector3::Zero(),
                    Vector3(rng.uniform(0.4, 1.0), rng.uniform(0.4, 1.0),
                            rng.uniform(0.4, 1.0)));
      break;
    }
    case ShapeFamily::Cylinder: {
      append_cylinder(m, Vector3::Zero(), rng.uniform(0.2, 0.5),
                      rng.uniform(0.5, 1.2), 24);
      break;
    }
    case ShapeFamily::TableLike: {
      const double sx = rng.uniform(0.8, 1.4), sy = rng.uniform(0.6, 1.2);
      const double th = rng.uniform(0.05, 0.10), h = rng.uniform(0.55, 0.85);
      const double leg = rng.uniform(0.05, 0.09);
      append_cuboid(m, Vector3(0, 0, h + th / 2), Vector3(sx, sy, th));
      append_legs(m, sx, sy, leg, h, 0.05);
      break;
    }
    case ShapeFamily::ChairLike: {
      const double sx = rng.uniform(0.35, 0.55), sy = rng.uniform(0.35, 0.55);
      const double th = rng.uniform(0.05, 0.08), h = rng.uniform(0.35, 0.50);
      const double bh = rng.uniform(0.35, 0.55), bt = 0.05;
      const double leg = rng.uniform(0.04, 0.07);
      append_cuboid(m, Vector3(0, 0, h + th / 2), Vector3(sx, sy, th));
      append_cuboid(m, Vector3(0, -(sy - bt) / 2, h + th + bh / 2),
                    Vector3(sx, bt, bh));
      append_legs(m, sx, sy, leg, h, 0.04);
      break;
    }
    case ShapeFamily::ShelfLike: {
      const int boards = 2 + static_cast<int>(rng.uniform_int(4));
      const double sx = rng.uniform(0.6, 1.0), sy = rng.uniform(0.25, 0.40);
      const double height = rng.uniform(0.8, 1.6), bt = 0.04, side = 0.03;
      for (int i = 0; i < boards; ++i) {
        const double z = (i + 0.5) / boards * height;
        append_cuboid(m, Vector3(0, 0, z), Vector3(sx, sy, bt));
      }
      append_cuboid(m, Vector3(-(sx + side) / 2, 0, height / 2),
                    Vector3(side, sy, height));
      append_cuboid(m, Vector3((sx + side) / 2, 0, height / 2),
                    Vector3(side, sy, height));
      break;
    }
  }
  return m;
}

ShapeDatabase gen_database(const std::vector<ShapeFamily>& families, int count,
                           uint64_t seed) {
  if (families.empty()) throw std::invalid_argument("no shape families");
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  ShapeDatabase db;
  db.shapes.reserve(count);
  for (int i = 0; i < count; ++i) {
    const ShapeFamily fam = families[static_cast<size_t>(i) % families.size()];
    ShapeRecord r;
    r.id = i;
    r.category = family_name(fam);
    r.mesh = make_family_mesh(fam, derive_seed(seed, i));
    r.extents = canonicalize(r.mesh);
    r.samples = geom::sample_surface_n(r.mesh, kDefaultSamples,
                                       derive_seed(seed, i, 0xdee9));
    r.descriptor = desc::descriptor(r.samples);
    db.shapes.push_back(std::move(r));
  }
  db.normalize();
  return db;
}

Eigen::Matrix4d look_at(const Vector3& eye, const Vector3& target) {
  const Vector3 forward = (target - eye).normalized();
  Vector3 up(0, 0, 1);
  if (std::abs(forward.dot(up)) > 0.99) up = Vector3(0, 1, 0);
  const Vector3 right = forward.cross(up).normalized();
  const Vector3 down = forward.cross(right);  // y points down in camera frame

  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<1, 3>(0, 0) = right.transpose();
  m.block<1, 3>(1, 0) = down.transpose();
  m.block<1, 3>(2, 0) = forward.transpose();
  m.block<3, 1>(0, 3) = -m.block<3, 3>(0, 0) * eye;
  return m;
}

GeneratedScene gen_scene(const ShapeDatabase& db, const SceneSpec& spec) {
  if (!spec.valid()) throw std::invalid_argument("invalid scene spec");
  const ShapeRecord* rec = db.find(spec.shape_id);
  if (!rec)
    throw std::invalid_argument("ground-truth shape " +
                                std::to_string(spec.shape_id) +
                                " is not in the database");

  GeneratedScene gs;
  gs.spec = spec;
  gs.gt_box.center = spec.pose.translation;
  gs.gt_box.extents = spec.pose.scale.cwiseProduct(rec->extents);
  gs.gt_box.yaw = spec.pose.rotation.z();

  const Vector3 center = gs.gt_box.center;
  std::vector<Vector3> eyes(spec.cameras);
  for (int i = 0; i < spec.cameras; ++i) {
    const double a = 2.0 * M_PI * i / spec.cameras;
    const double elev = spec.ring_radius * (0.35 + 0.15 * (i % 3));
    eyes[i] = center + Vector3(spec.ring_radius * std::cos(a),
                               spec.ring_radius * std::sin(a), elev);
  }

  // Static world: floor slab, four walls beyond the camera ring, and a few
  // occluder boxes dropped onto camera-to-target sight lines.
  TriangleMesh world;
  const double w = spec.ring_radius + 1.2;
  append_cuboid(world, Vector3(center.x(), center.y(), -0.05),
                Vector3(4 * w, 4 * w, 0.1));
  append_cuboid(world, center + Vector3(w, 0, 1.5), Vector3(0.1, 2 * w, 3.0));
  append_cuboid(world, center + Vector3(-w, 0, 1.5), Vector3(0.1, 2 * w, 3.0));
  append_cuboid(world, center + Vector3(0, w, 1.5), Vector3(2 * w, 0.1, 3.0));
  append_cuboid(world, center + Vector3(0, -w, 1.5), Vector3(2 * w, 0.1, 3.0));

  const int n_occ = static_cast<int>(std::llround(spec.occluders * spec.cameras));
  CounterRng occ_rng(derive_seed(spec.seed, 0x0cc1));
  const double occ_base = 0.35 * gs.gt_box.extents.maxCoeff();
  for (int j = 0; j < n_occ; ++j) {
    const int cam_idx = static_cast<int>(static_cast<int64_t>(j) * spec.cameras / n_occ);
    const double t = occ_rng.uniform(0.50, 0.70);
    const Vector3 pos = eyes[cam_idx] + t * (center - eyes[cam_idx]);
    const double s = occ_base * occ_rng.uniform(0.8, 1.3);
    append_cuboid(world, pos, Vector3(s, s, s));
  }

  std::vector<Vector3> cloud;
  CounterRng drop_rng(derive_seed(spec.seed, 0xd209));
  gs.scene.frames.reserve(spec.cameras);
  for (int i = 0; i < spec.cameras; ++i) {
    render::Camera cam;
    cam.fx = cam.fy = kFocal;
    cam.cx = cam.cy = kImageSize / 2.0;
    cam.width = cam.height = kImageSize;
    cam.near_z = 0.1;
    cam.far_z = 4.0 * spec.ring_radius;
    cam.world_to_cam = look_at(eyes[i], center);

    objective::Frame f;
    f.camera = cam;
    f.background_depth = render::rasterize(world, Pose{}, cam).first;
    const render::DepthMap gt_depth =
        render::rasterize(rec->mesh, spec.pose, cam).first;
    f.scan_depth_with_target = render::composite_min(f.background_depth, gt_depth);
    f.target_mask = render::winner_mask(f.background_depth, gt_depth);

    f.sensor_depth = f.scan_depth_with_target;
    if (spec.sigma > 0) {
      CounterRng noise(derive_seed(spec.seed, 0x5e45, i));
      for (float& d : f.sensor_depth.depth)
        if (std::isfinite(d)) d += static_cast<float>(spec.sigma * noise.gaussian());
    }

    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        if (!f.target_mask.at(x, y) || !f.sensor_depth.valid(x, y)) continue;
        if (spec.dropout > 0 && drop_rng.uniform() < spec.dropout) continue;
        cloud.push_back(cam.unproject(x, y, f.sensor_depth.at(x, y)));
      }
    gs.scene.frames.push_back(std::move(f));
  }

  gs.scene.target_points.resize(3, static_cast<Eigen::Index>(cloud.size()));
  for (size_t i = 0; i < cloud.size(); ++i)
    gs.scene.target_points.col(static_cast<Eigen::Index>(i)) = cloud[i];
  gs.scene.box = gs.gt_box;
  gs.scene.category_hint = rec->category;
  return gs;
}

OrientedBox perturb_box(const OrientedBox& box, double yaw_max_deg,
                        double trans_frac, double scale_frac, bool axis_aligned,
                        uint64_t seed) {
  if (yaw_max_deg < 0 || trans_frac < 0 || scale_frac < 0)
    throw std::invalid_argument("negative perturbation magnitude");
  CounterRng rng(seed);
  OrientedBox out = box;
  out.yaw = box.yaw + deg_to_rad(rng.uniform(-yaw_max_deg, yaw_max_deg));
  for (int a = 0; a < 3; ++a)
    out.center[a] += rng.uniform(-trans_frac, trans_frac) * box.extents[a];
  for (int a = 0; a < 3; ++a)
    out.extents[a] *= rng.uniform(1.0 - scale_frac, 1.0 + scale_frac);
  if (axis_aligned) out.yaw = 0.0;
  return out;
}

namespace {

json pose_to_json(const Pose& p) {
  return json{{"scale", {p.scale.x(), p.scale.y(), p.scale.z()}},
              {"rotation", {p.rotation.x(), p.rotation.y(), p.rotation.z()}},
              {"translation",
               {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

Pose pose_from_json(const json& j) {
  Pose p;
  for (int a = 0; a < 3; ++a) {
    p.scale[a] = j.at("scale").at(a).get<double>();
    p.rotation[a] = j.at("rotation").at(a).get<double>();
    p.translation[a] = j.at("translation").at(a).get<double>();
  }
  return p;
}

json box_to_json(const OrientedBox& b) {
  return json{{"center", {b.center.x(), b.center.y(), b.center.z()}},
              {"extents", {b.extents.x(), b.extents.y(), b.extents.z()}},
              {"yaw", b.yaw}};
}

OrientedBox box_from_json(const json& j) {
  OrientedBox b;
  for (int a = 0; a < 3; ++a) {
    b.center[a] = j.at("center").at(a).get<double>();
    b.extents[a] = j.at("extents").at(a).get<double>();
  }
  b.yaw = j.at("yaw").get<double>();
  return b;
}

std::string frame_stem(const char* kind, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%02d", kind, i);
  return buf;
}

}  // namespace

void save_scene(const GeneratedScene& gs, const std::filesystem::path& dir) {
  fs::create_directories(dir / "frames");

  json j;
  j["version"] = 1;
  j["spec"] = {{"shape_id", gs.spec.shape_id},
               {"pose", pose_to_json(gs.spec.pose)},
               {"cameras", gs.spec.cameras},
               {"ring_radius", gs.spec.ring_radius},
               {"sigma", gs.spec.sigma},
               {"occluders", gs.spec.occluders},
               {"dropout", gs.spec.dropout},
               {"seed", gs.spec.seed}};
  j["gt_box"] = box_to_json(gs.gt_box);
  j["box"] = box_to_json(gs.scene.box);
  j["category_hint"] = gs.scene.category_hint;
  j["target"] = "target.xyz";

  json frames = json::array();
  for (size_t i = 0; i < gs.scene.frames.size(); ++i) {
    const objective::Frame& f = gs.scene.frames[i];
    const render::Camera& c = f.camera;
    std::vector<double> w2c(16);
    Eigen::Map<Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>(w2c.data()) =
        c.world_to_cam;
    const int fi = static_cast<int>(i);
    const std::string bg = "frames/" + frame_stem("bg", fi) + ".f32";
    const std::string scan = "frames/" + frame_stem("scan", fi) + ".f32";
    const std::string sns = "frames/" + frame_stem("sns", fi) + ".f32";
    const std::string mask = "frames/" + frame_stem("mask", fi) + ".pbm";
    frames.push_back({{"camera",
                       {{"fx", c.fx},
                        {"fy", c.fy},
                        {"cx", c.cx},
                        {"cy", c.cy},
                        {"width", c.width},
                        {"height", c.height},
                        {"near", c.near_z},
                        {"far", c.far_z},
                        {"world_to_cam", w2c}}},
                      {"background", bg},
                      {"scan", scan},
                      {"sensor", sns},
                      {"mask", mask}});
    render::save_depth(f.background_depth, dir / bg, c.near_z, c.far_z);
    render::save_depth(f.scan_depth_with_target, dir / scan, c.near_z, c.far_z);
    render::save_depth(f.sensor_depth, dir / sns, c.near_z, c.far_z);
    render::save_mask(f.target_mask, dir / mask);
  }
  j["frames"] = std::move(frames);

  io::save_xyz(gs.scene.target_points, dir / "target.xyz");
  std::ofstream out(dir / "scene.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "scene.json").string());
  out << j.dump(2) << "\n";
}

GeneratedScene load_scene(const std::filesystem::path& dir) {
  std::ifstream in(dir / "scene.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "scene.json").string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("scene parse error: " + std::string(e.what()));
  }
  try {
    const int version = j.at("version").get<int>();
    if (version != 1)
      throw std::runtime_error("unsupported version " + std::to_string(version));

    GeneratedScene gs;
    const json& s = j.at("spec");
    gs.spec.shape_id = s.at("shape_id").get<int>();
    gs.spec.pose = pose_from_json(s.at("pose"));
    gs.spec.cameras = s.at("cameras").get<int>();
    gs.spec.ring_radius = s.at("ring_radius").get<double>();
    gs.spec.sigma = s.at("sigma").get<double>();
    gs.spec.occluders = s.at("occluders").get<double>();
    gs.spec.dropout = s.at("dropout").get<double>();
    gs.spec.seed = s.at("seed").get<uint64_t>();
    gs.gt_box = box_from_json(j.at("gt_box"));
    gs.scene.box = box_from_json(j.at("box"));
    gs.scene.category_hint = j.at("category_hint").get<std::string>();
    gs.scene.target_points =
        io::load_xyz(dir / j.at("target").get<std::string>());

    for (const json& fj : j.at("frames")) {
      objective::Frame f;
      const json& cj = fj.at("camera");
      f.camera.fx = cj.at("fx").get<double>();
      f.camera.fy = cj.at("fy").get<double>();
      f.camera.cx = cj.at("cx").get<double>();
      f.camera.cy = cj.at("cy").get<double>();
      f.camera.width = cj.at("width").get<int>();
      f.camera.height = cj.at("height").get<int>();
      f.camera.near_z = cj.at("near").get<double>();
      f.camera.far_z = cj.at("far").get<double>();
      const auto w2c = cj.at("world_to_cam").get<std::vector<double>>();
      if (w2c.size() != 16) throw std::runtime_error("bad world_to_cam");
      f.camera.world_to_cam =
          Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>(w2c.data());
      f.background_depth =
          render::load_depth(dir / fj.at("background").get<std::string>());
      f.scan_depth_with_target =
          render::load_depth(dir / fj.at("scan").get<std::string>());
      f.sensor_depth = render::load_depth(dir / fj.at("sensor").get<std::string>());
      f.target_mask = render::load_mask(dir / fj.at("mask").get<std::string>());
      gs.scene.frames.push_back(std::move(f));
    }
    return gs;
  } catch (const json::exception& e) {
    throw std::runtime_error("scene parse error: " + std::string(e.what()));
  }
}

}  // namespace hoc::synth
