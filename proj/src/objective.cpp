#include "hoc/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "hoc/geometry.hpp"
#include "hoc/shapedesc.hpp"

namespace hoc::objective {

namespace {

struct FrameTerms {
  double depth = 0.0;
  double sil = 0.0;
  bool sil_counted = false;
};

FrameTerms frame_terms(const Candidate& c, const Frame& f, const ObjectiveWeights& w,
                       bool want_sil) {
  const auto [cand_depth, cand_mask] =
      render::rasterize(c.shape->mesh, c.pose, f.camera);
  const render::DepthMap d_cad = render::composite_min(f.background_depth, cand_depth);

  double m_sum = 0.0, s_sum = 0.0;
  int64_t m_cnt = 0, s_cnt = 0;
  const size_t n = d_cad.size();
  for (size_t i = 0; i < n; ++i) {
    const float cad = d_cad.depth[i];
    if (!std::isfinite(cad)) continue;
    const float msh = f.scan_depth_with_target.depth[i];
    const float sns = f.sensor_depth.depth[i];
    if (std::isfinite(msh)) {
      m_sum += std::abs(static_cast<double>(cad) - static_cast<double>(msh));
      ++m_cnt;
    }
    if (std::isfinite(sns)) {
      s_sum += std::abs(static_cast<double>(cad) - static_cast<double>(sns));
      ++s_cnt;
    }
  }

  FrameTerms out;
  if (m_cnt > 0) out.depth += w.lambda_m * m_sum / static_cast<double>(m_cnt);
  if (s_cnt > 0) out.depth += w.lambda_s * s_sum / static_cast<double>(s_cnt);

  if (want_sil && f.target_mask.count() > 0) {
    const render::Mask s_cad = render::winner_mask(f.background_depth, cand_depth);
    out.sil = 1.0 - render::silhouette_iou(f.target_mask, s_cad);
    out.sil_counted = true;
  }
  return out;
}

void check_frames(const Candidate& c, const Scene& scene) {
  if (!c.shape) throw std::invalid_argument("candidate has no shape");
  if (scene.frames.empty()) throw std::invalid_argument("no frames");
}

// Deterministic stride subsample keeping at most n points, order preserved.
PointCloud subsample(const Eigen::Ref<const PointCloud>& cloud, int n) {
  const Eigen::Index total = cloud.cols();
  if (total <= n) return cloud;
  PointCloud out(3, n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.col(i) = cloud.col(i * total / n);
  return out;
}

PointCloud posed_candidate_samples(const Candidate& c) {
  return geom::apply_pose(
      c.pose, geom::sample_surface_n(c.shape->mesh, kCdSamples, c.sample_seed));
}

}  // namespace

Eigen::VectorXd target_descriptor(const Scene& scene) {
  // Undo the box yaw about the box center so the cloud is axis-aligned the
  // way canonical database shapes are.
  Pose derot;
  derot.rotation = Vector3(0, 0, -scene.box.yaw);
  derot.translation =
      scene.box.center - derot.rotation_matrix() * scene.box.center;
  return desc::descriptor(geom::apply_pose(derot, scene.target_points));
}

double loss_depth(const Candidate& c, const Scene& scene, const ObjectiveWeights& w) {
  check_frames(c, scene);
  double sum = 0.0;
  for (const Frame& f : scene.frames) sum += frame_terms(c, f, w, false).depth;
  return sum / static_cast<double>(scene.frames.size());
}

double loss_silhouette(const Candidate& c, const Scene& scene) {
  check_frames(c, scene);
  double sum = 0.0;
  int counted = 0;
  for (const Frame& f : scene.frames) {
    const FrameTerms t = frame_terms(c, f, ObjectiveWeights{}, true);
    if (t.sil_counted) {
      sum += t.sil;
      ++counted;
    }
  }
  if (counted == 0) throw std::runtime_error("no target silhouette");
  return sum / static_cast<double>(counted);
}

double loss_cd(const Candidate& c, const Scene& scene) {
  if (!c.shape) throw std::invalid_argument("candidate has no shape");
  return geom::single_direction_chamfer(subsample(scene.target_points, kCdSamples),
                                        posed_candidate_samples(c));
}

double loss_chamfer(const Candidate& c, const Scene& scene) {
  if (!c.shape) throw std::invalid_argument("candidate has no shape");
  return geom::chamfer(subsample(scene.target_points, kCdSamples),
                       posed_candidate_samples(c));
}

double loss_rac(const Candidate& c, const Scene& scene, const ObjectiveWeights& w) {
  check_frames(c, scene);
  double depth_sum = 0.0, sil_sum = 0.0;
  int sil_counted = 0;
  for (const Frame& f : scene.frames) {
    const FrameTerms t = frame_terms(c, f, w, true);
    depth_sum += t.depth;
    if (t.sil_counted) {
      sil_sum += t.sil;
      ++sil_counted;
    }
  }
  if (sil_counted == 0) throw std::runtime_error("no target silhouette");
  const double depth = depth_sum / static_cast<double>(scene.frames.size());
  const double sil = sil_sum / static_cast<double>(sil_counted);
  return depth + w.lambda_sil * sil + w.lambda_cd * loss_cd(c, scene);
}

double loss_embedding(const ShapeRecord& shape, const Scene& scene) {
  if (shape.descriptor.size() != desc::kDescriptorDims)
    throw std::invalid_argument("shape has no descriptor");
  return (target_descriptor(scene) - shape.descriptor).norm();
}

ObjectiveKind parse_objective(const std::string& name) {
  if (name == "rac") return ObjectiveKind::Rac;
  if (name == "cd") return ObjectiveKind::Cd;
  if (name == "mscd") return ObjectiveKind::Mscd;
  if (name == "embed") return ObjectiveKind::Embed;
  throw std::invalid_argument("unknown objective: " + name);
}

std::string objective_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Rac: return "rac";
    case ObjectiveKind::Cd: return "cd";
    case ObjectiveKind::Mscd: return "mscd";
    case ObjectiveKind::Embed: return "embed";
  }
  throw std::logic_error("bad objective kind");
}

ObjectiveFn make_objective(ObjectiveKind kind, const Scene& scene,
                           const ObjectiveWeights& w) {
  switch (kind) {
    case ObjectiveKind::Rac:
      return [&scene, w](const Candidate& c) { return loss_rac(c, scene, w); };
    case ObjectiveKind::Cd:
      return [&scene](const Candidate& c) { return loss_chamfer(c, scene); };
    case ObjectiveKind::Mscd:
      return [&scene](const Candidate& c) { return loss_cd(c, scene); };
    case ObjectiveKind::Embed: {
      auto target = std::make_shared<Eigen::VectorXd>(target_descriptor(scene));
      return [target](const Candidate& c) {
        if (!c.shape) throw std::invalid_argument("candidate has no shape");
        return (*target - c.shape->descriptor).norm();
      };
    }
  }
  throw std::logic_error("bad objective kind");
}

}  // namespace hoc::objective
