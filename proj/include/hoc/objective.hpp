#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hoc/database.hpp"
#include "hoc/render.hpp"
#include "hoc/types.hpp"

namespace hoc::objective {

// One scan frame: the camera, the static scene without the target (the
// per-candidate composite base), the scan with the target, the noisy sensor
// depth, and the target silhouette. All rasters share the camera dimensions.
struct Frame {
  render::Camera camera;
  render::DepthMap background_depth;
  render::DepthMap scan_depth_with_target;  // D_msh
  render::DepthMap sensor_depth;            // D_sns
  render::Mask target_mask;                 // S_msh
};

struct Scene {
  PointCloud target_points;  // scan points inside the box, world frame
  OrientedBox box;
  std::vector<Frame> frames;
  std::string category_hint;  // empty when unknown
};

struct ObjectiveWeights {
  double lambda_m = 0.6;
  double lambda_s = 1.0;
  double lambda_sil = 0.5;
  double lambda_cd = 2.0;
};

// A shape hypothesis under a 9-DOF pose. `sample_seed` fixes the candidate's
// fresh surface sampling inside loss_cd so evaluations are reproducible; it is
// derived from (shape id, pose angle) by the tree layer.
struct Candidate {
  const ShapeRecord* shape = nullptr;
  Pose pose;
  uint64_t sample_seed = 0;
};

inline constexpr int kCdSamples = 10000;

// Depth matching term, averaged over all frames:
//   (1/N_T) sum_t [ lambda_m/V_m * L1(M_m * (D_cad - D_msh))
//                 + lambda_s/V_s * L1(M_s * (D_cad - D_sns)) ]
// where D_cad composites the candidate render over the background and the
// validity masks M are the pixels where both depths compare. A frame term
// with V = 0 contributes 0. Throws when the scene has no frames.
double loss_depth(const Candidate& c, const Scene& scene, const ObjectiveWeights& w);

// Mean over frames of 1 - IoU(S_msh, S_cad), where S_cad keeps only candidate
// pixels that win the composite z-test. Frames with an empty target silhouette
// are skipped; throws "no target silhouette" when every frame is skipped.
double loss_silhouette(const Candidate& c, const Scene& scene);

// Single-direction chamfer from the target points to the posed candidate
// surface, 10k samples per side. Throws on an empty target cloud.
double loss_cd(const Candidate& c, const Scene& scene);

// Symmetric chamfer between target points and posed candidate samples.
double loss_chamfer(const Candidate& c, const Scene& scene);

// Full render-and-compare loss:
//   loss_depth + lambda_sil * loss_silhouette + lambda_cd * loss_cd.
// Rasterizes each frame once; equals the three components combined exactly.
double loss_rac(const Candidate& c, const Scene& scene, const ObjectiveWeights& w);

// Descriptor of the target cloud, brought into the box frame (yaw removed)
// so it is comparable to canonical database shapes.
Eigen::VectorXd target_descriptor(const Scene& scene);

// L2 distance between the target cloud's descriptor and the shape's stored
// descriptor. Pose-independent.
double loss_embedding(const ShapeRecord& shape, const Scene& scene);

enum class ObjectiveKind { Rac, Cd, Mscd, Embed };

ObjectiveKind parse_objective(const std::string& name);  // rac|cd|mscd|embed
std::string objective_name(ObjectiveKind kind);

using ObjectiveFn = std::function<double(const Candidate&)>;

// Binds an objective over a scene. The scene must outlive the returned
// callable. Embed precomputes the target descriptor once.
ObjectiveFn make_objective(ObjectiveKind kind, const Scene& scene,
                           const ObjectiveWeights& w);

}  // namespace hoc::objective
