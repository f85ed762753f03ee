#include "hoc/mcts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "hoc/geometry.hpp"
#include "hoc/rng.hpp"

namespace hoc::search {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Current pose frame of one pose branch. Candidates derive their 9-DOF pose
// from it the same way box_pose derives one from the proposal box; refinement
// rewrites the frame so later candidates in the branch start refined.
struct BranchFrame {
  Vector3 extents = Vector3::Ones();
  Vector3 rotation = Vector3::Zero();
  Vector3 center = Vector3::Zero();
  bool init = false;
  double best_score = -kInf;
};

objective::Candidate branch_candidate(const ShapeRecord& rec, const BranchFrame& bf,
                                      double seed_angle_deg, bool plus45) {
  if (!(rec.extents.array() > 0.0).all())
    throw std::invalid_argument("shape " + std::to_string(rec.id) +
                                " has degenerate extents");
  objective::Candidate c;
  c.shape = &rec;
  c.pose.scale = bf.extents.cwiseQuotient(rec.extents);
  c.pose.rotation = bf.rotation;
  if (plus45) c.pose.rotation.z() += deg_to_rad(45.0);
  c.pose.translation = bf.center;
  c.sample_seed = tree::candidate_sample_seed(
      rec.id, plus45 ? seed_angle_deg + 45.0 : seed_angle_deg);
  return c;
}

double call_objective(const objective::ObjectiveFn& objective,
                      const objective::Candidate& c, int iter, int leaf,
                      int& calls) {
  ++calls;
  try {
    return objective(c);
  } catch (const std::exception& e) {
    throw std::runtime_error("objective failed at iteration " +
                             std::to_string(iter) + ", leaf " +
                             std::to_string(leaf) + ": " + e.what());
  }
}

PointCloud stride_subsample(const Eigen::Ref<const PointCloud>& cloud, int n) {
  const Eigen::Index total = cloud.cols();
  if (total <= n) return cloud;
  PointCloud out(3, n);
  for (Eigen::Index i = 0; i < n; ++i) out.col(i) = cloud.col(i * total / n);
  return out;
}

void lock_upward(tree::HocTree& t, int leaf) {
  t.nodes[leaf].locked = true;
  for (int p = t.nodes[leaf].parent; p >= 0; p = t.nodes[p].parent) {
    bool all = true;
    for (int c : t.nodes[p].children)
      if (!t.nodes[c].locked) {
        all = false;
        break;
      }
    if (!all) break;
    t.nodes[p].locked = true;
  }
}

}  // namespace

double ucb(double score, int64_t visits, int64_t parent_visits, double lambda) {
  if (visits <= 0) throw std::logic_error("ucb on unvisited node");
  if (parent_visits <= 0) throw std::logic_error("ucb with unvisited parent");
  return score + lambda * std::sqrt(std::log(static_cast<double>(parent_visits)) /
                                    static_cast<double>(visits));
}

double lambda_at(const SearchConfig& config, int iter) {
  const int span = std::max(config.iterations - 1, 1);
  return config.lambda_start + static_cast<double>(iter - 1) / span *
                                   (config.lambda_end - config.lambda_start);
}

SearchResult hoc_search(tree::HocTree& t, const ShapeDatabase& db,
                        const objective::Scene& scene,
                        const objective::ObjectiveFn& objective,
                        const SearchConfig& config) {
  if (config.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!(config.lambda_start >= config.lambda_end && config.lambda_end >= 0.0))
    throw std::invalid_argument("lambda schedule must decrease to a nonnegative end");
  if (config.refine_steps_incremental < 0 || config.refine_steps_final < 0)
    throw std::invalid_argument("negative refinement steps");
  if (t.nodes.empty() || t.nodes[0].children.empty())
    throw std::invalid_argument("tree has no branches");
  if (!scene.box.valid()) throw std::invalid_argument("invalid proposal box");

  CounterRng rng(config.seed);
  std::vector<BranchFrame> frames(t.nodes.size());
  SearchResult res;
  int best_leaf = -1;

  // Running range of raw scores for min-max normalization.
  double smin = kInf, smax = -kInf;
  const auto norm_score = [&](double s) {
    if (config.score_mode == ScoreMode::Raw) return s;
    if (!(smax > smin)) return 0.5;
    return (s - smin) / (smax - smin);
  };

  for (int iter = 1; iter <= config.iterations; ++iter) {
    if (t.nodes[0].locked) break;
    const double lambda = lambda_at(config, iter);

    // Selection: UCB among visited unlocked children until a node with an
    // unvisited unlocked child appears, then a uniform pick and a uniform
    // rollout to a leaf.
    std::vector<int> path{0};
    int node = 0;
    bool rolling = false;
    while (t.nodes[node].kind != tree::NodeKind::Leaf) {
      std::vector<int> open;
      for (int c : t.nodes[node].children)
        if (!t.nodes[c].locked) open.push_back(c);
      if (open.empty()) throw std::logic_error("unlocked node with no open children");

      int pick = -1;
      if (rolling) {
        pick = open[rng.uniform_int(open.size())];
      } else {
        std::vector<int> fresh;
        for (int c : open)
          if (t.nodes[c].visits == 0) fresh.push_back(c);
        if (!fresh.empty()) {
          pick = fresh[rng.uniform_int(fresh.size())];
          rolling = true;
        } else {
          double best = -kInf;
          for (int c : open) {
            const double u = ucb(norm_score(t.nodes[c].score), t.nodes[c].visits,
                                 t.nodes[node].visits, lambda);
            if (u > best) {
              best = u;
              pick = c;
            }
          }
        }
      }
      path.push_back(pick);
      node = pick;
    }

    const int leaf = node;
    if (t.nodes[leaf].visits != 0) throw std::logic_error("leaf re-evaluation");

    // Locate the branch (pose ancestor) and lazily set up its frame.
    int branch = -1;
    for (int p : path)
      if (t.nodes[p].kind == tree::NodeKind::Pose) branch = p;
    if (branch < 0) throw std::logic_error("leaf without pose ancestor");
    const double branch_angle = t.pose_angles_deg[t.nodes[branch].angle_index];
    BranchFrame& bf = frames[branch];
    if (!bf.init) {
      bf.extents = scene.box.extents;
      bf.rotation = Vector3(0, 0, scene.box.yaw + deg_to_rad(branch_angle));
      bf.center = scene.box.center;
      bf.init = true;
    }

    const ShapeRecord& rec = db.at(t.nodes[leaf].shape_id);
    objective::Candidate cand = branch_candidate(rec, bf, branch_angle, false);
    double loss = call_objective(objective, cand, iter, leaf, res.objective_calls);
    double angle = branch_angle;
    if (config.extra_45) {
      const objective::Candidate c45 = branch_candidate(rec, bf, branch_angle, true);
      const double l45 = call_objective(objective, c45, iter, leaf, res.objective_calls);
      if (l45 < loss) {
        loss = l45;
        cand = c45;
        angle = branch_angle + 45.0;
      }
    }

    const double prev_best = res.best_score;
    bool refined = false;
    const bool trigger = config.refine && config.refine_steps_incremental > 0 &&
                         (config.refine_per_branch ? -loss > bf.best_score
                                                   : -loss > prev_best);
    if (trigger) {
      RefineResult rr =
          refine_pose(cand, scene, objective, config.refine_steps_incremental,
                      derive_seed(config.seed, 0x5e11, iter), loss);
      res.objective_calls += rr.objective_calls;
      refined = true;
      loss = rr.loss;
      cand.pose = rr.pose;
      bf.extents = rr.pose.scale.cwiseProduct(rec.extents);
      bf.rotation = rr.pose.rotation;
      bf.center = rr.pose.translation;
    }

    const double s = -loss;
    smin = std::min(smin, s);
    smax = std::max(smax, s);
    bf.best_score = std::max(bf.best_score, s);

    const bool new_best = s > prev_best;
    if (new_best) {
      res.best_score = s;
      res.best_loss = loss;
      res.best_shape = rec.id;
      res.best_angle_deg = angle;
      res.refined_pose = cand.pose;
      res.refined_loss = loss;
      best_leaf = leaf;
    }

    for (int p : path) {
      ++t.nodes[p].visits;
      t.nodes[p].score = std::max(t.nodes[p].score, s);
    }
    lock_upward(t, leaf);

    ++res.evaluations;
    res.trace.push_back({iter, leaf, angle, loss, s, new_best, refined});
  }

  if (config.refine && config.refine_steps_final > 0 && best_leaf >= 0) {
    objective::Candidate best;
    best.shape = db.find(res.best_shape);
    best.pose = res.refined_pose;
    best.sample_seed = tree::candidate_sample_seed(res.best_shape, res.best_angle_deg);
    const RefineResult rr =
        refine_pose(best, scene, objective, config.refine_steps_final,
                    derive_seed(config.seed, 0xf19a1), res.best_loss);
    res.objective_calls += rr.objective_calls;
    res.refined_pose = rr.pose;
    res.refined_loss = rr.loss;
  }
  return res;
}

std::vector<RankedCandidate> exhaustive_search(
    const ShapeDatabase& db, const objective::Scene& scene,
    const std::vector<double>& angles_deg,
    const objective::ObjectiveFn& objective) {
  if (angles_deg.empty()) throw std::invalid_argument("no pose angles");
  std::vector<RankedCandidate> out;
  out.reserve(db.size() * angles_deg.size());
  for (const ShapeRecord& rec : db.shapes) {
    for (const double a : angles_deg) {
      objective::Candidate c;
      c.shape = &rec;
      c.pose = tree::box_pose(rec, scene.box, a);
      c.sample_seed = tree::candidate_sample_seed(rec.id, a);
      try {
        out.push_back({rec.id, a, objective(c)});
      } catch (const std::exception& e) {
        throw std::runtime_error("objective failed on shape " +
                                 std::to_string(rec.id) + ", angle " +
                                 std::to_string(a) + ": " + e.what());
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedCandidate& x, const RankedCandidate& y) {
                     if (x.loss != y.loss) return x.loss < y.loss;
                     if (x.shape_id != y.shape_id) return x.shape_id < y.shape_id;
                     return x.angle_deg < y.angle_deg;
                   });
  return out;
}

SearchResult greedy_search(const tree::HocTree& t, const ShapeDatabase& db,
                           const objective::Scene& scene,
                           const objective::ObjectiveFn& objective) {
  if (t.nodes.empty()) throw std::invalid_argument("empty tree");
  if (!scene.box.valid()) throw std::invalid_argument("invalid proposal box");

  SearchResult res;
  std::map<std::pair<int, long long>, double> memo;  // (shape, angle mdeg) -> loss
  const auto score = [&](int shape_id, double angle_deg, int node_idx) {
    const auto key = std::make_pair(
        shape_id, static_cast<long long>(std::llround(angle_deg * 1000.0)));
    if (const auto it = memo.find(key); it != memo.end()) return it->second;
    const ShapeRecord& rec = db.at(shape_id);
    objective::Candidate c;
    c.shape = &rec;
    c.pose = tree::box_pose(rec, scene.box, angle_deg);
    c.sample_seed = tree::candidate_sample_seed(rec.id, angle_deg);
    ++res.evaluations;
    const double loss =
        call_objective(objective, c, res.evaluations, node_idx, res.objective_calls);
    memo.emplace(key, loss);
    const bool new_best = -loss > res.best_score;
    if (new_best) {
      res.best_score = -loss;
      res.best_loss = loss;
      res.best_shape = shape_id;
      res.best_angle_deg = angle_deg;
      res.refined_pose = c.pose;
      res.refined_loss = loss;
    }
    res.trace.push_back({res.evaluations, node_idx, angle_deg, loss, -loss,
                         new_best, false});
    return loss;
  };

  struct ReachedLeaf {
    int shape_id = -1;
    double angle_deg = 0.0;
    double loss = kInf;
  };
  ReachedLeaf best;

  // One descent per pose angle. A category level is one more greedy decision:
  // the best category centroid at this angle picks the branch to enter.
  const bool has_categories =
      !t.nodes[0].children.empty() &&
      t.nodes[t.nodes[0].children.front()].kind == tree::NodeKind::Category;
  const auto pose_child = [&](int parent, size_t angle_index) {
    for (const int c : t.nodes[parent].children)
      if (t.nodes[c].kind == tree::NodeKind::Pose &&
          t.nodes[c].angle_index == static_cast<int>(angle_index))
        return c;
    throw std::logic_error("missing pose branch");
  };

  for (size_t a = 0; a < t.pose_angles_deg.size(); ++a) {
    const double angle = t.pose_angles_deg[a];
    int cur = 0;
    if (has_categories) {
      int pick = -1;
      double pick_loss = kInf;
      for (const int c : t.nodes[0].children) {
        const double l = score(t.nodes[c].centroid, angle, c);
        if (l < pick_loss) {
          pick_loss = l;
          pick = c;
        }
      }
      cur = pick;
    }
    cur = pose_child(cur, a);
    while (t.nodes[cur].kind != tree::NodeKind::Leaf) {
      int pick = -1;
      double pick_loss = kInf;
      for (const int c : t.nodes[cur].children) {
        const tree::HocNode& n = t.nodes[c];
        const int cid = n.kind == tree::NodeKind::Leaf ? n.shape_id : n.centroid;
        const double l = score(cid, angle, c);
        if (l < pick_loss) {
          pick_loss = l;
          pick = c;
        }
      }
      if (pick < 0) throw std::logic_error("node with no children");
      cur = pick;
    }
    const double leaf_loss = score(t.nodes[cur].shape_id, angle, cur);
    if (leaf_loss < best.loss)
      best = {t.nodes[cur].shape_id, angle, leaf_loss};
  }

  // The reported result is the best reached leaf, which can differ from the
  // best evaluation seen while descending.
  if (best.shape_id >= 0) {
    res.best_shape = best.shape_id;
    res.best_angle_deg = best.angle_deg;
    res.best_loss = best.loss;
    res.best_score = -best.loss;
    res.refined_pose = tree::box_pose(db.at(best.shape_id), scene.box, best.angle_deg);
    res.refined_loss = best.loss;
  }
  return res;
}

std::vector<int> ranked_shapes(const tree::HocTree& tree,
                               const std::vector<TraceEntry>& trace) {
  std::vector<std::pair<double, int>> seen;
  seen.reserve(trace.size());
  for (const auto& e : trace) {
    const tree::HocNode& n = tree.nodes.at(e.leaf);
    seen.emplace_back(e.loss,
                      n.kind == tree::NodeKind::Leaf ? n.shape_id : n.centroid);
  }
  std::sort(seen.begin(), seen.end());
  std::vector<int> out;
  for (const auto& [loss, shape] : seen)
    if (std::find(out.begin(), out.end(), shape) == out.end())
      out.push_back(shape);
  return out;
}

std::vector<RankedCandidate> nn_rerank(const ShapeDatabase& db,
                                       const objective::Scene& scene,
                                       const std::vector<double>& angles_deg,
                                       const objective::ObjectiveFn& objective,
                                       int n) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (angles_deg.empty()) throw std::invalid_argument("no pose angles");
  const Eigen::VectorXd target = objective::target_descriptor(scene);

  std::vector<std::pair<double, int>> order;  // (descriptor distance, id)
  order.reserve(db.size());
  for (const ShapeRecord& rec : db.shapes) {
    if (rec.descriptor.size() != target.size())
      throw std::invalid_argument("shape " + std::to_string(rec.id) +
                                  " has no descriptor");
    order.emplace_back((target - rec.descriptor).norm(), rec.id);
  }
  std::sort(order.begin(), order.end());
  order.resize(std::min<size_t>(order.size(), static_cast<size_t>(n)));

  std::vector<RankedCandidate> out;
  out.reserve(order.size() * angles_deg.size());
  for (const auto& [dist, id] : order) {
    const ShapeRecord& rec = db.at(id);
    for (const double a : angles_deg) {
      objective::Candidate c;
      c.shape = &rec;
      c.pose = tree::box_pose(rec, scene.box, a);
      c.sample_seed = tree::candidate_sample_seed(rec.id, a);
      try {
        out.push_back({rec.id, a, objective(c)});
      } catch (const std::exception& e) {
        throw std::runtime_error("objective failed on shape " +
                                 std::to_string(rec.id) + ", angle " +
                                 std::to_string(a) + ": " + e.what());
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedCandidate& x, const RankedCandidate& y) {
                     if (x.loss != y.loss) return x.loss < y.loss;
                     if (x.shape_id != y.shape_id) return x.shape_id < y.shape_id;
                     return x.angle_deg < y.angle_deg;
                   });
  return out;
}

namespace {

// Derivative of R = Rz(c) Ry(b) Rx(a) with respect to each angle.
std::array<Eigen::Matrix3d, 3> rotation_jacobian(const Vector3& r) {
  const double a = r.x(), b = r.y(), c = r.z();
  const double ca = std::cos(a), sa = std::sin(a);
  const double cb = std::cos(b), sb = std::sin(b);
  const double cc = std::cos(c), sc = std::sin(c);
  Eigen::Matrix3d Rx, Ry, Rz, dRx, dRy, dRz;
  Rx << 1, 0, 0, 0, ca, -sa, 0, sa, ca;
  Ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  Rz << cc, -sc, 0, sc, cc, 0, 0, 0, 1;
  dRx << 0, 0, 0, 0, -sa, -ca, 0, ca, -sa;
  dRy << -sb, 0, cb, 0, 0, 0, -cb, 0, -sb;
  dRz << -sc, -cc, 0, cc, -sc, 0, 0, 0, 0;
  return {Eigen::Matrix3d(Rz * Ry * dRx), Eigen::Matrix3d(Rz * dRy * Rx),
          Eigen::Matrix3d(dRz * Ry * Rx)};
}

using Params9 = Eigen::Matrix<double, 9, 1>;  // (scale, rotation, translation)

Params9 pack(const Pose& p) {
  Params9 v;
  v << p.scale, p.rotation, p.translation;
  return v;
}

Pose unpack(const Params9& v) {
  Pose p;
  p.scale = v.segment<3>(0).cwiseMax(1e-3);
  p.rotation = v.segment<3>(3);
  p.translation = v.segment<3>(6);
  return p;
}

// Damped Gauss-Newton step on the point-to-point residuals under fixed
// nearest-neighbor correspondences (the argmin term's derivative is the
// derivative at the argmin, so the Jacobian of the chamfer term is the
// Jacobian at the matched point). Returns zero when nothing matches.
Params9 icp_step(const Pose& pose, const Eigen::Ref<const PointCloud>& canon,
                 const Eigen::Ref<const PointCloud>& target, double mu) {
  const Eigen::Matrix3d R = pose.rotation_matrix();
  const auto dR = rotation_jacobian(pose.rotation);
  const PointCloud posed =
      (R * (pose.scale.asDiagonal() * canon)).colwise() + pose.translation;
  const geom::KdIndex index(posed);

  Eigen::Matrix<double, 9, 9> jtj = Eigen::Matrix<double, 9, 9>::Zero();
  Params9 jtr = Params9::Zero();
  Eigen::Matrix<double, 3, 9> J;
  for (Eigen::Index j = 0; j < target.cols(); ++j) {
    const auto [i, d] = index.nearest(target.col(j));
    const Vector3 r = posed.col(i) - target.col(j);
    const Vector3 x = canon.col(i);
    const Vector3 sx = pose.scale.cwiseProduct(x);
    for (int k = 0; k < 3; ++k) {
      J.col(k) = R.col(k) * x[k];   // d residual / d scale_k
      J.col(3 + k) = dR[k] * sx;    // d residual / d rotation_k
      J.col(6 + k) = Vector3::Unit(k);
    }
    jtj.noalias() += J.transpose() * J;
    jtr.noalias() += J.transpose() * r;
  }
  if (jtr.norm() < 1e-14) return Params9::Zero();
  const Eigen::Matrix<double, 9, 9> damped =
      jtj + mu * jtj.diagonal().asDiagonal().toDenseMatrix() +
      1e-12 * Eigen::Matrix<double, 9, 9>::Identity();
  return damped.ldlt().solve(-jtr);
}

}  // namespace

RefineResult refine_pose(const objective::Candidate& start,
                         const objective::Scene& scene,
                         const objective::ObjectiveFn& objective, int steps,
                         uint64_t seed, double start_loss) {
  if (!start.shape) throw std::invalid_argument("candidate has no shape");
  if (steps < 0) throw std::invalid_argument("negative step budget");

  RefineResult res;
  res.pose = start.pose;
  if (std::isnan(start_loss)) {
    res.loss = objective(start);
    res.objective_calls = 1;
  } else {
    res.loss = start_loss;
  }
  if (steps == 0 || scene.target_points.cols() == 0) return res;

  constexpr int kGradSamples = 2000;
  const PointCloud canon = geom::sample_surface_n(start.shape->mesh, kGradSamples,
                                                  derive_seed(seed, 1));
  const PointCloud target = stride_subsample(scene.target_points, kGradSamples);

  // Each proposal consumes one step of the budget. A rejected line search
  // raises the damping, bending the next direction toward steepest descent.
  double mu = 1e-3;
  int step = 0;
  while (step < steps) {
    const Params9 delta = icp_step(res.pose, canon, target, mu);
    if (delta.norm() < 1e-12) break;

    bool accepted = false;
    for (double alpha = 1.0; step < steps && alpha > 1.0 / 64.0; alpha *= 0.5) {
      objective::Candidate c = start;
      c.pose = unpack(pack(res.pose) + alpha * delta);
      ++step;
      ++res.objective_calls;
      const double l = objective(c);
      if (l < res.loss) {
        res.loss = l;
        res.pose = c.pose;
        accepted = true;
        break;
      }
    }
    if (accepted) {
      mu = std::max(mu * 0.5, 1e-4);
    } else {
      mu *= 10.0;
      if (mu > 1e4) break;
    }
  }
  return res;
}

}  // namespace hoc::search
