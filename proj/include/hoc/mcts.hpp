#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "hoc/database.hpp"
#include "hoc/hoctree.hpp"
#include "hoc/objective.hpp"
#include "hoc/types.hpp"

namespace hoc::search {

enum class ScoreMode { Raw, MinMax };

struct SearchConfig {
  int iterations = 800;
  double lambda_start = 20.0;
  double lambda_end = 1.0;
  uint64_t seed = 0;
  bool refine = false;
  int refine_steps_incremental = 150;
  int refine_steps_final = 800;
  bool extra_45 = false;  // also score yaw+45 on each selected model
  ScoreMode score_mode = ScoreMode::Raw;
  bool refine_per_branch = false;  // trigger on per-branch best, not global
};

struct TraceEntry {
  int iter = 0;   // 1-based
  int leaf = -1;  // node index in the tree
  double angle_deg = 0.0;
  double loss = 0.0;
  double score = 0.0;
  bool best_so_far = false;
  bool refined = false;
};

struct SearchResult {
  int best_shape = -1;
  double best_angle_deg = 0.0;
  double best_score = -std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();
  // Final pose and loss; includes the final refinement pass when enabled,
  // otherwise equals the best candidate's pose and loss.
  Pose refined_pose;
  double refined_loss = std::numeric_limits<double>::infinity();
  int evaluations = 0;      // distinct leaves evaluated (= iterations used)
  int objective_calls = 0;  // every expensive objective invocation
  std::vector<TraceEntry> trace;
};

// S(N) + lambda * sqrt(log(parent_visits) / visits), natural log.
// Calling this for an unvisited node is a contract violation.
double ucb(double score, int64_t visits, int64_t parent_visits, double lambda);

// Exploration weight at 1-based iteration i, linear from lambda_start at i=1
// to lambda_end at i=N. Exact at both endpoints.
double lambda_at(const SearchConfig& config, int iter);

// MCTS over the HOC tree: UCB selection among visited unlocked children (ties
// to the lowest index), uniform random pick of an unvisited child plus
// uniform rollout to a leaf, score s = -loss, max-backup, and locking of
// exhausted subtrees. Each pose branch keeps an independent refined pose that
// seeds every candidate in that branch. Runs min(iterations, leaves)
// evaluations; never evaluates a leaf twice. Deterministic given the seed.
// Mutates the tree's statistics in place.
SearchResult hoc_search(tree::HocTree& tree, const ShapeDatabase& db,
                        const objective::Scene& scene,
                        const objective::ObjectiveFn& objective,
                        const SearchConfig& config);

struct RankedCandidate {
  int shape_id = -1;
  double angle_deg = 0.0;
  double loss = std::numeric_limits<double>::infinity();
};

// Every (shape, angle) pair exactly once, sorted ascending by loss; ties keep
// (shape id, angle) order.
std::vector<RankedCandidate> exhaustive_search(
    const ShapeDatabase& db, const objective::Scene& scene,
    const std::vector<double>& angles_deg, const objective::ObjectiveFn& objective);

// Per pose branch, descend from the branch root by evaluating each child's
// centroid model and entering the best; the reached leaf competes across
// branches. Evaluations are memoized by (shape, angle), so the total count is
// at most |angles| * depth * k.
SearchResult greedy_search(const tree::HocTree& tree, const ShapeDatabase& db,
                           const objective::Scene& scene,
                           const objective::ObjectiveFn& objective);

// Top-n shapes by descriptor distance to the target cloud (ties to lowest
// id), each evaluated at all angles with the expensive objective; sorted
// ascending. n is clamped to the database size.
std::vector<RankedCandidate> nn_rerank(const ShapeDatabase& db,
                                       const objective::Scene& scene,
                                       const std::vector<double>& angles_deg,
                                       const objective::ObjectiveFn& objective,
                                       int n);

// Distinct shape ids best-first from a search trace. Internal-node entries
// (greedy descent) count for the centroid model they evaluated.
std::vector<int> ranked_shapes(const tree::HocTree& tree,
                               const std::vector<TraceEntry>& trace);

struct RefineResult {
  Pose pose;
  double loss = std::numeric_limits<double>::infinity();
  int objective_calls = 0;
};

// Iterative 9-DOF local optimization. Steps follow an analytic gradient of
// the single-direction chamfer under per-step fixed nearest-neighbor
// correspondences; a proposal is accepted only if the full objective strictly
// decreases, so the returned loss never exceeds the starting loss. The step
// budget counts proposals. Deterministic given the seed. Pass the starting
// loss when known to save one evaluation.
RefineResult refine_pose(const objective::Candidate& start,
                         const objective::Scene& scene,
                         const objective::ObjectiveFn& objective, int steps,
                         uint64_t seed,
                         double start_loss = std::numeric_limits<double>::quiet_NaN());

}  // namespace hoc::search
