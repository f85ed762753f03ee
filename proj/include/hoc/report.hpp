#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "hoc/database.hpp"
#include "hoc/types.hpp"

namespace hoc::report {

// Fraction of queries whose reference shape appears among the first k entries
// of that query's ranked list. Lists shorter than k are used as-is.
double topk_ra(const std::vector<std::vector<int>>& ranked,
               const std::vector<int>& reference, int k);

// Chamfer between retrieved and ground-truth placements, fresh surface
// samples per side (10k, seeded from the query id) so repeated reports are
// byte-identical.
double chamfer_to_gt(const ShapeDatabase& db, int query_id, int shape_id,
                     const Pose& pose, int gt_shape_id, const Pose& gt_pose);

struct RetrievalResult {
  int query_id = -1;
  int shape_id = -1;
  Pose pose;
  int gt_shape_id = -1;  // -1 marks missing ground truth
  Pose gt_pose;
};

// Mean chamfer_to_gt over the results. Results lacking ground truth make the
// call fail with a message listing their query ids.
double mean_chamfer_report(const std::vector<RetrievalResult>& results,
                           const ShapeDatabase& db);

struct QueryRecord {
  int query_id = -1;
  std::string method;
  int best_shape = -1;
  double best_angle_deg = 0.0;
  double loss = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  double wall_ms = 0.0;
  double chamfer_gt = std::numeric_limits<double>::quiet_NaN();
  int reference_shape = -1;  // -1 when no reference is known
  std::vector<int> ranked_shapes;  // best-first, deduplicated
};

struct MethodAggregate {
  std::string method;
  int queries = 0;
  double mean_chamfer_gt = std::numeric_limits<double>::quiet_NaN();
  std::map<int, double> topk;  // k -> retrieval accuracy
  double mean_evaluations = 0.0;
  double speedup = std::numeric_limits<double>::quiet_NaN();
  double mean_wall_ms = 0.0;
};

struct EvalReport {
  std::vector<QueryRecord> records;
  std::vector<MethodAggregate> aggregates;
};

// Aggregates per method, in first-appearance order. Speedup is the ratio of
// the exhaustive method's mean evaluation count to this method's; NaN without
// an "exhaustive" method in the records. Top-k accuracies are computed only
// when every record of the method carries a reference.
std::vector<MethodAggregate> aggregate(const std::vector<QueryRecord>& records,
                                       const std::vector<int>& ks);

// CSV: a records table and an aggregates table separated by a blank line.
// Doubles print with %.17g, so outputs are byte-stable.
void write_csv(const EvalReport& report, const std::filesystem::path& path);
void write_json(const EvalReport& report, const std::filesystem::path& path);

}  // namespace hoc::report
