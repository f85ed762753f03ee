#include "hoc/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hoc/geometry.hpp"
#include "hoc/objective.hpp"
#include "hoc/rng.hpp"
#include "json.hpp"

using nlohmann::json;

namespace hoc::report {

double topk_ra(const std::vector<std::vector<int>>& ranked,
               const std::vector<int>& reference, int k) {
  if (ranked.empty()) throw std::invalid_argument("empty query set");
  if (ranked.size() != reference.size())
    throw std::invalid_argument("ranked/reference size mismatch");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  int hits = 0;
  for (size_t q = 0; q < ranked.size(); ++q) {
    const auto& list = ranked[q];
    const size_t upto = std::min(list.size(), static_cast<size_t>(k));
    for (size_t i = 0; i < upto; ++i)
      if (list[i] == reference[q]) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(ranked.size());
}

double chamfer_to_gt(const ShapeDatabase& db, int query_id, int shape_id,
                     const Pose& pose, int gt_shape_id, const Pose& gt_pose) {
  const ShapeRecord& got = db.at(shape_id);
  const ShapeRecord& want = db.at(gt_shape_id);
  const uint64_t q = static_cast<uint64_t>(query_id);
  const PointCloud a = geom::apply_pose(
      pose, geom::sample_surface_n(got.mesh, objective::kCdSamples,
                                   derive_seed(0xc4a0, q, shape_id)));
  const PointCloud b = geom::apply_pose(
      gt_pose, geom::sample_surface_n(want.mesh, objective::kCdSamples,
                                      derive_seed(0xc4b0, q, gt_shape_id)));
  return geom::chamfer(a, b);
}

double mean_chamfer_report(const std::vector<RetrievalResult>& results,
                           const ShapeDatabase& db) {
  if (results.empty()) throw std::invalid_argument("empty result set");
  std::string missing;
  for (const auto& r : results)
    if (r.gt_shape_id < 0) missing += (missing.empty() ? "" : ", ") + std::to_string(r.query_id);
  if (!missing.empty())
    throw std::invalid_argument("missing ground truth for queries: " + missing);

  double sum = 0.0;
  for (const auto& r : results)
    sum += chamfer_to_gt(db, r.query_id, r.shape_id, r.pose, r.gt_shape_id,
                         r.gt_pose);
  return sum / static_cast<double>(results.size());
}

std::vector<MethodAggregate> aggregate(const std::vector<QueryRecord>& records,
                                       const std::vector<int>& ks) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const QueryRecord*>> by_method;
  for (const auto& r : records) {
    if (!by_method.count(r.method)) order.push_back(r.method);
    by_method[r.method].push_back(&r);
  }

  double exhaustive_mean_evals = std::numeric_limits<double>::quiet_NaN();
  if (const auto it = by_method.find("exhaustive"); it != by_method.end()) {
    double s = 0;
    for (const auto* r : it->second) s += r->evaluations;
    exhaustive_mean_evals = s / static_cast<double>(it->second.size());
  }

  std::vector<MethodAggregate> out;
  for (const std::string& method : order) {
    const auto& rows = by_method[method];
    MethodAggregate agg;
    agg.method = method;
    agg.queries = static_cast<int>(rows.size());

    double chamfer_sum = 0, eval_sum = 0, wall_sum = 0;
    int chamfer_n = 0;
    bool all_ref = true;
    std::vector<std::vector<int>> ranked;
    std::vector<int> reference;
    for (const auto* r : rows) {
      if (std::isfinite(r->chamfer_gt)) {
        chamfer_sum += r->chamfer_gt;
        ++chamfer_n;
      }
      eval_sum += r->evaluations;
      wall_sum += r->wall_ms;
      all_ref = all_ref && r->reference_shape >= 0;
      ranked.push_back(r->ranked_shapes);
      reference.push_back(r->reference_shape);
    }
    if (chamfer_n > 0) agg.mean_chamfer_gt = chamfer_sum / chamfer_n;
    agg.mean_evaluations = eval_sum / static_cast<double>(rows.size());
    agg.mean_wall_ms = wall_sum / static_cast<double>(rows.size());
    if (all_ref)
      for (const int k : ks) agg.topk[k] = topk_ra(ranked, reference, k);
    if (std::isfinite(exhaustive_mean_evals) && agg.mean_evaluations > 0)
      agg.speedup = exhaustive_mean_evals / agg.mean_evaluations;
    out.push_back(std::move(agg));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

json record_json(const QueryRecord& r) {
  json j{{"query", r.query_id},
         {"method", r.method},
         {"best_shape", r.best_shape},
         {"best_angle_deg", r.best_angle_deg},
         {"loss", r.loss},
         {"evaluations", r.evaluations},
         {"wall_ms", r.wall_ms},
         {"reference_shape", r.reference_shape},
         {"ranked", r.ranked_shapes}};
  if (std::isfinite(r.chamfer_gt)) j["chamfer_gt"] = r.chamfer_gt;
  return j;
}

json aggregate_json(const MethodAggregate& a) {
  json topk = json::object();
  for (const auto& [k, v] : a.topk) topk[std::to_string(k)] = v;
  json j{{"method", a.method},
         {"queries", a.queries},
         {"topk", std::move(topk)},
         {"mean_evaluations", a.mean_evaluations},
         {"mean_wall_ms", a.mean_wall_ms}};
  if (std::isfinite(a.mean_chamfer_gt)) j["mean_chamfer_gt"] = a.mean_chamfer_gt;
  if (std::isfinite(a.speedup)) j["speedup"] = a.speedup;
  return j;
}

}  // namespace

void write_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "query,method,best_shape,best_angle_deg,loss,evaluations,wall_ms,"
         "chamfer_gt,reference_shape,ranked\n";
  for (const auto& r : report.records)
    out << r.query_id << ',' << r.method << ',' << r.best_shape << ','
        << fmt(r.best_angle_deg) << ',' << fmt(r.loss) << ',' << r.evaluations
        << ',' << fmt(r.wall_ms) << ',' << fmt(r.chamfer_gt) << ','
        << r.reference_shape << ',' << join_ids(r.ranked_shapes) << '\n';

  out << "\nmethod,queries,mean_chamfer_gt,";
  // Union of k values across aggregates keeps the header stable.
  std::vector<int> ks;
  for (const auto& a : report.aggregates)
    for (const auto& [k, v] : a.topk)
      if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  std::sort(ks.begin(), ks.end());
  for (const int k : ks) out << "top" << k << ',';
  out << "mean_evaluations,speedup,mean_wall_ms\n";
  for (const auto& a : report.aggregates) {
    out << a.method << ',' << a.queries << ',' << fmt(a.mean_chamfer_gt) << ',';
    for (const int k : ks) {
      const auto it = a.topk.find(k);
      out << (it == a.topk.end() ? "nan" : fmt(it->second)) << ',';
    }
    out << fmt(a.mean_evaluations) << ',' << fmt(a.speedup) << ','
        << fmt(a.mean_wall_ms) << '\n';
  }
}

void write_json(const EvalReport& report, const std::filesystem::path& path) {
  json j;
  j["version"] = 1;
  j["records"] = json::array();
  for (const auto& r : report.records) j["records"].push_back(record_json(r));
  j["aggregates"] = json::array();
  for (const auto& a : report.aggregates) j["aggregates"].push_back(aggregate_json(a));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace hoc::report
