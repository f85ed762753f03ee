#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "hoc/database.hpp"
#include "hoc/hoctree.hpp"
#include "hoc/mcts.hpp"
#include "hoc/objective.hpp"
#include "hoc/report.hpp"
#include "hoc/rng.hpp"
#include "hoc/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hoc;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  if (out.empty()) throw std::invalid_argument("empty list: '" + s + "'");
  return out;
}

std::vector<double> parse_angle_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) out.push_back(std::stod(tok));
  return out;
}

std::vector<double> uniform_angles(int n) {
  if (n < 1) throw std::invalid_argument("--angles must be >= 1");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = 360.0 * i / n;
  return out;
}

search::ScoreMode parse_score_mode(const std::string& s) {
  if (s == "raw") return search::ScoreMode::Raw;
  if (s == "minmax") return search::ScoreMode::MinMax;
  throw std::invalid_argument("unknown score mode '" + s + "' (raw|minmax)");
}

json pose_json(const Pose& p) {
  return json{{"scale", {p.scale.x(), p.scale.y(), p.scale.z()}},
              {"rotation", {p.rotation.x(), p.rotation.y(), p.rotation.z()}},
              {"translation",
               {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

Pose pose_from_json(const json& j) {
  Pose p;
  for (int k = 0; k < 3; ++k) {
    p.scale[k] = j.at("scale").at(k).get<double>();
    p.rotation[k] = j.at("rotation").at(k).get<double>();
    p.translation[k] = j.at("translation").at(k).get<double>();
  }
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// The tree records where its database lives. A relative recording is tried
// against the working directory first, then against the tree file's parent.
ShapeDatabase load_tree_db(const tree::HocTree& t, const fs::path& tree_path,
                           std::string* resolved = nullptr) {
  if (t.db_dir.empty())
    throw std::runtime_error("tree has no db reference; pass a tree built by build-tree");
  fs::path dir = t.db_dir;
  if (!fs::exists(dir / "db.json") && dir.is_relative() &&
      tree_path.has_parent_path())
    dir = tree_path.parent_path() / t.db_dir;
  if (resolved) *resolved = dir.string();
  return load_database(dir.string());
}

std::vector<int> ranked_from_candidates(const std::vector<search::RankedCandidate>& rc) {
  std::vector<int> out;
  for (const auto& c : rc)
    if (std::find(out.begin(), out.end(), c.shape_id) == out.end())
      out.push_back(c.shape_id);
  return out;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

struct GenDbOpts {
  std::string families, out;
  int count = 0;
  uint64_t seed = 0;
};

void run_gen_db(const GenDbOpts& o) {
  std::vector<synth::ShapeFamily> fams;
  for (const auto& name : split_list(o.families))
    fams.push_back(synth::parse_family(name));
  const ShapeDatabase db = synth::gen_database(fams, o.count, o.seed);
  save_database(db, o.out);
  std::cout << "wrote " << db.size() << " shapes to " << o.out << "\n";
}

struct GenScenesOpts {
  std::string db, out;
  int count = 0, frames = 14;
  double sigma = 0.0, dropout = 0.0, occluders = 0.0;
  double perturb_yaw = 0.0, perturb_trans = 0.0, perturb_scale = 0.0;
  bool axis_aligned = false;
  uint64_t seed = 0;
};

void run_gen_scenes(const GenScenesOpts& o) {
  const ShapeDatabase db = load_database(o.db);
  if (db.empty()) throw std::runtime_error("empty database: " + o.db);
  const std::vector<int> ids = db.all_ids();
  fs::create_directories(o.out);
  for (int i = 0; i < o.count; ++i) {
    CounterRng rng(derive_seed(o.seed, 0x5ce2, i));
    synth::SceneSpec spec;
    spec.shape_id = ids[rng.uniform_int(ids.size())];
    const double overall = rng.uniform(0.85, 1.25);
    for (int a = 0; a < 3; ++a) spec.pose.scale[a] = overall * rng.uniform(0.9, 1.1);
    spec.pose.rotation = Vector3(0, 0, rng.uniform(0.0, 2.0 * M_PI));
    spec.pose.translation = Vector3(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                                    rng.uniform(0.3, 0.7));
    spec.cameras = o.frames;
    spec.sigma = o.sigma;
    spec.dropout = o.dropout;
    spec.occluders = o.occluders;
    spec.seed = derive_seed(o.seed, 0xacde, i);

    synth::GeneratedScene gs = synth::gen_scene(db, spec);
    if (o.perturb_yaw > 0 || o.perturb_trans > 0 || o.perturb_scale > 0 ||
        o.axis_aligned)
      gs.scene.box = synth::perturb_box(gs.gt_box, o.perturb_yaw, o.perturb_trans,
                                        o.perturb_scale, o.axis_aligned,
                                        derive_seed(o.seed, 0x9e27, i));

    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d", i);
    synth::save_scene(gs, fs::path(o.out) / name);
  }
  std::cout << "wrote " << o.count << " scenes to " << o.out << "\n";
}

struct BuildTreeOpts {
  std::string db, pose_angles = "0,90,180,270", out;
  int k = 5;
  bool categories = false;
  uint64_t seed = 0;
};

void run_build_tree(const BuildTreeOpts& o) {
  const ShapeDatabase db = load_database(o.db);
  tree::HocTree t = tree::build_tree(db, parse_angle_list(o.pose_angles),
                                     o.categories, o.k, o.seed);
  t.db_dir = o.db;
  tree::save_tree(t, o.out);
  std::cout << "tree: " << t.leaf_count() << " leaves, depth "
            << t.cluster_depth() << ", " << o.out << "\n";
}

struct SearchOpts {
  std::string tree, scene, objective = "rac", score_mode = "raw", out;
  int iters = 800;
  bool refine = false, extra_45 = false;
  uint64_t seed = 0;
};

void run_search(const SearchOpts& o) {
  tree::HocTree t = tree::load_tree(o.tree);
  std::string db_path;
  const ShapeDatabase db = load_tree_db(t, o.tree, &db_path);
  const synth::GeneratedScene gs = synth::load_scene(o.scene);
  const objective::ObjectiveKind kind = objective::parse_objective(o.objective);
  const objective::ObjectiveFn fn =
      objective::make_objective(kind, gs.scene, objective::ObjectiveWeights{});

  search::SearchConfig cfg;
  cfg.iterations = o.iters;
  cfg.seed = o.seed;
  cfg.refine = o.refine;
  cfg.extra_45 = o.extra_45;
  cfg.score_mode = parse_score_mode(o.score_mode);
  const search::SearchResult res = search::hoc_search(t, db, gs.scene, fn, cfg);

  json trace = json::array();
  for (const auto& e : res.trace)
    trace.push_back({{"iter", e.iter},
                     {"leaf", e.leaf},
                     {"angle_deg", e.angle_deg},
                     {"loss", e.loss},
                     {"score", e.score},
                     {"best_so_far", e.best_so_far},
                     {"refined", e.refined}});
  const json out{{"version", 1},
                 {"method", "hoc"},
                 {"objective", o.objective},
                 {"tree", o.tree},
                 {"db", db_path},
                 {"scene", o.scene},
                 {"iters", o.iters},
                 {"seed", o.seed},
                 {"refine", o.refine},
                 {"extra_45", o.extra_45},
                 {"score_mode", o.score_mode},
                 {"best", {{"shape", res.best_shape},
                           {"angle_deg", res.best_angle_deg},
                           {"loss", res.best_loss},
                           {"score", res.best_score}}},
                 {"pose", pose_json(res.refined_pose)},
                 {"refined_loss", res.refined_loss},
                 {"evaluations", res.evaluations},
                 {"objective_calls", res.objective_calls},
                 {"ranked_shapes", search::ranked_shapes(t, res.trace)},
                 {"trace", std::move(trace)}};
  write_text(o.out, dump_json(out));
  std::cout << "best shape " << res.best_shape << " at " << res.best_angle_deg
            << " deg, loss " << res.best_loss << " (" << res.evaluations
            << " evaluations)\n";
}

struct ExhaustiveOpts {
  std::string db, scene, objective = "rac", out;
  int angles = 4;
};

void run_exhaustive(const ExhaustiveOpts& o) {
  const ShapeDatabase db = load_database(o.db);
  const synth::GeneratedScene gs = synth::load_scene(o.scene);
  const objective::ObjectiveKind kind = objective::parse_objective(o.objective);
  const objective::ObjectiveFn fn =
      objective::make_objective(kind, gs.scene, objective::ObjectiveWeights{});
  const std::vector<double> angles = uniform_angles(o.angles);
  const auto ranked = search::exhaustive_search(db, gs.scene, angles, fn);

  json ranked_json = json::array();
  for (const auto& c : ranked)
    ranked_json.push_back(
        {{"shape", c.shape_id}, {"angle_deg", c.angle_deg}, {"loss", c.loss}});
  const auto& best = ranked.front();
  const json out{
      {"version", 1},
      {"method", "exhaustive"},
      {"objective", o.objective},
      {"db", o.db},
      {"scene", o.scene},
      {"angles", angles},
      {"best", {{"shape", best.shape_id},
                {"angle_deg", best.angle_deg},
                {"loss", best.loss}}},
      {"pose", pose_json(tree::box_pose(db.at(best.shape_id), gs.scene.box,
                                        best.angle_deg))},
      {"evaluations", static_cast<int>(ranked.size())},
      {"ranked_shapes", ranked_from_candidates(ranked)},
      {"ranked", std::move(ranked_json)}};
  write_text(o.out, dump_json(out));
  std::cout << "best shape " << best.shape_id << " at " << best.angle_deg
            << " deg, loss " << best.loss << " (" << ranked.size()
            << " evaluations)\n";
}

struct BaselineOpts {
  std::string method, tree, scene, objective = "rac", out;
  int n = 5;
  uint64_t seed = 0;
};

void run_baseline(const BaselineOpts& o) {
  const tree::HocTree t = tree::load_tree(o.tree);
  std::string db_path;
  const ShapeDatabase db = load_tree_db(t, o.tree, &db_path);
  const synth::GeneratedScene gs = synth::load_scene(o.scene);
  const objective::ObjectiveKind kind = objective::parse_objective(o.objective);
  const objective::ObjectiveFn fn =
      objective::make_objective(kind, gs.scene, objective::ObjectiveWeights{});

  json out{{"version", 1}, {"method", o.method}, {"objective", o.objective},
           {"tree", o.tree}, {"db", db_path},    {"scene", o.scene},
           {"seed", o.seed}};
  if (o.method == "greedy") {
    const search::SearchResult res = search::greedy_search(t, db, gs.scene, fn);
    out["best"] = {{"shape", res.best_shape},
                   {"angle_deg", res.best_angle_deg},
                   {"loss", res.best_loss}};
    out["pose"] = pose_json(res.refined_pose);
    out["evaluations"] = res.evaluations;
    out["ranked_shapes"] = search::ranked_shapes(t, res.trace);
  } else if (o.method == "nn-rerank") {
    const auto ranked =
        search::nn_rerank(db, gs.scene, t.pose_angles_deg, fn, o.n);
    const auto& best = ranked.front();
    out["n"] = o.n;
    out["best"] = {{"shape", best.shape_id},
                   {"angle_deg", best.angle_deg},
                   {"loss", best.loss}};
    out["pose"] = pose_json(
        tree::box_pose(db.at(best.shape_id), gs.scene.box, best.angle_deg));
    out["evaluations"] = static_cast<int>(ranked.size());
    out["ranked_shapes"] = ranked_from_candidates(ranked);
  } else {
    throw std::invalid_argument("unknown method '" + o.method +
                                "' (greedy|nn-rerank)");
  }
  write_text(o.out, dump_json(out));
  std::cout << o.method << ": best shape " << out["best"]["shape"] << ", loss "
            << out["best"]["loss"] << "\n";
}

struct BenchOpts {
  std::string scenes, methods = "hoc,exhaustive", tree, objective = "rac", out;
  int iters = 800, n = 5, jobs = 0;
  bool refine = false, extra_45 = false, timing = false;
  std::string score_mode = "raw";
  uint64_t seed = 0;
};

std::vector<fs::path> list_scene_dirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (!fs::is_directory(root))
    throw std::runtime_error("not a directory: " + root.string());
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "scene.json"))
      dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    throw std::runtime_error("no scenes under " + root.string());
  return dirs;
}

void run_pool(size_t n_tasks, int jobs, const std::function<void(size_t)>& fn) {
  const unsigned workers = jobs > 0
      ? static_cast<unsigned>(jobs)
      : std::max(1u, std::thread::hardware_concurrency());
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  auto loop = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= n_tasks) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers && w < n_tasks; ++w) pool.emplace_back(loop);
  loop();
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

void run_bench(const BenchOpts& o) {
  const tree::HocTree master = tree::load_tree(o.tree);
  const ShapeDatabase db = load_tree_db(master, o.tree);
  const std::vector<std::string> methods = split_list(o.methods);
  for (const auto& m : methods)
    if (m != "hoc" && m != "exhaustive" && m != "greedy" && m != "nn-rerank")
      throw std::invalid_argument("unknown method '" + m + "'");
  const objective::ObjectiveKind kind = objective::parse_objective(o.objective);
  const std::vector<fs::path> scene_dirs = list_scene_dirs(o.scenes);

  std::vector<synth::GeneratedScene> scenes(scene_dirs.size());
  run_pool(scene_dirs.size(), o.jobs,
           [&](size_t i) { scenes[i] = synth::load_scene(scene_dirs[i]); });

  struct Task {
    std::string method;
    int query = 0;
  };
  std::vector<Task> tasks;
  for (const auto& m : methods)
    for (size_t q = 0; q < scenes.size(); ++q)
      tasks.push_back({m, static_cast<int>(q)});

  std::vector<report::QueryRecord> records(tasks.size());
  run_pool(tasks.size(), o.jobs, [&](size_t ti) {
    const Task& task = tasks[ti];
    const synth::GeneratedScene& gs = scenes[task.query];
    const objective::ObjectiveFn fn =
        objective::make_objective(kind, gs.scene, objective::ObjectiveWeights{});
    report::QueryRecord rec;
    rec.query_id = task.query;
    rec.method = task.method;

    const auto t0 = std::chrono::steady_clock::now();
    Pose best_pose;
    if (task.method == "hoc") {
      tree::HocTree t = master;
      search::SearchConfig cfg;
      cfg.iterations = o.iters;
      cfg.seed = derive_seed(o.seed, 0xbe9c, task.query);
      cfg.refine = o.refine;
      cfg.extra_45 = o.extra_45;
      cfg.score_mode = parse_score_mode(o.score_mode);
      const auto res = search::hoc_search(t, db, gs.scene, fn, cfg);
      rec.best_shape = res.best_shape;
      rec.best_angle_deg = res.best_angle_deg;
      rec.loss = res.best_loss;
      rec.evaluations = res.evaluations;
      rec.ranked_shapes = search::ranked_shapes(t, res.trace);
      best_pose = res.refined_pose;
    } else if (task.method == "exhaustive") {
      const auto ranked =
          search::exhaustive_search(db, gs.scene, master.pose_angles_deg, fn);
      rec.best_shape = ranked.front().shape_id;
      rec.best_angle_deg = ranked.front().angle_deg;
      rec.loss = ranked.front().loss;
      rec.evaluations = static_cast<int>(ranked.size());
      rec.ranked_shapes = ranked_from_candidates(ranked);
      best_pose = tree::box_pose(db.at(rec.best_shape), gs.scene.box,
                                 rec.best_angle_deg);
    } else if (task.method == "greedy") {
      const auto res = search::greedy_search(master, db, gs.scene, fn);
      rec.best_shape = res.best_shape;
      rec.best_angle_deg = res.best_angle_deg;
      rec.loss = res.best_loss;
      rec.evaluations = res.evaluations;
      rec.ranked_shapes = search::ranked_shapes(master, res.trace);
      best_pose = res.refined_pose;
    } else {  // nn-rerank
      const auto ranked =
          search::nn_rerank(db, gs.scene, master.pose_angles_deg, fn, o.n);
      rec.best_shape = ranked.front().shape_id;
      rec.best_angle_deg = ranked.front().angle_deg;
      rec.loss = ranked.front().loss;
      rec.evaluations = static_cast<int>(ranked.size());
      rec.ranked_shapes = ranked_from_candidates(ranked);
      best_pose = tree::box_pose(db.at(rec.best_shape), gs.scene.box,
                                 rec.best_angle_deg);
    }
    if (o.timing)
      rec.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    rec.chamfer_gt =
        report::chamfer_to_gt(db, rec.query_id, rec.best_shape, best_pose,
                              gs.spec.shape_id, gs.spec.pose);
    records[ti] = std::move(rec);
  });

  // Reference per query: the exhaustive best when it ran, else ground truth.
  std::map<int, int> reference;
  for (const auto& r : records)
    if (r.method == "exhaustive") reference[r.query_id] = r.best_shape;
  for (auto& r : records)
    r.reference_shape = reference.count(r.query_id)
                            ? reference.at(r.query_id)
                            : scenes[r.query_id].spec.shape_id;

  report::EvalReport rep;
  rep.records = std::move(records);
  rep.aggregates = report::aggregate(rep.records, {1, 5});
  const fs::path csv = o.out;
  fs::path js = csv;
  js.replace_extension(".json");
  report::write_csv(rep, csv);
  report::write_json(rep, js);
  std::cout << "bench: " << rep.records.size() << " records over "
            << scenes.size() << " scenes, " << csv.string() << " + "
            << js.string() << "\n";
}

struct EvalOpts {
  std::string results, reference = "exhaustive", k = "1,5", out;
};

void run_eval(const EvalOpts& o) {
  if (o.reference != "exhaustive" && o.reference != "gt")
    throw std::invalid_argument("--reference must be exhaustive or gt");
  std::vector<fs::path> files;
  if (!fs::is_directory(o.results))
    throw std::runtime_error("not a directory: " + o.results);
  for (const auto& e : fs::directory_iterator(o.results))
    if (e.is_regular_file() && e.path().extension() == ".json")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());

  struct Row {
    std::string method, scene, db;
    int shape = -1;
    double angle = 0, loss = 0;
    int evaluations = 0;
    Pose pose;
    std::vector<int> ranked;
  };
  std::vector<Row> rows;
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    try {
      j = json::parse(in);
    } catch (const std::exception&) {
      continue;  // not a result file
    }
    if (!j.is_object() || !j.contains("method") || !j.contains("scene") ||
        !j.contains("best"))
      continue;
    Row r;
    r.method = j.at("method").get<std::string>();
    r.scene = j.at("scene").get<std::string>();
    r.db = j.value("db", "");
    r.shape = j.at("best").at("shape").get<int>();
    r.angle = j.at("best").at("angle_deg").get<double>();
    r.loss = j.at("best").at("loss").get<double>();
    r.evaluations = j.at("evaluations").get<int>();
    if (j.contains("pose")) r.pose = pose_from_json(j.at("pose"));
    r.ranked = j.value("ranked_shapes", std::vector<int>{});
    rows.push_back(std::move(r));
  }
  if (rows.empty())
    throw std::runtime_error("no result files under " + o.results);

  std::vector<std::string> scene_order;
  for (const auto& r : rows)
    if (std::find(scene_order.begin(), scene_order.end(), r.scene) ==
        scene_order.end())
      scene_order.push_back(r.scene);
  std::sort(scene_order.begin(), scene_order.end());
  const auto query_of = [&](const std::string& s) {
    return static_cast<int>(std::find(scene_order.begin(), scene_order.end(), s) -
                            scene_order.begin());
  };

  std::map<std::string, int> exhaustive_best;
  for (const auto& r : rows)
    if (r.method == "exhaustive") exhaustive_best[r.scene] = r.shape;

  // Ground-truth lookups load each scene's spec; chamfer needs the database.
  std::map<std::string, synth::SceneSpec> specs;
  std::map<std::string, ShapeDatabase> dbs;
  if (o.reference == "gt")
    for (const auto& r : rows) {
      if (!specs.count(r.scene)) specs[r.scene] = synth::load_scene(r.scene).spec;
      if (!r.db.empty() && !dbs.count(r.db)) dbs[r.db] = load_database(r.db);
    }

  std::vector<report::QueryRecord> records;
  for (const auto& r : rows) {
    report::QueryRecord q;
    q.query_id = query_of(r.scene);
    q.method = r.method;
    q.best_shape = r.shape;
    q.best_angle_deg = r.angle;
    q.loss = r.loss;
    q.evaluations = r.evaluations;
    q.ranked_shapes = r.ranked;
    if (o.reference == "exhaustive") {
      const auto it = exhaustive_best.find(r.scene);
      if (it == exhaustive_best.end())
        throw std::runtime_error("no exhaustive result for scene " + r.scene);
      q.reference_shape = it->second;
    } else {
      const synth::SceneSpec& spec = specs.at(r.scene);
      q.reference_shape = spec.shape_id;
      if (!r.db.empty())
        q.chamfer_gt = report::chamfer_to_gt(dbs.at(r.db), q.query_id, r.shape,
                                             r.pose, spec.shape_id, spec.pose);
    }
    records.push_back(std::move(q));
  }

  std::vector<int> ks;
  for (const auto& tok : split_list(o.k)) ks.push_back(std::stoi(tok));
  report::EvalReport rep;
  rep.records = std::move(records);
  rep.aggregates = report::aggregate(rep.records, ks);
  report::write_json(rep, o.out);
  std::cout << "eval: " << rep.records.size() << " records, "
            << rep.aggregates.size() << " methods, " << o.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model retrieval from scans via hierarchical clustering trees"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read option defaults from an INI/TOML file");

  GenDbOpts gd;
  auto* gen_db = app.add_subcommand("gen-db", "Generate a synthetic shape database");
  gen_db->add_option("--families", gd.families, "Comma list: box,cylinder,table,chair,shelf")->required();
  gen_db->add_option("--count", gd.count, "Number of shapes")->required()->check(CLI::PositiveNumber);
  gen_db->add_option("--seed", gd.seed, "RNG seed");
  gen_db->add_option("--out", gd.out, "Output database directory")->required();
  gen_db->callback([&] { run_gen_db(gd); });

  GenScenesOpts gs;
  auto* gen_scenes = app.add_subcommand("gen-scenes", "Render synthetic scan scenes");
  gen_scenes->add_option("--db", gs.db, "Database directory")->required();
  gen_scenes->add_option("--count", gs.count, "Number of scenes")->required()->check(CLI::PositiveNumber);
  gen_scenes->add_option("--sigma", gs.sigma, "Depth noise stddev, meters");
  gen_scenes->add_option("--dropout", gs.dropout, "Target cloud thinning fraction");
  gen_scenes->add_option("--occluders", gs.occluders, "Fraction of occluded views");
  gen_scenes->add_option("--frames", gs.frames, "Cameras per scene")->check(CLI::PositiveNumber);
  gen_scenes->add_option("--seed", gs.seed, "RNG seed");
  gen_scenes->add_option("--out", gs.out, "Output scene directory")->required();
  gen_scenes->add_option("--perturb-yaw", gs.perturb_yaw, "Box yaw perturbation bound, degrees");
  gen_scenes->add_option("--perturb-trans", gs.perturb_trans, "Box center perturbation, fraction of extent");
  gen_scenes->add_option("--perturb-scale", gs.perturb_scale, "Box extent perturbation fraction");
  gen_scenes->add_flag("--axis-aligned", gs.axis_aligned, "Zero the proposal box yaw");
  gen_scenes->callback([&] { run_gen_scenes(gs); });

  BuildTreeOpts bt;
  auto* build_tree = app.add_subcommand("build-tree", "Cluster the database into a search tree");
  build_tree->add_option("--db", bt.db, "Database directory")->required();
  build_tree->add_option("--k", bt.k, "Clusters per level")->check(CLI::PositiveNumber);
  build_tree->add_option("--pose-angles", bt.pose_angles, "Comma list of yaw angles, degrees");
  build_tree->add_flag("--categories", bt.categories, "Group by category above pose");
  build_tree->add_option("--seed", bt.seed, "RNG seed");
  build_tree->add_option("--out", bt.out, "Output tree JSON path")->required();
  build_tree->callback([&] { run_build_tree(bt); });

  SearchOpts so;
  auto* search_cmd = app.add_subcommand("search", "Anytime tree search over the database");
  search_cmd->add_option("--tree", so.tree, "Tree JSON path")->required();
  search_cmd->add_option("--scene", so.scene, "Scene directory")->required();
  search_cmd->add_option("--objective", so.objective, "rac|cd|mscd|embed");
  search_cmd->add_option("--iters", so.iters, "Evaluation budget")->check(CLI::PositiveNumber);
  search_cmd->add_flag("--refine", so.refine, "Refine poses during and after search");
  search_cmd->add_flag("--extra-45", so.extra_45, "Score a +45 degree companion per pick");
  search_cmd->add_option("--score-mode", so.score_mode, "raw|minmax");
  search_cmd->add_option("--seed", so.seed, "RNG seed");
  search_cmd->add_option("--out", so.out, "Output result JSON path")->required();
  search_cmd->callback([&] { run_search(so); });

  ExhaustiveOpts eo;
  auto* exhaustive = app.add_subcommand("exhaustive", "Evaluate every model and angle");
  exhaustive->add_option("--db", eo.db, "Database directory")->required();
  exhaustive->add_option("--scene", eo.scene, "Scene directory")->required();
  exhaustive->add_option("--objective", eo.objective, "rac|cd|mscd|embed");
  exhaustive->add_option("--angles", eo.angles, "Number of uniform yaw angles")->check(CLI::PositiveNumber);
  exhaustive->add_option("--out", eo.out, "Output ranking JSON path")->required();
  exhaustive->callback([&] { run_exhaustive(eo); });

  BaselineOpts bo;
  auto* baseline = app.add_subcommand("baseline", "Greedy and NN re-ranking baselines");
  baseline->add_option("--method", bo.method, "greedy|nn-rerank")->required();
  baseline->add_option("--n", bo.n, "Candidates kept by nn-rerank")->check(CLI::PositiveNumber);
  baseline->add_option("--tree", bo.tree, "Tree JSON path")->required();
  baseline->add_option("--scene", bo.scene, "Scene directory")->required();
  baseline->add_option("--objective", bo.objective, "rac|cd|mscd|embed");
  baseline->add_option("--seed", bo.seed, "RNG seed");
  baseline->add_option("--out", bo.out, "Output result JSON path")->required();
  baseline->callback([&] { run_baseline(bo); });

  BenchOpts no;
  auto* bench = app.add_subcommand("bench", "Run methods over a scene set, emit a report");
  bench->add_option("--scenes", no.scenes, "Directory of scene subdirectories")->required();
  bench->add_option("--methods", no.methods, "Comma list: hoc,exhaustive,greedy,nn-rerank");
  bench->add_option("--tree", no.tree, "Tree JSON path")->required();
  bench->add_option("--objective", no.objective, "rac|cd|mscd|embed");
  bench->add_option("--iters", no.iters, "hoc evaluation budget")->check(CLI::PositiveNumber);
  bench->add_option("--n", no.n, "nn-rerank candidate count")->check(CLI::PositiveNumber);
  bench->add_flag("--refine", no.refine, "Refine poses in hoc runs");
  bench->add_flag("--extra-45", no.extra_45, "+45 degree companions in hoc runs");
  bench->add_option("--score-mode", no.score_mode, "raw|minmax");
  bench->add_option("--seed", no.seed, "RNG seed");
  bench->add_option("--jobs", no.jobs, "Worker threads, 0 = hardware");
  bench->add_flag("--timing", no.timing, "Record wall-clock times (breaks byte determinism)");
  bench->add_option("--out", no.out, "Output CSV path (JSON written alongside)")->required();
  bench->callback([&] { run_bench(no); });

  EvalOpts ev;
  auto* eval = app.add_subcommand("eval", "Aggregate result files into metrics");
  eval->add_option("--results", ev.results, "Directory of result JSON files")->required();
  eval->add_option("--reference", ev.reference, "exhaustive|gt");
  eval->add_option("--k", ev.k, "Comma list of k values");
  eval->add_option("--out", ev.out, "Output metrics JSON path")->required();
  eval->callback([&] { run_eval(ev); });

  // Lets `hoc <cmd> --config file` reach the app-level config option.
  for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
