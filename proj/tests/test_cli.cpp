#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared workspace built once: a small database, scenes, and a tree that the
// cases below run against. Commands execute with the workspace as cwd.
struct Workspace {
  fs::path root;

  Workspace() : root(fs::temp_directory_path() / "hoc_cli_test") {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }

  RunResult run(const std::string& args) const {
    const fs::path out = root / ".cmd_out";
    const std::string cmd = "cd '" + root.string() + "' && '" + HOC_CLI_PATH +
                            "' " + args + " > '" + out.string() + "' 2>&1";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.output = slurp(out);
    return r;
  }

  json read_json(const std::string& rel) const {
    return json::parse(slurp(root / rel));
  }
};

const Workspace& ws() {
  static Workspace w;
  static bool ready = [] {
    REQUIRE(w.run("gen-db --families box,cylinder,table --count 9 --seed 1 --out db").exit_code == 0);
    REQUIRE(w.run("gen-scenes --db db --count 2 --sigma 0.003 --dropout 0.05 "
                  "--occluders 0 --frames 4 --seed 7 --out scenes").exit_code == 0);
    REQUIRE(w.run("build-tree --db db --k 3 --pose-angles 0,90,180,270 --seed 3 "
                  "--out tree.json").exit_code == 0);
    return true;
  }();
  (void)ready;
  return w;
}

}  // namespace

TEST_CASE("search at full budget matches exhaustive through the CLI") {
  const auto& w = ws();
  REQUIRE(w.run("search --tree tree.json --scene scenes/scene_0000 --objective rac "
                "--iters 36 --seed 5 --out out/hoc.json").exit_code == 0);
  REQUIRE(w.run("exhaustive --db db --scene scenes/scene_0000 --objective rac "
                "--angles 4 --out out/ex.json").exit_code == 0);
  const json hoc = w.read_json("out/hoc.json");
  const json ex = w.read_json("out/ex.json");
  CHECK(hoc.at("version") == 1);
  CHECK(hoc.at("best").at("shape") == ex.at("best").at("shape"));
  CHECK(hoc.at("best").at("angle_deg") == ex.at("best").at("angle_deg"));
  CHECK(hoc.at("best").at("loss") == ex.at("best").at("loss"));
  CHECK(hoc.at("evaluations") == 36);
  CHECK(ex.at("evaluations") == 36);
  CHECK(hoc.at("trace").size() == 36);
  // The scene's box is exact ground truth, so the right model should win.
  const json spec = json::parse(slurp(w.root / "scenes/scene_0000/scene.json"));
  CHECK(ex.at("best").at("shape") == spec.at("spec").at("shape_id"));
}

TEST_CASE("search re-runs are byte-identical") {
  const auto& w = ws();
  REQUIRE(w.run("search --tree tree.json --scene scenes/scene_0001 --objective cd "
                "--iters 10 --refine --seed 2 --out out/a.json").exit_code == 0);
  const std::string first = slurp(w.root / "out/a.json");
  REQUIRE(w.run("search --tree tree.json --scene scenes/scene_0001 --objective cd "
                "--iters 10 --refine --seed 2 --out out/a.json").exit_code == 0);
  CHECK(first == slurp(w.root / "out/a.json"));
  CHECK(first.find("\"refined_loss\"") != std::string::npos);
}

TEST_CASE("baselines run and report their contracts") {
  const auto& w = ws();
  REQUIRE(w.run("baseline --method greedy --tree tree.json --scene scenes/scene_0000 "
                "--objective rac --out out/greedy.json").exit_code == 0);
  REQUIRE(w.run("baseline --method nn-rerank --n 3 --tree tree.json --scene "
                "scenes/scene_0000 --objective rac --out out/nn.json").exit_code == 0);
  const json g = w.read_json("out/greedy.json");
  const json n = w.read_json("out/nn.json");
  // Greedy memoizes, so it can never exceed |angles| * depth * k.
  const json tree = json::parse(slurp(w.root / "tree.json"));
  CHECK(g.at("evaluations").get<int>() <= 4 * 3 * 3 + 4);
  CHECK(n.at("evaluations") == 3 * 4);  // n shapes at every angle
  CHECK(n.at("ranked_shapes").size() == 3);
  CHECK(tree.at("version") == 1);
}

TEST_CASE("bench emits matching CSV and JSON with exact speedup") {
  const auto& w = ws();
  REQUIRE(w.run("bench --scenes scenes --methods hoc,exhaustive --tree tree.json "
                "--objective rac --iters 9 --seed 11 --jobs 2 --out out/report.csv")
              .exit_code == 0);
  const std::string csv = slurp(w.root / "out/report.csv");
  const json rep = w.read_json("out/report.json");
  REQUIRE(rep.at("records").size() == 4);  // 2 methods x 2 scenes

  // 36 leaves at 9 iterations: the speedup column is exactly 4.
  double hoc_speedup = 0;
  for (const auto& a : rep.at("aggregates"))
    if (a.at("method") == "hoc") hoc_speedup = a.at("speedup").get<double>();
  CHECK(hoc_speedup == 4.0);
  CHECK(csv.find(",4,") != std::string::npos);

  // Without --timing the wall column is zero, so re-runs are byte-stable.
  const std::string first = csv;
  REQUIRE(w.run("bench --scenes scenes --methods hoc,exhaustive --tree tree.json "
                "--objective rac --iters 9 --seed 11 --jobs 1 --out out/report.csv")
              .exit_code == 0);
  CHECK(first == slurp(w.root / "out/report.csv"));

  // Every record carries a chamfer against ground truth.
  for (const auto& r : rep.at("records")) CHECK(r.contains("chamfer_gt"));
}

TEST_CASE("eval aggregates result files against both references") {
  const auto& w = ws();
  REQUIRE(w.run("search --tree tree.json --scene scenes/scene_0000 --objective rac "
                "--iters 36 --seed 5 --out res/hoc0.json").exit_code == 0);
  REQUIRE(w.run("exhaustive --db db --scene scenes/scene_0000 --objective rac "
                "--angles 4 --out res/ex0.json").exit_code == 0);
  REQUIRE(w.run("eval --results res --reference exhaustive --k 1,5 "
                "--out out/metrics.json").exit_code == 0);
  const json m = w.read_json("out/metrics.json");
  for (const auto& a : m.at("aggregates")) {
    CHECK(a.at("topk").at("1") == 1.0);  // full budget agrees with exhaustive
    CHECK(a.at("topk").at("5") == 1.0);
  }

  REQUIRE(w.run("eval --results res --reference gt --k 1 --out out/metrics_gt.json")
              .exit_code == 0);
  const json mg = w.read_json("out/metrics_gt.json");
  for (const auto& r : mg.at("records")) CHECK(r.contains("chamfer_gt"));
}

TEST_CASE("config file fills defaults and flags override it") {
  const auto& w = ws();
  std::ofstream(w.root / "cfg.ini") << "[search]\niters=12\nseed=9\n";
  REQUIRE(w.run("search --config cfg.ini --tree tree.json --scene scenes/scene_0000 "
                "--objective rac --out out/cfg.json").exit_code == 0);
  CHECK(w.read_json("out/cfg.json").at("iters") == 12);
  CHECK(w.read_json("out/cfg.json").at("seed") == 9);

  REQUIRE(w.run("search --config cfg.ini --iters 5 --tree tree.json --scene "
                "scenes/scene_0000 --objective rac --out out/cfg2.json").exit_code == 0);
  CHECK(w.read_json("out/cfg2.json").at("iters") == 5);
  CHECK(w.read_json("out/cfg2.json").at("seed") == 9);
}

TEST_CASE("failures exit non-zero with a message") {
  const auto& w = ws();
  const auto missing = w.run("search --tree nope.json --scene scenes/scene_0000 --out x.json");
  CHECK(missing.exit_code != 0);
  CHECK(missing.output.find("nope.json") != std::string::npos);

  CHECK(w.run("gen-db --families wedge --count 2 --seed 1 --out dbx").exit_code != 0);
  CHECK(w.run("search --tree tree.json --bogus 1").exit_code != 0);
  CHECK(w.run("eval --results out --reference nonsense --k 1 --out y.json").exit_code != 0);
  CHECK(w.run("").exit_code != 0);  // a subcommand is required
}
