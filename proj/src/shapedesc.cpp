#include "hoc/shapedesc.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "hoc/rng.hpp"
#include "json.hpp"

namespace hoc::desc {

namespace {

// Index (in `cols` order) of the column nearest the columns' mean; ties keep
// the earliest entry, so ascending-id member lists break ties to lowest id.
int nearest_to_mean(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                    const std::vector<int>& cols) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(vectors.rows());
  for (int c : cols) mean += vectors.col(c);
  mean /= static_cast<double>(cols.size());
  int best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < cols.size(); ++i) {
    const double sq = (vectors.col(cols[i]) - mean).squaredNorm();
    if (sq < best_sq) {
      best_sq = sq;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

Eigen::VectorXd descriptor(const Eigen::Ref<const PointCloud>& cloud) {
  if (cloud.cols() == 0) throw std::invalid_argument("empty cloud");
  const Vector3 lo = cloud.rowwise().minCoeff();
  const Vector3 hi = cloud.rowwise().maxCoeff();
  const Vector3 ext = hi - lo;
  const double max_ext = ext.maxCoeff();

  Eigen::VectorXd d = Eigen::VectorXd::Zero(kDescriptorDims);
  const double inv = max_ext > 0.0 ? 1.0 / max_ext : 0.0;
  for (Eigen::Index i = 0; i < cloud.cols(); ++i) {
    int bin[3];
    for (int a = 0; a < 3; ++a) {
      const double t = (cloud(a, i) - lo[a]) * inv;
      bin[a] = std::min(static_cast<int>(t * kGridDim), kGridDim - 1);
    }
    d[(bin[2] * kGridDim + bin[1]) * kGridDim + bin[0]] += 1.0;
  }
  d.head(kHistogramBins) /= static_cast<double>(cloud.cols());
  d.tail(3) = max_ext > 0.0 ? Vector3(ext * inv) : Vector3::Ones();
  return d;
}

KMeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& vectors, int k,
                    uint64_t seed) {
  const int n = static_cast<int>(vectors.cols());
  if (n == 0) throw std::invalid_argument("kmeans: no vectors");
  if (k < 1) throw std::invalid_argument("kmeans: k must be positive");

  KMeansResult r;
  if (n <= k) {
    r.assignment.resize(static_cast<size_t>(n));
    std::iota(r.assignment.begin(), r.assignment.end(), 0);
    r.means = vectors;
    r.objective_history = {0.0};
    return r;
  }

  CounterRng rng(seed);
  Eigen::MatrixXd means(vectors.rows(), k);
  means.col(0) = vectors.col(static_cast<Eigen::Index>(rng.uniform_int(n)));
  Eigen::VectorXd d2 =
      (vectors.colwise() - means.col(0)).colwise().squaredNorm().transpose();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    int pick;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.uniform_int(n));
    }
    means.col(c) = vectors.col(pick);
    d2 = d2.cwiseMin(
        (vectors.colwise() - means.col(c)).colwise().squaredNorm().transpose());
  }

  r.assignment.assign(static_cast<size_t>(n), -1);
  std::vector<int> counts(static_cast<size_t>(k), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_sq = (vectors.col(i) - means.col(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double sq = (vectors.col(i) - means.col(c)).squaredNorm();
        if (sq < best_sq) {
          best_sq = sq;
          best = c;
        }
      }
      if (r.assignment[static_cast<size_t>(i)] != best) {
        r.assignment[static_cast<size_t>(i)] = best;
        changed = true;
      }
      ++counts[static_cast<size_t>(best)];
    }

    for (int e = 0; e < k; ++e) {
      if (counts[static_cast<size_t>(e)] != 0) continue;
      const int donor = static_cast<int>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      int far = -1;
      double far_sq = -1.0;
      for (int i = 0; i < n; ++i) {
        if (r.assignment[static_cast<size_t>(i)] != donor) continue;
        const double sq = (vectors.col(i) - means.col(donor)).squaredNorm();
        if (sq > far_sq) {
          far_sq = sq;
          far = i;
        }
      }
      r.assignment[static_cast<size_t>(far)] = e;
      --counts[static_cast<size_t>(donor)];
      counts[static_cast<size_t>(e)] = 1;
      changed = true;
    }

    if (!changed) break;

    means.setZero();
    for (int i = 0; i < n; ++i)
      means.col(r.assignment[static_cast<size_t>(i)]) += vectors.col(i);
    for (int c = 0; c < k; ++c) means.col(c) /= counts[static_cast<size_t>(c)];

    double obj = 0.0;
    for (int i = 0; i < n; ++i)
      obj += (vectors.col(i) - means.col(r.assignment[static_cast<size_t>(i)]))
                 .squaredNorm();
    r.objective_history.push_back(obj);
  }

  r.means = std::move(means);
  return r;
}

int ClusterTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> level(nodes.size(), 1);
  int out = 1;
  // Children always follow their parent in `nodes`, so one forward pass works.
  for (size_t i = 0; i < nodes.size(); ++i)
    for (int c : nodes[i].children) {
      level[static_cast<size_t>(c)] = level[i] + 1;
      out = std::max(out, level[i] + 1);
    }
  return out;
}

int ClusterTree::leaf_count() const {
  int out = 0;
  for (const auto& n : nodes)
    if (n.children.empty()) ++out;
  return out;
}

ClusterTree hierarchical_cluster(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                                 const std::vector<int>& ids, int k, uint64_t seed) {
  if (ids.empty()) throw std::invalid_argument("hierarchical_cluster: no shapes");
  if (vectors.cols() != static_cast<Eigen::Index>(ids.size()))
    throw std::invalid_argument("hierarchical_cluster: ids/vector count mismatch");
  if (k < 2) throw std::invalid_argument("hierarchical_cluster: k must be at least 2");
  {
    std::vector<int> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("hierarchical_cluster: duplicate shape id");
  }

  std::vector<int> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return ids[static_cast<size_t>(a)] < ids[static_cast<size_t>(b)]; });

  ClusterTree t;
  const auto add_node = [&](const std::vector<int>& cols) {
    ClusterNode node;
    node.members.reserve(cols.size());
    for (int c : cols) node.members.push_back(ids[static_cast<size_t>(c)]);
    node.centroid = node.members[static_cast<size_t>(nearest_to_mean(vectors, cols))];
    t.nodes.push_back(std::move(node));
    return static_cast<int>(t.nodes.size()) - 1;
  };

  std::deque<std::pair<int, std::vector<int>>> queue;
  queue.emplace_back(add_node(order), order);
  while (!queue.empty()) {
    auto [ni, cols] = std::move(queue.front());
    queue.pop_front();
    if (cols.size() == 1) continue;

    if (static_cast<int>(cols.size()) <= k) {
      for (int c : cols) {
        const int child = add_node({c});  // may reallocate t.nodes
        t.nodes[static_cast<size_t>(ni)].children.push_back(child);
      }
      continue;
    }

    Eigen::MatrixXd sub(vectors.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t i = 0; i < cols.size(); ++i)
      sub.col(static_cast<Eigen::Index>(i)) = vectors.col(cols[i]);
    const KMeansResult km = kmeans(sub, k, derive_seed(seed, static_cast<uint64_t>(ni)));

    std::vector<std::vector<int>> groups(static_cast<size_t>(k));
    for (size_t i = 0; i < cols.size(); ++i)
      groups[static_cast<size_t>(km.assignment[i])].push_back(cols[i]);
    for (auto& g : groups) {
      if (g.empty()) continue;  // unreachable after repair; keep the tree valid anyway
      const int child = add_node(g);
      t.nodes[static_cast<size_t>(ni)].children.push_back(child);
      queue.emplace_back(child, std::move(g));
    }
  }
  return t;
}

int centroid_of(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                const std::vector<int>& ids, const std::vector<int>& members) {
  if (members.empty()) throw std::invalid_argument("centroid_of: empty cluster");
  std::unordered_map<int, int> column_of;
  column_of.reserve(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) column_of.emplace(ids[i], static_cast<int>(i));

  std::vector<int> sorted = members;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> cols;
  cols.reserve(sorted.size());
  for (int id : sorted) {
    const auto it = column_of.find(id);
    if (it == column_of.end())
      throw std::invalid_argument("centroid_of: unknown shape id " + std::to_string(id));
    cols.push_back(it->second);
  }
  return sorted[static_cast<size_t>(nearest_to_mean(vectors, cols))];
}

void save_descriptors(const std::string& path, const std::vector<int>& ids,
                      const Eigen::MatrixXd& vectors) {
  if (vectors.cols() != static_cast<Eigen::Index>(ids.size()))
    throw std::invalid_argument("save_descriptors: ids/vector count mismatch");
  nlohmann::json arr = nlohmann::json::array();
  for (size_t i = 0; i < ids.size(); ++i) {
    nlohmann::json entry;
    entry["shape_id"] = ids[i];
    auto& vec = entry["vector"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < vectors.rows(); ++r)
      vec.push_back(vectors(r, static_cast<Eigen::Index>(i)));
    arr.push_back(std::move(entry));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << arr.dump();
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<std::vector<int>, Eigen::MatrixXd> load_descriptors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (!arr.is_array()) throw std::runtime_error(path + ": expected a JSON array");

  std::vector<int> ids;
  Eigen::MatrixXd vectors;
  for (size_t i = 0; i < arr.size(); ++i) {
    const auto& entry = arr[i];
    if (!entry.contains("shape_id") || !entry.contains("vector"))
      throw std::runtime_error(path + ": entry missing shape_id or vector");
    const auto& vec = entry["vector"];
    if (i == 0) vectors.resize(static_cast<Eigen::Index>(vec.size()), arr.size());
    if (static_cast<Eigen::Index>(vec.size()) != vectors.rows())
      throw std::runtime_error(path + ": inconsistent vector dimensions");
    ids.push_back(entry["shape_id"].get<int>());
    for (size_t r = 0; r < vec.size(); ++r)
      vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) =
          vec[r].get<double>();
  }
  return {std::move(ids), std::move(vectors)};
}

}  // namespace hoc::desc
