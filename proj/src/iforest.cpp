#include "pudefect/iforest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "pudefect/config.hpp"
#include "pudefect/error.hpp"
#include "pudefect/parallel.hpp"
#include "pudefect/random.hpp"

namespace pudefect {
namespace {

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& data, int max_depth, std::uint64_t seed)
      : data_(data), max_depth_(max_depth), rng_(seed) {}

  std::vector<IsoNode> build(std::vector<std::size_t> rows) {
    grow(std::span<std::size_t>(rows), 0);
    return std::move(nodes_);
  }

 private:
  struct Range {
    double lo;
    double hi;
  };

  Range range_of(std::span<const std::size_t> rows, Eigen::Index dim) const {
    double lo = data_(static_cast<Eigen::Index>(rows[0]), dim);
    double hi = lo;
    for (std::size_t r : rows.subspan(1)) {
      const double v = data_(static_cast<Eigen::Index>(r), dim);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return {lo, hi};
  }

  // Random dimension with a non-zero range over `rows`; up to d random
  // attempts, then a uniform pick among the non-constant dimensions.
  std::optional<std::pair<Eigen::Index, Range>> pick_dimension(
      std::span<const std::size_t> rows) {
    const Eigen::Index d = data_.cols();
    for (Eigen::Index attempt = 0; attempt < d; ++attempt) {
      const auto dim =
          static_cast<Eigen::Index>(rng_.uniform_index(static_cast<std::uint64_t>(d)));
      const Range r = range_of(rows, dim);
      if (r.hi > r.lo) return std::make_pair(dim, r);
    }
    std::vector<Eigen::Index> candidates;
    for (Eigen::Index dim = 0; dim < d; ++dim) {
      const Range r = range_of(rows, dim);
      if (r.hi > r.lo) candidates.push_back(dim);
    }
    if (candidates.empty()) return std::nullopt;
    const Eigen::Index dim = candidates[rng_.uniform_index(candidates.size())];
    return std::make_pair(dim, range_of(rows, dim));
  }

  std::int32_t grow(std::span<std::size_t> rows, int depth) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    IsoNode node;
    node.size = static_cast<std::int64_t>(rows.size());
    if (depth >= max_depth_ || rows.size() <= 1) {
      nodes_[index] = node;
      return index;
    }
    const auto pick = pick_dimension(rows);
    if (!pick) {
      nodes_[index] = node;
      return index;
    }
    const auto [dim, range] = *pick;
    double split = range.lo;
    while (!(split > range.lo && split < range.hi)) {
      split = range.lo + rng_.uniform_open() * (range.hi - range.lo);
    }
    const auto middle = std::stable_partition(
        rows.begin(), rows.end(), [&](std::size_t r) {
          return static_cast<double>(data_(static_cast<Eigen::Index>(r), dim)) <
                 split;
        });
    const auto n_left = static_cast<std::size_t>(middle - rows.begin());

    node.split_dim = static_cast<std::int32_t>(dim);
    node.split_value = split;
    node.left = grow(rows.first(n_left), depth + 1);
    node.right = grow(rows.subspan(n_left), depth + 1);
    nodes_[index] = node;
    return index;
  }

  const FeatureMatrix& data_;
  int max_depth_;
  Rng rng_;
  std::vector<IsoNode> nodes_;
};

nlohmann::json node_to_json(const std::vector<IsoNode>& nodes,
                            std::int32_t index) {
  const IsoNode& n = nodes[static_cast<std::size_t>(index)];
  if (n.is_leaf()) return {{"size", n.size}};
  return {{"dim", n.split_dim},
          {"value", n.split_value},
          {"size", n.size},
          {"left", node_to_json(nodes, n.left)},
          {"right", node_to_json(nodes, n.right)}};
}

std::int32_t node_from_json(const nlohmann::json& j,
                            std::vector<IsoNode>& nodes) {
  const auto index = static_cast<std::int32_t>(nodes.size());
  nodes.emplace_back();
  IsoNode node;
  node.size = j.at("size").get<std::int64_t>();
  if (j.contains("dim")) {
    node.split_dim = j.at("dim").get<std::int32_t>();
    node.split_value = j.at("value").get<double>();
    if (node.split_dim < 0) throw Error(ErrorKind::kFormat, "negative split dimension");
    node.left = node_from_json(j.at("left"), nodes);
    node.right = node_from_json(j.at("right"), nodes);
  }
  nodes[static_cast<std::size_t>(index)] = node;
  return index;
}

}  // namespace

void ForestConfig::validate() const {
  if (n_estimators < 1) throw Error(ErrorKind::kConfig, "n_estimators must be >= 1");
  if (subsample_size < 2) throw Error(ErrorKind::kConfig, "subsample_size must be >= 2");
  if (!(contamination > 0.0 && contamination <= 0.5)) {
    throw Error(ErrorKind::kConfig, "contamination must be in (0, 0.5]");
  }
  if (max_depth && *max_depth < 1) throw Error(ErrorKind::kConfig, "max_depth must be >= 1");
  if (threads < 1) throw Error(ErrorKind::kConfig, "threads must be >= 1");
}

int ForestConfig::effective_max_depth() const {
  if (max_depth) return *max_depth;
  return static_cast<int>(std::ceil(std::log2(static_cast<double>(subsample_size))));
}

int IsoTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> level(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes_[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes_[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes_[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

double IsoTree::path_length(std::span<const double> x) const {
  std::size_t at = 0;
  int edges = 0;
  while (!nodes_[at].is_leaf()) {
    const IsoNode& n = nodes_[at];
    at = static_cast<std::size_t>(
        x[static_cast<std::size_t>(n.split_dim)] < n.split_value ? n.left : n.right);
    ++edges;
  }
  return edges + avg_path_norm(nodes_[at].size);
}

double IsoTree::path_length(const FeatureRow& x) const {
  std::size_t at = 0;
  int edges = 0;
  while (!nodes_[at].is_leaf()) {
    const IsoNode& n = nodes_[at];
    at = static_cast<std::size_t>(
        static_cast<double>(x(n.split_dim)) < n.split_value ? n.left : n.right);
    ++edges;
  }
  return edges + avg_path_norm(nodes_[at].size);
}

IsoTree build_iso_tree(const FeatureMatrix& data, std::vector<std::size_t> rows,
                       int max_depth, std::uint64_t seed) {
  if (rows.empty()) throw Error(ErrorKind::kInsufficientData, "tree over zero rows");
  return IsoTree(TreeBuilder(data, max_depth, seed).build(std::move(rows)));
}

IsolationForest::IsolationForest(ForestConfig config, std::vector<IsoTree> trees,
                                 std::int64_t subsample_size,
                                 Eigen::Index feature_dim)
    : config_(config),
      trees_(std::move(trees)),
      subsample_size_(subsample_size),
      c_psi_(avg_path_norm(subsample_size)),
      feature_dim_(feature_dim) {}

IsolationForest IsolationForest::fit(const ForestConfig& config,
                                     const FeatureMatrix& positives) {
  config.validate();
  if (positives.cols() == 0) {
    throw Error(ErrorKind::kDimension, "cannot fit a forest on d = 0 features");
  }
  if (positives.rows() < 2) {
    throw Error(ErrorKind::kInsufficientData,
                "forest needs at least 2 rows, got " + std::to_string(positives.rows()));
  }
  check_finite(positives, "forest input");

  const auto n = static_cast<std::size_t>(positives.rows());
  const std::size_t psi =
      std::min(n, static_cast<std::size_t>(config.subsample_size));
  const int max_depth = config.effective_max_depth();

  std::vector<IsoTree> trees(static_cast<std::size_t>(config.n_estimators));
  parallel_for(trees.size(), config.threads, [&](std::size_t t) {
    Rng sampler(derive_seed(config.seed, "tree-sample", t));
    auto rows = sample_without_replacement(n, psi, sampler);
    trees[t] = build_iso_tree(positives, std::move(rows), max_depth,
                              derive_seed(config.seed, "tree", t));
  });
  return IsolationForest(config, std::move(trees),
                         static_cast<std::int64_t>(psi), positives.cols());
}

void IsolationForest::check_dim(Eigen::Index d) const {
  if (d != feature_dim_) {
    throw Error(ErrorKind::kDimension, "forest expects d=" +
                                           std::to_string(feature_dim_) +
                                           ", got d=" + std::to_string(d));
  }
}

double IsolationForest::mean_path_length(const FeatureRow& x) const {
  check_dim(x.size());
  double total = 0.0;
  for (const IsoTree& t : trees_) total += t.path_length(x);
  return total / static_cast<double>(trees_.size());
}

double score_from_path_length(double mean_path_length, double c_psi) {
  return std::exp2(-mean_path_length / c_psi);
}

double IsolationForest::anomaly_score(const FeatureRow& x) const {
  return score_from_path_length(mean_path_length(x), c_psi_);
}

Eigen::VectorXd IsolationForest::score_batch(const FeatureMatrix& x) const {
  if (x.rows() > 0) check_dim(x.cols());
  Eigen::VectorXd scores(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) scores(r) = anomaly_score(x.row(r));
  return scores;
}

std::string IsolationForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const IsoTree& t : trees_) trees.push_back(node_to_json(t.nodes(), 0));
  nlohmann::json j = {{"format", "pudefect-iforest"},
                      {"version", 1},
                      {"config", pudefect::to_json(config_)},
                      {"subsample_size", subsample_size_},
                      {"c_psi", c_psi_},
                      {"feature_dim", feature_dim_},
                      {"trees", trees}};
  return j.dump();
}

IsolationForest IsolationForest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "pudefect-iforest" || j.at("version") != 1) {
      throw Error(ErrorKind::kFormat, "not a pudefect forest document");
    }
    ForestConfig config = forest_config_from_json(j.at("config"));
    std::vector<IsoTree> trees;
    for (const auto& tj : j.at("trees")) {
      std::vector<IsoNode> nodes;
      node_from_json(tj, nodes);
      trees.emplace_back(std::move(nodes));
    }
    IsolationForest forest(config, std::move(trees),
                           j.at("subsample_size").get<std::int64_t>(),
                           j.at("feature_dim").get<Eigen::Index>());
    if (forest.trees_.empty()) throw Error(ErrorKind::kFormat, "forest has no trees");
    if (std::abs(forest.c_psi_ - j.at("c_psi").get<double>()) > 1e-12) {
      throw Error(ErrorKind::kFormat, "stored c_psi disagrees with subsample_size");
    }
    return forest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("forest document: ") + e.what());
  }
}

double threshold_from_contamination(std::span<const double> scores,
                                    double contamination) {
  if (scores.empty()) throw Error(ErrorKind::kEmptyInput, "no scores to threshold");
  if (!(contamination > 0.0 && contamination < 1.0)) {
    throw Error(ErrorKind::kArgument, "contamination must be in (0, 1)");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // The epsilon absorbs representation error such as (1 - 0.1) * 10 > 9.
  auto rank = static_cast<std::int64_t>(std::ceil((1.0 - contamination) * n - 1e-9));
  rank = std::clamp<std::int64_t>(rank, 1, static_cast<std::int64_t>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

}  // namespace pudefect
