#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pudefect/core_data.hpp"

namespace pudefect {

inline constexpr double kEulerGamma = 0.5772156649;

/// Expected path length of an unsuccessful BST search over n points.
template <typename Scalar = double>
Scalar avg_path_norm(std::int64_t n) {
  if (n <= 1) return Scalar(0);
  if (n == 2) return Scalar(1);
  const Scalar m = static_cast<Scalar>(n);
  return Scalar(2) * (std::log(m - Scalar(1)) + Scalar(kEulerGamma)) -
         Scalar(2) * (m - Scalar(1)) / m;
}

struct ForestConfig {
  int n_estimators = 100;
  int subsample_size = 256;
  double contamination = 0.1;
  std::optional<int> max_depth;  // unset: ceil(log2(subsample_size))
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
  int effective_max_depth() const;
};

struct IsoNode {
  // Internal nodes have split_dim >= 0 and two children; leaves have
  // split_dim == -1 and record how many training rows reached them.
  std::int32_t split_dim = -1;
  double split_value = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int64_t size = 0;

  bool is_leaf() const { return split_dim < 0; }
};

/// Flat array of nodes, root at index 0. Rows with x[dim] < split_value go
/// left.
class IsoTree {
 public:
  IsoTree() = default;
  explicit IsoTree(std::vector<IsoNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<IsoNode>& nodes() const { return nodes_; }
  int depth() const;

  /// Edges from root to the reached leaf plus avg_path_norm(leaf size).
  double path_length(std::span<const double> x) const;
  double path_length(const FeatureRow& x) const;

 private:
  std::vector<IsoNode> nodes_;
};

/// Grows one isolation tree over `rows` of `data`.
IsoTree build_iso_tree(const FeatureMatrix& data,
                       std::vector<std::size_t> rows, int max_depth,
                       std::uint64_t seed);

class IsolationForest {
 public:
  IsolationForest() = default;
  IsolationForest(ForestConfig config, std::vector<IsoTree> trees,
                  std::int64_t subsample_size, Eigen::Index feature_dim);

  /// Builds config.n_estimators trees on subsamples of min(psi, n) rows.
  static IsolationForest fit(const ForestConfig& config,
                             const FeatureMatrix& positives);

  const ForestConfig& config() const { return config_; }
  const std::vector<IsoTree>& trees() const { return trees_; }
  std::int64_t subsample_size() const { return subsample_size_; }
  double c_psi() const { return c_psi_; }
  Eigen::Index feature_dim() const { return feature_dim_; }

  double mean_path_length(const FeatureRow& x) const;
  /// 2^(-E[h(x)] / c(psi)), in (0, 1].
  double anomaly_score(const FeatureRow& x) const;
  Eigen::VectorXd score_batch(const FeatureMatrix& x) const;

  std::string to_json() const;
  static IsolationForest from_json(const std::string& text);

 private:
  void check_dim(Eigen::Index d) const;

  ForestConfig config_;
  std::vector<IsoTree> trees_;
  std::int64_t subsample_size_ = 0;
  double c_psi_ = 0.0;
  Eigen::Index feature_dim_ = 0;
};

/// Score for a known mean path length under normalizer c_psi.
double score_from_path_length(double mean_path_length, double c_psi);

/// Nearest-rank (1 - contamination) quantile of the scores.
double threshold_from_contamination(std::span<const double> scores,
                                    double contamination);

}  // namespace pudefect
