#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pudefect/config.hpp"
#include "pudefect/core_data.hpp"
#include "pudefect/iforest.hpp"
#include "pudefect/mlp.hpp"

namespace pudefect {

/// Unlabeled rows ordered from most to least anomalous.
struct RankedPool {
  std::vector<std::size_t> order;
  std::vector<double> scores;  // scores[r] belongs to row order[r]

  std::size_t size() const { return order.size(); }
};

struct CounterExampleSet {
  std::vector<std::size_t> indices;  // rows of U

  std::size_t size() const { return indices.size(); }
};

/// Descending score, ties by ascending row index.
RankedPool rank_scores(const Eigen::VectorXd& scores);
RankedPool rank_unlabeled(const IsolationForest& forest,
                          const FeatureMatrix& unlabeled);

/// The first min(k, |U|) entries of the ranking.
CounterExampleSet mine_counter_examples(const RankedPool& pool,
                                        std::int64_t k);

struct TrainingSet {
  LabeledDataset data;
  std::vector<std::string> warnings;
};

/// P rows labeled 1, counter-examples labeled 0, rows shuffled by seed.
TrainingSet assemble_training_set(const FeatureMatrix& positives,
                                  const FeatureMatrix& unlabeled,
                                  const CounterExampleSet& counter_examples,
                                  std::uint64_t seed);

struct WeakPipelineResult {
  IsolationForest forest;
  RankedPool pool;
  CounterExampleSet counter_examples;
  LabeledDataset training_set;
  TrainedClassifier classifier;
  Eigen::VectorXd predictions;  // probability of the positive class per U row
  std::vector<std::string> warnings;
};

/// Seeds each stage uses, derived from one master seed.
struct PipelineSeeds {
  std::uint64_t forest;
  std::uint64_t assemble;
  std::uint64_t classifier;
};
PipelineSeeds pipeline_seeds(std::uint64_t master_seed);

/// fit forest on P -> rank U -> mine |P| -> assemble -> train -> predict U.
/// Errors are rethrown prefixed with the failing stage's name.
WeakPipelineResult run_weak_pipeline(const PUDataset& pu,
                                     const RunConfig& cfg);

/// `rank,unlabeled_index,score` with round-trip exact scores.
void save_ranked_pool(const RankedPool& pool,
                      const std::filesystem::path& path);
RankedPool load_ranked_pool(const std::filesystem::path& path);

}  // namespace pudefect
