#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "pudefect/iforest.hpp"
#include "pudefect/mlp.hpp"

namespace pudefect {

/// Everything one weak-supervision experiment needs. Sub-config seeds are
/// ignored by the pipeline: they are re-derived from master_seed per stage.
struct RunConfig {
  std::uint64_t master_seed = 0;
  double positive_fraction = 0.1;
  int positive_class = 1;
  ForestConfig forest;
  MlpConfig classifier;
  double mixup_alpha = 0.2;
  int folds = 5;
  std::vector<double> fractions{0.05, 0.10, 0.15, 0.20, 0.30};
  int threads = 1;

  void validate() const;
};

/// Forest config with the pipeline's derived seed applied.
ForestConfig stage_forest_config(const RunConfig& cfg, std::uint64_t seed);
/// Classifier config with mixup_alpha and the derived seed applied.
MlpConfig stage_classifier_config(const RunConfig& cfg, std::uint64_t seed);

nlohmann::json to_json(const ForestConfig& c);
nlohmann::json to_json(const MlpConfig& c);
nlohmann::json to_json(const RunConfig& c);

// Strict readers: unknown keys and wrong types raise ErrorKind::kConfig.
ForestConfig forest_config_from_json(const nlohmann::json& j,
                                     ForestConfig base = {});
MlpConfig mlp_config_from_json(const nlohmann::json& j, MlpConfig base = {});
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

}  // namespace pudefect
