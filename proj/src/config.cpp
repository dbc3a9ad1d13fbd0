#include "pudefect/config.hpp"

#include <set>

#include "pudefect/error.hpp"

namespace pudefect {
namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!j.is_object()) throw Error(ErrorKind::kConfig, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw Error(ErrorKind::kConfig, where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  bool ok = false;
  if constexpr (std::is_same_v<T, bool>) {
    ok = v.is_boolean();
  } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    ok = v.is_number_unsigned();
  } else if constexpr (std::is_integral_v<T>) {
    ok = v.is_number_integer();
  } else if constexpr (std::is_floating_point_v<T>) {
    ok = v.is_number();
  }
  if (!ok) {
    throw Error(ErrorKind::kConfig,
                where + ": '" + key + "' has the wrong type");
  }
  out = v.get<T>();
}

}  // namespace

void RunConfig::validate() const {
  if (!(positive_fraction > 0.0 && positive_fraction <= 1.0)) {
    throw Error(ErrorKind::kConfig, "positive_fraction must be in (0, 1]");
  }
  if (positive_class != 0 && positive_class != 1) {
    throw Error(ErrorKind::kConfig, "positive_class must be 0 or 1");
  }
  if (mixup_alpha < 0.0) throw Error(ErrorKind::kConfig, "mixup_alpha must be >= 0");
  if (folds < 2) throw Error(ErrorKind::kConfig, "folds must be >= 2");
  if (threads < 1) throw Error(ErrorKind::kConfig, "threads must be >= 1");
  if (fractions.empty()) throw Error(ErrorKind::kConfig, "fractions must not be empty");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw Error(ErrorKind::kConfig, "every fraction must be in (0, 1]");
    }
  }
  forest.validate();
  classifier.validate();
}

ForestConfig stage_forest_config(const RunConfig& cfg, std::uint64_t seed) {
  ForestConfig f = cfg.forest;
  f.seed = seed;
  f.threads = cfg.threads;
  return f;
}

MlpConfig stage_classifier_config(const RunConfig& cfg, std::uint64_t seed) {
  MlpConfig m = cfg.classifier;
  m.mixup_alpha = cfg.mixup_alpha;
  m.seed = seed;
  return m;
}

json to_json(const ForestConfig& c) {
  json j = {{"n_estimators", c.n_estimators},
            {"subsample_size", c.subsample_size},
            {"contamination", c.contamination},
            {"seed", c.seed}};
  j["max_depth"] = c.max_depth ? json(*c.max_depth) : json(nullptr);
  return j;
}

json to_json(const MlpConfig& c) {
  return {{"input_dim", c.input_dim},       {"hidden1", c.hidden1},
          {"hidden2", c.hidden2},           {"dropout_rate", c.dropout_rate},
          {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},             {"mixup_alpha", c.mixup_alpha},
          {"seed", c.seed}};
}

json to_json(const RunConfig& c) {
  json forest = to_json(c.forest);
  forest.erase("seed");
  json classifier = to_json(c.classifier);
  for (const char* key : {"seed", "mixup_alpha", "input_dim"}) classifier.erase(key);
  return {{"master_seed", c.master_seed},
          {"positive_fraction", c.positive_fraction},
          {"positive_class", c.positive_class},
          {"mixup_alpha", c.mixup_alpha},
          {"folds", c.folds},
          {"fractions", c.fractions},
          {"threads", c.threads},
          {"forest", forest},
          {"classifier", classifier}};
}

ForestConfig forest_config_from_json(const json& j, ForestConfig base) {
  const std::string where = "forest";
  require_object(j, where, {"n_estimators", "subsample_size", "contamination",
                            "max_depth", "seed"});
  read(j, "n_estimators", base.n_estimators, where);
  read(j, "subsample_size", base.subsample_size, where);
  read(j, "contamination", base.contamination, where);
  read(j, "seed", base.seed, where);
  if (j.contains("max_depth")) {
    if (j.at("max_depth").is_null() || j.at("max_depth") == "auto") {
      base.max_depth.reset();
    } else {
      int depth = 0;
      read(j, "max_depth", depth, where);
      base.max_depth = depth;
    }
  }
  base.validate();
  return base;
}

MlpConfig mlp_config_from_json(const json& j, MlpConfig base) {
  const std::string where = "classifier";
  require_object(j, where, {"input_dim", "hidden1", "hidden2", "dropout_rate",
                            "learning_rate", "batch_size", "epochs",
                            "mixup_alpha", "seed"});
  read(j, "input_dim", base.input_dim, where);
  read(j, "hidden1", base.hidden1, where);
  read(j, "hidden2", base.hidden2, where);
  read(j, "dropout_rate", base.dropout_rate, where);
  read(j, "learning_rate", base.learning_rate, where);
  read(j, "batch_size", base.batch_size, where);
  read(j, "epochs", base.epochs, where);
  read(j, "mixup_alpha", base.mixup_alpha, where);
  read(j, "seed", base.seed, where);
  base.validate();
  return base;
}

RunConfig run_config_from_json(const json& j, RunConfig base) {
  const std::string where = "config";
  require_object(j, where, {"master_seed", "positive_fraction", "positive_class",
                            "mixup_alpha", "folds", "fractions", "threads",
                            "forest", "classifier", "data", "synth"});
  read(j, "master_seed", base.master_seed, where);
  read(j, "positive_fraction", base.positive_fraction, where);
  read(j, "positive_class", base.positive_class, where);
  read(j, "mixup_alpha", base.mixup_alpha, where);
  read(j, "folds", base.folds, where);
  read(j, "threads", base.threads, where);
  if (j.contains("fractions")) {
    const json& f = j.at("fractions");
    if (!f.is_array()) throw Error(ErrorKind::kConfig, "config: 'fractions' must be an array");
    base.fractions.clear();
    for (const json& v : f) {
      if (!v.is_number()) throw Error(ErrorKind::kConfig, "config: fractions must be numbers");
      base.fractions.push_back(v.get<double>());
    }
  }
  if (j.contains("forest")) base.forest = forest_config_from_json(j.at("forest"), base.forest);
  if (j.contains("classifier")) {
    base.classifier = mlp_config_from_json(j.at("classifier"), base.classifier);
  }
  base.validate();
  return base;
}

}  // namespace pudefect
