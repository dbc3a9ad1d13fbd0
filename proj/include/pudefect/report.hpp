#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "pudefect/config.hpp"
#include "pudefect/eval.hpp"

namespace pudefect {

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const SweepResult& sweep, const RunConfig& cfg);

/// Rows Accuracy/Precision/Recall/F1-score, columns supervised baseline then
/// one per positive fraction. Aligned with spaces.
std::string render_table(const SweepResult& sweep);

/// cell,fold,accuracy,precision,recall,f1,degenerate
std::string render_fold_csv(const SweepResult& sweep);

}  // namespace pudefect
