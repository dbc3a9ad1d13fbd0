#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pudefect/config.hpp"
#include "pudefect/core_data.hpp"

namespace pudefect {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Percent-valued metrics. `degenerate` is set when any ratio was 0/0 and
/// was defined as 0.
struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;
};

/// Positive class is 1.
ConfusionCounts confusion(const std::vector<int>& predicted,
                          const std::vector<int>& actual);
Metrics metrics(const ConfusionCounts& c);

/// Harmonic mean of precision and recall, 0 when both are 0.
double f1_from(double precision, double recall);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation
  std::vector<double> per_fold;
};

struct MetricsReport {
  MetricSummary accuracy;
  MetricSummary precision;
  MetricSummary recall;
  MetricSummary f1;
  std::vector<bool> degenerate_folds;

  static MetricsReport aggregate(const std::vector<Metrics>& folds);
  std::size_t folds() const { return accuracy.per_fold.size(); }
};

/// Renders "96.68 (±0.09)".
std::string format_cell(const MetricSummary& s);

double mean_of(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

/// k disjoint, stratified test folds, each sorted ascending.
std::vector<std::vector<std::size_t>> stratified_kfold(
    const std::vector<int>& labels, int k, std::uint64_t seed);

/// Relabels to 1 = member of `positive_class`.
LabeledDataset relabel_for_positive_class(const LabeledDataset& data,
                                          int positive_class);

MetricsReport cross_validate_supervised(const LabeledDataset& data,
                                        const RunConfig& cfg);
MetricsReport cross_validate_weak(const LabeledDataset& data,
                                  const RunConfig& cfg);

struct SweepResult {
  std::vector<double> fractions;
  std::vector<MetricsReport> weak;  // aligned with fractions
  MetricsReport supervised;
};

SweepResult run_sweep(const LabeledDataset& data, const RunConfig& cfg);

}  // namespace pudefect
