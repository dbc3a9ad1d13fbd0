#include "pudefect/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pudefect/error.hpp"
#include "pudefect/mlp.hpp"
#include "pudefect/parallel.hpp"
#include "pudefect/pu_pipeline.hpp"
#include "pudefect/random.hpp"

namespace pudefect {
namespace {

double ratio_percent(std::int64_t num, std::int64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

MetricSummary summarize(std::vector<double> values) {
  MetricSummary s;
  s.mean = mean_of(values);
  s.std = sample_std(values);
  s.per_fold = std::move(values);
  return s;
}

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

std::vector<FoldSplit> make_splits(const std::vector<int>& labels, const RunConfig& cfg) {
  const auto folds =
      stratified_kfold(labels, cfg.folds, derive_seed(cfg.master_seed, "folds"));
  std::vector<FoldSplit> splits(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<bool> in_test(labels.size(), false);
    for (std::size_t i : folds[f]) in_test[i] = true;
    splits[f].test = folds[f];
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!in_test[i]) splits[f].train.push_back(i);
    }
  }
  return splits;
}

LabeledDataset subset(const LabeledDataset& data, const std::vector<std::size_t>& rows) {
  LabeledDataset out;
  out.features = select_rows(data.features, rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(data.labels[r]);
  return out;
}

Metrics score_fold(const TrainedClassifier& model, const LabeledDataset& test) {
  const auto predicted = classify(model.predict_batch(test.features));
  return metrics(confusion(predicted, test.labels));
}

// Runs `fold_body` for every fold, folds in parallel when threads > 1, and
// aggregates in fold order.
template <typename Body>
MetricsReport run_folds(const LabeledDataset& data, const RunConfig& cfg, Body&& fold_body) {
  cfg.validate();
  data.validate();
  const LabeledDataset rel = relabel_for_positive_class(data, cfg.positive_class);
  const auto splits = make_splits(rel.labels, cfg);
  std::vector<Metrics> results(splits.size());
  parallel_for(splits.size(), cfg.threads, [&](std::size_t f) {
    try {
      results[f] = fold_body(f, subset(rel, splits[f].train), subset(rel, splits[f].test));
    } catch (const Error& e) {
      throw e.with_context("fold " + std::to_string(f));
    }
  });
  return MetricsReport::aggregate(results);
}

std::string percent_label(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", fraction * 100.0);
  return buf;
}

}  // namespace

ConfusionCounts confusion(const std::vector<int>& predicted, const std::vector<int>& actual) {
  if (predicted.size() != actual.size()) {
    throw Error(ErrorKind::kDimension, "predicted and actual lengths differ: " +
                                           std::to_string(predicted.size()) + " vs " +
                                           std::to_string(actual.size()));
  }
  if (predicted.empty()) throw Error(ErrorKind::kEmptyInput, "no predictions to evaluate");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == 1;
    const bool a = actual[i] == 1;
    if (p && a) ++c.tp;
    else if (p) ++c.fp;
    else if (a) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_from(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Metrics metrics(const ConfusionCounts& c) {
  if (c.total() <= 0) throw Error(ErrorKind::kEmptyInput, "confusion counts are empty");
  Metrics m;
  m.accuracy = ratio_percent(c.tp + c.tn, c.total(), m.degenerate);
  m.precision = ratio_percent(c.tp, c.tp + c.fp, m.degenerate);
  m.recall = ratio_percent(c.tp, c.tp + c.fn, m.degenerate);
  if (m.precision + m.recall > 0.0) {
    m.f1 = f1_from(m.precision, m.recall);
  } else {
    m.f1 = 0.0;
    m.degenerate = true;
  }
  return m;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

MetricsReport MetricsReport::aggregate(const std::vector<Metrics>& folds) {
  std::vector<double> acc, prec, rec, f1;
  MetricsReport r;
  for (const Metrics& m : folds) {
    acc.push_back(m.accuracy);
    prec.push_back(m.precision);
    rec.push_back(m.recall);
    f1.push_back(m.f1);
    r.degenerate_folds.push_back(m.degenerate);
  }
  r.accuracy = summarize(std::move(acc));
  r.precision = summarize(std::move(prec));
  r.recall = summarize(std::move(rec));
  r.f1 = summarize(std::move(f1));
  return r;
}

std::string format_cell(const MetricSummary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f (±%.2f)", s.mean, s.std);
  return buf;
}

std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels,
                                                       int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::kArgument, "k must be >= 2");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw Error(ErrorKind::kValue, "label at " + std::to_string(i) + " is not 0 or 1");
    }
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[static_cast<std::size_t>(c)].size() < static_cast<std::size_t>(k)) {
      throw Error(ErrorKind::kStratification,
                  "class " + std::to_string(c) + " has " +
                      std::to_string(by_class[static_cast<std::size_t>(c)].size()) +
                      " samples, fewer than k=" + std::to_string(k));
    }
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  std::size_t position = 0;
  for (auto& members : by_class) {
    shuffle(std::span<std::size_t>(members), rng);
    for (std::size_t i : members) folds[position++ % folds.size()].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

LabeledDataset relabel_for_positive_class(const LabeledDataset& data, int positive_class) {
  if (positive_class != 0 && positive_class != 1) {
    throw Error(ErrorKind::kArgument, "positive class must be 0 or 1");
  }
  LabeledDataset out = data;
  if (positive_class == 0) {
    for (int& l : out.labels) l = 1 - l;
  }
  return out;
}

MetricsReport cross_validate_supervised(const LabeledDataset& data, const RunConfig& cfg) {
  return run_folds(data, cfg, [&](std::size_t f, const LabeledDataset& train_set,
                                  const LabeledDataset& test_set) {
    const MlpConfig mlp =
        stage_classifier_config(cfg, derive_seed(cfg.master_seed, "supervised", f));
    return score_fold(train(train_set, mlp), test_set);
  });
}

MetricsReport cross_validate_weak(const LabeledDataset& data, const RunConfig& cfg) {
  return run_folds(data, cfg, [&](std::size_t f, const LabeledDataset& train_set,
                                  const LabeledDataset& test_set) {
    // Labels are already relative to the positive class here.
    const PUDataset pu = make_pu_split(train_set, 1, cfg.positive_fraction,
                                       derive_seed(cfg.master_seed, "pu-split", f));
    RunConfig fold_cfg = cfg;
    fold_cfg.master_seed = derive_seed(cfg.master_seed, "weak-fold", f);
    fold_cfg.threads = 1;
    const WeakPipelineResult result = run_weak_pipeline(pu, fold_cfg);
    return score_fold(result.classifier, test_set);
  });
}

SweepResult run_sweep(const LabeledDataset& data, const RunConfig& cfg) {
  cfg.validate();
  SweepResult out;
  out.fractions = cfg.fractions;
  try {
    out.supervised = cross_validate_supervised(data, cfg);
  } catch (const Error& e) {
    throw e.with_context("cell supervised");
  }
  for (double fraction : cfg.fractions) {
    RunConfig cell = cfg;
    cell.positive_fraction = fraction;
    try {
      out.weak.push_back(cross_validate_weak(data, cell));
    } catch (const Error& e) {
      throw e.with_context("cell weak " + percent_label(fraction));
    }
  }
  return out;
}

}  // namespace pudefect
