#include "pudefect/pu_pipeline.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pudefect/error.hpp"
#include "pudefect/random.hpp"

namespace pudefect {
namespace {

template <typename F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.with_context(std::string("stage ") + stage);
  }
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace

RankedPool rank_scores(const Eigen::VectorXd& scores) {
  if (scores.size() == 0) throw Error(ErrorKind::kEmptyInput, "unlabeled pool is empty");
  RankedPool pool;
  pool.order.resize(static_cast<std::size_t>(scores.size()));
  std::iota(pool.order.begin(), pool.order.end(), std::size_t{0});
  std::stable_sort(pool.order.begin(), pool.order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores(static_cast<Eigen::Index>(a)) >
                            scores(static_cast<Eigen::Index>(b));
                   });
  pool.scores.reserve(pool.order.size());
  for (std::size_t i : pool.order) pool.scores.push_back(scores(static_cast<Eigen::Index>(i)));
  return pool;
}

RankedPool rank_unlabeled(const IsolationForest& forest, const FeatureMatrix& unlabeled) {
  if (unlabeled.rows() == 0) throw Error(ErrorKind::kEmptyInput, "unlabeled pool is empty");
  return rank_scores(forest.score_batch(unlabeled));
}

CounterExampleSet mine_counter_examples(const RankedPool& pool, std::int64_t k) {
  if (k < 1) throw Error(ErrorKind::kArgument, "k must be >= 1, got " + std::to_string(k));
  const std::size_t take = std::min(static_cast<std::size_t>(k), pool.size());
  return {std::vector<std::size_t>(pool.order.begin(),
                                   pool.order.begin() + static_cast<std::ptrdiff_t>(take))};
}

TrainingSet assemble_training_set(const FeatureMatrix& positives,
                                  const FeatureMatrix& unlabeled,
                                  const CounterExampleSet& counter_examples,
                                  std::uint64_t seed) {
  if (unlabeled.rows() > 0 && positives.cols() != unlabeled.cols()) {
    throw Error(ErrorKind::kDimension,
                "positive set has d=" + std::to_string(positives.cols()) +
                    ", unlabeled pool has d=" + std::to_string(unlabeled.cols()));
  }
  for (std::size_t i : counter_examples.indices) {
    if (i >= static_cast<std::size_t>(unlabeled.rows())) {
      throw Error(ErrorKind::kArgument, "counter-example index " + std::to_string(i) +
                                            " outside the unlabeled pool");
    }
  }
  const auto n_pos = static_cast<std::size_t>(positives.rows());
  const std::size_t k = counter_examples.size();
  const std::size_t n = n_pos + k;

  TrainingSet out;
  if (k < n_pos) {
    out.warnings.push_back("imbalanced training set: " + std::to_string(n_pos) +
                           " positives vs " + std::to_string(k) + " counter-examples");
  }
  Rng rng(seed);
  const auto order = random_permutation(n, rng);
  out.data.features.resize(static_cast<Eigen::Index>(n), positives.cols());
  out.data.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t src = order[r];
    const auto dst = static_cast<Eigen::Index>(r);
    if (src < n_pos) {
      out.data.features.row(dst) = positives.row(static_cast<Eigen::Index>(src));
      out.data.labels[r] = 1;
    } else {
      const auto u = static_cast<Eigen::Index>(counter_examples.indices[src - n_pos]);
      out.data.features.row(dst) = unlabeled.row(u);
      out.data.labels[r] = 0;
    }
  }
  return out;
}

PipelineSeeds pipeline_seeds(std::uint64_t master_seed) {
  return {derive_seed(master_seed, "forest"), derive_seed(master_seed, "assemble"),
          derive_seed(master_seed, "classifier")};
}

WeakPipelineResult run_weak_pipeline(const PUDataset& pu, const RunConfig& cfg) {
  run_stage("validate", [&] {
    cfg.validate();
    pu.validate();
    if (pu.positives.rows() < 2) {
      throw Error(ErrorKind::kInsufficientData,
                  "pipeline needs |P| >= 2, got |P| = " + std::to_string(pu.positives.rows()));
    }
  });
  const PipelineSeeds seeds = pipeline_seeds(cfg.master_seed);

  WeakPipelineResult out;
  out.forest = run_stage("fit-forest", [&] {
    return IsolationForest::fit(stage_forest_config(cfg, seeds.forest), pu.positives);
  });
  out.pool = run_stage("rank", [&] { return rank_unlabeled(out.forest, pu.unlabeled); });
  out.counter_examples = run_stage("mine", [&] {
    return mine_counter_examples(out.pool, pu.positives.rows());
  });
  TrainingSet training = run_stage("assemble", [&] {
    return assemble_training_set(pu.positives, pu.unlabeled, out.counter_examples,
                                 seeds.assemble);
  });
  out.warnings = std::move(training.warnings);
  out.training_set = std::move(training.data);
  out.classifier = run_stage("train", [&] {
    return train(out.training_set, stage_classifier_config(cfg, seeds.classifier));
  });
  out.predictions = run_stage("predict", [&] {
    return out.classifier.predict_batch(pu.unlabeled);
  });
  return out;
}

void save_ranked_pool(const RankedPool& pool, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << "rank,unlabeled_index,score\n";
  for (std::size_t r = 0; r < pool.size(); ++r) {
    out << r << ',' << pool.order[r] << ',' << format_double(pool.scores[r]) << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

RankedPool load_ranked_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "rank,unlabeled_index,score") {
    throw Error(ErrorKind::kFormat, path.string() + ": bad ranked-pool header");
  }
  RankedPool pool;
  std::size_t expected_rank = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t rank = 0;
    std::size_t index = 0;
    double score = 0.0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto r1 = std::from_chars(p, end, rank);
    bool ok = r1.ec == std::errc() && r1.ptr < end && *r1.ptr == ',';
    std::from_chars_result r2{};
    if (ok) {
      r2 = std::from_chars(r1.ptr + 1, end, index);
      ok = r2.ec == std::errc() && r2.ptr < end && *r2.ptr == ',';
    }
    if (ok) {
      auto r3 = std::from_chars(r2.ptr + 1, end, score);
      ok = r3.ec == std::errc() && r3.ptr == end;
    }
    if (!ok || rank != expected_rank) {
      throw Error(ErrorKind::kFormat,
                  path.string() + ": malformed ranked-pool row " + std::to_string(expected_rank));
    }
    if (!pool.scores.empty() && score > pool.scores.back()) {
      throw Error(ErrorKind::kFormat, path.string() + ": scores are not non-increasing");
    }
    pool.order.push_back(index);
    pool.scores.push_back(score);
    ++expected_rank;
  }
  std::vector<std::size_t> sorted = pool.order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != i) {
      throw Error(ErrorKind::kFormat, path.string() + ": order is not a permutation");
    }
  }
  return pool;
}

}  // namespace pudefect
