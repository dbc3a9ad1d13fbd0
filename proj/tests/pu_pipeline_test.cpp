#include "pudefect/pu_pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "pudefect/error.hpp"
#include "pudefect/eval.hpp"
#include "pudefect/random.hpp"
#include "pudefect/synth.hpp"

namespace pudefect {
namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Repeated selection of the highest remaining score, lowest index first.
std::vector<std::size_t> selection_argsort(const Eigen::VectorXd& s) {
  std::vector<bool> taken(static_cast<std::size_t>(s.size()), false);
  std::vector<std::size_t> order;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    std::size_t best = 0;
    bool have = false;
    for (std::size_t i = 0; i < taken.size(); ++i) {
      if (taken[i]) continue;
      if (!have || s(static_cast<Eigen::Index>(i)) > s(static_cast<Eigen::Index>(best))) {
        best = i;
        have = true;
      }
    }
    taken[best] = true;
    order.push_back(best);
  }
  return order;
}

RunConfig fast_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.master_seed = seed;
  cfg.classifier.epochs = 20;
  cfg.classifier.hidden1 = 32;
  cfg.classifier.hidden2 = 16;
  return cfg;
}

TEST(RankTest, DirectSortAndTies) {
  EXPECT_EQ(rank_scores(vec({0.3, 0.9, 0.5})).order, (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(rank_scores(vec({0.4, 0.4, 0.4, 0.4})).order,
            (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(rank_scores(Eigen::VectorXd(0)), Error);
}

TEST(RankTest, MatchesSelectionSortOnForestScores) {
  const PlantedAnomalies data = gen_planted_anomalies({.n_inliers = 200, .n_outliers = 20, .seed = 2});
  const IsolationForest f = IsolationForest::fit({.n_estimators = 30, .seed = 1}, data.features);
  const RankedPool pool = rank_unlabeled(f, data.features);
  const Eigen::VectorXd scores = f.score_batch(data.features);
  EXPECT_EQ(pool.order, selection_argsort(scores));
  for (std::size_t r = 1; r < pool.size(); ++r) EXPECT_GE(pool.scores[r - 1], pool.scores[r]);
  EXPECT_THROW(rank_unlabeled(f, FeatureMatrix(0, 8)), Error);
}

TEST(MineTest, Examples) {
  const RankedPool pool = rank_scores(vec({0.9, 0.8, 0.1}));
  EXPECT_EQ(mine_counter_examples(pool, 2).indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(mine_counter_examples(pool, 3).size(), 3u);
  EXPECT_EQ(mine_counter_examples(pool, 10).size(), 3u);
  try {
    mine_counter_examples(pool, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kArgument);
  }
}

TEST(MineTest, MinedScoresDominateUnmined) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.uniform_index(100));
    Eigen::VectorXd s(n);
    // Coarse values force ties.
    for (Eigen::Index i = 0; i < n; ++i) s(i) = static_cast<double>(rng.uniform_index(10)) / 10.0;
    const auto k = static_cast<std::int64_t>(1 + rng.uniform_index(static_cast<std::uint64_t>(n)));
    const CounterExampleSet ce = mine_counter_examples(rank_scores(s), k);
    std::set<std::size_t> mined(ce.indices.begin(), ce.indices.end());
    double min_in = 2.0, max_out = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mined.contains(static_cast<std::size_t>(i))) min_in = std::min(min_in, s(i));
      else max_out = std::max(max_out, s(i));
    }
    EXPECT_GE(min_in, max_out);
  }
}

TEST(MineTest, PlantedOutliersAreMined) {
  const PlantedAnomalies data = gen_planted_anomalies({.seed = 9});
  const IsolationForest f = IsolationForest::fit({.seed = 3}, data.features);
  const CounterExampleSet ce = mine_counter_examples(rank_unlabeled(f, data.features), 50);
  int hits = 0;
  for (std::size_t i : ce.indices) hits += data.is_outlier[i] ? 1 : 0;
  EXPECT_GE(hits, 40);
}

FeatureMatrix rows_with_value(Eigen::Index n, Eigen::Index d, float base) {
  FeatureMatrix m(n, d);
  for (Eigen::Index r = 0; r < n; ++r) m.row(r).setConstant(base + static_cast<float>(r));
  return m;
}

TEST(AssembleTest, BalancedSet) {
  const FeatureMatrix p = rows_with_value(3, 2, 0.0f);
  const FeatureMatrix u = rows_with_value(5, 2, 100.0f);
  const TrainingSet t = assemble_training_set(p, u, {{4, 0, 2}}, 7);
  EXPECT_EQ(t.data.size(), 6);
  EXPECT_EQ(t.data.count(1), 3u);
  EXPECT_EQ(t.data.count(0), 3u);
  EXPECT_TRUE(t.warnings.empty());
  std::multiset<float> negatives;
  for (Eigen::Index r = 0; r < 6; ++r) {
    if (t.data.labels[static_cast<std::size_t>(r)] == 0) negatives.insert(t.data.features(r, 0));
    else EXPECT_LT(t.data.features(r, 0), 100.0f);
  }
  EXPECT_EQ(negatives, (std::multiset<float>{100.0f, 102.0f, 104.0f}));
}

TEST(AssembleTest, ShuffleDeterminism) {
  const FeatureMatrix p = rows_with_value(20, 1, 0.0f);
  const FeatureMatrix u = rows_with_value(20, 1, 100.0f);
  CounterExampleSet ce;
  ce.indices.resize(20);
  std::iota(ce.indices.begin(), ce.indices.end(), std::size_t{0});
  const TrainingSet a = assemble_training_set(p, u, ce, 1);
  const TrainingSet b = assemble_training_set(p, u, ce, 1);
  const TrainingSet c = assemble_training_set(p, u, ce, 2);
  EXPECT_TRUE(a.data.features == b.data.features);
  EXPECT_EQ(a.data.labels, b.data.labels);
  EXPECT_FALSE(a.data.features == c.data.features);
}

TEST(AssembleTest, ClampWarnsWhenPoolIsSmall) {
  const FeatureMatrix p = rows_with_value(5, 2, 0.0f);
  const FeatureMatrix u = rows_with_value(2, 2, 10.0f);
  const CounterExampleSet ce = mine_counter_examples(rank_scores(vec({0.2, 0.7})), 5);
  const TrainingSet t = assemble_training_set(p, u, ce, 3);
  EXPECT_EQ(t.data.size(), 7);
  EXPECT_EQ(t.data.count(1), 5u);
  EXPECT_EQ(t.data.count(0), 2u);
  ASSERT_EQ(t.warnings.size(), 1u);
}

TEST(AssembleTest, Errors) {
  const FeatureMatrix p = rows_with_value(2, 2, 0.0f);
  EXPECT_THROW(assemble_training_set(p, rows_with_value(2, 3, 0.0f), {{0}}, 1), Error);
  EXPECT_THROW(assemble_training_set(p, rows_with_value(2, 2, 0.0f), {{5}}, 1), Error);
}

TEST(WeakPipelineTest, SeparatedBlobsHeldOutF1) {
  const LabeledDataset train_data = gen_blobs({.n_per_class = 500, .d = 20, .separation = 8.0, .seed = 1});
  const LabeledDataset held_out = gen_blobs({.n_per_class = 200, .d = 20, .separation = 8.0, .seed = 2});
  const PUDataset pu = make_pu_split(train_data, 1, 0.10, 3);
  ASSERT_EQ(pu.positives.rows(), 50);
  const WeakPipelineResult r = run_weak_pipeline(pu, fast_config(4));
  EXPECT_EQ(r.training_set.size(), 100);
  EXPECT_EQ(r.predictions.size(), pu.unlabeled.rows());

  const Metrics m = metrics(confusion(classify(r.classifier.predict_batch(held_out.features)),
                                      held_out.labels));
  EXPECT_GE(m.f1, 90.0);
  const Metrics on_pool = metrics(confusion(classify(r.predictions), *pu.hidden_truth));
  EXPECT_GE(on_pool.f1, 90.0);
}

TEST(WeakPipelineTest, DuplicatedPositivesRankLast) {
  const LabeledDataset data = gen_blobs({.n_per_class = 100, .d = 10, .separation = 8.0, .seed = 5});
  const PUDataset split = make_pu_split(data, 1, 1.0, 6);
  PUDataset pu;
  pu.positives = split.positives;
  // Pool: every class-0 sample followed by verbatim copies of P.
  pu.unlabeled.resize(split.unlabeled.rows() + split.positives.rows(), 10);
  pu.unlabeled << split.unlabeled, split.positives;
  const WeakPipelineResult r = run_weak_pipeline(pu, fast_config(7));
  const auto first_copy = static_cast<std::size_t>(split.unlabeled.rows());
  for (std::size_t rank = first_copy; rank < r.pool.size(); ++rank) {
    EXPECT_GE(r.pool.order[rank], first_copy) << "rank " << rank;
  }
}

TEST(WeakPipelineTest, MinimalPositiveSet) {
  const LabeledDataset data = gen_blobs({.n_per_class = 20, .d = 3, .separation = 8.0, .seed = 8});
  const PUDataset pu = make_pu_split(data, 1, 0.1, 9);
  ASSERT_EQ(pu.positives.rows(), 2);
  const WeakPipelineResult r = run_weak_pipeline(pu, fast_config(1));
  EXPECT_EQ(r.training_set.size(), 4);
  EXPECT_EQ(r.counter_examples.size(), 2u);
}

TEST(WeakPipelineTest, SinglePositiveFailsWithStageName) {
  const LabeledDataset data = gen_blobs({.n_per_class = 20, .d = 3, .seed = 8});
  const PUDataset pu = make_pu_split(data, 1, 0.01, 9);
  try {
    run_weak_pipeline(pu, fast_config(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientData);
    EXPECT_NE(std::string(e.what()).find("stage"), std::string::npos) << e.what();
  }
}

TEST(WeakPipelineTest, HiddenTruthDoesNotLeak) {
  const LabeledDataset data = gen_blobs({.n_per_class = 80, .d = 5, .separation = 4.0, .seed = 10});
  PUDataset pu = make_pu_split(data, 1, 0.2, 11);
  const WeakPipelineResult a = run_weak_pipeline(pu, fast_config(12));
  for (int& t : *pu.hidden_truth) t = 1 - t;
  const WeakPipelineResult b = run_weak_pipeline(pu, fast_config(12));
  pu.hidden_truth.reset();
  const WeakPipelineResult c = run_weak_pipeline(pu, fast_config(12));
  EXPECT_EQ(a.classifier.to_json(), b.classifier.to_json());
  EXPECT_EQ(a.classifier.to_json(), c.classifier.to_json());
  EXPECT_EQ(a.pool.order, b.pool.order);
  EXPECT_EQ(a.predictions, c.predictions);
}

TEST(WeakPipelineTest, DeterministicAndSeedSensitive) {
  const LabeledDataset data = gen_blobs({.n_per_class = 60, .d = 4, .separation = 5.0, .seed = 13});
  const PUDataset pu = make_pu_split(data, 1, 0.3, 14);
  const WeakPipelineResult a = run_weak_pipeline(pu, fast_config(15));
  const WeakPipelineResult b = run_weak_pipeline(pu, fast_config(15));
  const WeakPipelineResult c = run_weak_pipeline(pu, fast_config(16));
  EXPECT_EQ(a.forest.to_json(), b.forest.to_json());
  EXPECT_EQ(a.classifier.to_json(), b.classifier.to_json());
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_NE(a.classifier.to_json(), c.classifier.to_json());
}

TEST(RankedPoolCsvTest, RoundTripIsExact) {
  const PlantedAnomalies data = gen_planted_anomalies({.n_inliers = 100, .n_outliers = 5, .seed = 1});
  const IsolationForest f = IsolationForest::fit({.n_estimators = 10}, data.features);
  const RankedPool pool = rank_unlabeled(f, data.features);
  const auto path = std::filesystem::temp_directory_path() / "pudefect_pool_test.csv";
  save_ranked_pool(pool, path);
  const RankedPool back = load_ranked_pool(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.order, pool.order);
  EXPECT_EQ(back.scores, pool.scores);
}

}  // namespace
}  // namespace pudefect
