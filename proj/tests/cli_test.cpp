#include <sys/wait.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"
#include "pudefect/config.hpp"
#include "pudefect/core_data.hpp"
#include "pudefect/pu_pipeline.hpp"

namespace fs = std::filesystem;

namespace pudefect {
namespace {

const char* kFastConfig =
    R"({"forest": {"n_estimators": 20}, "classifier": {"epochs": 3, "hidden1": 16, "hidden2": 8}})";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("pudefect_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "config.json") << kFastConfig;
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = std::string("\"") + PUDEFECT_CLI_PATH + "\" " + args + " 2>" +
                            (dir_ / "stderr.txt").string() + " >/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string config_flag() const { return "--config " + path("config.json"); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

TEST_F(CliTest, ExperimentWritesSelectedFractions) {
  ASSERT_EQ(run("experiment --synth blobs --fractions 0.05,0.30 --seed 7 " + config_flag() +
                " --out " + path("a")),
            0)
      << slurp(dir_ / "stderr.txt");
  const auto report = nlohmann::json::parse(slurp(dir_ / "a" / "report.json"));
  ASSERT_EQ(report["weak"].size(), 2u);
  EXPECT_DOUBLE_EQ(report["weak"][0]["positive_fraction"].get<double>(), 0.05);
  EXPECT_TRUE(report.contains("supervised"));
  const std::string table = slurp(dir_ / "a" / "table.txt");
  EXPECT_NE(table.find("Supervised 100%"), std::string::npos);
  EXPECT_NE(table.find("Weak 5%"), std::string::npos);
  EXPECT_NE(table.find("Weak 30%"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "folds.csv"));

  ASSERT_EQ(run("experiment --synth blobs --fractions 0.05,0.30 --seed 7 " + config_flag() +
                " --out " + path("b")),
            0);
  EXPECT_EQ(slurp(dir_ / "a" / "report.json"), slurp(dir_ / "b" / "report.json"));
}

TEST_F(CliTest, MissingInputFailsWithoutOutputs) {
  EXPECT_EQ(run("experiment --input " + path("nope.pufv") + " --out " + path("out")), 2);
  EXPECT_FALSE(fs::exists(dir_ / "out" / "report.json"));
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("nope.pufv"), std::string::npos);
}

TEST_F(CliTest, EmptyUnlabeledPoolIsADataError) {
  save_feature_file(FeatureTable{FeatureMatrix(3, 2).setOnes(), std::nullopt}, path("p.csv"),
                    FileFormat::kCsv);
  ASSERT_EQ(run("fit-forest --positives " + path("p.csv") + " --out " + path("f")), 0);
  save_feature_file(FeatureTable{FeatureMatrix(0, 2), std::nullopt}, path("u.pufv"),
                    FileFormat::kPufv);
  EXPECT_EQ(run("score --forest " + path("f/forest.json") + " --unlabeled " + path("u.pufv") +
                " --out " + path("s")),
            2);
}

TEST_F(CliTest, ArgumentErrors) {
  std::ofstream(path("pool.csv")) << "rank,unlabeled_index,score\n0,0,0.5\n";
  EXPECT_EQ(run("mine --pool " + path("pool.csv") + " --k 0 --out " + path("m")), 1);
  EXPECT_FALSE(fs::exists(dir_ / "m" / "counter_examples.csv"));
  EXPECT_NE(run("frobnicate --out " + path("x")), 0);
  EXPECT_NE(run("experiment --synth blobs --bogus --out " + path("x")), 0);
  EXPECT_EQ(run("experiment --synth blobs --fractions 0.1,abc --out " + path("x")), 1);
  std::ofstream(path("bad.json")) << R"({"fold": 3})";
  EXPECT_EQ(run("experiment --synth blobs --config " + path("bad.json") + " --out " + path("x")), 1);
}

std::vector<double> read_probabilities(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    double v = 0.0;
    std::from_chars(line.data() + a + 1, line.data() + b, v);
    out.push_back(v);
  }
  return out;
}

TEST_F(CliTest, ChainedStagesMatchPipeline) {
  const std::string seed = " --seed 11 ";
  ASSERT_EQ(run("synth --kind blobs --n-per-class 100 --d 5 --separation 6" + seed + "--out " +
                path("d")),
            0);
  ASSERT_EQ(run("split --input " + path("d/data.pufv") + " --fraction 0.2" + seed + "--out " +
                path("s")),
            0);
  ASSERT_EQ(run("fit-forest --positives " + path("s/positives.pufv") + seed + config_flag() +
                " --out " + path("f")),
            0);
  ASSERT_EQ(run("score --forest " + path("f/forest.json") + " --unlabeled " +
                path("s/unlabeled.pufv") + " --out " + path("r")),
            0);
  ASSERT_EQ(run("mine --pool " + path("r/ranked_pool.csv") + " --k 20 --out " + path("m")), 0);
  ASSERT_EQ(run("train --positives " + path("s/positives.pufv") + " --unlabeled " +
                path("s/unlabeled.pufv") + " --counter-examples " +
                path("m/counter_examples.csv") + seed + config_flag() + " --out " + path("t")),
            0)
      << slurp(dir_ / "stderr.txt");
  ASSERT_EQ(run("evaluate --model " + path("t/model.json") + " --input " +
                path("s/unlabeled.pufv") + " --out " + path("e")),
            0);

  PUDataset pu;
  pu.positives = load_feature_file(path("s/positives.pufv"), FileFormat::kPufv).features;
  pu.unlabeled = load_feature_file(path("s/unlabeled.pufv"), FileFormat::kPufv).features;
  ASSERT_EQ(pu.positives.rows(), 20);
  RunConfig cfg = run_config_from_json(nlohmann::json::parse(kFastConfig));
  cfg.master_seed = 11;
  const WeakPipelineResult lib = run_weak_pipeline(pu, cfg);

  EXPECT_EQ(slurp(dir_ / "f" / "forest.json"), lib.forest.to_json());
  EXPECT_EQ(slurp(dir_ / "t" / "model.json"), lib.classifier.to_json());
  const std::vector<double> cli = read_probabilities(dir_ / "e" / "predictions.csv");
  ASSERT_EQ(cli.size(), static_cast<std::size_t>(lib.predictions.size()));
  for (std::size_t i = 0; i < cli.size(); ++i) {
    EXPECT_EQ(cli[i], lib.predictions(static_cast<Eigen::Index>(i))) << i;
  }
}

}  // namespace
}  // namespace pudefect
