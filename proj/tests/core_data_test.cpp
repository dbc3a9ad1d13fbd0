#include "pudefect/core_data.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "pudefect/error.hpp"
#include "pudefect/random.hpp"
#include "pudefect/synth.hpp"

namespace pudefect {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("pudefect_core_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

FeatureMatrix random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix m(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = static_cast<float>(rng.normal() * 100.0);
  return m;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no pudefect::Error thrown";
  return ErrorKind::kConfig;
}

TEST(CsvTest, ThreeRowsRouteByLabel) {
  TempDir dir;
  write(dir / "a.csv", "id,label,f0,f1\n0,1,0.5,1.5\n1,0,2,3\n2,-1,4,5\n");
  const FeatureTable t = load_feature_file(dir / "a.csv", FileFormat::kCsv);
  ASSERT_EQ(t.rows(), 3);
  ASSERT_EQ(t.dim(), 2);
  const PUDataset pu = to_pu(t);
  EXPECT_EQ(pu.positives.rows(), 1);
  EXPECT_EQ(pu.unlabeled.rows(), 1);
  EXPECT_EQ(pu.labeled_negatives.rows(), 1);
  EXPECT_FLOAT_EQ(pu.unlabeled(0, 1), 5.0f);
}

TEST(CsvTest, HeaderIsOptional) {
  TempDir dir;
  write(dir / "a.csv", "0,1,0.25\n1,0,0.75\n");
  const LabeledDataset d = load_labeled(dir / "a.csv", FileFormat::kCsv);
  EXPECT_EQ(d.size(), 2);
  EXPECT_EQ(d.dim(), 1);
  EXPECT_EQ(d.labels, (std::vector<int>{1, 0}));
}

TEST(CsvTest, AllUnlabeledRoundTrip) {
  TempDir dir;
  FeatureTable t;
  t.features = random_matrix(5, 3, 1);
  t.labels = std::vector<SampleLabel>(5, SampleLabel::kUnlabeled);
  save_feature_file(t, dir / "u.csv", FileFormat::kCsv);
  const PUDataset pu = to_pu(load_feature_file(dir / "u.csv", FileFormat::kCsv));
  EXPECT_EQ(pu.positives.rows(), 0);
  EXPECT_EQ(pu.unlabeled.rows(), 5);
}

TEST(CsvTest, RoundTripIsValueExact) {
  TempDir dir;
  const LabeledDataset data = gen_blobs({.n_per_class = 20, .d = 4, .separation = 2, .seed = 3});
  save_feature_file(data, dir / "b.csv", FileFormat::kCsv);
  const LabeledDataset back = load_labeled(dir / "b.csv", FileFormat::kCsv);
  EXPECT_EQ(back.labels, data.labels);
  EXPECT_TRUE(back.features == data.features);
}

TEST(CsvTest, ErrorsNameTheRow) {
  TempDir dir;
  write(dir / "h.csv", "id,lbl,f0\n0,1,1\n");
  EXPECT_EQ(kind_of([&] { load_feature_file(dir / "h.csv", FileFormat::kCsv); }),
            ErrorKind::kFormat);

  write(dir / "len.csv", "id,label,f0,f1\n0,1,1,2\n1,0,3\n");
  try {
    load_feature_file(dir / "len.csv", FileFormat::kCsv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }

  write(dir / "nan.csv", "id,label,f0\n0,1,1\n1,1,2\n2,0,nan\n");
  try {
    load_feature_file(dir / "nan.csv", FileFormat::kCsv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValue);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }

  write(dir / "lab.csv", "id,label,f0\n0,3,1\n");
  EXPECT_EQ(kind_of([&] { load_feature_file(dir / "lab.csv", FileFormat::kCsv); }),
            ErrorKind::kValue);
}

TEST(PufvTest, EmptyMatrixKeepsDimension) {
  TempDir dir;
  FeatureTable t;
  t.features.resize(0, 8);
  save_feature_file(t, dir / "e.pufv", FileFormat::kPufv);
  EXPECT_EQ(fs::file_size(dir / "e.pufv"), 25u);
  const FeatureTable back = load_feature_file(dir / "e.pufv", FileFormat::kPufv);
  EXPECT_EQ(back.rows(), 0);
  EXPECT_EQ(back.dim(), 8);
  EXPECT_FALSE(back.labels.has_value());
}

TEST(PufvTest, HeaderLayoutIsExact) {
  TempDir dir;
  FeatureTable t;
  t.features.resize(1, 2);
  t.features << 1.0f, -2.0f;
  t.labels = std::vector<SampleLabel>{SampleLabel::kUnlabeled};
  save_feature_file(t, dir / "h.pufv", FileFormat::kPufv);
  const std::string bytes = slurp(dir / "h.pufv");
  const std::string expected = std::string("PUFV") +
                               std::string("\x01\x00\x00\x00", 4) +
                               std::string("\x01\0\0\0\0\0\0\0", 8) +
                               std::string("\x02\0\0\0\0\0\0\0", 8) + std::string("\x01", 1) +
                               std::string("\x00\x00\x80\x3f", 4) +  // 1.0f
                               std::string("\x00\x00\x00\xc0", 4) +  // -2.0f
                               std::string("\xff", 1);               // -1
  EXPECT_EQ(bytes, expected);
}

TEST(PufvTest, RandomRoundTripIsBitExact) {
  TempDir dir;
  Rng shapes(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Eigen::Index>(shapes.uniform_index(40));
    const auto d = static_cast<Eigen::Index>(1 + shapes.uniform_index(16));
    FeatureTable t;
    t.features = random_matrix(n, d, 100 + trial);
    if (trial % 2 == 0) {
      std::vector<SampleLabel> labels;
      for (Eigen::Index r = 0; r < n; ++r)
        labels.push_back(static_cast<SampleLabel>(static_cast<int>(shapes.uniform_index(3)) - 1));
      t.labels = labels;
    }
    const fs::path p = dir / ("r" + std::to_string(trial) + ".pufv");
    save_feature_file(t, p, FileFormat::kPufv);
    const std::string first = slurp(p);
    const FeatureTable back = load_feature_file(p, FileFormat::kPufv);
    ASSERT_EQ(back.rows(), n);
    ASSERT_EQ(back.dim(), d);
    EXPECT_EQ(std::memcmp(back.features.data(), t.features.data(),
                          static_cast<std::size_t>(n * d) * sizeof(float)),
              0);
    EXPECT_EQ(back.labels, t.labels);
    save_feature_file(back, p, FileFormat::kPufv);
    EXPECT_EQ(slurp(p), first);
  }
}

TEST(PufvTest, LargeSyntheticRoundTrip) {
  TempDir dir;
  LabeledDataset data;
  data.features = random_matrix(21835, 10, 5);
  data.labels.resize(21835);
  for (std::size_t i = 0; i < data.labels.size(); ++i) data.labels[i] = static_cast<int>(i % 2);
  save_feature_file(data, dir / "big.pufv", FileFormat::kPufv);
  const LabeledDataset back = load_labeled(dir / "big.pufv", FileFormat::kPufv);
  EXPECT_TRUE(back.features == data.features);
  EXPECT_EQ(back.labels, data.labels);
}

TEST(PufvTest, SingleValueRoundTrip) {
  TempDir dir;
  LabeledDataset data;
  data.features.resize(1, 1);
  data.features(0, 0) = 0.5f;
  data.labels = {1};
  for (FileFormat f : {FileFormat::kPufv, FileFormat::kCsv}) {
    save_feature_file(data, dir / "one", f);
    const LabeledDataset back = load_labeled(dir / "one", f);
    EXPECT_EQ(back.features(0, 0), 0.5f);
    EXPECT_EQ(back.labels, data.labels);
  }
}

TEST(PufvTest, DeviationsAreFormatErrors) {
  TempDir dir;
  FeatureTable t;
  t.features = random_matrix(3, 2, 9);
  save_feature_file(t, dir / "ok.pufv", FileFormat::kPufv);
  const std::string good = slurp(dir / "ok.pufv");

  auto check = [&](std::string bytes, ErrorKind expected) {
    write(dir / "bad.pufv", bytes);
    EXPECT_EQ(kind_of([&] { load_feature_file(dir / "bad.pufv", FileFormat::kPufv); }), expected);
  };
  std::string magic = good;
  magic[0] = 'Q';
  check(magic, ErrorKind::kFormat);
  std::string version = good;
  version[4] = 2;
  check(version, ErrorKind::kFormat);
  check(good + "x", ErrorKind::kFormat);
  check(good.substr(0, good.size() - 1), ErrorKind::kFormat);
  check(good.substr(0, 10), ErrorKind::kFormat);
  std::string flag = good;
  flag[24] = 2;
  check(flag, ErrorKind::kFormat);
  std::string inf = good;
  const std::string inf_bits("\x00\x00\x80\x7f", 4);
  inf.replace(25 + 4 * 3, 4, inf_bits);  // row 1, column 1
  write(dir / "bad.pufv", inf);
  try {
    load_feature_file(dir / "bad.pufv", FileFormat::kPufv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValue);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(IoTest, MissingAndUnwritablePaths) {
  EXPECT_EQ(kind_of([] { load_feature_file("/nonexistent/x.pufv", FileFormat::kPufv); }),
            ErrorKind::kIo);
  FeatureTable t;
  t.features.resize(1, 1);
  t.features(0, 0) = 1.0f;
  EXPECT_EQ(kind_of([&] { save_feature_file(t, "/nonexistent/dir/x.pufv", FileFormat::kPufv); }),
            ErrorKind::kIo);
}

LabeledDataset counting_dataset(int n_pos, int n_neg) {
  LabeledDataset d;
  d.features.resize(n_pos + n_neg, 1);
  for (int i = 0; i < n_pos + n_neg; ++i) {
    d.features(i, 0) = static_cast<float>(i);
    d.labels.push_back(i < n_pos ? 1 : 0);
  }
  return d;
}

TEST(PuSplitTest, FullFractionTakesWholeClass) {
  const PUDataset pu = make_pu_split(counting_dataset(10, 7), 1, 1.0, 3);
  EXPECT_EQ(pu.positives.rows(), 10);
  EXPECT_EQ(pu.unlabeled.rows(), 7);
  for (int t : *pu.hidden_truth) EXPECT_EQ(t, 0);
}

TEST(PuSplitTest, FloorRuleOnDatasetScale) {
  EXPECT_EQ(positive_count(11075, 0.05), 553u);
  const PUDataset pu = make_pu_split(counting_dataset(11075, 50), 1, 0.05, 1);
  EXPECT_EQ(pu.positives.rows(), 553);
  EXPECT_EQ(pu.unlabeled.rows(), 11075 - 553 + 50);
}

TEST(PuSplitTest, MinimumOnePositive) {
  EXPECT_EQ(positive_count(10, 0.01), 1u);
  const PUDataset pu = make_pu_split(counting_dataset(10, 10), 1, 0.01, 1);
  EXPECT_EQ(pu.positives.rows(), 1);
}

TEST(PuSplitTest, PartitionsIndices) {
  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const int n_pos = 1 + static_cast<int>(rng.uniform_index(200));
    const int n_neg = static_cast<int>(rng.uniform_index(200));
    const double fraction = 0.01 + 0.99 * rng.uniform();
    const LabeledDataset data = counting_dataset(n_pos, n_neg);
    const PUDataset pu = make_pu_split(data, 1, fraction, rng.next_u64());
    ASSERT_EQ(pu.positive_indices.size(),
              std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * n_pos))));
    std::set<std::size_t> all(pu.positive_indices.begin(), pu.positive_indices.end());
    all.insert(pu.unlabeled_indices.begin(), pu.unlabeled_indices.end());
    EXPECT_EQ(all.size(), static_cast<std::size_t>(n_pos + n_neg));
    EXPECT_EQ(pu.positive_indices.size() + pu.unlabeled_indices.size(),
              static_cast<std::size_t>(n_pos + n_neg));
    for (std::size_t i = 0; i < pu.unlabeled_indices.size(); ++i) {
      EXPECT_EQ((*pu.hidden_truth)[i], data.labels[pu.unlabeled_indices[i]]);
      EXPECT_EQ(pu.unlabeled(static_cast<Eigen::Index>(i), 0),
                static_cast<float>(pu.unlabeled_indices[i]));
    }
    for (std::size_t p : pu.positive_indices) EXPECT_EQ(data.labels[p], 1);
  }
}

TEST(PuSplitTest, SeedDeterminism) {
  const LabeledDataset data = counting_dataset(1000, 10);
  const PUDataset a = make_pu_split(data, 1, 0.1, 42);
  const PUDataset b = make_pu_split(data, 1, 0.1, 42);
  const PUDataset c = make_pu_split(data, 1, 0.1, 43);
  EXPECT_EQ(a.positive_indices, b.positive_indices);
  EXPECT_NE(std::set<std::size_t>(a.positive_indices.begin(), a.positive_indices.end()),
            std::set<std::size_t>(c.positive_indices.begin(), c.positive_indices.end()));
}

TEST(PuSplitTest, NegativeClassCanBePositive) {
  const PUDataset pu = make_pu_split(counting_dataset(5, 8), 0, 0.5, 1);
  EXPECT_EQ(pu.positives.rows(), 4);
  for (float v : std::vector<float>(pu.positives.data(), pu.positives.data() + 4)) EXPECT_GE(v, 5.0f);
}

TEST(PuSplitTest, EmptyClassIsAnError) {
  EXPECT_EQ(kind_of([] { make_pu_split(counting_dataset(0, 5), 1, 0.5, 1); }),
            ErrorKind::kEmptyClass);
}

}  // namespace
}  // namespace pudefect
