#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pudefect {

// Features are stored as 32-bit floats, one sample per row. All arithmetic on
// them is carried out in double by the consuming modules.
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FeatureRow = Eigen::Ref<const Eigen::Matrix<float, 1, Eigen::Dynamic>>;

enum class SampleLabel : std::int8_t {
  kUnlabeled = -1,
  kNegative = 0,
  kPositive = 1,
};

enum class FileFormat { kCsv, kPufv };

/// Any feature file: a matrix and, optionally, one {-1, 0, 1} code per row.
struct FeatureTable {
  FeatureMatrix features;
  std::optional<std::vector<SampleLabel>> labels;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// Fully labeled data. Labels are 0 or 1.
struct LabeledDataset {
  FeatureMatrix features;
  std::vector<int> labels;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  std::size_t count(int label) const;
  // Throws on label/row mismatch, non-binary labels or non-finite values.
  void validate() const;
};

/// Positive-labeled set plus unlabeled pool.
///
/// `hidden_truth[i]` is 1 when unlabeled row i belongs to the positive class.
/// It exists for evaluation only; no training stage reads it.
/// `positive_indices` / `unlabeled_indices` map rows back to the source
/// dataset when the split was made by make_pu_split.
/// `labeled_negatives` holds rows explicitly labeled 0 in a feature file.
struct PUDataset {
  FeatureMatrix positives;
  FeatureMatrix unlabeled;
  std::optional<std::vector<int>> hidden_truth;
  std::vector<std::size_t> positive_indices;
  std::vector<std::size_t> unlabeled_indices;
  FeatureMatrix labeled_negatives;

  void validate() const;
};

FileFormat parse_format(const std::string& name);
std::string to_string(FileFormat format);
// Infers the format from the extension (".csv" or ".pufv").
FileFormat format_from_path(const std::filesystem::path& path);

FeatureTable load_feature_file(const std::filesystem::path& path,
                               FileFormat format);
void save_feature_file(const FeatureTable& table,
                       const std::filesystem::path& path, FileFormat format);

/// Rows labeled -1 are rejected; a file without labels is rejected.
LabeledDataset to_labeled(FeatureTable table);
FeatureTable to_table(const LabeledDataset& data);
/// Routes label 1 to P, label -1 (or a label-less file) to U and label 0 to
/// labeled_negatives.
PUDataset to_pu(const FeatureTable& table);

LabeledDataset load_labeled(const std::filesystem::path& path,
                            FileFormat format);
void save_feature_file(const LabeledDataset& data,
                       const std::filesystem::path& path, FileFormat format);

/// Draws max(1, floor(fraction * n_pos)) samples of `positive_class` into P,
/// uniformly without replacement. Everything else becomes U in source order.
PUDataset make_pu_split(const LabeledDataset& full, int positive_class,
                        double positive_fraction, std::uint64_t seed);

std::size_t positive_count(std::size_t n_pos, double positive_fraction);

/// Copies the listed rows in order.
FeatureMatrix select_rows(const FeatureMatrix& m,
                          const std::vector<std::size_t>& rows);

/// Throws kValue naming the first non-finite entry.
void check_finite(const FeatureMatrix& m, const std::string& what);

}  // namespace pudefect
