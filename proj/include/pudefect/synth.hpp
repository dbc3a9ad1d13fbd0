#pragma once

#include <cstdint>
#include <vector>

#include "pudefect/core_data.hpp"

namespace pudefect {

struct BlobSpec {
  int n_per_class = 500;
  int d = 20;
  double separation = 8.0;  // distance between class means, in sigmas
  std::uint64_t seed = 0;

  void validate() const;
};

struct PlantedAnomalySpec {
  int n_inliers = 1000;
  int n_outliers = 50;
  int d = 8;
  double r_min = 6.0;
  double r_max = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Two unit-variance Gaussians at +-(separation/2) along (1,...,1)/sqrt(d).
/// Class 1 sits on the positive side. Rows are shuffled.
LabeledDataset gen_blobs(const BlobSpec& spec);

struct PlantedAnomalies {
  FeatureMatrix features;
  std::vector<bool> is_outlier;
};

/// Standard normal inliers (resampled when norm >= r_min) mixed with outliers
/// uniform in the shell r_min <= |x| <= r_max. Rows are shuffled.
PlantedAnomalies gen_planted_anomalies(const PlantedAnomalySpec& spec);

}  // namespace pudefect
