#include "pudefect/synth.hpp"

#include <cmath>

#include "pudefect/error.hpp"
#include "pudefect/random.hpp"

namespace pudefect {

void BlobSpec::validate() const {
  if (n_per_class < 1) throw Error(ErrorKind::kConfig, "n_per_class must be >= 1");
  if (d < 1) throw Error(ErrorKind::kConfig, "d must be >= 1");
  if (!(separation >= 0.0)) throw Error(ErrorKind::kConfig, "separation must be >= 0");
}

void PlantedAnomalySpec::validate() const {
  if (n_inliers < 1) throw Error(ErrorKind::kConfig, "n_inliers must be >= 1");
  if (n_outliers < 0) throw Error(ErrorKind::kConfig, "n_outliers must be >= 0");
  if (d < 1) throw Error(ErrorKind::kConfig, "d must be >= 1");
  if (!(r_min > 3.0)) throw Error(ErrorKind::kConfig, "r_min must exceed 3");
  if (!(r_max >= r_min)) throw Error(ErrorKind::kConfig, "r_max must be >= r_min");
}

LabeledDataset gen_blobs(const BlobSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "blobs"));
  const Eigen::Index n = 2 * static_cast<Eigen::Index>(spec.n_per_class);
  const double offset = spec.separation / 2.0 / std::sqrt(static_cast<double>(spec.d));

  FeatureMatrix raw(n, spec.d);
  std::vector<int> raw_labels(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    const int label = r < spec.n_per_class ? 1 : 0;
    const double shift = label == 1 ? offset : -offset;
    for (Eigen::Index c = 0; c < spec.d; ++c) {
      raw(r, c) = static_cast<float>(shift + rng.normal());
    }
    raw_labels[static_cast<std::size_t>(r)] = label;
  }
  const auto order = random_permutation(static_cast<std::size_t>(n), rng);
  LabeledDataset out;
  out.features = select_rows(raw, order);
  out.labels.reserve(order.size());
  for (std::size_t i : order) out.labels.push_back(raw_labels[i]);
  return out;
}

PlantedAnomalies gen_planted_anomalies(const PlantedAnomalySpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "planted"));
  const Eigen::Index n = spec.n_inliers + spec.n_outliers;
  const Eigen::Index d = spec.d;
  FeatureMatrix raw(n, d);
  Eigen::VectorXd v(d);

  for (Eigen::Index r = 0; r < spec.n_inliers; ++r) {
    // Norms are checked on the stored float values.
    do {
      for (Eigen::Index c = 0; c < d; ++c) raw(r, c) = static_cast<float>(rng.normal());
    } while (raw.row(r).cast<double>().norm() >= spec.r_min);
  }
  const double lo = std::pow(spec.r_min, static_cast<double>(d));
  const double hi = std::pow(spec.r_max, static_cast<double>(d));
  for (Eigen::Index r = spec.n_inliers; r < n; ++r) {
    do {
      double norm = 0.0;
      do {
        for (Eigen::Index c = 0; c < d; ++c) v(c) = rng.normal();
        norm = v.norm();
      } while (norm == 0.0);
      // Radius with density proportional to r^(d-1): uniform over the shell.
      const double radius = std::pow(lo + rng.uniform() * (hi - lo), 1.0 / static_cast<double>(d));
      raw.row(r) = (v * (radius / norm)).cast<float>().transpose();
      const double stored = raw.row(r).cast<double>().norm();
      if (stored >= spec.r_min && stored <= spec.r_max) break;
    } while (true);
  }
  const auto order = random_permutation(static_cast<std::size_t>(n), rng);
  PlantedAnomalies out;
  out.features = select_rows(raw, order);
  out.is_outlier.reserve(order.size());
  for (std::size_t i : order) out.is_outlier.push_back(static_cast<Eigen::Index>(i) >= spec.n_inliers);
  return out;
}

}  // namespace pudefect
