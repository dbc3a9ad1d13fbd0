#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pudefect/core_data.hpp"

namespace pudefect {

/// Hyperparameters of the binary head: two ReLU layers with dropout between
/// them, then a single sigmoid unit.
struct MlpConfig {
  Eigen::Index input_dim = 0;  // 0: taken from the training data
  int hidden1 = 256;
  int hidden2 = 128;
  double dropout_rate = 0.2;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 50;
  double mixup_alpha = 0.2;  // 0 disables mixing
  std::uint64_t seed = 0;

  void validate() const;
};

template <typename Scalar>
struct MlpParameters {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix w1;  // d x h1
  Vector b1;
  Matrix w2;  // h1 x h2
  Vector b2;
  Matrix w3;  // h2 x 1
  Vector b3;  // 1

  static MlpParameters zeros(Eigen::Index d, Eigen::Index h1,
                             Eigen::Index h2) {
    MlpParameters p;
    p.w1 = Matrix::Zero(d, h1);
    p.b1 = Vector::Zero(h1);
    p.w2 = Matrix::Zero(h1, h2);
    p.b2 = Vector::Zero(h2);
    p.w3 = Matrix::Zero(h2, 1);
    p.b3 = Vector::Zero(1);
    return p;
  }

  MlpParameters zeros_like() const {
    return zeros(w1.rows(), w1.cols(), w2.cols());
  }

  Eigen::Index input_dim() const { return w1.rows(); }

  Eigen::Index size() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() +
           b3.size();
  }

  template <typename Other>
  MlpParameters<Other> cast() const {
    MlpParameters<Other> p;
    p.w1 = w1.template cast<Other>();
    p.b1 = b1.template cast<Other>();
    p.w2 = w2.template cast<Other>();
    p.b2 = b2.template cast<Other>();
    p.w3 = w3.template cast<Other>();
    p.b3 = b3.template cast<Other>();
    return p;
  }

  /// Concatenation of all entries in (w1, b1, w2, b2, w3, b3) order,
  /// matrices column-major.
  Vector flatten() const {
    Vector out(size());
    Eigen::Index at = 0;
    auto put = [&](const auto& m) {
      out.segment(at, m.size()) =
          Eigen::Map<const Vector>(m.data(), m.size());
      at += m.size();
    };
    put(w1), put(b1), put(w2), put(b2), put(w3), put(b3);
    return out;
  }

  /// Inverse of flatten() for a parameter set of the same shape.
  void unflatten(const Vector& flat) {
    Eigen::Index at = 0;
    auto take = [&](auto& m) {
      Eigen::Map<Vector>(m.data(), m.size()) = flat.segment(at, m.size());
      at += m.size();
    };
    take(w1), take(b1), take(w2), take(b2), take(w3), take(b3);
  }

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() &&
           b2.allFinite() && w3.allFinite() && b3.allFinite();
  }
};

using Parameters = MlpParameters<double>;

inline constexpr double kProbabilityClamp = 1e-7;

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7]. y may be
/// fractional.
template <typename Scalar>
Scalar bce_loss(Scalar p, Scalar y) {
  const Scalar lo = Scalar(kProbabilityClamp);
  const Scalar pc = std::clamp(p, lo, Scalar(1) - lo);
  return -(y * std::log(pc) + (Scalar(1) - y) * std::log(Scalar(1) - pc));
}

/// Intermediate activations of a batched forward pass, rows = samples.
template <typename Scalar>
struct ForwardPass {
  using Matrix = typename MlpParameters<Scalar>::Matrix;
  using Vector = typename MlpParameters<Scalar>::Vector;

  Matrix hidden1;  // relu(X W1 + b1), after dropout when a mask is given
  Matrix pre1;     // X W1 + b1
  Matrix hidden2;  // relu(hidden1 W2 + b2)
  Matrix pre2;
  Vector logits;
  Vector probabilities;
};

/// Batched forward pass. `dropout_mask`, when given, has the shape of the
/// first hidden layer and holds 0 or 1/(1 - rate) per unit.
template <typename Scalar>
ForwardPass<Scalar> forward_batch(
    const MlpParameters<Scalar>& params,
    const typename MlpParameters<Scalar>::Matrix& x,
    const typename MlpParameters<Scalar>::Matrix* dropout_mask = nullptr) {
  ForwardPass<Scalar> f;
  f.pre1 = (x * params.w1).rowwise() + params.b1.transpose();
  f.hidden1 = f.pre1.cwiseMax(Scalar(0));
  if (dropout_mask != nullptr) f.hidden1 = f.hidden1.cwiseProduct(*dropout_mask);
  f.pre2 = (f.hidden1 * params.w2).rowwise() + params.b2.transpose();
  f.hidden2 = f.pre2.cwiseMax(Scalar(0));
  f.logits = (f.hidden2 * params.w3).col(0).array() + params.b3(0);
  f.probabilities = f.logits.unaryExpr([](Scalar z) { return sigmoid(z); });
  return f;
}

/// Mean clamped BCE of a batch.
template <typename Scalar>
Scalar batch_loss(const MlpParameters<Scalar>& params,
                  const typename MlpParameters<Scalar>::Matrix& x,
                  const typename MlpParameters<Scalar>::Vector& targets,
                  const typename MlpParameters<Scalar>::Matrix* dropout_mask =
                      nullptr) {
  const auto f = forward_batch(params, x, dropout_mask);
  Scalar total(0);
  for (Eigen::Index i = 0; i < targets.size(); ++i) {
    total += bce_loss(f.probabilities(i), targets(i));
  }
  return total / static_cast<Scalar>(targets.size());
}

/// Gradient of the mean BCE over the batch, dropout mask held fixed. Uses
/// dL/dlogit = p - y.
template <typename Scalar>
MlpParameters<Scalar> gradients(
    const MlpParameters<Scalar>& params,
    const typename MlpParameters<Scalar>::Matrix& x,
    const typename MlpParameters<Scalar>::Vector& targets,
    const typename MlpParameters<Scalar>::Matrix* dropout_mask = nullptr) {
  using Matrix = typename MlpParameters<Scalar>::Matrix;
  const auto f = forward_batch(params, x, dropout_mask);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(x.rows());

  MlpParameters<Scalar> g;
  const Matrix delta3 = (f.probabilities - targets) * inv_n;  // n x 1
  g.w3 = f.hidden2.transpose() * delta3;
  g.b3 = delta3.colwise().sum().transpose();

  Matrix delta2 = delta3 * params.w3.transpose();  // n x h2
  delta2.array() *= (f.pre2.array() > Scalar(0)).template cast<Scalar>();
  g.w2 = f.hidden1.transpose() * delta2;
  g.b2 = delta2.colwise().sum().transpose();

  Matrix delta1 = delta2 * params.w2.transpose();  // n x h1
  delta1.array() *= (f.pre1.array() > Scalar(0)).template cast<Scalar>();
  if (dropout_mask != nullptr) delta1 = delta1.cwiseProduct(*dropout_mask);
  g.w1 = x.transpose() * delta1;
  g.b1 = delta1.colwise().sum().transpose();
  return g;
}

/// He-style initialization: W1, W2 ~ N(0, 2/fan_in), W3 ~ N(0, 1/fan_in),
/// zero biases.
Parameters init_params(const MlpConfig& config, std::uint64_t seed);

/// Inverted-dropout mask of shape rows x units.
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index units,
                             double rate, std::uint64_t seed);

enum class ForwardMode { kTrain, kEval };

/// Single-sample probability. In train mode dropout is drawn from `seed`.
double forward(const Parameters& params, const FeatureRow& x,
               ForwardMode mode, double dropout_rate, std::uint64_t seed);

struct MixedBatch {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
  Eigen::VectorXd lambdas;
  std::vector<Eigen::Index> partners;
};

/// x~_i = l_i x_i + (1 - l_i) x_partner(i), same for targets.
MixedBatch mix_pairs(const Eigen::MatrixXd& features,
                     const Eigen::VectorXd& targets,
                     const std::vector<Eigen::Index>& partners,
                     const Eigen::VectorXd& lambdas);

/// Partners from a seeded permutation, one lambda ~ Beta(alpha, alpha) per
/// row. alpha == 0 returns the batch unchanged with lambda = 1.
MixedBatch mixup_batch(const Eigen::MatrixXd& features,
                       const Eigen::VectorXd& targets, double alpha,
                       std::uint64_t seed);

class TrainedClassifier {
 public:
  TrainedClassifier() = default;
  TrainedClassifier(Parameters params, MlpConfig config,
                    std::vector<double> history)
      : params_(std::move(params)),
        config_(config),
        history_(std::move(history)) {}

  const Parameters& params() const { return params_; }
  const MlpConfig& config() const { return config_; }
  const std::vector<double>& history() const { return history_; }

  /// Eval-mode probability of the positive class for every row.
  Eigen::VectorXd predict_batch(const FeatureMatrix& x) const;

  std::string to_json() const;
  static TrainedClassifier from_json(const std::string& text);

 private:
  Parameters params_;
  MlpConfig config_;
  std::vector<double> history_;
};

/// Label 1 iff p >= threshold.
std::vector<int> classify(const Eigen::VectorXd& probabilities,
                          double threshold = 0.5);

/// Mini-batch Adam on mean BCE, per-epoch reshuffle, MixUp per batch.
TrainedClassifier train(const LabeledDataset& data, const MlpConfig& config);

}  // namespace pudefect
