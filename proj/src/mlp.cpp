#include "pudefect/mlp.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"
#include "pudefect/config.hpp"
#include "pudefect/error.hpp"
#include "pudefect/random.hpp"

namespace pudefect {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

template <typename Derived>
void fill_normal(Eigen::MatrixBase<Derived>& m, double stddev, Rng& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = stddev * rng.normal();
  }
}

class Adam {
 public:
  Adam(const Parameters& like, double learning_rate)
      : m_(like.zeros_like()), v_(like.zeros_like()), lr_(learning_rate) {}

  void step(Parameters& p, const Parameters& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(kAdamBeta1, t_);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t_);
    update(p.w1, g.w1, m_.w1, v_.w1, c1, c2);
    update(p.b1, g.b1, m_.b1, v_.b1, c1, c2);
    update(p.w2, g.w2, m_.w2, v_.w2, c1, c2);
    update(p.b2, g.b2, m_.b2, v_.b2, c1, c2);
    update(p.w3, g.w3, m_.w3, v_.w3, c1, c2);
    update(p.b3, g.b3, m_.b3, v_.b3, c1, c2);
  }

 private:
  template <typename M>
  void update(M& param, const M& grad, M& m, M& v, double c1, double c2) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseAbs2();
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEpsilon);
  }

  Parameters m_;
  Parameters v_;
  double lr_;
  int t_ = 0;
};

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw Error(ErrorKind::kFormat, "matrix shape does not match its data");
  }
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

Eigen::MatrixXd to_double(const FeatureMatrix& x) { return x.cast<double>(); }

}  // namespace

void MlpConfig::validate() const {
  if (hidden1 < 1 || hidden2 < 1) throw Error(ErrorKind::kConfig, "hidden sizes must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorKind::kConfig, "dropout_rate must be in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kConfig, "learning_rate must be > 0");
  if (batch_size < 1) throw Error(ErrorKind::kConfig, "batch_size must be >= 1");
  if (epochs < 1) throw Error(ErrorKind::kConfig, "epochs must be >= 1");
  if (!(mixup_alpha >= 0.0)) throw Error(ErrorKind::kConfig, "mixup_alpha must be >= 0");
  if (input_dim < 0) throw Error(ErrorKind::kConfig, "input_dim must be >= 0");
}

Parameters init_params(const MlpConfig& config, std::uint64_t seed) {
  config.validate();
  if (config.input_dim < 1) {
    throw Error(ErrorKind::kDimension, "input_dim must be set before initialization");
  }
  const Eigen::Index d = config.input_dim;
  Parameters p = Parameters::zeros(d, config.hidden1, config.hidden2);
  Rng rng(seed);
  fill_normal(p.w1, std::sqrt(2.0 / static_cast<double>(d)), rng);
  fill_normal(p.w2, std::sqrt(2.0 / config.hidden1), rng);
  fill_normal(p.w3, std::sqrt(1.0 / config.hidden2), rng);
  return p;
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index units, double rate,
                             std::uint64_t seed) {
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(rows, units);
  if (rate <= 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  Rng rng(seed);
  for (Eigen::Index c = 0; c < units; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      mask(r, c) = rng.uniform() < rate ? 0.0 : keep_scale;
    }
  }
  return mask;
}

double forward(const Parameters& params, const FeatureRow& x, ForwardMode mode,
               double dropout_rate, std::uint64_t seed) {
  if (x.size() != params.input_dim()) {
    throw Error(ErrorKind::kDimension, "classifier expects d=" +
                                           std::to_string(params.input_dim()) +
                                           ", got d=" + std::to_string(x.size()));
  }
  const Eigen::MatrixXd row = x.cast<double>();
  if (mode == ForwardMode::kEval) return forward_batch(params, row).probabilities(0);
  const Eigen::MatrixXd mask = dropout_mask(1, params.w1.cols(), dropout_rate, seed);
  return forward_batch(params, row, &mask).probabilities(0);
}

MixedBatch mix_pairs(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                     const std::vector<Eigen::Index>& partners,
                     const Eigen::VectorXd& lambdas) {
  const Eigen::Index n = features.rows();
  MixedBatch out;
  out.features.resize(n, features.cols());
  out.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = partners[static_cast<std::size_t>(i)];
    const double l = lambdas(i);
    out.features.row(i) = l * features.row(i) + (1.0 - l) * features.row(j);
    out.targets(i) = std::clamp(l * targets(i) + (1.0 - l) * targets(j), 0.0, 1.0);
  }
  out.lambdas = lambdas;
  out.partners = partners;
  return out;
}

MixedBatch mixup_batch(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                       double alpha, std::uint64_t seed) {
  const Eigen::Index n = features.rows();
  if (alpha <= 0.0) {
    MixedBatch out;
    out.features = features;
    out.targets = targets;
    out.lambdas = Eigen::VectorXd::Ones(n);
    out.partners.resize(static_cast<std::size_t>(n));
    std::iota(out.partners.begin(), out.partners.end(), Eigen::Index{0});
    return out;
  }
  Rng rng(seed);
  const auto perm = random_permutation(static_cast<std::size_t>(n), rng);
  std::vector<Eigen::Index> partners(perm.begin(), perm.end());
  Eigen::VectorXd lambdas(n);
  for (Eigen::Index i = 0; i < n; ++i) lambdas(i) = rng.beta(alpha, alpha);
  return mix_pairs(features, targets, partners, lambdas);
}

Eigen::VectorXd TrainedClassifier::predict_batch(const FeatureMatrix& x) const {
  if (x.rows() == 0) return Eigen::VectorXd(0);
  if (x.cols() != params_.input_dim()) {
    throw Error(ErrorKind::kDimension, "classifier expects d=" +
                                           std::to_string(params_.input_dim()) +
                                           ", got d=" + std::to_string(x.cols()));
  }
  return forward_batch(params_, to_double(x)).probabilities;
}

std::string TrainedClassifier::to_json() const {
  nlohmann::json params = {{"w1", matrix_to_json(params_.w1)},
                           {"b1", matrix_to_json(params_.b1)},
                           {"w2", matrix_to_json(params_.w2)},
                           {"b2", matrix_to_json(params_.b2)},
                           {"w3", matrix_to_json(params_.w3)},
                           {"b3", matrix_to_json(params_.b3)}};
  nlohmann::json j = {{"format", "pudefect-mlp"},
                      {"version", 1},
                      {"config", pudefect::to_json(config_)},
                      {"history", history_},
                      {"params", params}};
  return j.dump();
}

TrainedClassifier TrainedClassifier::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "pudefect-mlp" || j.at("version") != 1) {
      throw Error(ErrorKind::kFormat, "not a pudefect classifier document");
    }
    const MlpConfig config = mlp_config_from_json(j.at("config"));
    const auto& pj = j.at("params");
    Parameters p;
    p.w1 = matrix_from_json(pj.at("w1"));
    p.b1 = matrix_from_json(pj.at("b1"));
    p.w2 = matrix_from_json(pj.at("w2"));
    p.b2 = matrix_from_json(pj.at("b2"));
    p.w3 = matrix_from_json(pj.at("w3"));
    p.b3 = matrix_from_json(pj.at("b3"));
    const bool shapes_ok =
        p.b1.size() == p.w1.cols() && p.w2.rows() == p.w1.cols() &&
        p.b2.size() == p.w2.cols() && p.w3.rows() == p.w2.cols() &&
        p.w3.cols() == 1 && p.b3.size() == 1 && p.w1.rows() == config.input_dim;
    if (!shapes_ok) throw Error(ErrorKind::kFormat, "classifier parameter shapes are inconsistent");
    return TrainedClassifier(std::move(p), config,
                             j.at("history").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("classifier document: ") + e.what());
  }
}

std::vector<int> classify(const Eigen::VectorXd& probabilities, double threshold) {
  std::vector<int> labels(static_cast<std::size_t>(probabilities.size()));
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    labels[static_cast<std::size_t>(i)] = probabilities(i) >= threshold ? 1 : 0;
  }
  return labels;
}

TrainedClassifier train(const LabeledDataset& data, const MlpConfig& config) {
  config.validate();
  data.validate();
  if (data.size() < 2) {
    throw Error(ErrorKind::kTrainingData, "training needs at least 2 samples");
  }
  if (data.count(0) == 0 || data.count(1) == 0) {
    throw Error(ErrorKind::kTrainingData, "training data contains a single class");
  }
  MlpConfig cfg = config;
  if (cfg.input_dim != 0 && cfg.input_dim != data.dim()) {
    throw Error(ErrorKind::kDimension, "config input_dim " + std::to_string(cfg.input_dim) +
                                           " does not match data d=" +
                                           std::to_string(data.dim()));
  }
  cfg.input_dim = data.dim();

  const Eigen::MatrixXd x = to_double(data.features);
  Eigen::VectorXd y(data.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = data.labels[static_cast<std::size_t>(i)];

  Parameters params = init_params(cfg, derive_seed(cfg.seed, "init"));
  Adam adam(params, cfg.learning_rate);
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));

  const auto n = static_cast<std::size_t>(data.size());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng(derive_seed(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch)));
    const auto order = random_permutation(n, order_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch, ++step) {
      const std::size_t end = std::min(n, start + batch);
      const auto rows = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd xb(rows, x.cols());
      Eigen::VectorXd yb(rows);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const auto src = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(i)]);
        xb.row(i) = x.row(src);
        yb(i) = y(src);
      }
      const MixedBatch mixed =
          mixup_batch(xb, yb, cfg.mixup_alpha, derive_seed(cfg.seed, "mixup", step));
      const Eigen::MatrixXd mask =
          dropout_mask(rows, cfg.hidden1, cfg.dropout_rate,
                       derive_seed(cfg.seed, "dropout", step));
      loss_sum += batch_loss(params, mixed.features, mixed.targets, &mask) *
                  static_cast<double>(rows);
      adam.step(params, gradients(params, mixed.features, mixed.targets, &mask));
    }
    const double mean_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(mean_loss) || !params.all_finite()) {
      throw Error(ErrorKind::kTrainingData,
                  "training diverged at epoch " + std::to_string(epoch));
    }
    history.push_back(mean_loss);
  }
  return TrainedClassifier(std::move(params), cfg, std::move(history));
}

}  // namespace pudefect
