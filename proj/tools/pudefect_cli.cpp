// Command-line front end: one subcommand per pipeline stage plus the full
// cross-validated experiment.
//
// Exit codes: 0 success, 1 configuration/usage error, 2 data error,
// 3 runtime error.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pudefect/config.hpp"
#include "pudefect/core_data.hpp"
#include "pudefect/error.hpp"
#include "pudefect/eval.hpp"
#include "pudefect/iforest.hpp"
#include "pudefect/mlp.hpp"
#include "pudefect/pu_pipeline.hpp"
#include "pudefect/random.hpp"
#include "pudefect/report.hpp"
#include "pudefect/synth.hpp"

namespace fs = std::filesystem;
using namespace pudefect;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kArgument:
      return kExitConfig;
    case ErrorKind::kTrainingData:
      return kExitRuntime;
    default:
      return kExitData;
  }
}

// Flags shared by every subcommand. Not every command reads every field.
struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string fractions;
  std::optional<int> positive_class;
  std::optional<int> folds;
  std::string out;
  std::optional<int> threads;
  std::string format = "pufv";
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_out = true) {
  cmd->add_option("--config", f.config_path, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--fractions", f.fractions, "comma-separated positive fractions");
  cmd->add_option("--positive-class", f.positive_class, "class used as positive (0 or 1)")
      ->check(CLI::IsMember({0, 1}));
  cmd->add_option("--folds", f.folds, "cross-validation folds")->check(CLI::PositiveNumber);
  auto* out = cmd->add_option("--out", f.out, "output directory");
  if (needs_out) out->required();
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--format", f.format, "feature file format")
      ->check(CLI::IsMember({"csv", "pufv"}));
}

std::string read_text(const fs::path& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(kind, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir + ": " + ec.message());
  return fs::path(dir);
}

std::vector<double> parse_fractions(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw Error(ErrorKind::kConfig, "bad fraction '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorKind::kConfig, "--fractions is empty");
  return out;
}

nlohmann::json load_config_json(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  const std::string text = read_text(path, ErrorKind::kConfig);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, path + ": " + e.what());
  }
}

RunConfig resolve_config(const CommonFlags& f, const nlohmann::json& file) {
  RunConfig cfg = run_config_from_json(file);
  if (f.seed) cfg.master_seed = *f.seed;
  if (!f.fractions.empty()) cfg.fractions = parse_fractions(f.fractions);
  if (f.positive_class) cfg.positive_class = *f.positive_class;
  if (f.folds) cfg.folds = *f.folds;
  if (f.threads) cfg.threads = *f.threads;
  cfg.validate();
  return cfg;
}

FeatureTable load_table(const std::string& path) {
  return load_feature_file(path, format_from_path(path));
}

// Every row of a positives file is positive; explicit negatives are rejected.
FeatureMatrix load_positives(const std::string& path) {
  FeatureTable table = load_table(path);
  if (table.labels) {
    for (std::size_t i = 0; i < table.labels->size(); ++i) {
      if ((*table.labels)[i] == SampleLabel::kNegative) {
        throw Error(ErrorKind::kValue,
                    path + ": row " + std::to_string(i) + " is labeled negative");
      }
    }
  }
  return std::move(table.features);
}

// Labels in an unlabeled file are ignored.
FeatureMatrix load_unlabeled(const std::string& path) {
  return std::move(load_table(path).features);
}

std::string data_file_name(const std::string& stem, FileFormat format) {
  return stem + (format == FileFormat::kCsv ? ".csv" : ".pufv");
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::vector<std::size_t> load_index_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "unlabeled_index") {
    throw Error(ErrorKind::kFormat, path.string() + ": bad counter-example header");
  }
  std::vector<std::size_t> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t v = 0;
    const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc() || res.ptr != line.data() + line.size()) {
      throw Error(ErrorKind::kFormat, path.string() + ": bad index '" + line + "'");
    }
    out.push_back(v);
  }
  return out;
}

// --- commands --------------------------------------------------------------

struct SynthFlags {
  std::string kind = "blobs";
  BlobSpec blobs;
  PlantedAnomalySpec planted;
};

int cmd_synth(const CommonFlags& f, const SynthFlags& s) {
  const std::uint64_t seed = f.seed.value_or(0);
  const FileFormat format = parse_format(f.format);
  FeatureTable table;
  if (s.kind == "blobs") {
    BlobSpec spec = s.blobs;
    spec.seed = seed;
    table = to_table(gen_blobs(spec));
  } else {
    PlantedAnomalySpec spec = s.planted;
    spec.seed = seed;
    const PlantedAnomalies p = gen_planted_anomalies(spec);
    table.features = p.features;
    std::vector<SampleLabel> labels;
    // Inliers are the positive class, outliers the negative one.
    for (bool outlier : p.is_outlier) {
      labels.push_back(outlier ? SampleLabel::kNegative : SampleLabel::kPositive);
    }
    table.labels = std::move(labels);
  }
  const fs::path out = prepare_out(f.out);
  save_feature_file(table, out / data_file_name("data", format), format);
  return kExitOk;
}

int cmd_split(const CommonFlags& f, const std::string& input, double fraction) {
  const FileFormat format = parse_format(f.format);
  const LabeledDataset data = to_labeled(load_table(input));
  const PUDataset pu = make_pu_split(data, f.positive_class.value_or(1), fraction,
                                     derive_seed(f.seed.value_or(0), "split"));
  const fs::path out = prepare_out(f.out);
  FeatureTable p{pu.positives, std::vector<SampleLabel>(pu.positive_indices.size(),
                                                        SampleLabel::kPositive)};
  FeatureTable u{pu.unlabeled, std::vector<SampleLabel>(pu.unlabeled_indices.size(),
                                                        SampleLabel::kUnlabeled)};
  save_feature_file(p, out / data_file_name("positives", format), format);
  save_feature_file(u, out / data_file_name("unlabeled", format), format);
  std::ostringstream truth;
  truth << "unlabeled_index,source_index,truth\n";
  for (std::size_t i = 0; i < pu.unlabeled_indices.size(); ++i) {
    truth << i << ',' << pu.unlabeled_indices[i] << ',' << (*pu.hidden_truth)[i] << '\n';
  }
  write_text(out / "hidden_truth.csv", truth.str());
  return kExitOk;
}

int cmd_fit_forest(const CommonFlags& f, const RunConfig& cfg, const std::string& positives) {
  const FeatureMatrix p = load_positives(positives);
  const auto seeds = pipeline_seeds(cfg.master_seed);
  const IsolationForest forest = IsolationForest::fit(stage_forest_config(cfg, seeds.forest), p);
  const fs::path out = prepare_out(f.out);
  write_text(out / "forest.json", forest.to_json());
  return kExitOk;
}

int cmd_score(const CommonFlags& f, const std::string& forest_path,
              const std::string& unlabeled_path) {
  const IsolationForest forest =
      IsolationForest::from_json(read_text(forest_path, ErrorKind::kIo));
  const RankedPool pool = rank_unlabeled(forest, load_unlabeled(unlabeled_path));
  const fs::path out = prepare_out(f.out);
  save_ranked_pool(pool, out / "ranked_pool.csv");
  return kExitOk;
}

int cmd_mine(const CommonFlags& f, const std::string& pool_path, std::int64_t k) {
  if (k < 1) throw Error(ErrorKind::kArgument, "--k must be >= 1");
  const RankedPool pool = load_ranked_pool(pool_path);
  const CounterExampleSet ce = mine_counter_examples(pool, k);
  std::ostringstream text;
  text << "unlabeled_index\n";
  for (std::size_t i : ce.indices) text << i << '\n';
  const fs::path out = prepare_out(f.out);
  write_text(out / "counter_examples.csv", text.str());
  return kExitOk;
}

struct TrainFlags {
  std::string input;
  std::string positives;
  std::string unlabeled;
  std::string counter_examples;
};

int cmd_train(const CommonFlags& f, const RunConfig& cfg, const TrainFlags& t) {
  const auto seeds = pipeline_seeds(cfg.master_seed);
  LabeledDataset data;
  if (!t.input.empty()) {
    data = relabel_for_positive_class(to_labeled(load_table(t.input)), cfg.positive_class);
  } else {
    if (t.positives.empty() || t.unlabeled.empty() || t.counter_examples.empty()) {
      throw Error(ErrorKind::kArgument,
                  "train needs --input, or --positives, --unlabeled and --counter-examples");
    }
    const FeatureMatrix p = load_positives(t.positives);
    const FeatureMatrix u = load_unlabeled(t.unlabeled);
    const CounterExampleSet ce{load_index_list(t.counter_examples)};
    TrainingSet set = assemble_training_set(p, u, ce, seeds.assemble);
    for (const auto& w : set.warnings) std::cerr << "warning: " << w << '\n';
    data = std::move(set.data);
  }
  const TrainedClassifier model = train(data, stage_classifier_config(cfg, seeds.classifier));
  const fs::path out = prepare_out(f.out);
  write_text(out / "model.json", model.to_json());
  return kExitOk;
}

int cmd_evaluate(const CommonFlags& f, const RunConfig& cfg, const std::string& model_path,
                 const std::string& input) {
  const TrainedClassifier model =
      TrainedClassifier::from_json(read_text(model_path, ErrorKind::kIo));
  const FeatureTable table = load_table(input);
  const Eigen::VectorXd probs = model.predict_batch(table.features);
  const std::vector<int> labels = classify(probs);

  std::ostringstream text;
  text << "index,probability,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    text << i << ',' << format_double(probs(static_cast<Eigen::Index>(i))) << ','
         << labels[i] << '\n';
  }
  std::optional<Metrics> m;
  const bool fully_labeled =
      table.labels && table.rows() > 0 &&
      std::none_of(table.labels->begin(), table.labels->end(),
                   [](SampleLabel l) { return l == SampleLabel::kUnlabeled; });
  if (fully_labeled) {
    const LabeledDataset truth =
        relabel_for_positive_class(to_labeled(table), cfg.positive_class);
    m = metrics(confusion(labels, truth.labels));
  }
  const fs::path out = prepare_out(f.out);
  write_text(out / "predictions.csv", text.str());
  if (m) {
    const nlohmann::json j = {{"accuracy", m->accuracy}, {"precision", m->precision},
                              {"recall", m->recall},     {"f1", m->f1},
                              {"degenerate", m->degenerate}};
    write_text(out / "metrics.json", j.dump(2) + "\n");
  }
  return kExitOk;
}

struct ExperimentFlags {
  std::string synth;
  std::string input;
};

LabeledDataset experiment_data(const nlohmann::json& file, const std::string& config_path,
                               const ExperimentFlags& e, const RunConfig& cfg) {
  if (!e.input.empty()) return to_labeled(load_table(e.input));
  if (!e.synth.empty()) {
    if (e.synth != "blobs") throw Error(ErrorKind::kConfig, "--synth supports 'blobs'");
    BlobSpec spec;
    spec.seed = cfg.master_seed;
    return gen_blobs(spec);
  }
  if (file.contains("data")) {
    const auto& d = file.at("data");
    if (!d.is_object() || !d.contains("path") || !d.at("path").is_string()) {
      throw Error(ErrorKind::kConfig, "config: data.path must be a string");
    }
    fs::path path = d.at("path").get<std::string>();
    if (path.is_relative() && !config_path.empty()) {
      path = fs::path(config_path).parent_path() / path;
    }
    FileFormat format = format_from_path(path);
    if (d.contains("format")) format = parse_format(d.at("format").get<std::string>());
    return to_labeled(load_feature_file(path, format));
  }
  if (file.contains("synth")) {
    const auto& s = file.at("synth");
    BlobSpec spec;
    spec.seed = cfg.master_seed;
    try {
      if (s.value("kind", "blobs") != "blobs") {
        throw Error(ErrorKind::kConfig, "config: synth.kind must be 'blobs'");
      }
      spec.n_per_class = s.value("n_per_class", spec.n_per_class);
      spec.d = s.value("d", spec.d);
      spec.separation = s.value("separation", spec.separation);
      spec.seed = s.value("seed", spec.seed);
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::kConfig, std::string("config: synth: ") + ex.what());
    }
    spec.validate();
    return gen_blobs(spec);
  }
  throw Error(ErrorKind::kConfig, "experiment needs --input, --synth or a data/synth config entry");
}

int cmd_experiment(const CommonFlags& f, const ExperimentFlags& e) {
  const nlohmann::json file = load_config_json(f.config_path);
  const RunConfig cfg = resolve_config(f, file);
  const LabeledDataset data = experiment_data(file, f.config_path, e, cfg);
  const SweepResult sweep = run_sweep(data, cfg);
  const std::string report = to_json(sweep, cfg).dump(2) + "\n";
  const std::string table = render_table(sweep);
  const std::string folds = render_fold_csv(sweep);
  const fs::path out = prepare_out(f.out);
  write_text(out / "report.json", report);
  write_text(out / "table.txt", table);
  write_text(out / "folds.csv", folds);
  std::cout << table;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Positive-unlabeled defect detection toolkit"};
  app.require_subcommand(1);

  CommonFlags common;
  SynthFlags synth;
  std::string input, forest_path, unlabeled, positives, pool_path, model_path;
  double fraction = 0.1;
  std::int64_t k = 0;
  TrainFlags train_flags;
  ExperimentFlags experiment;

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  add_common(synth_cmd, common);
  synth_cmd->add_option("--kind", synth.kind)->check(CLI::IsMember({"blobs", "planted"}));
  synth_cmd->add_option("--n-per-class", synth.blobs.n_per_class);
  synth_cmd->add_option("--d", synth.blobs.d);
  synth_cmd->add_option("--separation", synth.blobs.separation);
  synth_cmd->add_option("--n-inliers", synth.planted.n_inliers);
  synth_cmd->add_option("--n-outliers", synth.planted.n_outliers);
  synth_cmd->add_option("--planted-d", synth.planted.d);

  auto* split_cmd = app.add_subcommand("split", "draw a positive-labeled set");
  add_common(split_cmd, common);
  split_cmd->add_option("--input", input)->required();
  split_cmd->add_option("--fraction", fraction)->required();

  auto* fit_cmd = app.add_subcommand("fit-forest", "fit the anomaly scorer on positives");
  add_common(fit_cmd, common);
  fit_cmd->add_option("--positives", positives)->required();

  auto* score_cmd = app.add_subcommand("score", "rank the unlabeled pool");
  add_common(score_cmd, common);
  score_cmd->add_option("--forest", forest_path)->required();
  score_cmd->add_option("--unlabeled", unlabeled)->required();

  auto* mine_cmd = app.add_subcommand("mine", "take the top-k counter-examples");
  add_common(mine_cmd, common);
  mine_cmd->add_option("--pool", pool_path)->required();
  mine_cmd->add_option("--k", k)->required();

  auto* train_cmd = app.add_subcommand("train", "train the binary classifier");
  add_common(train_cmd, common);
  train_cmd->add_option("--input", train_flags.input, "fully labeled training file");
  train_cmd->add_option("--positives", train_flags.positives);
  train_cmd->add_option("--unlabeled", train_flags.unlabeled);
  train_cmd->add_option("--counter-examples", train_flags.counter_examples);

  auto* eval_cmd = app.add_subcommand("evaluate", "predict and, for labeled input, score");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--model", model_path)->required();
  eval_cmd->add_option("--input", input)->required();

  auto* exp_cmd = app.add_subcommand("experiment", "cross-validated fraction sweep");
  add_common(exp_cmd, common);
  exp_cmd->add_option("--synth", experiment.synth)->check(CLI::IsMember({"blobs"}));
  exp_cmd->add_option("--input", experiment.input);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    auto run_config = [&] { return resolve_config(common, load_config_json(common.config_path)); };
    if (*synth_cmd) return cmd_synth(common, synth);
    if (*split_cmd) return cmd_split(common, input, fraction);
    if (*fit_cmd) return cmd_fit_forest(common, run_config(), positives);
    if (*score_cmd) return cmd_score(common, forest_path, unlabeled);
    if (*mine_cmd) return cmd_mine(common, pool_path, k);
    if (*train_cmd) return cmd_train(common, run_config(), train_flags);
    if (*eval_cmd) return cmd_evaluate(common, run_config(), model_path, input);
    if (*exp_cmd) return cmd_experiment(common, experiment);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
