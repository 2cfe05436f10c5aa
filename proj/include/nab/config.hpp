#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nab/attack.hpp"
#include "nab/detection.hpp"
#include "nab/metrics.hpp"
#include "nab/serialize.hpp"
#include "nab/stamp.hpp"
#include "nab/train.hpp"

namespace nab {

struct DatasetSection {
  /// "synthetic" or "cifar10".
  std::string name = "synthetic";
  /// Empty: $NAB_DATA_ROOT.
  std::string root;
  double subsample = 1.0;
  std::uint64_t seed = 0;
  int train_size = 4000;
  int test_size = 1000;
  int class_count = 4;
  int image_size = 32;

  bool operator==(const DatasetSection&) const = default;
};

struct AttackSection {
  bool enabled = true;
  TriggerSpec trigger;
  TargetMap target;
  double lambda = 0.1;
  std::uint64_t seed = 0;
  /// Surrogate training for clean-label perturbations.
  int surrogate_epochs = 10;

  bool operator==(const AttackSection&) const = default;
};

struct DetectorSection {
  /// lga | ln | spectre | oracle, or any registered detector.
  std::string name = "lga";
  double mu = 0.05;
  double gamma = 0.5;
  int isolation_epochs = 20;
  /// Oracle detection accuracy.
  double da = 1.0;
  SceParams sce;
  int spectre_max_dim = 32;
  double spectre_trim = 0.15;
  std::uint64_t seed = 0;

  bool operator==(const DetectorSection&) const = default;
};

struct RelabelerSection {
  /// vd | nc | synthetic.
  std::string name = "nc";
  double removal_rate = 0.2;
  /// Share of the clean training set the defender holds as verified data.
  double verified_fraction = 0.05;
  /// verified-supervised | contrastive.
  std::string feature_recipe = "verified-supervised";
  /// Contrastive pretraining epochs over the poisoned set.
  int feature_epochs = 20;
  /// Epochs for models fit on the verified set alone (verified-supervised features, VD).
  int verified_epochs = 200;
  /// Synthetic relabeler accuracy.
  double pla = 1.0;
  std::uint64_t seed = 0;

  bool operator==(const RelabelerSection&) const = default;
};

struct DefenseSection {
  bool enabled = true;
  DetectorSection detector;
  RelabelerSection relabeler;
  StampSpec stamp;
  /// Stamp stamped examples again after augmentation (crop and flip would otherwise move or drop it).
  bool restamp_after_augment = true;

  bool operator==(const DefenseSection&) const = default;
};

struct EvaluationSection {
  std::vector<EvalMode> modes{EvalMode::kPlain, EvalMode::kDefended, EvalMode::kFiltered};
  /// Record ASR/CA on the test split after every epoch.
  bool probe_each_epoch = true;

  bool operator==(const EvaluationSection&) const = default;
};

struct SweepSection {
  std::vector<double> da_grid{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> pla_grid{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> mu_grid{0.0, 0.01, 0.05, 0.1};
  std::vector<double> lambda_grid{0.05, 0.1};

  bool operator==(const SweepSection&) const = default;
};

struct VaccinationSection {
  /// The defender's own attack.
  TriggerSpec trigger;
  double lambda = 0.1;
  /// Share of the defender's poisoned examples that are stamped back to their true labels.
  double processed_fraction = 0.5;
  std::uint64_t seed = 1;

  bool operator==(const VaccinationSection&) const = default;
};

struct OutputSection {
  std::string directory = "runs";
  /// Subset of json, csv, svg, txt.
  std::vector<std::string> formats{"json", "csv", "svg", "txt"};

  bool operator==(const OutputSection&) const = default;
};

struct ExperimentConfig {
  DatasetSection dataset;
  AttackSection attack;
  DefenseSection defense;
  TrainConfig training;
  EvaluationSection evaluation;
  SweepSection sweep;
  VaccinationSection vaccination;
  OutputSection output;

  /// Throws ConfigError on invalid values; returns non-fatal warnings (e.g. stamp/patch overlap).
  std::vector<std::string> validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Every field, defaults included.
Json render_config(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys and wrongly typed values throw ConfigError.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

/// 16 hex digits over the rendered config without the output section.
std::string config_hash(const ExperimentConfig& config);

/// Sets every seed in the config (dataset, attack, detector, relabeler, training, vaccination)
/// from one base seed.
void apply_seed(ExperimentConfig& config, std::uint64_t seed);

}  // namespace nab
