#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nab/attack.hpp"
#include "nab/config.hpp"
#include "nab/dataset.hpp"
#include "nab/detection.hpp"
#include "nab/metrics.hpp"
#include "nab/nab_core.hpp"
#include "nab/relabel.hpp"

namespace nab {

/// Clean splits, the attacker's training set D_p and the defender's verified subset.
struct PreparedData {
  DatasetSplit clean_train;
  DatasetSplit test;
  DatasetSplit poisoned_train;
  PoisonManifest manifest;
  DatasetSplit verified;
};

/// load -> subsample -> verified split -> poison (attack.enabled = false gives D_p = D).
PreparedData prepare_data(const ExperimentConfig& config);

struct DefenseOutcome {
  DetectionReport report;
  PseudoLabelMap labels;
  NABDataset nab;
  std::optional<double> detection_accuracy;
  std::optional<double> pseudo_label_accuracy;
};

/// detect -> relabel -> nab_transform on `data.poisoned_train`. Errors carry the stage name.
DefenseOutcome apply_defense(const ExperimentConfig& config, const PreparedData& data);

struct RunOutcome {
  std::string config_hash;
  std::map<EvalMode, MetricsReport> metrics;
  std::vector<EpochRecord> per_epoch;
  std::optional<DefenseOutcome> defense;
  /// Set when the caller asked to keep the model.
  std::optional<nn::Network> model;

  /// defended when the defense ran and was evaluated, else plain (else the first mode).
  const MetricsReport& primary() const;
};

struct RunOptions {
  /// Root under which <config-hash>/ is created; empty writes nothing.
  std::filesystem::path out;
  bool force = false;
  bool keep_model = false;
  /// Progress lines (stage starts, per-epoch summaries) go to stderr.
  bool verbose = false;
};

/// The full pipeline. `shared` skips data preparation (sweeps reuse one poisoned set).
RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options = {},
                          const PreparedData* shared = nullptr);

/// <out>/<config-hash>; throws Error if it exists and is non-empty unless `force`.
std::filesystem::path prepare_run_directory(const std::filesystem::path& out, const std::string& hash, bool force);

struct SweepCell {
  double row = 0.0;
  double col = 0.0;
  /// "ok" or "infeasible".
  std::string status = "ok";
  std::string note;
  std::optional<RunOutcome> outcome;
};

struct SweepResult {
  std::string kind;
  std::string row_label;
  std::string col_label;
  std::vector<double> rows;
  std::vector<double> cols;
  std::vector<SweepCell> cells;  // row-major

  const SweepCell& at(std::size_t r, std::size_t c) const { return cells[r * cols.size() + c]; }
};

/// Oracle detector x synthetic relabeler over (da, pla) on one shared poisoned set.
/// CA/BA/ASR come from defended evaluation, DSR from filtered evaluation.
SweepResult sweep_da_pla(const ExperimentConfig& config, const std::vector<double>& da_grid,
                         const std::vector<double>& pla_grid, const RunOptions& options = {});

/// The configured detector/relabeler over (mu, lambda); mu = 0 disables the defense.
SweepResult sweep_mu_lambda(const ExperimentConfig& config, const std::vector<double>& mu_grid,
                            const std::vector<double>& lambda_grid, const RunOptions& options = {});

/// True when the oracle can return round(da * mu * N) poisoned ids and the clean remainder.
bool oracle_feasible(std::size_t n, std::size_t poisoned, double mu, double da);

struct VaccinationOutcome {
  /// Training set with the defender's vaccine merged in.
  NABDataset vaccinated;
  RunOutcome with_vaccine;
  RunOutcome without_vaccine;
  /// Trigger whose ASR is traced: the attacker's, or the defender's when no attack is configured.
  TriggerSpec traced_trigger;
};

/// The defender poisons part of the data with config.vaccination.trigger toward `target_class`,
/// stamps a processed fraction of those back to their true labels, and trains on the merge with
/// the attacker's set. Inference stamps every input. The paired run omits the vaccine.
VaccinationOutcome vaccinate(const ExperimentConfig& config, int target_class, const RunOptions& options = {});

/// Writes the clean train/test containers (and the poisoned training set when the attack is
/// enabled) into `dir`. Returns the files written.
std::vector<std::filesystem::path> make_dataset(const ExperimentConfig& config, const std::filesystem::path& dir,
                                                bool force);

}  // namespace nab
