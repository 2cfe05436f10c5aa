#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nab/attack.hpp"
#include "nab/classifier.hpp"
#include "nab/dataset.hpp"
#include "nab/stamp.hpp"

namespace nab {

/// plain: no stamping. defended: every input stamped. filtered: both passes, disagreement rejects.
enum class EvalMode { kPlain, kDefended, kFiltered };

std::string to_string(EvalMode mode);
EvalMode parse_eval_mode(const std::string& name);

/// One training epoch, as recorded by the trainer and its probes.
struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;
  /// Mean training loss per provenance group present in the data ("clean", "poisoned", "stamped").
  std::map<std::string, double> group_loss;
  std::optional<double> asr;
  std::optional<double> ca;

  bool operator==(const EpochRecord&) const = default;
};

/// All values are percentages in [0, 100].
struct MetricsReport {
  double asr = 0.0;
  double ca = 0.0;
  double ba = 0.0;
  std::optional<double> c_rej;
  std::optional<double> psr;
  std::optional<double> b_rej;
  std::optional<double> dsr;
  std::vector<EpochRecord> per_epoch;
  EvalMode mode = EvalMode::kPlain;
  std::uint64_t seed = 0;
  std::string config_hash;

  bool operator==(const MetricsReport&) const = default;
};

struct CoreMetrics {
  double asr = 0.0, ca = 0.0, ba = 0.0;
};

struct FilterMetrics {
  double c_rej = 0.0, psr = 0.0, b_rej = 0.0, dsr = 0.0;
};

/// ASR/CA/BA from raw predictions. `targets[i]` is the attacker's target for example i,
/// `clean[i]` = f(x) and `triggered[i]` = f(P(x)) (stamped versions when defending).
CoreMetrics core_metrics_from_predictions(std::span<const int> labels, std::span<const int> targets,
                                          std::span<const int> clean, std::span<const int> triggered);

/// C-REJ/PSR/B-REJ/DSR from f(x), f(S(x)), f(P(x)), f(S(P(x))).
FilterMetrics filter_metrics_from_predictions(std::span<const int> labels, std::span<const int> clean,
                                              std::span<const int> stamped_clean, std::span<const int> triggered,
                                              std::span<const int> stamped_triggered);

/// Test-set triggered copies P(x), seeded per example id.
std::vector<ImageTensor> triggered_images(const DatasetSplit& test, const TriggerSpec& trigger);

/// ASR, CA, BA over a clean test split. With a stamp, x and P(x) are replaced by S(x) and S(P(x)).
MetricsReport compute_core_metrics(const Classifier& model, const DatasetSplit& test, const TriggerSpec& trigger,
                                   const TargetMap& target_map, const std::optional<StampSpec>& stamp);

/// C-REJ, PSR, B-REJ, DSR over a clean test split (core fields are filled with the defended values).
MetricsReport compute_filter_metrics(const Classifier& model, const DatasetSplit& test, const TriggerSpec& trigger,
                                     const TargetMap& target_map, const StampSpec& stamp);

/// Evaluates in one of the three inference modes.
MetricsReport evaluate(const Classifier& model, const DatasetSplit& test, const TriggerSpec& trigger,
                       const TargetMap& target_map, const StampSpec& stamp, EvalMode mode);

/// Stamped-inference filter: the common prediction of f(x) and f(S(x)), or nullopt (reject).
std::optional<int> filter_inference(const Classifier& model, const ImageTensor& image, const StampSpec& stamp);

}  // namespace nab
