#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nab/dataset.hpp"
#include "nab/features.hpp"
#include "nab/train.hpp"

namespace nab {

/// The suspected subset D_s'. Scores are "higher = more suspicious"; the suspected set is
/// exactly the round(mu * N) highest scores with ties broken by ascending id.
struct DetectionReport {
  std::vector<ExampleId> suspected_ids;  // ascending
  std::map<ExampleId, double> scores;
  double mu = 0.0;
  std::string method;
  std::map<std::string, std::string> metadata;

  bool contains(ExampleId id) const;
  std::size_t size() const noexcept { return suspected_ids.size(); }
  bool operator==(const DetectionReport&) const = default;
};

/// Builds a report from a score for every id. Throws ArgumentError when round(mu * N) is 0
/// or mu is outside (0, 1).
DetectionReport report_from_scores(std::span<const ExampleId> ids, std::span<const double> scores, double mu,
                                   std::string method);

/// LGA report from a recorded trace: score = -(final-epoch loss).
DetectionReport report_from_loss_trace(const LossTrace& trace, double mu);

/// Trains a fresh classifier with the loss floor gamma, no augmentation, then isolates the
/// lowest final-epoch losses. `trace` receives the loss trace when non-null.
DetectionReport detect_lga(const DatasetSplit& dp, double mu, double gamma, int isolation_epochs,
                           const TrainConfig& train_config, LossTrace* trace = nullptr);

struct SceParams {
  double alpha = 0.1;
  double beta = 1.0;
  /// log(0) replacement in the reverse cross-entropy.
  double clip = -4.0;
  int epochs = 20;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const SceParams&) const = default;
};

/// Per-example symmetric cross-entropy alpha * CE + beta * RCE for logits rows.
std::vector<double> sce_loss(const Eigen::MatrixXd& logits, std::span<const int> labels, double alpha, double beta,
                             double clip);

/// Linear classifier with SCE on frozen (standardized) features; score = final SCE loss.
DetectionReport detect_ln(const FeatureMatrix& features, int class_count, double mu, const SceParams& params);
DetectionReport detect_ln(const DatasetSplit& dp, double mu, const FeatureExtractor& extractor,
                          const SceParams& params);

/// Outlier scores of whitened class features (rows). Higher = more suspicious.
using QueScoreFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd& whitened)>;

/// Quantum-entropy style score w^T U w / tr(U) with U = exp(alpha (C - I) / (||C|| - 1)).
Eigen::VectorXd que_scores(const Eigen::MatrixXd& whitened, double alpha = 4.0);

struct SpectreParams {
  /// Projection dimension per class (top principal directions).
  int max_dim = 32;
  /// Fraction of largest-distance samples dropped in each robust covariance iteration.
  double trim = 0.15;
  int robust_iterations = 5;
  QueScoreFn score = [](const Eigen::MatrixXd& w) { return que_scores(w); };
};

/// Per-class robust whitening and outlier scoring; the class with the highest mean score is
/// the inferred target (metadata "target_class") and the report takes its top scores.
DetectionReport detect_spectre(const FeatureMatrix& features, int class_count, double mu,
                               const SpectreParams& params = {});
DetectionReport detect_spectre(const DatasetSplit& dp, double mu, const FeatureExtractor& extractor,
                               const SpectreParams& params = {});

/// round(da * mu * N) seeded poisoned ids plus seeded clean ids for the remainder.
/// Throws ArgumentError (with the feasible da range) when the quota cannot be met.
DetectionReport detect_oracle(const DatasetSplit& dp, const PoisonManifest& manifest, double mu, double da,
                              std::uint64_t seed);

/// |suspected and poisoned| / |suspected|. Throws UndefinedMetricError on an empty report.
double detection_accuracy(const DetectionReport& report, const PoisonManifest& manifest);

/// Manifest-free detector usable by the pipeline and by the nearest-center relabeler.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string name() const = 0;
  virtual DetectionReport detect(const DatasetSplit& dp, double mu) const = 0;
};

struct DetectorSettings {
  double lga_gamma = 0.5;
  int isolation_epochs = 20;
  TrainConfig train_config;
  SceParams sce;
  SpectreParams spectre;
  /// Required by feature-based detectors (ln, spectre).
  std::shared_ptr<const FeatureExtractor> extractor;
};

using DetectorFactory = std::function<std::unique_ptr<Detector>(const DetectorSettings&)>;

/// Registers a detector under `name`, replacing any previous entry. "lga", "ln" and
/// "spectre" are registered by default.
void register_detector(const std::string& name, DetectorFactory factory);
std::unique_ptr<Detector> make_detector(const std::string& name, const DetectorSettings& settings);
bool has_detector(const std::string& name);
std::vector<std::string> detector_names();

}  // namespace nab
