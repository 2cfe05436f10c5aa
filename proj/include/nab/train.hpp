#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nab/dataset.hpp"
#include "nab/metrics.hpp"
#include "nab/nn/network.hpp"

namespace nab {

struct AugmentConfig {
  bool enabled = true;
  int crop_padding = 4;
  /// Crop padding fill: "reflect" or "zero".
  std::string padding_mode = "reflect";
  double flip_probability = 0.5;
  /// Side of the zeroed square; 0 disables cutout.
  int cutout_size = 3;

  bool operator==(const AugmentConfig&) const = default;
};

struct TrainConfig {
  std::string architecture = "small-cnn";
  /// Channel width of residual architectures (0: default 64).
  int width = 0;
  int epochs = 20;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 64;
  /// "cosine" or "constant".
  std::string schedule = "cosine";
  AugmentConfig augment;
  std::uint64_t seed = 0;

  /// 100-epoch recipe; resnet-50 uses lr 0.3 and weight decay 5e-4.
  static TrainConfig full_scale(const std::string& architecture);

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Per-example training losses, one row per recorded epoch, columns in dataset order.
struct LossTrace {
  std::vector<ExampleId> ids;
  std::vector<std::vector<double>> epochs;

  std::size_t epoch_count() const noexcept { return epochs.size(); }
  /// Loss sequence of one example.
  std::vector<double> of(ExampleId id) const;
  const std::vector<double>& final_losses() const;
};

/// Optional loss-floor shaping: the batch-mean loss L becomes sign(L - gamma) * L.
struct LossShaping {
  std::optional<double> lga_gamma;
};

using EpochHook = std::function<void(int epoch, const nn::Network& model, EpochRecord& record)>;

struct TrainOptions {
  LossShaping shaping;
  /// Re-applied after augmentation to DEFENDER_STAMPED examples, so crops and flips cannot remove it.
  std::optional<StampSpec> restamp;
  std::vector<EpochHook> hooks;
};

struct TrainResult {
  nn::Network model;
  LossTrace trace;
  std::vector<EpochRecord> epochs;
};

/// Standard supervised training with SGD + momentum, cosine decay and the configured augmentations.
/// Deterministic given config.seed. Throws TrainingDivergedError on a non-finite loss.
TrainResult train(const DatasetSplit& data, const TrainConfig& config, const TrainOptions& options = {});

/// Builds the network described by `config` for `data`'s shape and class count.
nn::Network make_network(const TrainConfig& config, const ImageShape& shape, int classes, std::uint64_t seed);

/// Random crop (reflect or zero padding), horizontal flip and cutout, all drawn from `rng`.
ImageTensor augment(const ImageTensor& image, const AugmentConfig& config, Rng& rng);

/// The image `train` feeds for `ex` in `epoch`: augmented, then re-stamped when requested.
ImageTensor training_view(const LabeledExample& ex, const TrainConfig& config, const TrainOptions& options, int epoch);

/// Learning rate of `epoch` (0-based) under the configured schedule.
double scheduled_learning_rate(const TrainConfig& config, int epoch);

/// SGD with momentum and L2 weight decay (decay folded into the gradient).
void sgd_step(std::span<nn::Parameter* const> params, double lr, double momentum, double weight_decay);

/// Hook recording ASR and CA on a held-out probe after every epoch.
EpochHook make_probe_hook(const DatasetSplit& probe, const TriggerSpec& trigger, const TargetMap& target_map,
                          std::optional<StampSpec> stamp = std::nullopt);

}  // namespace nab
