#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "nab/classifier.hpp"
#include "nab/dataset.hpp"

namespace nab {

enum class TriggerKind { kPatch, kBlend, kWarp, kCleanLabel };

std::string to_string(TriggerKind kind);
/// Accepts patch|badnets, blend, warp|wanet, clean-label|cl.
TriggerKind parse_trigger_kind(const std::string& name);

/// Checkerboard grid written into the bottom-right corner.
struct PatchParams {
  int size = 3;

  bool operator==(const PatchParams&) const = default;
};

struct BlendParams {
  double alpha = 0.2;
  /// Seed of the default pseudo-random noise pattern.
  std::uint64_t pattern_seed = 0x426c656e64ULL;
  /// Optional PPM/PGM image used instead of the noise pattern (resized to the image shape).
  std::filesystem::path pattern_path;

  bool operator==(const BlendParams&) const = default;
};

/// Elastic warp: a grid x grid x 2 control field, normalized by its mean absolute value,
/// clamped to [-1, 1], scaled by `strength` pixels and bilinearly upsampled.
struct WarpParams {
  int grid = 4;
  double strength = 0.5;
  double noise_rate = 0.2;

  bool operator==(const WarpParams&) const = default;
};

struct CleanLabelParams {
  double epsilon = 32.0 / 255.0;
  int steps = 20;
  /// Non-positive means epsilon / 8.
  double step_size = 0.0;

  double effective_step_size() const { return step_size > 0.0 ? step_size : epsilon / 8.0; }
  bool operator==(const CleanLabelParams&) const = default;
};

struct TriggerSpec {
  TriggerKind kind = TriggerKind::kPatch;
  PatchParams patch;
  BlendParams blend;
  WarpParams warp;
  CleanLabelParams clean_label;
  /// Seed for the trigger's fixed random components (warp field).
  std::uint64_t seed = 0;

  std::string name() const { return to_string(kind); }
  bool operator==(const TriggerSpec&) const = default;
};

enum class TargetMode { kAllToOne, kAllToAll };

struct TargetMap {
  TargetMode mode = TargetMode::kAllToOne;
  int target_class = 0;

  /// ALL_TO_ONE: target_class. ALL_TO_ALL: (label + 1) mod K.
  int apply(int label, int class_count) const;
  std::string name() const;
  bool operator==(const TargetMap&) const = default;
};

/// kNoise applies the warp trigger's noise mode (random per-sample field added); it only
/// differs from kAttack for warp triggers.
enum class TriggerMode { kAttack, kNoise };

/// Applies the attacker's trigger P. Deterministic in (image, trigger, per_sample_seed, mode);
/// output stays in [0, 1]. For clean-label triggers this is the inference-time grid only.
ImageTensor apply_trigger(const ImageTensor& image, const TriggerSpec& trigger, std::uint64_t per_sample_seed,
                          TriggerMode mode = TriggerMode::kAttack);

/// The blend pattern used for `shape` (noise pattern or resized file image).
ImageTensor blend_pattern(const BlendParams& params, const ImageShape& shape);

/// Reads a binary PPM (P6) or PGM (P5) image into [0, 1] values.
ImageTensor read_pnm(const std::filesystem::path& path);

/// Untargeted l-infinity PGD on the surrogate's cross-entropy for `label`, no random start.
ImageTensor craft_clean_label(DifferentiableClassifier& surrogate, const ImageTensor& image, int label,
                              double epsilon, int steps, double step_size);

struct PoisonResult {
  DatasetSplit poisoned;
  PoisonManifest manifest;
};

/// Builds D_p from a clean split. round(lambda * N) examples (clean-label: round(lambda * N_target)
/// examples of the target class) are triggered and relabeled with the target map; all others are
/// passed through. Selection and per-sample randomness are keyed by example id.
PoisonResult poison_dataset(const DatasetSplit& clean, const TriggerSpec& trigger, const TargetMap& target_map,
                            double lambda, std::uint64_t seed, DifferentiableClassifier* surrogate = nullptr);

}  // namespace nab
