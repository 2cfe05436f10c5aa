#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nab/image.hpp"

namespace nab {

using ExampleId = std::uint64_t;

enum class Provenance : std::uint8_t { kClean = 0, kAttackerPoisoned = 1, kDefenderStamped = 2 };

const char* to_string(Provenance p) noexcept;

struct LabeledExample {
  ExampleId id = 0;
  ImageTensor image;
  int label = 0;
  Provenance provenance = Provenance::kClean;

  bool operator==(const LabeledExample&) const = default;
};

/// Ordered, id-unique collection of examples over K classes.
class DatasetSplit {
 public:
  DatasetSplit() = default;
  DatasetSplit(std::string name, int class_count, std::vector<LabeledExample> examples);

  const std::string& name() const noexcept { return name_; }
  int class_count() const noexcept { return class_count_; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }

  const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
  const LabeledExample& operator[](std::size_t i) const { return examples_[i]; }
  auto begin() const noexcept { return examples_.begin(); }
  auto end() const noexcept { return examples_.end(); }

  /// Shape shared by every image; throws on an empty split.
  const ImageShape& image_shape() const;

  bool contains(ExampleId id) const { return index_.contains(id); }
  /// Position of `id` in the stored order; throws ArgumentError if absent.
  std::size_t position_of(ExampleId id) const;
  const LabeledExample& by_id(ExampleId id) const { return examples_[position_of(id)]; }

  std::vector<ExampleId> ids() const;
  /// Number of examples per class label.
  std::vector<std::size_t> class_counts() const;

  bool operator==(const DatasetSplit& other) const {
    return name_ == other.name_ && class_count_ == other.class_count_ && examples_ == other.examples_;
  }

 private:
  std::string name_;
  int class_count_ = 0;
  std::vector<LabeledExample> examples_;
  std::unordered_map<ExampleId, std::size_t> index_;
};

/// Ground truth of an attacker's poisoning. Only evaluation code and the oracle detector read it.
struct PoisonManifest {
  std::vector<ExampleId> poisoned_ids;  // sorted ascending
  std::string trigger_name;
  std::string target_map_name;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  /// Clean label of every poisoned example before relabeling.
  std::map<ExampleId, int> original_labels;
  /// Examples carrying a noise-mode trigger with their true label (warp attack only).
  std::vector<ExampleId> noise_ids;

  bool contains(ExampleId id) const;
  bool operator==(const PoisonManifest&) const = default;
};

/// Label of `id` before any attacker relabeling.
int true_label(const DatasetSplit& split, const PoisonManifest* manifest, ExampleId id);

struct TrainTestSplits {
  DatasetSplit train;
  DatasetSplit test;
};

/// Parameters of the procedurally generated shape dataset.
struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t train_size = 4000;
  std::size_t test_size = 1000;
  int class_count = 4;
  int height = 32;
  int width = 32;
  int channels = 3;
};

/// K-class colored-shape images; class k draws the k-th shape family at random position,
/// scale, color and background.
TrainTestSplits make_synthetic(const SyntheticOptions& options);

/// Reads the CIFAR-10 binary distribution (data_batch_{1..5}.bin, test_batch.bin) from `root`
/// or `root/cifar-10-batches-bin`.
TrainTestSplits load_cifar10(const std::filesystem::path& root);

/// Dispatches on name: "synthetic" or "cifar10". An empty root falls back to $NAB_DATA_ROOT.
TrainTestSplits load_dataset(const std::string& name, const std::filesystem::path& root,
                             const SyntheticOptions& synthetic = {});

/// Environment variable naming the default dataset root.
inline constexpr const char* kDataRootEnv = "NAB_DATA_ROOT";

/// Stratified seeded subsample of round(fraction * N) examples, original order kept.
DatasetSplit subsample(const DatasetSplit& split, double fraction, std::uint64_t seed);

struct VerifiedSplit {
  DatasetSplit verified;
  DatasetSplit remainder;
};

VerifiedSplit split_verified(const DatasetSplit& split, double fraction, std::uint64_t seed);

/// Largest-remainder allocation of `total` over classes proportional to `counts`.
/// Ties in fractional part go to the lower class index.
std::vector<std::size_t> allocate_stratified(const std::vector<std::size_t>& counts, std::size_t total);

}  // namespace nab
