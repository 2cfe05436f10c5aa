#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nab/dataset.hpp"
#include "nab/nn/network.hpp"
#include "nab/train.hpp"

namespace nab {

enum class FeatureRecipe { kContrastive, kVerifiedSupervised };

std::string to_string(FeatureRecipe recipe);
FeatureRecipe parse_feature_recipe(const std::string& name);

/// A frozen encoder g: image -> R^d. Deterministic at inference.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int dim() const = 0;
  virtual ImageShape input_shape() const = 0;
  virtual std::string recipe() const = 0;
  /// Row i is g(images[i]).
  virtual Eigen::MatrixXd extract(std::span<const ImageTensor> images) const = 0;
};

/// Exposes the penultimate layer of a trained network.
class NetworkFeatureExtractor final : public FeatureExtractor {
 public:
  NetworkFeatureExtractor(nn::Network network, FeatureRecipe recipe)
      : network_(std::move(network)), recipe_(recipe) {}

  int dim() const override { return network_.feature_dim(); }
  ImageShape input_shape() const override { return network_.input_shape(); }
  std::string recipe() const override { return to_string(recipe_); }
  Eigen::MatrixXd extract(std::span<const ImageTensor> images) const override;

  const nn::Network& network() const noexcept { return network_; }

 private:
  nn::Network network_;
  FeatureRecipe recipe_;
};

/// Features of a split, rows in split order.
struct FeatureMatrix {
  std::vector<ExampleId> ids;
  std::vector<int> labels;
  Eigen::MatrixXd values;
};

/// Throws ArgumentError when the extractor's input shape differs from the split's.
FeatureMatrix extract_features(const FeatureExtractor& extractor, const DatasetSplit& split);

/// verified-supervised: a classifier trained on `data` (its labels are trusted), penultimate layer.
/// contrastive: SimCLR-style agreement between two augmented views, labels unused.
std::unique_ptr<FeatureExtractor> train_feature_extractor(const DatasetSplit& data, FeatureRecipe recipe, int epochs,
                                                          std::uint64_t seed, const TrainConfig& base = {});

}  // namespace nab
