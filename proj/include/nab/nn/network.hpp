#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nab/classifier.hpp"
#include "nab/nn/layers.hpp"

namespace nab::nn {

enum class Architecture { kSmallCnn, kResNet18, kResNet50 };

std::string to_string(Architecture arch);
/// Accepts "small-cnn", "resnet-18", "resnet-50".
Architecture parse_architecture(const std::string& tag);

/// Feature body followed by a linear classification head.
///
/// small-cnn: three conv(3x3)-BN-ReLU-maxpool blocks with 16/32/64 channels, then
/// Linear(64*(H/8)*(W/8) -> 128)-BN-ReLU (the feature vector), then the head. resnet-18 / resnet-50 follow the
/// CIFAR-style residual layouts (3x3 stem, no stem pooling, global average pooling).
class Network final : public DifferentiableClassifier {
 public:
  /// `width` scales the channel counts of the residual architectures (0 keeps the default 64).
  Network(Architecture arch, ImageShape input, int classes, std::uint64_t seed, int width = 0);

  Architecture architecture() const noexcept { return arch_; }
  const ImageShape& input_shape() const noexcept { return input_; }
  int feature_dim() const noexcept { return head_.in_features(); }

  /// Logits of a batch, caching activations for backward().
  Tensor forward(const Tensor& x, Mode mode);
  /// Backpropagates d loss / d logits; accumulates parameter gradients and returns d loss / d input.
  Tensor backward(const Tensor& grad_logits);

  /// Body only (feature vectors), with caches for backward_features().
  Tensor forward_features(const Tensor& x, Mode mode);
  Tensor backward_features(const Tensor& grad_features);

  Tensor logits(const Tensor& x) const;
  Tensor features(const Tensor& x) const;

  std::vector<Parameter*> parameters();
  std::vector<FloatBuffer*> buffers();
  void zero_grad();
  std::size_t parameter_count();

  int class_count() const override { return classes_; }
  std::vector<int> predict(std::span<const ImageTensor> images) const override;
  bool is_trained() const override { return trained_; }
  void set_trained(bool trained) noexcept { trained_ = trained; }
  double loss_and_input_gradient(const ImageTensor& image, int label, ImageTensor& gradient) override;

  /// Versioned checkpoint: architecture tag, shapes, config hash, parameters and buffers.
  void save(const std::filesystem::path& path, const std::string& config_hash);
  static Network load(const std::filesystem::path& path, std::string* config_hash = nullptr);

 private:
  struct Init {};
  Network(Init, Architecture arch, ImageShape input, int classes, int width, Rng rng);

  Architecture arch_;
  ImageShape input_;
  int classes_;
  int width_;
  int feature_dim_ = 0;
  Sequential body_;
  Linear head_;
  bool trained_ = false;
};

/// Row-wise softmax of (n, k) logits, in double precision.
std::vector<double> softmax(const Tensor& logits);

/// Per-example cross-entropy; `probabilities` receives the softmax when non-null.
std::vector<double> cross_entropy(const Tensor& logits, std::span<const int> labels,
                                  std::vector<double>* probabilities = nullptr);

inline constexpr std::size_t kInferenceBatch = 256;

}  // namespace nab::nn
