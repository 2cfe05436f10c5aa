#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nab/nn/tensor.hpp"
#include "nab/rng.hpp"

namespace nab::nn {

struct Parameter {
  std::string name;
  FloatBuffer value;
  FloatBuffer grad;
  FloatBuffer velocity;

  explicit Parameter(std::string n = {}, std::size_t size = 0)
      : name(std::move(n)), value(size, 0.0f), grad(size, 0.0f), velocity(size, 0.0f) {}
};

/// kTrain: batch statistics in normalization layers, activations cached for backward.
/// kEvalGrad: running statistics, activations cached (input gradients of a frozen model).
enum class Mode { kTrain, kEvalGrad };

class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  /// Inference with running statistics; touches no cached state, safe to call concurrently.
  virtual Tensor infer(const Tensor& x) const = 0;
  /// Accumulates parameter gradients and returns the gradient w.r.t. the last forward input.
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual void collect_parameters(std::vector<Parameter*>&) {}
  /// Non-trainable state that must be checkpointed (normalization running statistics).
  virtual void collect_buffers(std::vector<FloatBuffer*>&) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, bool bias, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  Tensor run(const Tensor& x, FloatBuffer* col_cache) const;

  int in_, out_, k_, stride_, pad_;
  bool has_bias_;
  Parameter weight_, bias_;
  FloatBuffer cols_;
  int in_n_ = 0, in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
};

class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int channels, float momentum = 0.1f, float eps = 1e-5f);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<FloatBuffer*>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm2d>(*this); }

 private:
  int channels_;
  float momentum_, eps_;
  Parameter gamma_, beta_;
  FloatBuffer running_mean_, running_var_;
  // cache
  Mode mode_ = Mode::kTrain;
  Tensor xhat_;
  FloatBuffer inv_std_;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }

 private:
  Tensor out_;
};

/// 2x2 max pooling with stride 2.
class MaxPool2d final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 private:
  Tensor run(const Tensor& x, std::vector<std::uint32_t>* argmax) const;
  std::vector<std::uint32_t> argmax_;
  int in_n_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  int in_h_ = 0, in_w_ = 0;
};

/// Fully connected layer; flattens its input to (n, c*h*w).
class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }

  int in_features() const noexcept { return in_; }
  int out_features() const noexcept { return out_; }

 private:
  int in_, out_;
  Parameter weight_, bias_;
  Tensor input_;
  int in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

class Sequential final : public Layer {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  Sequential& add(Args&&... args) {
    layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    return *this;
  }
  Sequential& add(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }

  bool empty() const noexcept { return layers_.empty(); }

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<FloatBuffer*>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sequential>(*this); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// relu(main(x) + shortcut(x)); an empty shortcut is the identity.
class Residual final : public Layer {
 public:
  Residual(Sequential main, Sequential shortcut) : main_(std::move(main)), shortcut_(std::move(shortcut)) {}

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<FloatBuffer*>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Residual>(*this); }

 private:
  Sequential main_, shortcut_;
  Tensor out_;
};

}  // namespace nab::nn
