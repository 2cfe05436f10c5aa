#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "nab/image.hpp"

namespace nab::nn {

/// Allocations aligned to Eigen's widest packet, so vectorized kernels take the same path
/// (and round the same way) regardless of where the heap places a buffer.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

/// Dense NCHW float batch. Fully connected activations use h = w = 1.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  FloatBuffer data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * h * w; }
  float* sample(int i) noexcept { return data.data() + static_cast<std::size_t>(i) * sample_size(); }
  const float* sample(int i) const noexcept { return data.data() + static_cast<std::size_t>(i) * sample_size(); }
  bool same_shape(const Tensor& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

/// Packs channel-last images into an NCHW batch.
Tensor to_batch(std::span<const ImageTensor> images);
Tensor to_batch(std::span<const ImageTensor* const> images);

/// Unpacks sample `i` of an NCHW batch into a channel-last image.
ImageTensor sample_to_image(const Tensor& t, int i);

}  // namespace nab::nn
