#include "nab/nn/tensor.hpp"

#include "nab/errors.hpp"

namespace nab::nn {

namespace {

void pack(const ImageTensor& img, float* dst) {
  const int h = img.height(), w = img.width(), c = img.channels();
  auto src = img.values();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        dst[(static_cast<std::size_t>(ch) * h + y) * w + x] = src[(static_cast<std::size_t>(y) * w + x) * c + ch];
}

}  // namespace

Tensor to_batch(std::span<const ImageTensor> images) {
  std::vector<const ImageTensor*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& im : images) ptrs.push_back(&im);
  return to_batch(std::span<const ImageTensor* const>(ptrs));
}

Tensor to_batch(std::span<const ImageTensor* const> images) {
  if (images.empty()) return {};
  const auto& s = images.front()->shape();
  Tensor t(static_cast<int>(images.size()), s.channels, s.height, s.width);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->shape() != s) throw ArgumentError("to_batch: mixed image shapes");
    pack(*images[i], t.sample(static_cast<int>(i)));
  }
  return t;
}

ImageTensor sample_to_image(const Tensor& t, int i) {
  ImageTensor img({t.h, t.w, t.c});
  const float* src = t.sample(i);
  for (int ch = 0; ch < t.c; ++ch)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) img.at(y, x, ch) = src[(static_cast<std::size_t>(ch) * t.h + y) * t.w + x];
  return img;
}

}  // namespace nab::nn
