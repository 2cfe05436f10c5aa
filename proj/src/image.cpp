#include "nab/image.hpp"

#include <algorithm>

#include "nab/errors.hpp"

namespace nab {

ImageTensor::ImageTensor(ImageShape shape, float fill) : shape_(shape), values_(shape.size(), fill) {
  if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
    throw ArgumentError("image dimensions must be positive");
  }
}

ImageTensor::ImageTensor(ImageShape shape, std::vector<float> values)
    : shape_(shape), values_(std::move(values)) {
  if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
    throw ArgumentError("image dimensions must be positive");
  }
  if (values_.size() != shape.size()) throw ArgumentError("image value count does not match shape");
}

void ImageTensor::clamp01() noexcept {
  for (auto& v : values_) v = std::clamp(v, 0.0f, 1.0f);
}

bool ImageTensor::in_unit_range() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

std::size_t count_differences(const ImageTensor& a, const ImageTensor& b) {
  if (a.shape() != b.shape()) throw ArgumentError("count_differences: shape mismatch");
  auto av = a.values();
  auto bv = b.values();
  std::size_t n = 0;
  for (std::size_t i = 0; i < av.size(); ++i) n += av[i] != bv[i] ? 1 : 0;
  return n;
}

}  // namespace nab
