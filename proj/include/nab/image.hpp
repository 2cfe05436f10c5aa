#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nab {

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  bool operator==(const ImageShape&) const = default;
};

/// Channel-last image with values in [0, 1].
class ImageTensor {
 public:
  ImageTensor() = default;
  explicit ImageTensor(ImageShape shape, float fill = 0.0f);
  ImageTensor(ImageShape shape, std::vector<float> values);

  const ImageShape& shape() const noexcept { return shape_; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  int channels() const noexcept { return shape_.channels; }

  float& at(int row, int col, int ch) noexcept { return values_[index(row, col, ch)]; }
  float at(int row, int col, int ch) const noexcept { return values_[index(row, col, ch)]; }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  /// Clamps every value into [0, 1] in place.
  void clamp01() noexcept;
  bool in_unit_range() const noexcept;

  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_.width) +
            static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(shape_.channels) +
           static_cast<std::size_t>(ch);
  }

  ImageShape shape_;
  std::vector<float> values_;
};

/// Number of positions where the two images differ (shapes must match).
std::size_t count_differences(const ImageTensor& a, const ImageTensor& b);

}  // namespace nab
