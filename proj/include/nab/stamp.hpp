#pragma once

#include <span>
#include <vector>

#include "nab/image.hpp"

namespace nab {

/// The defender's stamp S: a constant rectangle, 2x2 zeros in the upper-left corner by default.
struct StampSpec {
  int height = 2;
  int width = 2;
  int row = 0;
  int col = 0;
  float value = 0.0f;

  bool fits(const ImageShape& shape) const noexcept {
    return height > 0 && width > 0 && row >= 0 && col >= 0 && row + height <= shape.height &&
           col + width <= shape.width;
  }
  bool operator==(const StampSpec&) const = default;
};

/// Overwrites the stamp region; idempotent. Throws ArgumentError when the stamp does not fit.
ImageTensor apply_stamp(const ImageTensor& image, const StampSpec& stamp);

std::vector<ImageTensor> stamp_batch(std::span<const ImageTensor> images, const StampSpec& stamp);

/// True when the stamp rectangle intersects the bottom-right `patch_size` square of `shape`.
bool stamp_overlaps_patch(const StampSpec& stamp, const ImageShape& shape, int patch_size);

}  // namespace nab
