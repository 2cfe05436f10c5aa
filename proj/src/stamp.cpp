#include "nab/stamp.hpp"

#include <algorithm>

#include "nab/errors.hpp"

namespace nab {

ImageTensor apply_stamp(const ImageTensor& image, const StampSpec& stamp) {
  if (!stamp.fits(image.shape())) {
    throw ArgumentError("stamp " + std::to_string(stamp.height) + "x" + std::to_string(stamp.width) + " at (" +
                        std::to_string(stamp.row) + "," + std::to_string(stamp.col) + ") exceeds a " +
                        std::to_string(image.height()) + "x" + std::to_string(image.width()) + " image");
  }
  if (stamp.value < 0.0f || stamp.value > 1.0f) throw ArgumentError("stamp value must be in [0, 1]");
  ImageTensor out = image;
  for (int r = stamp.row; r < stamp.row + stamp.height; ++r)
    for (int c = stamp.col; c < stamp.col + stamp.width; ++c)
      for (int ch = 0; ch < out.channels(); ++ch) out.at(r, c, ch) = stamp.value;
  return out;
}

std::vector<ImageTensor> stamp_batch(std::span<const ImageTensor> images, const StampSpec& stamp) {
  std::vector<ImageTensor> out;
  out.reserve(images.size());
  for (const auto& im : images) out.push_back(apply_stamp(im, stamp));
  return out;
}

bool stamp_overlaps_patch(const StampSpec& stamp, const ImageShape& shape, int patch_size) {
  const int pr = shape.height - patch_size, pc = shape.width - patch_size;
  const bool rows = stamp.row < pr + patch_size && pr < stamp.row + stamp.height;
  const bool cols = stamp.col < pc + patch_size && pc < stamp.col + stamp.width;
  return rows && cols;
}

}  // namespace nab
