#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "nab/attack.hpp"
#include "nab/classifier.hpp"
#include "nab/container.hpp"
#include "nab/dataset.hpp"
#include "nab/rng.hpp"

namespace nab::testkit {

/// Random images of `shape` with labels cycling through the classes, ids 100, 101, ...
inline DatasetSplit random_split(std::size_t n, int classes, ImageShape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    ImageTensor img(shape);
    for (auto& v : img.values()) v = static_cast<float>(rng.uniform());
    out.push_back({100 + i, std::move(img), static_cast<int>(i % static_cast<std::size_t>(classes)), Provenance::kClean});
  }
  return DatasetSplit("random", classes, std::move(out));
}

/// Images filled with a per-class constant plus small noise; trivially separable.
inline DatasetSplit constant_split(std::size_t n, int classes, ImageShape shape, std::uint64_t seed,
                                   double noise = 0.02) {
  Rng rng(seed);
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
    const double base = 0.15 + 0.7 * label / std::max(1, classes - 1);
    ImageTensor img(shape);
    for (auto& v : img.values()) v = static_cast<float>(std::clamp(base + noise * rng.normal(), 0.0, 1.0));
    out.push_back({i, std::move(img), label, Provenance::kClean});
  }
  return DatasetSplit("constant", classes, std::move(out));
}

/// Label encoded in pixel (h/2, 0, 0) so a fixture classifier can "know" the truth.
inline float encode_label(int label, int classes) {
  return static_cast<float>(0.05 + 0.9 * label / std::max(1, classes - 1));
}

inline int decode_label(const ImageTensor& im, int classes) {
  const double v = (im.at(im.height() / 2, 0, 0) - 0.05) / 0.9 * std::max(1, classes - 1);
  return std::clamp(static_cast<int>(v + 0.5), 0, classes - 1);
}

/// Random-labelled split whose images carry their label (see encode_label).
inline DatasetSplit labelled_noise_split(std::size_t n, int classes, ImageShape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
    ImageTensor img(shape);
    for (auto& v : img.values()) v = static_cast<float>(0.02 + 0.96 * rng.uniform());
    img.at(shape.height / 2, 0, 0) = encode_label(label, classes);
    out.push_back({i, std::move(img), label, Provenance::kClean});
  }
  return DatasetSplit("fixture", classes, std::move(out));
}

/// Deterministic pseudo-random classifier over images of labelled_noise_split. A patch
/// (exact 0/1 bottom-right pixel) pulls toward the target, a zero top-left pixel toward the
/// encoded label; everything else is hashed.
class HashClassifier : public Classifier {
 public:
  HashClassifier(int classes, TargetMap target, std::uint64_t salt, double p_correct, double p_attack,
                 double p_stamp_fix)
      : classes_(classes), target_(target), salt_(salt), p_correct_(p_correct), p_attack_(p_attack),
        p_stamp_fix_(p_stamp_fix) {}

  int class_count() const override { return classes_; }

  std::vector<int> predict(std::span<const ImageTensor> images) const override {
    std::vector<int> out;
    out.reserve(images.size());
    for (const auto& im : images) out.push_back(one(im));
    return out;
  }

 private:
  int one(const ImageTensor& im) const {
    const auto bytes = reinterpret_cast<const std::uint8_t*>(im.values().data());
    const std::uint64_t h = mix64(fnv1a64(bytes, im.values().size() * sizeof(float)) ^ salt_);
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    const int y = decode_label(im, classes_);
    const float corner = im.at(im.height() - 1, im.width() - 1, 0);
    const bool triggered = corner == 0.0f || corner == 1.0f;
    const bool stamped = im.at(0, 0, 0) == 0.0f;
    if (stamped && u < p_stamp_fix_) return y;
    if (triggered && u < p_attack_) return target_.apply(y, classes_);
    if (u < p_correct_) return y;
    return static_cast<int>((h >> 7) % static_cast<std::uint64_t>(classes_));
  }

  int classes_;
  TargetMap target_;
  std::uint64_t salt_;
  double p_correct_, p_attack_, p_stamp_fix_;
};

}  // namespace nab::testkit
