#pragma once

#include <span>
#include <vector>

#include "nab/image.hpp"

namespace nab {

/// Anything that maps images to class indices. Prediction must be side-effect free.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual int class_count() const = 0;
  virtual std::vector<int> predict(std::span<const ImageTensor> images) const = 0;

  int predict_one(const ImageTensor& image) const { return predict(std::span(&image, 1)).front(); }
};

/// Classifier exposing input gradients of its cross-entropy loss (surrogate for clean-label crafting).
class DifferentiableClassifier : public Classifier {
 public:
  virtual bool is_trained() const = 0;
  /// Cross-entropy of `image` w.r.t. `label`; writes d loss / d image into `gradient`.
  virtual double loss_and_input_gradient(const ImageTensor& image, int label, ImageTensor& gradient) = 0;
};

}  // namespace nab
