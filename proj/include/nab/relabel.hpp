#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nab/dataset.hpp"
#include "nab/detection.hpp"
#include "nab/features.hpp"
#include "nab/train.hpp"

namespace nab {

/// Pseudo labels r(x) for the ids in `coverage`.
struct PseudoLabelMap {
  std::map<ExampleId, int> assignments;
  std::string method;
  std::vector<ExampleId> coverage;  // ascending
  std::map<std::string, std::string> metadata;

  bool covers(ExampleId id) const { return assignments.contains(id); }
  int at(ExampleId id) const;
  bool operator==(const PseudoLabelMap&) const = default;
};

struct ClassCenters {
  std::map<int, Eigen::VectorXd> centers;
  std::map<int, std::size_t> source_count;

  /// argmin_i ||f - c_i||, ties to the lowest class. Throws StateError when there are no centers.
  int nearest(const Eigen::VectorXd& f) const;
};

/// Mean feature per label over the rows whose id is not in `excluded` (summed in ascending id order).
ClassCenters compute_class_centers(const FeatureMatrix& features, std::span<const ExampleId> excluded = {});

/// Classifier trained on `verified` only; its argmax over every example of `targets`.
/// Classes absent from `verified` are never assigned (noted in metadata).
PseudoLabelMap vd_pseudo_labels(const DatasetSplit& verified, const DatasetSplit& targets,
                                const TrainConfig& train_config, std::uint64_t seed);

/// Nearest class center with the removed ids excluded from the centers; every row is assigned.
PseudoLabelMap nc_pseudo_labels(const FeatureMatrix& features, std::span<const ExampleId> removed);

/// Runs `detector` at `removal_rate` (skipped at 0) to obtain the removal set, then assigns
/// nearest centers on the extractor's features.
PseudoLabelMap nc_pseudo_labels(const DatasetSplit& dp, const FeatureExtractor& extractor, double removal_rate,
                                const Detector* detector, std::uint64_t seed);

/// True labels on `coverage`, with a seeded round((1 - pla) * |coverage|) subset moved to a
/// uniformly random different class. Truth comes from the manifest for poisoned ids.
PseudoLabelMap synthetic_pseudo_labels(const DatasetSplit& dp, const PoisonManifest* manifest,
                                       std::span<const ExampleId> coverage, double pla, std::uint64_t seed);

/// Fraction of `coverage` whose assignment equals the true (pre-poisoning) label.
/// Throws UndefinedMetricError on empty coverage, ArgumentError on ids the map does not cover.
double pseudo_label_accuracy(const PseudoLabelMap& map, const DatasetSplit& truth, const PoisonManifest* manifest,
                             std::span<const ExampleId> coverage);

}  // namespace nab
