#include "nab/relabel.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "nab/errors.hpp"
#include "nab/rng.hpp"

namespace nab {

int PseudoLabelMap::at(ExampleId id) const {
  auto it = assignments.find(id);
  if (it == assignments.end()) throw ArgumentError("pseudo label map does not cover id " + std::to_string(id));
  return it->second;
}

int ClassCenters::nearest(const Eigen::VectorXd& f) const {
  if (centers.empty()) throw StateError("no class centers to assign to");
  int best = -1;
  double best_d = 0.0;
  for (const auto& [cls, c] : centers) {
    const double d = (f - c).squaredNorm();
    if (best < 0 || d < best_d) {
      best = cls;
      best_d = d;
    }
  }
  return best;
}

ClassCenters compute_class_centers(const FeatureMatrix& features, std::span<const ExampleId> excluded) {
  const std::set<ExampleId> skip(excluded.begin(), excluded.end());
  std::vector<std::size_t> order(features.ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return features.ids[a] < features.ids[b]; });
  ClassCenters out;
  for (auto i : order) {
    if (skip.contains(features.ids[i])) continue;
    const int label = features.labels[i];
    auto [it, fresh] = out.centers.try_emplace(label, Eigen::VectorXd::Zero(features.values.cols()));
    it->second += features.values.row(static_cast<Eigen::Index>(i)).transpose();
    ++out.source_count[label];
  }
  for (auto& [cls, c] : out.centers) c /= static_cast<double>(out.source_count[cls]);
  return out;
}

PseudoLabelMap vd_pseudo_labels(const DatasetSplit& verified, const DatasetSplit& targets,
                                const TrainConfig& train_config, std::uint64_t seed) {
  if (verified.empty()) throw ArgumentError("VD relabeling needs a non-empty verified set");
  if (verified.class_count() != targets.class_count()) {
    throw ArgumentError("verified and target splits have different label spaces");
  }
  TrainConfig cfg = train_config;
  cfg.seed = seed;
  const TrainResult trained = train(verified, cfg);
  const auto counts = verified.class_counts();

  PseudoLabelMap map;
  map.method = "VD";
  std::string absent;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0) absent += (absent.empty() ? "" : ",") + std::to_string(c);
  if (!absent.empty()) map.metadata["absent_classes"] = absent;

  const auto k = targets.class_count();
  for (std::size_t start = 0; start < targets.size(); start += nn::kInferenceBatch) {
    const auto count = std::min(nn::kInferenceBatch, targets.size() - start);
    std::vector<const ImageTensor*> batch;
    for (std::size_t i = start; i < start + count; ++i) batch.push_back(&targets[i].image);
    const nn::Tensor logits = trained.model.logits(nn::to_batch(batch));
    for (std::size_t i = 0; i < count; ++i) {
      int best = -1;
      float best_v = 0.0f;
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) continue;
        const float v = logits.data[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)];
        if (best < 0 || v > best_v) {
          best = c;
          best_v = v;
        }
      }
      map.assignments[targets[start + i].id] = best;
    }
  }
  map.coverage = targets.ids();
  std::sort(map.coverage.begin(), map.coverage.end());
  return map;
}

PseudoLabelMap nc_pseudo_labels(const FeatureMatrix& features, std::span<const ExampleId> removed) {
  const ClassCenters centers = compute_class_centers(features, removed);
  PseudoLabelMap map;
  map.method = "NC";
  std::set<int> labels(features.labels.begin(), features.labels.end());
  std::string missing;
  for (int c : labels)
    if (!centers.centers.contains(c)) missing += (missing.empty() ? "" : ",") + std::to_string(c);
  if (!missing.empty()) map.metadata["classes_without_center"] = missing;
  map.metadata["center_examples"] = std::to_string(features.ids.size() - removed.size());
  for (std::size_t i = 0; i < features.ids.size(); ++i) {
    map.assignments[features.ids[i]] = centers.nearest(features.values.row(static_cast<Eigen::Index>(i)).transpose());
  }
  map.coverage = features.ids;
  std::sort(map.coverage.begin(), map.coverage.end());
  return map;
}

PseudoLabelMap nc_pseudo_labels(const DatasetSplit& dp, const FeatureExtractor& extractor, double removal_rate,
                                const Detector* detector, std::uint64_t seed) {
  if (!(removal_rate >= 0.0 && removal_rate < 1.0)) throw ArgumentError("removal rate must lie in [0, 1)");
  std::vector<ExampleId> removed;
  std::string detector_name = "none";
  if (removal_rate > 0.0) {
    if (detector == nullptr) throw ArgumentError("NC relabeling with a removal rate needs a detector");
    removed = detector->detect(dp, removal_rate).suspected_ids;
    detector_name = detector->name();
  }
  PseudoLabelMap map = nc_pseudo_labels(extract_features(extractor, dp), removed);
  map.metadata["removal_detector"] = detector_name;
  map.metadata["removal_rate"] = std::to_string(removal_rate);
  map.metadata["seed"] = std::to_string(seed);
  return map;
}

PseudoLabelMap synthetic_pseudo_labels(const DatasetSplit& dp, const PoisonManifest* manifest,
                                       std::span<const ExampleId> coverage, double pla, std::uint64_t seed) {
  if (!(pla >= 0.0 && pla <= 1.0)) throw ArgumentError("pseudo label accuracy must lie in [0, 1]");
  const int k = dp.class_count();
  std::vector<ExampleId> ids(coverage.begin(), coverage.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::size_t flips = round_count(1.0 - pla, ids.size());
  if (flips > 0 && k < 2) throw ArgumentError("cannot flip labels with a single class");
  const auto flipped = select_by_hash(ids, flips, derive_seed(seed, 1));

  PseudoLabelMap map;
  map.method = "synthetic";
  for (auto id : ids) {
    const int truth = true_label(dp, manifest, id);
    int label = truth;
    if (std::binary_search(flipped.begin(), flipped.end(), id)) {
      Rng rng(derive_seed(seed, 2, id));
      label = (truth + 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k - 1)))) % k;
    }
    map.assignments[id] = label;
  }
  map.coverage = std::move(ids);
  map.metadata["pla"] = std::to_string(pla);
  return map;
}

double pseudo_label_accuracy(const PseudoLabelMap& map, const DatasetSplit& truth, const PoisonManifest* manifest,
                             std::span<const ExampleId> coverage) {
  if (coverage.empty()) throw UndefinedMetricError("pseudo label accuracy over an empty coverage set");
  std::size_t correct = 0;
  for (auto id : coverage) correct += map.at(id) == true_label(truth, manifest, id) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(coverage.size());
}

}  // namespace nab
