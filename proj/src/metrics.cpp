#include "nab/metrics.hpp"

#include "nab/errors.hpp"
#include "nab/rng.hpp"

namespace nab {

std::string to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::kPlain: return "plain";
    case EvalMode::kDefended: return "defended";
    case EvalMode::kFiltered: return "filtered";
  }
  return "unknown";
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "plain") return EvalMode::kPlain;
  if (name == "defended") return EvalMode::kDefended;
  if (name == "filtered") return EvalMode::kFiltered;
  throw ArgumentError("unknown evaluation mode '" + name + "'");
}

namespace {

void require_sizes(std::size_t n, std::initializer_list<std::size_t> sizes) {
  if (n == 0) throw UndefinedMetricError("metrics over an empty test set");
  for (auto s : sizes) {
    if (s != n) throw ArgumentError("prediction vectors differ in length");
  }
}

double pct(std::size_t num, std::size_t den) { return 100.0 * static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

CoreMetrics core_metrics_from_predictions(std::span<const int> labels, std::span<const int> targets,
                                          std::span<const int> clean, std::span<const int> triggered) {
  const std::size_t n = labels.size();
  require_sizes(n, {targets.size(), clean.size(), triggered.size()});
  std::size_t attack_hits = 0, non_target = 0, clean_hits = 0, backdoor_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != targets[i]) {
      ++non_target;
      if (triggered[i] == targets[i]) ++attack_hits;
    }
    if (clean[i] == labels[i]) ++clean_hits;
    if (triggered[i] == labels[i]) ++backdoor_hits;
  }
  if (non_target == 0) throw UndefinedMetricError("ASR undefined: every test label equals its target");
  return {pct(attack_hits, non_target), pct(clean_hits, n), pct(backdoor_hits, n)};
}

FilterMetrics filter_metrics_from_predictions(std::span<const int> labels, std::span<const int> clean,
                                              std::span<const int> stamped_clean, std::span<const int> triggered,
                                              std::span<const int> stamped_triggered) {
  const std::size_t n = labels.size();
  require_sizes(n, {clean.size(), stamped_clean.size(), triggered.size(), stamped_triggered.size()});
  std::size_t c_rej = 0, psr = 0, b_rej = 0, dsr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool clean_rejected = stamped_clean[i] != clean[i];
    const bool poison_rejected = stamped_triggered[i] != triggered[i];
    if (clean_rejected) ++c_rej;
    if (stamped_clean[i] == labels[i] && !clean_rejected) ++psr;
    if (poison_rejected) ++b_rej;
    if (stamped_triggered[i] == labels[i] || poison_rejected) ++dsr;
  }
  return {pct(c_rej, n), pct(psr, n), pct(b_rej, n), pct(dsr, n)};
}

std::vector<ImageTensor> triggered_images(const DatasetSplit& test, const TriggerSpec& trigger) {
  std::vector<ImageTensor> out;
  out.reserve(test.size());
  for (const auto& ex : test) out.push_back(apply_trigger(ex.image, trigger, derive_seed(trigger.seed, ex.id)));
  return out;
}

namespace {

struct TestViews {
  std::vector<int> labels;
  std::vector<int> targets;
  std::vector<ImageTensor> clean;
  std::vector<ImageTensor> triggered;
};

TestViews make_views(const DatasetSplit& test, const TriggerSpec& trigger, const TargetMap& target_map) {
  if (test.empty()) throw UndefinedMetricError("metrics over an empty test set");
  TestViews v;
  for (const auto& ex : test) {
    v.labels.push_back(ex.label);
    v.targets.push_back(target_map.apply(ex.label, test.class_count()));
    v.clean.push_back(ex.image);
  }
  v.triggered = triggered_images(test, trigger);
  return v;
}

}  // namespace

MetricsReport compute_core_metrics(const Classifier& model, const DatasetSplit& test, const TriggerSpec& trigger,
                                   const TargetMap& target_map, const std::optional<StampSpec>& stamp) {
  auto v = make_views(test, trigger, target_map);
  if (stamp) {
    v.clean = stamp_batch(v.clean, *stamp);
    v.triggered = stamp_batch(v.triggered, *stamp);
  }
  const auto pc = model.predict(v.clean);
  const auto pt = model.predict(v.triggered);
  const auto m = core_metrics_from_predictions(v.labels, v.targets, pc, pt);
  MetricsReport r;
  r.asr = m.asr;
  r.ca = m.ca;
  r.ba = m.ba;
  r.mode = stamp ? EvalMode::kDefended : EvalMode::kPlain;
  return r;
}

MetricsReport compute_filter_metrics(const Classifier& model, const DatasetSplit& test, const TriggerSpec& trigger,
                                     const TargetMap& target_map, const StampSpec& stamp) {
  auto v = make_views(test, trigger, target_map);
  const auto f_x = model.predict(v.clean);
  const auto f_px = model.predict(v.triggered);
  const auto f_sx = model.predict(stamp_batch(v.clean, stamp));
  const auto f_spx = model.predict(stamp_batch(v.triggered, stamp));
  const auto core = core_metrics_from_predictions(v.labels, v.targets, f_sx, f_spx);
  const auto fm = filter_metrics_from_predictions(v.labels, f_x, f_sx, f_px, f_spx);
  MetricsReport r;
  r.asr = core.asr;
  r.ca = core.ca;
  r.ba = core.ba;
  r.c_rej = fm.c_rej;
  r.psr = fm.psr;
  r.b_rej = fm.b_rej;
  r.dsr = fm.dsr;
  r.mode = EvalMode::kFiltered;
  return r;
}

MetricsReport evaluate(const Classifier& model, const DatasetSplit& test, const TriggerSpec& trigger,
                       const TargetMap& target_map, const StampSpec& stamp, EvalMode mode) {
  switch (mode) {
    case EvalMode::kPlain: return compute_core_metrics(model, test, trigger, target_map, std::nullopt);
    case EvalMode::kDefended: return compute_core_metrics(model, test, trigger, target_map, stamp);
    case EvalMode::kFiltered: return compute_filter_metrics(model, test, trigger, target_map, stamp);
  }
  throw ArgumentError("unhandled evaluation mode");
}

std::optional<int> filter_inference(const Classifier& model, const ImageTensor& image, const StampSpec& stamp) {
  const ImageTensor batch[] = {image, apply_stamp(image, stamp)};
  const auto preds = model.predict(batch);
  if (preds[0] != preds[1]) return std::nullopt;
  return preds[0];
}

}  // namespace nab
