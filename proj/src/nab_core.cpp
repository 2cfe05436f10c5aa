#include "nab/nab_core.hpp"

#include <sstream>

#include "nab/errors.hpp"

namespace nab {

NABDataset nab_transform(const DatasetSplit& dp, const DetectionReport& report, const PseudoLabelMap& labels,
                         const StampSpec& stamp) {
  std::vector<ExampleId> missing;
  for (auto id : report.suspected_ids) {
    if (!dp.contains(id)) throw ArgumentError("suspected id " + std::to_string(id) + " is not in the dataset");
    if (!labels.covers(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "pseudo labels do not cover " << missing.size() << " suspected ids:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg << ' ' << missing[i];
    if (missing.size() > 20) msg << " ...";
    throw ArgumentError(msg.str());
  }

  NABDataset out;
  std::vector<LabeledExample> examples;
  examples.reserve(dp.size());
  for (const auto& ex : dp) {
    if (!report.contains(ex.id)) {
      examples.push_back(ex);
      continue;
    }
    const int pseudo = labels.at(ex.id);
    if (pseudo < 0 || pseudo >= dp.class_count()) {
      throw ArgumentError("pseudo label " + std::to_string(pseudo) + " out of range for id " + std::to_string(ex.id));
    }
    if (pseudo == ex.label) {
      examples.push_back(ex);
      out.kept_detected_ids.push_back(ex.id);
      continue;
    }
    examples.push_back({ex.id, apply_stamp(ex.image, stamp), pseudo, Provenance::kDefenderStamped});
    out.stamped_ids.push_back(ex.id);
  }
  std::sort(out.stamped_ids.begin(), out.stamped_ids.end());
  std::sort(out.kept_detected_ids.begin(), out.kept_detected_ids.end());
  out.split = DatasetSplit(dp.name() + "-nab", dp.class_count(), std::move(examples));
  return out;
}

double stamp_rate(const NABDataset& nab) {
  if (nab.split.empty()) return 0.0;
  return static_cast<double>(nab.stamped_ids.size()) / static_cast<double>(nab.split.size());
}

}  // namespace nab
