#pragma once

#include <vector>

#include "nab/dataset.hpp"
#include "nab/detection.hpp"
#include "nab/relabel.hpp"
#include "nab/stamp.hpp"

namespace nab {

/// D_p' together with the bookkeeping of which detected examples were stamped.
struct NABDataset {
  DatasetSplit split;
  std::vector<ExampleId> stamped_ids;        // ascending
  std::vector<ExampleId> kept_detected_ids;  // ascending; detected with r(x) = y
};

/// For every detected (x, y) with r(x) != y, replaces it by (S(x), r(x)) marked as stamped;
/// everything else is copied. Throws ArgumentError listing suspected ids the map does not cover.
NABDataset nab_transform(const DatasetSplit& dp, const DetectionReport& report, const PseudoLabelMap& labels,
                         const StampSpec& stamp);

/// |stamped| / N (0 for an empty split).
double stamp_rate(const NABDataset& nab);

}  // namespace nab
