#pragma once

// Line-by-line transcription of the poisoned-sample processing loop, used as an oracle.

#include <set>

#include "nab/dataset.hpp"
#include "nab/relabel.hpp"
#include "nab/stamp.hpp"

namespace nab::testkit {

inline std::vector<LabeledExample> oracle_nab(const DatasetSplit& dp, const std::set<ExampleId>& suspected,
                                              const std::map<ExampleId, int>& pseudo, const StampSpec& stamp) {
  std::vector<LabeledExample> out;
  for (const auto& ex : dp) {
    LabeledExample e = ex;
    if (suspected.count(ex.id) != 0) {
      const int r = pseudo.at(ex.id);
      if (r != ex.label) {
        for (int row = stamp.row; row < stamp.row + stamp.height; ++row)
          for (int col = stamp.col; col < stamp.col + stamp.width; ++col)
            for (int ch = 0; ch < e.image.channels(); ++ch) e.image.at(row, col, ch) = stamp.value;
        e.label = r;
        e.provenance = Provenance::kDefenderStamped;
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace nab::testkit
