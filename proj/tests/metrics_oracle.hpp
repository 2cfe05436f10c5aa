#pragma once

// Straight loop over (x, y) pairs computing the evaluation formulas, independent of the
// library's batching and counting code.

#include "nab/attack.hpp"
#include "nab/classifier.hpp"
#include "nab/dataset.hpp"
#include "nab/rng.hpp"
#include "nab/stamp.hpp"

namespace nab::testkit {

struct OracleMetrics {
  double asr = 0, ca = 0, ba = 0;
  double c_rej = 0, psr = 0, b_rej = 0, dsr = 0;
};

inline OracleMetrics oracle_metrics(const Classifier& f, const DatasetSplit& test, const TriggerSpec& trigger,
                                    const TargetMap& target_map, const StampSpec* stamp, bool filtered) {
  long asr_num = 0, asr_den = 0, ca_num = 0, ba_num = 0;
  long c_rej = 0, psr = 0, b_rej = 0, dsr = 0;
  const long n = static_cast<long>(test.size());
  for (const auto& ex : test) {
    const int y = ex.label;
    const int yt = target_map.apply(y, test.class_count());
    const ImageTensor x = ex.image;
    const ImageTensor px = apply_trigger(x, trigger, derive_seed(trigger.seed, ex.id));
    const int f_x = f.predict_one(x);
    const int f_px = f.predict_one(px);
    int in_x = f_x, in_px = f_px;
    if (stamp != nullptr) {
      in_x = f.predict_one(apply_stamp(x, *stamp));
      in_px = f.predict_one(apply_stamp(px, *stamp));
    }
    if (y != yt) {
      ++asr_den;
      if (in_px == yt) ++asr_num;
    }
    if (in_x == y) ++ca_num;
    if (in_px == y) ++ba_num;
    if (filtered) {
      const int f_sx = in_x, f_spx = in_px;
      if (f_sx != f_x) ++c_rej;
      if (f_sx == y && f_sx == f_x) ++psr;
      if (f_spx != f_px) ++b_rej;
      if (f_spx == y || f_spx != f_px) ++dsr;
    }
  }
  OracleMetrics m;
  m.asr = 100.0 * static_cast<double>(asr_num) / static_cast<double>(asr_den);
  m.ca = 100.0 * static_cast<double>(ca_num) / static_cast<double>(n);
  m.ba = 100.0 * static_cast<double>(ba_num) / static_cast<double>(n);
  m.c_rej = 100.0 * static_cast<double>(c_rej) / static_cast<double>(n);
  m.psr = 100.0 * static_cast<double>(psr) / static_cast<double>(n);
  m.b_rej = 100.0 * static_cast<double>(b_rej) / static_cast<double>(n);
  m.dsr = 100.0 * static_cast<double>(dsr) / static_cast<double>(n);
  return m;
}

}  // namespace nab::testkit
