#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "metrics_oracle.hpp"
#include "nab/errors.hpp"
#include "nab/metrics.hpp"

using namespace nab;

namespace {

class ConstantClassifier : public Classifier {
 public:
  ConstantClassifier(int k, int c) : k_(k), c_(c) {}
  int class_count() const override { return k_; }
  std::vector<int> predict(std::span<const ImageTensor> images) const override {
    return std::vector<int>(images.size(), c_);
  }

 private:
  int k_, c_;
};

// Flips to the next class whenever the default stamp is present.
class StampFlipClassifier : public Classifier {
 public:
  int class_count() const override { return 2; }
  std::vector<int> predict(std::span<const ImageTensor> images) const override {
    std::vector<int> out;
    for (const auto& im : images) out.push_back(im.at(0, 0, 0) == 0.0f ? 1 : 0);
    return out;
  }
};

}  // namespace

TEST(CoreMetrics, HandWorkedTenSamples) {
  const std::vector<int> labels{0, 1, 2, 3, 1, 2, 3, 0, 1, 2};
  const std::vector<int> targets(10, 0);
  const std::vector<int> clean{0, 1, 2, 0, 1, 1, 3, 0, 1, 2};
  const std::vector<int> trig{0, 0, 0, 3, 1, 0, 0, 0, 2, 2};
  const auto m = core_metrics_from_predictions(labels, targets, clean, trig);
  EXPECT_DOUBLE_EQ(m.ca, 80.0);
  EXPECT_DOUBLE_EQ(m.asr, 50.0);
  EXPECT_DOUBLE_EQ(m.ba, 50.0);
}

TEST(FilterMetrics, HandWorkedEightSamples) {
  const std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
  const std::vector<int> fx{0, 1, 2, 3, 1, 1, 0, 3};
  const std::vector<int> fsx{0, 1, 2, 2, 1, 0, 0, 3};
  const std::vector<int> fpx{0, 0, 0, 0, 0, 0, 2, 0};
  const std::vector<int> fspx{0, 1, 0, 3, 0, 1, 2, 0};
  const auto m = filter_metrics_from_predictions(labels, fx, fsx, fpx, fspx);
  EXPECT_DOUBLE_EQ(m.c_rej, 25.0);
  EXPECT_DOUBLE_EQ(m.psr, 50.0);
  EXPECT_DOUBLE_EQ(m.b_rej, 37.5);
  EXPECT_DOUBLE_EQ(m.dsr, 75.0);
}

TEST(CoreMetrics, EmptyAndDegenerateInputs) {
  const std::vector<int> none;
  EXPECT_THROW(core_metrics_from_predictions(none, none, none, none), UndefinedMetricError);
  EXPECT_THROW(filter_metrics_from_predictions(none, none, none, none, none), UndefinedMetricError);
  const std::vector<int> zeros(3, 0);
  EXPECT_THROW(core_metrics_from_predictions(zeros, zeros, zeros, zeros), UndefinedMetricError);
  const std::vector<int> two(2, 1);
  EXPECT_THROW(core_metrics_from_predictions(zeros, zeros, two, zeros), ArgumentError);
  const DatasetSplit empty;
  EXPECT_THROW(compute_core_metrics(ConstantClassifier(2, 0), empty, {}, {}, std::nullopt), UndefinedMetricError);
}

TEST(CoreMetrics, ConstantTargetClassifier) {
  const auto test = testkit::random_split(40, 4, {8, 8, 1}, 1);
  const auto r = compute_core_metrics(ConstantClassifier(4, 0), test, {}, {}, std::nullopt);
  EXPECT_DOUBLE_EQ(r.asr, 100.0);
  EXPECT_DOUBLE_EQ(r.ca, 25.0);
  EXPECT_EQ(r.mode, EvalMode::kPlain);
}

TEST(FilterInference, ConstantNeverRejectsFlipAlwaysRejects) {
  const ImageTensor im({4, 4, 3}, 0.5f);
  EXPECT_EQ(filter_inference(ConstantClassifier(3, 2), im, StampSpec{}), std::optional<int>(2));
  EXPECT_EQ(filter_inference(StampFlipClassifier(), im, StampSpec{}), std::nullopt);
}

TEST(FilterMetrics, StampInvariantModelOnNoOpStamp) {
  // Stamp value equals the constant pixel value, so S(x) = x.
  std::vector<LabeledExample> ex;
  for (int i = 0; i < 10; ++i) ex.push_back({static_cast<ExampleId>(i), ImageTensor({8, 8, 1}, 0.5f), i % 2, Provenance::kClean});
  const DatasetSplit test("c", 2, ex);
  StampSpec noop;
  noop.value = 0.5f;
  const auto r = compute_filter_metrics(ConstantClassifier(2, 1), test, {}, {TargetMode::kAllToOne, 0}, noop);
  EXPECT_DOUBLE_EQ(*r.c_rej, 0.0);
  EXPECT_DOUBLE_EQ(*r.psr, r.ca);
}

TEST(FilterMetrics, RejectingEveryPoisonedInput) {
  const auto test = testkit::random_split(20, 2, {8, 8, 1}, 2);
  const auto r = compute_filter_metrics(StampFlipClassifier(), test, {}, {}, StampSpec{});
  EXPECT_DOUBLE_EQ(*r.b_rej, 100.0);
  EXPECT_DOUBLE_EQ(*r.dsr, 100.0);
}

TEST(Metrics, MatchBruteForceOnRandomFixturesAndSatisfyIdentities) {
  Rng gen(2024);
  for (int trial = 0; trial < 150; ++trial) {
    const int k = static_cast<int>(2 + gen.uniform_index(9));
    const auto n = static_cast<std::size_t>(8 + gen.uniform_index(57));
    const auto test = testkit::labelled_noise_split(n, k, {8, 8, 1}, gen.next_u64());
    TargetMap tm{gen.bernoulli(0.3) ? TargetMode::kAllToAll : TargetMode::kAllToOne,
                 static_cast<int>(gen.uniform_index(static_cast<std::uint64_t>(k)))};
    bool has_non_target = false;
    for (const auto& e : test) has_non_target |= tm.apply(e.label, k) != e.label;
    if (!has_non_target) continue;
    TriggerSpec trig;
    trig.seed = gen.next_u64();
    const testkit::HashClassifier f(k, tm, gen.next_u64(), gen.uniform(), gen.uniform(), gen.uniform());
    const StampSpec st{};

    const auto plain = evaluate(f, test, trig, tm, st, EvalMode::kPlain);
    const auto op = testkit::oracle_metrics(f, test, trig, tm, nullptr, false);
    EXPECT_EQ(plain.asr, op.asr);
    EXPECT_EQ(plain.ca, op.ca);
    EXPECT_EQ(plain.ba, op.ba);

    const auto filt = evaluate(f, test, trig, tm, st, EvalMode::kFiltered);
    const auto of = testkit::oracle_metrics(f, test, trig, tm, &st, true);
    EXPECT_EQ(filt.asr, of.asr);
    EXPECT_EQ(filt.ca, of.ca);
    EXPECT_EQ(*filt.c_rej, of.c_rej);
    EXPECT_EQ(*filt.psr, of.psr);
    EXPECT_EQ(*filt.b_rej, of.b_rej);
    EXPECT_EQ(*filt.dsr, of.dsr);

    EXPECT_LE(*filt.psr, 100.0 - *filt.c_rej + 1e-9);
    EXPECT_GE(*filt.dsr, *filt.b_rej);
    EXPECT_GE(*filt.dsr, filt.ba);
  }
}

TEST(EvalMode, Names) {
  for (auto m : {EvalMode::kPlain, EvalMode::kDefended, EvalMode::kFiltered})
    EXPECT_EQ(parse_eval_mode(to_string(m)), m);
  EXPECT_THROW(parse_eval_mode("soft"), ArgumentError);
}
