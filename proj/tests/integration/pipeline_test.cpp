#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "nab/config.hpp"
#include "nab/container.hpp"
#include "nab/errors.hpp"
#include "nab/experiment.hpp"

using namespace nab;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.dataset.train_size = 120;
  c.dataset.test_size = 40;
  c.dataset.image_size = 16;
  c.attack.lambda = 0.1;
  c.defense.detector.name = "oracle";
  c.defense.detector.mu = 0.1;
  c.defense.relabeler.name = "synthetic";
  c.defense.relabeler.verified_fraction = 0.1;
  c.defense.relabeler.feature_epochs = 1;
  c.defense.relabeler.verified_epochs = 2;
  c.defense.detector.isolation_epochs = 1;
  c.training.epochs = 1;
  c.training.batch_size = 16;
  c.output.formats = {"json", "csv", "svg", "txt"};
  apply_seed(c, 3);
  return c;
}

fs::path fresh(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("nab_experiment_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::uint8_t> bytes_of(const DatasetSplit& s) { return encode_split({s, std::nullopt, std::nullopt}); }

}  // namespace

TEST(Prepare, VerifiedComesFromTheCleanTrainingSet) {
  const auto data = prepare_data(tiny());
  EXPECT_EQ(data.clean_train.size(), 120u);
  EXPECT_EQ(data.poisoned_train.size(), 120u);
  EXPECT_EQ(data.test.size(), 40u);
  EXPECT_EQ(data.manifest.poisoned_ids.size(), 12u);
  EXPECT_EQ(data.verified.size(), 12u);
  for (const auto& e : data.verified) {
    ASSERT_TRUE(data.clean_train.contains(e.id));
    EXPECT_EQ(data.clean_train.by_id(e.id), e);
  }
}

TEST(Prepare, DeterministicPoisonedBytes) {
  const auto a = prepare_data(tiny());
  const auto b = prepare_data(tiny());
  EXPECT_EQ(bytes_of(a.poisoned_train), bytes_of(b.poisoned_train));
  EXPECT_EQ(a.manifest, b.manifest);
}

TEST(Prepare, AttackDisabledLeavesDataClean) {
  auto c = tiny();
  c.attack.enabled = false;
  c.defense.enabled = false;
  const auto d = prepare_data(c);
  EXPECT_TRUE(d.manifest.poisoned_ids.empty());
  EXPECT_EQ(d.poisoned_train.examples(), d.clean_train.examples());
}

TEST(Run, WritesArtifactsAndRefusesToOverwrite) {
  const auto out = fresh("run");
  RunOptions o;
  o.out = out;
  const auto r = run_experiment(tiny(), o);
  const auto dir = out / r.config_hash;
  for (const char* f : {"config.json", "metrics.json", "per_epoch.csv", "detection.json", "pseudo_labels.json",
                        "train_poisoned.nabsplit", "train_defended.nabsplit", "model.ckpt", "summary.txt",
                        "asr_ca.svg"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(load_config(dir / "config.json"), tiny());
  EXPECT_THROW(run_experiment(tiny(), o), Error);
  o.force = true;
  EXPECT_NO_THROW(run_experiment(tiny(), o));

  ASSERT_TRUE(r.defense);
  EXPECT_EQ(r.defense->report.size(), 12u);
  EXPECT_DOUBLE_EQ(*r.defense->detection_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(*r.defense->pseudo_label_accuracy, 1.0);
  EXPECT_EQ(r.metrics.size(), 3u);
  EXPECT_EQ(r.primary().mode, EvalMode::kDefended);
  EXPECT_EQ(r.per_epoch.size(), 1u);

  const auto poisoned = load_split(dir / "train_poisoned.nabsplit");
  EXPECT_EQ(bytes_of(poisoned.split), bytes_of(prepare_data(tiny()).poisoned_train));
}

TEST(Run, SharedDataMatchesFreshPreparation) {
  const auto c = tiny();
  const auto data = prepare_data(c);
  const auto a = run_experiment(c, {}, &data);
  const auto b = run_experiment(c);
  EXPECT_EQ(a.metrics, b.metrics);
  EXPECT_EQ(a.per_epoch, b.per_epoch);
}

TEST(Run, RealComponentsRunEndToEnd) {
  for (const char* det : {"lga", "ln", "spectre"}) {
    auto c = tiny();
    c.defense.detector.name = det;
    c.defense.relabeler.name = "nc";
    const auto r = run_experiment(c);
    ASSERT_TRUE(r.defense) << det;
    EXPECT_EQ(r.defense->report.size(), 12u) << det;
    EXPECT_EQ(r.defense->labels.method, "NC");
  }
  auto c = tiny();
  c.defense.detector.name = "lga";
  c.defense.relabeler.name = "vd";
  c.defense.relabeler.feature_recipe = "contrastive";
  EXPECT_EQ(run_experiment(c).defense->labels.method, "VD");
}

TEST(Run, StageErrorsNameTheStage) {
  auto c = tiny();
  c.defense.detector.name = "lga";
  c.defense.detector.mu = 0.001;  // selects nothing out of 120
  try {
    run_experiment(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "detect");
  }
}

TEST(Run, NoDefenseEvaluatesPlainOnly) {
  auto c = tiny();
  c.defense.enabled = false;
  c.evaluation.modes = {EvalMode::kPlain};
  const auto r = run_experiment(c);
  EXPECT_FALSE(r.defense);
  EXPECT_EQ(r.primary().mode, EvalMode::kPlain);
}

TEST(Sweep, DaPlaMarksInfeasibleCells) {
  auto c = tiny();
  c.defense.detector.mu = 0.2;  // 24 suspects, only 12 poisoned
  const auto out = fresh("sweep");
  RunOptions o;
  o.out = out;
  const auto s = sweep_da_pla(c, {0.5, 1.0}, {1.0}, o);
  ASSERT_EQ(s.cells.size(), 2u);
  EXPECT_EQ(s.at(0, 0).status, "ok");
  ASSERT_TRUE(s.at(0, 0).outcome);
  EXPECT_DOUBLE_EQ(*s.at(0, 0).outcome->defense->detection_accuracy, 0.5);
  EXPECT_EQ(s.at(1, 0).status, "infeasible");
  EXPECT_FALSE(s.at(1, 0).outcome);
  bool found = false;
  for (const auto& e : fs::directory_iterator(out)) {
    if (e.path().filename().string().rfind("sweep-da-pla-", 0) == 0) {
      found = true;
      EXPECT_TRUE(fs::exists(e.path() / "sweep.json"));
      EXPECT_TRUE(fs::exists(e.path() / "asr.csv"));
    }
  }
  EXPECT_TRUE(found);
  EXPECT_FALSE(oracle_feasible(120, 12, 0.2, 1.0));
  EXPECT_TRUE(oracle_feasible(120, 12, 0.1, 1.0));
}

TEST(Sweep, MuZeroDisablesTheDefense) {
  const auto s = sweep_mu_lambda(tiny(), {0.0, 0.1}, {0.1});
  ASSERT_EQ(s.cells.size(), 2u);
  EXPECT_FALSE(s.at(0, 0).outcome->defense);
  EXPECT_TRUE(s.at(1, 0).outcome->defense);
}

TEST(Vaccinate, ProducesPairedRuns) {
  auto c = tiny();
  c.attack.trigger.kind = TriggerKind::kBlend;
  const auto out = fresh("vaccinate");
  RunOptions o;
  o.out = out;
  const auto v = vaccinate(c, 1, o);
  EXPECT_FALSE(v.vaccinated.stamped_ids.empty());
  EXPECT_EQ(v.with_vaccine.per_epoch.size(), 1u);
  EXPECT_EQ(v.without_vaccine.per_epoch.size(), 1u);
  EXPECT_EQ(v.traced_trigger.kind, TriggerKind::kBlend);
  EXPECT_THROW(vaccinate(c, 9, {}), ArgumentError);
}

TEST(MakeDataset, WritesContainersOnce) {
  const auto dir = fresh("make");
  const auto files = make_dataset(tiny(), dir, false);
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f)) << f;
  const auto poisoned = load_split(dir / "train_poisoned.nabsplit");
  ASSERT_TRUE(poisoned.manifest);
  EXPECT_EQ(poisoned.manifest->poisoned_ids.size(), 12u);
  EXPECT_THROW(make_dataset(tiny(), dir, false), Error);
  EXPECT_NO_THROW(make_dataset(tiny(), dir, true));
}
