#include <gtest/gtest.h>

#include <filesystem>

#include "nab/config.hpp"
#include "nab/errors.hpp"
#include "nab/rng.hpp"

using namespace nab;

namespace {

ExperimentConfig random_config(Rng& g) {
  ExperimentConfig c;
  const auto pick = [&](std::initializer_list<const char*> xs) {
    return std::string(*(xs.begin() + g.uniform_index(xs.size())));
  };
  c.dataset.name = pick({"synthetic", "cifar10"});
  c.dataset.root = g.bernoulli(0.5) ? "" : "/data/x" + std::to_string(g.uniform_index(100));
  c.dataset.subsample = g.uniform(0.01, 1.0);
  c.dataset.train_size = static_cast<int>(10 + g.uniform_index(5000));
  c.dataset.class_count = static_cast<int>(2 + g.uniform_index(9));
  c.attack.enabled = g.bernoulli(0.8);
  c.attack.trigger.kind = static_cast<TriggerKind>(g.uniform_index(4));
  c.attack.trigger.patch.size = static_cast<int>(1 + g.uniform_index(5));
  c.attack.trigger.blend.alpha = g.uniform(0.01, 0.99);
  c.attack.trigger.blend.pattern_path = g.bernoulli(0.3) ? "pattern.ppm" : "";
  c.attack.trigger.warp.grid = static_cast<int>(2 + g.uniform_index(6));
  c.attack.trigger.warp.strength = g.uniform(0.0, 2.0);
  c.attack.trigger.clean_label.epsilon = g.uniform(0.0, 0.3);
  c.attack.target.mode = g.bernoulli(0.5) ? TargetMode::kAllToAll : TargetMode::kAllToOne;
  c.attack.target.target_class = static_cast<int>(g.uniform_index(2));
  c.attack.lambda = g.uniform(0.0, 0.5);
  c.defense.enabled = g.bernoulli(0.7);
  c.defense.detector.name = pick({"lga", "ln", "spectre", "oracle"});
  c.defense.detector.mu = g.uniform(0.0, 0.5);
  c.defense.detector.da = g.uniform();
  c.defense.detector.sce.alpha = g.uniform(0.01, 2.0);
  c.defense.relabeler.name = pick({"vd", "nc", "synthetic"});
  c.defense.relabeler.feature_recipe = pick({"contrastive", "verified-supervised"});
  c.defense.relabeler.pla = g.uniform();
  c.defense.relabeler.verified_epochs = 1 + static_cast<int>(g.uniform_index(300));
  c.defense.stamp.row = static_cast<int>(g.uniform_index(4));
  c.defense.stamp.value = static_cast<float>(g.uniform());
  c.defense.restamp_after_augment = g.bernoulli(0.5);
  c.training.architecture = pick({"small-cnn", "resnet-18", "resnet-50"});
  c.training.learning_rate = g.uniform(0.001, 0.5);
  c.training.schedule = pick({"cosine", "constant"});
  c.training.augment.enabled = g.bernoulli(0.5);
  c.training.augment.padding_mode = pick({"reflect", "zero"});
  c.evaluation.modes = {EvalMode::kFiltered};
  c.evaluation.probe_each_epoch = g.bernoulli(0.5);
  c.sweep.da_grid = {g.uniform(), g.uniform()};
  c.sweep.mu_grid = {0.0, g.uniform(0.0, 0.9)};
  c.vaccination.trigger.kind = static_cast<TriggerKind>(g.uniform_index(3));
  c.vaccination.processed_fraction = g.uniform();
  c.output.directory = "out" + std::to_string(g.uniform_index(10));
  c.output.formats = {"json", "svg"};
  apply_seed(c, g.next_u64());
  return c;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  EXPECT_EQ(parse_config(render_config(c)), c);
  EXPECT_EQ(parse_config(Json::object()), c);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RandomConfigsRoundTripThroughText) {
  Rng g(12);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_config(g);
    const auto text = render_config(c).dump();
    const auto back = parse_config(Json::parse(text));
    EXPECT_EQ(back, c) << text;
    EXPECT_EQ(render_config(back).dump(), text);
    EXPECT_EQ(config_hash(back), config_hash(c));
  }
}

TEST(Config, FileRoundTrip) {
  Rng g(3);
  const auto c = random_config(g);
  const auto p = std::filesystem::temp_directory_path() / "nab_config_test.json";
  save_config(p, c);
  EXPECT_EQ(load_config(p), c);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, UnknownKeysAreRejectedWithTheirPath) {
  try {
    parse_config(Json::parse(R"({"defense": {"detector": {"name": "lga", "muu": 0.1}}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("config.defense.detector.muu"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config(Json::parse(R"({"extra": 1})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"attack": {"trigger": {"patch": {"size": 3, "color": 1}}}})")),
               ConfigError);
}

TEST(Config, WrongTypesAreRejected) {
  EXPECT_THROW(parse_config(Json::parse(R"({"training": {"epochs": "20"}})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"training": {"epochs": 2.5}})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"dataset": []})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"dataset": {"seed": -1}})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"evaluation": {"modes": ["soft"]}})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"attack": {"target": {"mode": "some-to-one"}}})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse("[1, 2]")), ConfigError);
}

TEST(Config, ValidationRejectsBadValues) {
  ExperimentConfig c;
  c.defense.detector.name = "strip";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.defense.relabeler.name = "knn";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.attack.lambda = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.training.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.defense.stamp.row = 31;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.attack.enabled = false;
  c.defense.detector.name = "oracle";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, OverlapWarning) {
  ExperimentConfig c;
  EXPECT_TRUE(c.validate().empty());
  c.defense.stamp.row = 30;
  c.defense.stamp.col = 30;
  const auto w = c.validate();
  ASSERT_FALSE(w.empty());
  EXPECT_NE(w.front().find("overlaps"), std::string::npos);
}

TEST(Config, HashIgnoresOutputOnly) {
  ExperimentConfig a;
  auto b = a;
  b.output.directory = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.training.epochs = 19;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, ApplySeedSetsEverySeedDeterministically) {
  ExperimentConfig a, b;
  apply_seed(a, 5);
  apply_seed(b, 5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.dataset.seed, a.attack.seed);
  EXPECT_NE(a.training.seed, 0u);
  ExperimentConfig c;
  apply_seed(c, 6);
  EXPECT_NE(config_hash(a), config_hash(c));
}
