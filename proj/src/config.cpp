#include "nab/config.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "nab/container.hpp"
#include "nab/errors.hpp"
#include "nab/features.hpp"
#include "nab/rng.hpp"

namespace nab {

namespace {

// Reads an object strictly: every key must be consumed, every value must have the expected type.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  void get(const char* key, bool& out) { read(key, out, [](const Json& v) { return v.is_boolean(); }, "a boolean"); }
  void get(const char* key, int& out) {
    read(key, out, [](const Json& v) { return v.is_number_integer(); }, "an integer");
  }
  void get(const char* key, std::uint64_t& out) {
    read(key, out, [](const Json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); },
         "a non-negative integer");
  }
  void get(const char* key, double& out) { read(key, out, [](const Json& v) { return v.is_number(); }, "a number"); }
  void get(const char* key, float& out) {
    double d = out;
    get(key, d);
    out = static_cast<float>(d);
  }
  void get(const char* key, std::string& out) {
    read(key, out, [](const Json& v) { return v.is_string(); }, "a string");
  }
  void get(const char* key, std::vector<double>& out) {
    read(key, out, [](const Json& v) {
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_number(); });
    }, "an array of numbers");
  }
  void get(const char* key, std::vector<std::string>& out) {
    read(key, out, [](const Json& v) {
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); });
    }, "an array of strings");
  }

  template <typename F>
  void section(const char* key, F&& f) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Reader child(j_.at(key), path_ + "." + key);
    f(child);
    child.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError("unknown config key '" + path_ + "." + k + "'");
    }
  }

  const std::string& path() const { return path_; }

 private:
  template <typename T, typename Check>
  void read(const char* key, T& out, Check check, const char* expected) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const Json& v = j_.at(key);
    if (!check(v)) throw ConfigError(path_ + "." + key + ": expected " + expected);
    out = v.get<T>();
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json render_trigger(const TriggerSpec& t) {
  Json j;
  j["kind"] = to_string(t.kind);
  j["seed"] = t.seed;
  j["patch"] = {{"size", t.patch.size}};
  j["blend"] = {{"alpha", t.blend.alpha}, {"pattern_seed", t.blend.pattern_seed},
                {"pattern_path", t.blend.pattern_path.string()}};
  j["warp"] = {{"grid", t.warp.grid}, {"strength", t.warp.strength}, {"noise_rate", t.warp.noise_rate}};
  j["clean_label"] = {{"epsilon", t.clean_label.epsilon},
                      {"steps", t.clean_label.steps},
                      {"step_size", t.clean_label.step_size}};
  return j;
}

void parse_trigger(Reader& r, TriggerSpec& t) {
  std::string kind = to_string(t.kind);
  r.get("kind", kind);
  try {
    t.kind = parse_trigger_kind(kind);
  } catch (const ArgumentError& e) {
    throw ConfigError(r.path() + ".kind: " + e.what());
  }
  r.get("seed", t.seed);
  r.section("patch", [&](Reader& s) { s.get("size", t.patch.size); });
  r.section("blend", [&](Reader& s) {
    s.get("alpha", t.blend.alpha);
    s.get("pattern_seed", t.blend.pattern_seed);
    std::string path = t.blend.pattern_path.string();
    s.get("pattern_path", path);
    t.blend.pattern_path = path;
  });
  r.section("warp", [&](Reader& s) {
    s.get("grid", t.warp.grid);
    s.get("strength", t.warp.strength);
    s.get("noise_rate", t.warp.noise_rate);
  });
  r.section("clean_label", [&](Reader& s) {
    s.get("epsilon", t.clean_label.epsilon);
    s.get("steps", t.clean_label.steps);
    s.get("step_size", t.clean_label.step_size);
  });
}

std::string target_mode_name(TargetMode m) { return m == TargetMode::kAllToOne ? "all-to-one" : "all-to-all"; }

TargetMode parse_target_mode(const std::string& s, const std::string& path) {
  if (s == "all-to-one") return TargetMode::kAllToOne;
  if (s == "all-to-all") return TargetMode::kAllToAll;
  throw ConfigError(path + ": unknown target mode '" + s + "' (all-to-one | all-to-all)");
}

void check(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool in_unit_open_right(double v) { return v >= 0.0 && v < 1.0; }

}  // namespace

Json render_config(const ExperimentConfig& c) {
  Json j;
  const auto& d = c.dataset;
  j["dataset"] = {{"name", d.name},           {"root", d.root},           {"subsample", d.subsample},
                  {"seed", d.seed},           {"train_size", d.train_size}, {"test_size", d.test_size},
                  {"class_count", d.class_count}, {"image_size", d.image_size}};

  const auto& a = c.attack;
  Json attack;
  attack["enabled"] = a.enabled;
  attack["trigger"] = render_trigger(a.trigger);
  attack["target"] = {{"mode", target_mode_name(a.target.mode)}, {"class", a.target.target_class}};
  attack["lambda"] = a.lambda;
  attack["seed"] = a.seed;
  attack["surrogate_epochs"] = a.surrogate_epochs;
  j["attack"] = std::move(attack);

  const auto& det = c.defense.detector;
  const auto& rel = c.defense.relabeler;
  const auto& st = c.defense.stamp;
  Json defense;
  defense["enabled"] = c.defense.enabled;
  defense["detector"] = {{"name", det.name},
                         {"mu", det.mu},
                         {"gamma", det.gamma},
                         {"isolation_epochs", det.isolation_epochs},
                         {"da", det.da},
                         {"sce", {{"alpha", det.sce.alpha},
                                  {"beta", det.sce.beta},
                                  {"clip", det.sce.clip},
                                  {"epochs", det.sce.epochs},
                                  {"learning_rate", det.sce.learning_rate},
                                  {"seed", det.sce.seed}}},
                         {"spectre_max_dim", det.spectre_max_dim},
                         {"spectre_trim", det.spectre_trim},
                         {"seed", det.seed}};
  defense["relabeler"] = {{"name", rel.name},
                          {"removal_rate", rel.removal_rate},
                          {"verified_fraction", rel.verified_fraction},
                          {"feature_recipe", rel.feature_recipe},
                          {"feature_epochs", rel.feature_epochs},
                          {"verified_epochs", rel.verified_epochs},
                          {"pla", rel.pla},
                          {"seed", rel.seed}};
  defense["stamp"] = {{"height", st.height}, {"width", st.width}, {"row", st.row}, {"col", st.col}, {"value", st.value}};
  defense["restamp_after_augment"] = c.defense.restamp_after_augment;
  j["defense"] = std::move(defense);

  const auto& t = c.training;
  j["training"] = {{"architecture", t.architecture},
                   {"width", t.width},
                   {"epochs", t.epochs},
                   {"learning_rate", t.learning_rate},
                   {"momentum", t.momentum},
                   {"weight_decay", t.weight_decay},
                   {"batch_size", t.batch_size},
                   {"schedule", t.schedule},
                   {"augment", {{"enabled", t.augment.enabled},
                                {"crop_padding", t.augment.crop_padding},
                                {"padding_mode", t.augment.padding_mode},
                                {"flip_probability", t.augment.flip_probability},
                                {"cutout_size", t.augment.cutout_size}}},
                   {"seed", t.seed}};

  Json modes = Json::array();
  for (auto m : c.evaluation.modes) modes.push_back(to_string(m));
  j["evaluation"] = {{"modes", modes}, {"probe_each_epoch", c.evaluation.probe_each_epoch}};

  j["sweep"] = {{"da_grid", c.sweep.da_grid},
                {"pla_grid", c.sweep.pla_grid},
                {"mu_grid", c.sweep.mu_grid},
                {"lambda_grid", c.sweep.lambda_grid}};

  j["vaccination"] = {{"trigger", render_trigger(c.vaccination.trigger)},
                      {"lambda", c.vaccination.lambda},
                      {"processed_fraction", c.vaccination.processed_fraction},
                      {"seed", c.vaccination.seed}};

  j["output"] = {{"directory", c.output.directory}, {"formats", c.output.formats}};
  return j;
}

ExperimentConfig parse_config(const Json& j) {
  ExperimentConfig c;
  Reader root(j, "config");
  root.section("dataset", [&](Reader& r) {
    auto& d = c.dataset;
    r.get("name", d.name);
    r.get("root", d.root);
    r.get("subsample", d.subsample);
    r.get("seed", d.seed);
    r.get("train_size", d.train_size);
    r.get("test_size", d.test_size);
    r.get("class_count", d.class_count);
    r.get("image_size", d.image_size);
  });
  root.section("attack", [&](Reader& r) {
    auto& a = c.attack;
    r.get("enabled", a.enabled);
    r.section("trigger", [&](Reader& s) { parse_trigger(s, a.trigger); });
    r.section("target", [&](Reader& s) {
      std::string mode = target_mode_name(a.target.mode);
      s.get("mode", mode);
      a.target.mode = parse_target_mode(mode, s.path() + ".mode");
      s.get("class", a.target.target_class);
    });
    r.get("lambda", a.lambda);
    r.get("seed", a.seed);
    r.get("surrogate_epochs", a.surrogate_epochs);
  });
  root.section("defense", [&](Reader& r) {
    auto& def = c.defense;
    r.get("enabled", def.enabled);
    r.section("detector", [&](Reader& s) {
      auto& det = def.detector;
      s.get("name", det.name);
      s.get("mu", det.mu);
      s.get("gamma", det.gamma);
      s.get("isolation_epochs", det.isolation_epochs);
      s.get("da", det.da);
      s.section("sce", [&](Reader& t) {
        t.get("alpha", det.sce.alpha);
        t.get("beta", det.sce.beta);
        t.get("clip", det.sce.clip);
        t.get("epochs", det.sce.epochs);
        t.get("learning_rate", det.sce.learning_rate);
        t.get("seed", det.sce.seed);
      });
      s.get("spectre_max_dim", det.spectre_max_dim);
      s.get("spectre_trim", det.spectre_trim);
      s.get("seed", det.seed);
    });
    r.section("relabeler", [&](Reader& s) {
      auto& rel = def.relabeler;
      s.get("name", rel.name);
      s.get("removal_rate", rel.removal_rate);
      s.get("verified_fraction", rel.verified_fraction);
      s.get("feature_recipe", rel.feature_recipe);
      s.get("feature_epochs", rel.feature_epochs);
      s.get("verified_epochs", rel.verified_epochs);
      s.get("pla", rel.pla);
      s.get("seed", rel.seed);
    });
    r.section("stamp", [&](Reader& s) {
      s.get("height", def.stamp.height);
      s.get("width", def.stamp.width);
      s.get("row", def.stamp.row);
      s.get("col", def.stamp.col);
      s.get("value", def.stamp.value);
    });
    r.get("restamp_after_augment", def.restamp_after_augment);
  });
  root.section("training", [&](Reader& r) {
    auto& t = c.training;
    r.get("architecture", t.architecture);
    r.get("width", t.width);
    r.get("epochs", t.epochs);
    r.get("learning_rate", t.learning_rate);
    r.get("momentum", t.momentum);
    r.get("weight_decay", t.weight_decay);
    r.get("batch_size", t.batch_size);
    r.get("schedule", t.schedule);
    r.section("augment", [&](Reader& s) {
      s.get("enabled", t.augment.enabled);
      s.get("crop_padding", t.augment.crop_padding);
      s.get("padding_mode", t.augment.padding_mode);
      s.get("flip_probability", t.augment.flip_probability);
      s.get("cutout_size", t.augment.cutout_size);
    });
    r.get("seed", t.seed);
  });
  root.section("evaluation", [&](Reader& r) {
    std::vector<std::string> names;
    for (auto m : c.evaluation.modes) names.push_back(to_string(m));
    r.get("modes", names);
    c.evaluation.modes.clear();
    for (const auto& n : names) {
      try {
        c.evaluation.modes.push_back(parse_eval_mode(n));
      } catch (const ArgumentError& e) {
        throw ConfigError(r.path() + ".modes: " + e.what());
      }
    }
    r.get("probe_each_epoch", c.evaluation.probe_each_epoch);
  });
  root.section("sweep", [&](Reader& r) {
    r.get("da_grid", c.sweep.da_grid);
    r.get("pla_grid", c.sweep.pla_grid);
    r.get("mu_grid", c.sweep.mu_grid);
    r.get("lambda_grid", c.sweep.lambda_grid);
  });
  root.section("vaccination", [&](Reader& r) {
    r.section("trigger", [&](Reader& s) { parse_trigger(s, c.vaccination.trigger); });
    r.get("lambda", c.vaccination.lambda);
    r.get("processed_fraction", c.vaccination.processed_fraction);
    r.get("seed", c.vaccination.seed);
  });
  root.section("output", [&](Reader& r) {
    r.get("directory", c.output.directory);
    r.get("formats", c.output.formats);
  });
  root.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = read_json(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(j);
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  write_json(path, render_config(config));
}

std::string config_hash(const ExperimentConfig& config) {
  Json j = render_config(config);
  j.erase("output");
  const std::string text = j.dump();
  const auto h = fnv1a64(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_seed(ExperimentConfig& c, std::uint64_t seed) {
  c.dataset.seed = derive_seed(seed, 1);
  c.attack.seed = derive_seed(seed, 2);
  c.attack.trigger.seed = derive_seed(seed, 3);
  c.defense.detector.seed = derive_seed(seed, 4);
  c.defense.detector.sce.seed = derive_seed(seed, 5);
  c.defense.relabeler.seed = derive_seed(seed, 6);
  c.training.seed = derive_seed(seed, 7);
  c.vaccination.seed = derive_seed(seed, 8);
  c.vaccination.trigger.seed = derive_seed(seed, 9);
}

std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> warnings;
  const auto& d = dataset;
  check(d.name == "synthetic" || d.name == "cifar10", "dataset.name must be synthetic or cifar10");
  check(d.subsample > 0.0 && d.subsample <= 1.0, "dataset.subsample must lie in (0, 1]");
  check(d.train_size > 0 && d.test_size > 0, "dataset sizes must be positive");
  check(d.class_count >= 2 && d.class_count <= 10, "dataset.class_count must lie in [2, 10]");
  check(d.image_size >= 8, "dataset.image_size must be at least 8");
  const int classes = d.name == "cifar10" ? 10 : d.class_count;
  const int side = d.name == "cifar10" ? 32 : d.image_size;
  const ImageShape shape{side, side, 3};

  auto check_trigger = [&](const TriggerSpec& t, const std::string& where) {
    check(t.patch.size >= 1 && t.patch.size <= side, where + ".patch.size must fit the image");
    check(t.blend.alpha > 0.0 && t.blend.alpha <= 1.0, where + ".blend.alpha must lie in (0, 1]");
    check(t.warp.grid >= 2, where + ".warp.grid must be at least 2");
    check(t.warp.strength >= 0.0, where + ".warp.strength must be non-negative");
    check(in_unit_open_right(t.warp.noise_rate), where + ".warp.noise_rate must lie in [0, 1)");
    check(t.clean_label.epsilon >= 0.0 && t.clean_label.steps >= 0, where + ".clean_label values must be non-negative");
  };
  const auto& a = attack;
  check_trigger(a.trigger, "attack.trigger");
  check(in_unit_open_right(a.lambda), "attack.lambda must lie in [0, 1)");
  check(a.target.target_class >= 0 && a.target.target_class < classes, "attack.target.class out of range");
  check(a.trigger.kind != TriggerKind::kCleanLabel || a.target.mode == TargetMode::kAllToOne,
        "clean-label attacks are all-to-one only");
  check(a.surrogate_epochs >= 1, "attack.surrogate_epochs must be at least 1");

  const auto& det = defense.detector;
  const auto& rel = defense.relabeler;
  check(det.name == "oracle" || has_detector(det.name), "unknown detector '" + det.name + "'");
  check(in_unit_open_right(det.mu), "defense.detector.mu must lie in [0, 1)");
  check(det.gamma >= 0.0, "defense.detector.gamma must be non-negative");
  check(det.isolation_epochs >= 1, "defense.detector.isolation_epochs must be at least 1");
  check(det.da >= 0.0 && det.da <= 1.0, "defense.detector.da must lie in [0, 1]");
  check(det.sce.alpha > 0.0 && det.sce.beta >= 0.0 && det.sce.epochs >= 1 && det.sce.learning_rate > 0.0,
        "defense.detector.sce values out of range");
  check(det.spectre_max_dim >= 1 && in_unit_open_right(det.spectre_trim), "defense.detector spectre values out of range");
  check(rel.name == "vd" || rel.name == "nc" || rel.name == "synthetic", "unknown relabeler '" + rel.name + "'");
  check(in_unit_open_right(rel.removal_rate), "defense.relabeler.removal_rate must lie in [0, 1)");
  check(rel.verified_fraction > 0.0 && rel.verified_fraction < 1.0,
        "defense.relabeler.verified_fraction must lie in (0, 1)");
  try {
    parse_feature_recipe(rel.feature_recipe);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("defense.relabeler.feature_recipe: ") + e.what());
  }
  check(rel.feature_epochs >= 1, "defense.relabeler.feature_epochs must be at least 1");
  check(rel.verified_epochs >= 1, "defense.relabeler.verified_epochs must be at least 1");
  check(rel.pla >= 0.0 && rel.pla <= 1.0, "defense.relabeler.pla must lie in [0, 1]");
  const auto& st = defense.stamp;
  check(st.fits(shape), "defense.stamp does not fit the image");
  check(st.value >= 0.0f && st.value <= 1.0f, "defense.stamp.value must lie in [0, 1]");
  if (defense.enabled && det.name == "oracle" && !a.enabled) {
    throw ConfigError("the oracle detector needs an attack to know the poisoned ids");
  }
  if (defense.enabled && rel.name == "synthetic" && det.name != "oracle") {
    warnings.push_back("synthetic pseudo labels read the attack manifest; pair them with the oracle detector for sweeps");
  }
  if (a.trigger.kind == TriggerKind::kPatch && stamp_overlaps_patch(st, shape, a.trigger.patch.size)) {
    warnings.push_back("defense stamp overlaps the attack's patch trigger");
  }
  if (vaccination.trigger.kind == TriggerKind::kPatch &&
      stamp_overlaps_patch(st, shape, vaccination.trigger.patch.size)) {
    warnings.push_back("defense stamp overlaps the vaccination patch trigger");
  }

  try {
    training.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }
  check(!evaluation.modes.empty(), "evaluation.modes must not be empty");

  auto check_grid = [](const std::vector<double>& g, double lo, double hi, bool hi_open, const std::string& name) {
    check(!g.empty(), "sweep." + name + " must not be empty");
    for (double v : g) check(v >= lo && (hi_open ? v < hi : v <= hi), "sweep." + name + " value out of range");
  };
  check_grid(sweep.da_grid, 0.0, 1.0, false, "da_grid");
  check_grid(sweep.pla_grid, 0.0, 1.0, false, "pla_grid");
  check_grid(sweep.mu_grid, 0.0, 1.0, true, "mu_grid");
  check_grid(sweep.lambda_grid, 0.0, 1.0, true, "lambda_grid");

  check_trigger(vaccination.trigger, "vaccination.trigger");
  check(in_unit_open_right(vaccination.lambda), "vaccination.lambda must lie in [0, 1)");
  check(vaccination.processed_fraction >= 0.0 && vaccination.processed_fraction <= 1.0,
        "vaccination.processed_fraction must lie in [0, 1]");

  static const std::set<std::string> kFormats{"json", "csv", "svg", "txt"};
  for (const auto& f : output.formats) check(kFormats.contains(f), "unknown output format '" + f + "'");
  check(!output.directory.empty(), "output.directory must not be empty");
  return warnings;
}

}  // namespace nab
