#include "nab/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "nab/container.hpp"
#include "nab/errors.hpp"
#include "nab/features.hpp"
#include "nab/report.hpp"
#include "nab/rng.hpp"
#include "nab/serialize.hpp"
#include "nab/train.hpp"

namespace nab {

namespace fs = std::filesystem;

namespace {

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.what());
  }
}

void log(const RunOptions& options, const std::string& message) {
  if (options.verbose) std::cerr << message << std::endl;
}

bool wants(const ExperimentConfig& c, const std::string& format) {
  return std::find(c.output.formats.begin(), c.output.formats.end(), format) != c.output.formats.end();
}

bool defense_active(const ExperimentConfig& c) { return c.defense.enabled && c.defense.detector.mu > 0.0; }

DatasetSplit select_ids(const DatasetSplit& split, const std::vector<ExampleId>& ids) {
  std::vector<LabeledExample> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(split.by_id(id));
  return DatasetSplit(split.name() + "-subset", split.class_count(), std::move(out));
}

std::string percent_line(const MetricsReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "CA %.2f  ASR %.2f  BA %.2f", r.ca, r.asr, r.ba);
  return buf;
}

std::string per_epoch_csv(const std::vector<EpochRecord>& epochs) {
  std::ostringstream o;
  o << "epoch,learning_rate,mean_loss,asr,ca,loss_clean,loss_poisoned,loss_stamped\n";
  auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
  auto group = [](const EpochRecord& e, const char* g) {
    auto it = e.group_loss.find(g);
    return it == e.group_loss.end() ? std::string() : std::to_string(it->second);
  };
  for (const auto& e : epochs) {
    o << e.epoch + 1 << ',' << e.learning_rate << ',' << e.mean_loss << ',' << opt(e.asr) << ',' << opt(e.ca) << ','
      << group(e, "clean") << ',' << group(e, "poisoned") << ',' << group(e, "stamped") << '\n';
  }
  return o.str();
}

struct EvalSetup {
  TriggerSpec trigger;
  TargetMap target;
  std::optional<StampSpec> probe_stamp;
};

// Shared tail of every pipeline: train on `train_set`, evaluate, write artifacts into `dir`.
RunOutcome train_and_evaluate(const ExperimentConfig& config, const std::string& hash, const DatasetSplit& train_set,
                              const DatasetSplit& test, const EvalSetup& eval, const fs::path& dir,
                              const RunOptions& options) {
  RunOutcome outcome;
  outcome.config_hash = hash;
  TrainOptions topts;
  if (config.defense.restamp_after_augment) topts.restamp = config.defense.stamp;
  if (config.evaluation.probe_each_epoch) {
    topts.hooks.push_back(make_probe_hook(test, eval.trigger, eval.target, eval.probe_stamp));
  }
  if (options.verbose) {
    const int total = config.training.epochs;
    topts.hooks.push_back([total](int epoch, const nn::Network&, EpochRecord& rec) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "  epoch %d/%d  loss %.4f", epoch + 1, total, rec.mean_loss);
      std::string line = buf;
      if (rec.asr && rec.ca) {
        std::snprintf(buf, sizeof buf, "  probe ASR %.2f CA %.2f", *rec.asr, *rec.ca);
        line += buf;
      }
      std::cerr << line << std::endl;
    });
  }
  log(options, "training on " + std::to_string(train_set.size()) + " examples");
  TrainResult trained = stage("train", [&] { return train(train_set, config.training, topts); });
  outcome.per_epoch = trained.epochs;
  if (!dir.empty()) trained.model.save(dir / "model.ckpt", hash);

  stage("evaluate", [&] {
    const StampSpec& stamp = config.defense.stamp;
    for (auto mode : config.evaluation.modes) {
      MetricsReport r = evaluate(trained.model, test, eval.trigger, eval.target, stamp, mode);
      r.per_epoch = trained.epochs;
      r.seed = config.training.seed;
      r.config_hash = hash;
      outcome.metrics[mode] = std::move(r);
    }
    return 0;
  });
  for (const auto& [mode, r] : outcome.metrics) log(options, to_string(mode) + ": " + percent_line(r));
  if (options.keep_model) outcome.model = std::move(trained.model);
  return outcome;
}

Json metrics_document(const RunOutcome& outcome) {
  Json j;
  j["config_hash"] = outcome.config_hash;
  Json modes = Json::object();
  for (const auto& [mode, r] : outcome.metrics) modes[to_string(mode)] = to_json(r);
  j["modes"] = std::move(modes);
  if (outcome.defense) {
    const auto& d = *outcome.defense;
    if (d.detection_accuracy) j["detection_accuracy"] = *d.detection_accuracy;
    if (d.pseudo_label_accuracy) j["pseudo_label_accuracy"] = *d.pseudo_label_accuracy;
    j["stamp_rate"] = stamp_rate(d.nab);
    j["stamped_count"] = d.nab.stamped_ids.size();
    j["suspected_count"] = d.report.size();
  }
  return j;
}

void write_run_outputs(const ExperimentConfig& config, const RunOutcome& outcome, const fs::path& dir) {
  write_json(dir / "metrics.json", metrics_document(outcome));
  if (wants(config, "csv")) write_text(dir / "per_epoch.csv", per_epoch_csv(outcome.per_epoch));
  if (wants(config, "txt") || wants(config, "svg")) {
    for (const auto& p : report_directory(dir)) {
      const auto ext = p.extension().string();
      if ((ext == ".txt" && !wants(config, "txt")) || (ext == ".svg" && !wants(config, "svg"))) fs::remove(p);
    }
  }
}

std::shared_ptr<const FeatureExtractor> build_extractor(const ExperimentConfig& config, const PreparedData& data) {
  const auto& rel = config.defense.relabeler;
  const FeatureRecipe recipe = parse_feature_recipe(rel.feature_recipe);
  const DatasetSplit& source = recipe == FeatureRecipe::kVerifiedSupervised ? data.verified : data.poisoned_train;
  TrainConfig base = config.training;
  const int epochs = recipe == FeatureRecipe::kVerifiedSupervised ? rel.verified_epochs : rel.feature_epochs;
  return train_feature_extractor(source, recipe, epochs, derive_seed(rel.seed, 11), base);
}

}  // namespace

const MetricsReport& RunOutcome::primary() const {
  if (metrics.empty()) throw StateError("run has no evaluation results");
  if (defense) {
    auto it = metrics.find(EvalMode::kDefended);
    if (it != metrics.end()) return it->second;
  }
  auto it = metrics.find(EvalMode::kPlain);
  return it != metrics.end() ? it->second : metrics.begin()->second;
}

PreparedData prepare_data(const ExperimentConfig& config) {
  return stage("prepare", [&] {
    const auto& d = config.dataset;
    SyntheticOptions so;
    so.seed = d.seed;
    so.train_size = static_cast<std::size_t>(d.train_size);
    so.test_size = static_cast<std::size_t>(d.test_size);
    so.class_count = d.class_count;
    so.height = so.width = d.image_size;
    TrainTestSplits splits = load_dataset(d.name, d.root, so);
    PreparedData out;
    out.clean_train = d.subsample < 1.0 ? subsample(splits.train, d.subsample, derive_seed(d.seed, 1)) : splits.train;
    out.test = d.subsample < 1.0 ? subsample(splits.test, d.subsample, derive_seed(d.seed, 2)) : splits.test;
    out.verified = split_verified(out.clean_train, config.defense.relabeler.verified_fraction,
                                  derive_seed(config.defense.relabeler.seed, 1))
                       .verified;
    const auto& a = config.attack;
    if (!a.enabled) {
      out.poisoned_train = out.clean_train;
      out.manifest.trigger_name = "none";
      out.manifest.target_map_name = "none";
      out.manifest.seed = a.seed;
      return out;
    }
    std::optional<nn::Network> surrogate;
    if (a.trigger.kind == TriggerKind::kCleanLabel) {
      TrainConfig sc = config.training;
      sc.epochs = a.surrogate_epochs;
      sc.seed = derive_seed(a.seed, 21);
      surrogate = train(out.clean_train, sc).model;
    }
    PoisonResult p = poison_dataset(out.clean_train, a.trigger, a.target, a.lambda, a.seed,
                                    surrogate ? &*surrogate : nullptr);
    out.poisoned_train = std::move(p.poisoned);
    out.manifest = std::move(p.manifest);
    return out;
  });
}

bool oracle_feasible(std::size_t n, std::size_t poisoned, double mu, double da) {
  const std::size_t k = round_count(mu, n);
  if (k == 0 || poisoned > n) return false;
  const std::size_t want = round_count(da, k);
  return want <= poisoned && k - want <= n - poisoned;
}

DefenseOutcome apply_defense(const ExperimentConfig& config, const PreparedData& data) {
  const auto& det = config.defense.detector;
  const auto& rel = config.defense.relabeler;
  const DatasetSplit& dp = data.poisoned_train;

  std::shared_ptr<const FeatureExtractor> extractor;
  if (det.name == "ln" || det.name == "spectre" || rel.name == "nc") {
    extractor = stage("features", [&] { return build_extractor(config, data); });
  }

  DetectorSettings settings;
  settings.lga_gamma = det.gamma;
  settings.isolation_epochs = det.isolation_epochs;
  settings.train_config = config.training;
  settings.train_config.seed = derive_seed(det.seed, 31);
  settings.sce = det.sce;
  settings.spectre.max_dim = det.spectre_max_dim;
  settings.spectre.trim = det.spectre_trim;
  settings.extractor = extractor;

  DefenseOutcome out;
  std::optional<LossTrace> trace;
  std::unique_ptr<Detector> detector;
  out.report = stage("detect", [&] {
    if (det.name == "oracle") return detect_oracle(dp, data.manifest, det.mu, det.da, det.seed);
    if (det.name == "lga") {
      trace.emplace();
      return detect_lga(dp, det.mu, det.gamma, det.isolation_epochs, settings.train_config, &*trace);
    }
    detector = make_detector(det.name, settings);
    return detector->detect(dp, det.mu);
  });

  out.labels = stage("relabel", [&] {
    if (rel.name == "synthetic") return synthetic_pseudo_labels(dp, &data.manifest, out.report.suspected_ids, rel.pla, rel.seed);
    if (rel.name == "vd") {
      TrainConfig vd = config.training;
      vd.epochs = rel.verified_epochs;
      return vd_pseudo_labels(data.verified, select_ids(dp, out.report.suspected_ids), vd, derive_seed(rel.seed, 41));
    }
    std::vector<ExampleId> removed;
    if (rel.removal_rate > 0.0) {
      if (trace) {
        removed = report_from_loss_trace(*trace, rel.removal_rate).suspected_ids;
      } else if (det.name == "oracle") {
        const std::size_t k = round_count(rel.removal_rate, dp.size());
        const double max_da = k == 0 ? 0.0 : static_cast<double>(data.manifest.poisoned_ids.size()) / static_cast<double>(k);
        removed = detect_oracle(dp, data.manifest, rel.removal_rate, std::min(det.da, max_da), det.seed).suspected_ids;
      } else {
        removed = detector->detect(dp, rel.removal_rate).suspected_ids;
      }
    }
    PseudoLabelMap map = nc_pseudo_labels(extract_features(*extractor, dp), removed);
    map.metadata["removal_detector"] = rel.removal_rate > 0.0 ? det.name : "none";
    map.metadata["removal_rate"] = std::to_string(rel.removal_rate);
    return map;
  });

  out.nab = stage("transform", [&] { return nab_transform(dp, out.report, out.labels, config.defense.stamp); });
  if (!data.manifest.poisoned_ids.empty()) out.detection_accuracy = detection_accuracy(out.report, data.manifest);
  if (!out.report.suspected_ids.empty()) {
    out.pseudo_label_accuracy = pseudo_label_accuracy(out.labels, dp, &data.manifest, out.report.suspected_ids);
  }
  return out;
}

fs::path prepare_run_directory(const fs::path& out, const std::string& hash, bool force) {
  const fs::path dir = out / hash;
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw Error("run directory " + dir.string() + " already exists; pass --force to overwrite");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return dir;
}

RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options, const PreparedData* shared) {
  for (const auto& w : config.validate()) std::cerr << "warning: " << w << std::endl;
  const std::string hash = config_hash(config);
  fs::path dir;
  if (!options.out.empty()) {
    dir = prepare_run_directory(options.out, hash, options.force);
    save_config(dir / "config.json", config);
    log(options, "run directory " + dir.string());
  }

  std::optional<PreparedData> owned;
  if (shared == nullptr) {
    log(options, "preparing data");
    owned = prepare_data(config);
    shared = &*owned;
  }
  const PreparedData& data = *shared;
  if (!dir.empty()) save_split(dir / "train_poisoned.nabsplit", {data.poisoned_train, data.manifest, std::nullopt});

  std::optional<DefenseOutcome> defense;
  if (defense_active(config)) {
    log(options, "defense: " + config.defense.detector.name + " + " + config.defense.relabeler.name);
    defense = apply_defense(config, data);
    if (!dir.empty()) {
      write_json(dir / "detection.json", to_json(defense->report));
      write_json(dir / "pseudo_labels.json", to_json(defense->labels));
      save_split(dir / "train_defended.nabsplit", {defense->nab.split, data.manifest, defense->nab.stamped_ids});
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "suspected %zu, stamped %zu", defense->report.size(), defense->nab.stamped_ids.size());
    std::string line = buf;
    if (defense->detection_accuracy) {
      std::snprintf(buf, sizeof buf, ", detection accuracy %.3f", *defense->detection_accuracy);
      line += buf;
    }
    if (defense->pseudo_label_accuracy) {
      std::snprintf(buf, sizeof buf, ", pseudo-label accuracy %.3f", *defense->pseudo_label_accuracy);
      line += buf;
    }
    log(options, line);
  }

  const EvalSetup eval{config.attack.trigger, config.attack.target,
                       defense ? std::optional<StampSpec>(config.defense.stamp) : std::nullopt};
  const DatasetSplit& train_set = defense ? defense->nab.split : data.poisoned_train;
  RunOutcome outcome = train_and_evaluate(config, hash, train_set, data.test, eval, dir, options);
  outcome.defense = std::move(defense);
  if (!dir.empty()) write_run_outputs(config, outcome, dir);
  return outcome;
}

// ---- sweeps ----

namespace {

Json sweep_document(const SweepResult& s, const std::vector<std::string>& metrics,
                    const std::function<std::map<std::string, double>(const RunOutcome&)>& extract) {
  Json j;
  j["kind"] = s.kind;
  j["row_label"] = s.row_label;
  j["col_label"] = s.col_label;
  j["rows"] = s.rows;
  j["cols"] = s.cols;
  j["metrics"] = metrics;
  Json cells = Json::array();
  for (std::size_t r = 0; r < s.rows.size(); ++r) {
    for (std::size_t c = 0; c < s.cols.size(); ++c) {
      const auto& cell = s.at(r, c);
      Json jc;
      jc["row_index"] = r;
      jc["col_index"] = c;
      jc["row"] = cell.row;
      jc["col"] = cell.col;
      jc["status"] = cell.status;
      if (!cell.note.empty()) jc["note"] = cell.note;
      if (cell.outcome) {
        jc["config_hash"] = cell.outcome->config_hash;
        Json m = Json::object();
        for (const auto& [k, v] : extract(*cell.outcome)) m[k] = v;
        jc["metrics"] = std::move(m);
      }
      cells.push_back(std::move(jc));
    }
  }
  j["cells"] = std::move(cells);
  return j;
}

fs::path sweep_directory(const RunOptions& options, const std::string& kind, const ExperimentConfig& config) {
  if (options.out.empty()) return {};
  return prepare_run_directory(options.out, kind + "-" + config_hash(config), options.force);
}

RunOptions cell_options(const RunOptions& options, const fs::path& dir) {
  RunOptions o = options;
  o.out = dir.empty() ? fs::path() : dir / "cells";
  o.force = true;
  return o;
}

void ensure_mode(ExperimentConfig& c, EvalMode m) {
  if (std::find(c.evaluation.modes.begin(), c.evaluation.modes.end(), m) == c.evaluation.modes.end()) {
    c.evaluation.modes.push_back(m);
  }
}

std::map<std::string, double> cell_metrics(const RunOutcome& o) {
  std::map<std::string, double> m;
  const auto& p = o.primary();
  m["ca"] = p.ca;
  m["ba"] = p.ba;
  m["asr"] = p.asr;
  auto f = o.metrics.find(EvalMode::kFiltered);
  if (f != o.metrics.end() && f->second.dsr) m["dsr"] = *f->second.dsr;
  if (o.defense && o.defense->detection_accuracy) m["detection_accuracy"] = 100.0 * *o.defense->detection_accuracy;
  return m;
}

}  // namespace

SweepResult sweep_da_pla(const ExperimentConfig& config, const std::vector<double>& da_grid,
                         const std::vector<double>& pla_grid, const RunOptions& options) {
  if (da_grid.empty() || pla_grid.empty()) throw ArgumentError("sweep grids must not be empty");
  ExperimentConfig base = config;
  base.defense.enabled = true;
  base.defense.detector.name = "oracle";
  base.defense.relabeler.name = "synthetic";
  base.sweep.da_grid = da_grid;
  base.sweep.pla_grid = pla_grid;
  ensure_mode(base, EvalMode::kDefended);
  ensure_mode(base, EvalMode::kFiltered);
  base.validate();
  const fs::path dir = sweep_directory(options, "sweep-da-pla", base);
  if (!dir.empty()) save_config(dir / "config.json", base);

  log(options, "preparing shared data");
  const PreparedData data = prepare_data(base);
  SweepResult s{"da-pla", "da", "pla", da_grid, pla_grid, {}};
  for (double da : da_grid) {
    for (double pla : pla_grid) {
      SweepCell cell{da, pla, "ok", "", std::nullopt};
      if (!oracle_feasible(data.poisoned_train.size(), data.manifest.poisoned_ids.size(), base.defense.detector.mu, da)) {
        cell.status = "infeasible";
        cell.note = "not enough poisoned or clean examples for this detection accuracy";
      } else {
        ExperimentConfig c = base;
        c.defense.detector.da = da;
        c.defense.relabeler.pla = pla;
        log(options, "cell da=" + std::to_string(da) + " pla=" + std::to_string(pla));
        cell.outcome = run_experiment(c, cell_options(options, dir), &data);
      }
      s.cells.push_back(std::move(cell));
    }
  }
  if (!dir.empty()) {
    write_json(dir / "sweep.json", sweep_document(s, {"ca", "ba", "asr", "dsr"}, cell_metrics));
    report_directory(dir);
  }
  return s;
}

SweepResult sweep_mu_lambda(const ExperimentConfig& config, const std::vector<double>& mu_grid,
                            const std::vector<double>& lambda_grid, const RunOptions& options) {
  if (mu_grid.empty() || lambda_grid.empty()) throw ArgumentError("sweep grids must not be empty");
  ExperimentConfig base = config;
  base.attack.enabled = true;
  base.sweep.mu_grid = mu_grid;
  base.sweep.lambda_grid = lambda_grid;
  ensure_mode(base, EvalMode::kPlain);
  ensure_mode(base, EvalMode::kDefended);
  base.validate();
  const fs::path dir = sweep_directory(options, "sweep-mu-lambda", base);
  if (!dir.empty()) save_config(dir / "config.json", base);

  SweepResult s{"mu-lambda", "mu", "lambda", mu_grid, lambda_grid, {}};
  s.cells.resize(mu_grid.size() * lambda_grid.size());
  for (std::size_t c = 0; c < lambda_grid.size(); ++c) {
    ExperimentConfig lc = base;
    lc.attack.lambda = lambda_grid[c];
    log(options, "preparing data for lambda=" + std::to_string(lambda_grid[c]));
    const PreparedData data = prepare_data(lc);
    for (std::size_t r = 0; r < mu_grid.size(); ++r) {
      SweepCell cell{mu_grid[r], lambda_grid[c], "ok", "", std::nullopt};
      ExperimentConfig cc = lc;
      cc.defense.detector.mu = mu_grid[r];
      cc.defense.enabled = mu_grid[r] > 0.0 && base.defense.enabled;
      if (cc.defense.enabled && cc.defense.detector.name == "oracle" &&
          !oracle_feasible(data.poisoned_train.size(), data.manifest.poisoned_ids.size(), mu_grid[r],
                           cc.defense.detector.da)) {
        cell.status = "infeasible";
        cell.note = "oracle quota cannot be met";
      } else {
        log(options, "cell mu=" + std::to_string(mu_grid[r]) + " lambda=" + std::to_string(lambda_grid[c]));
        cell.outcome = run_experiment(cc, cell_options(options, dir), &data);
      }
      s.cells[r * lambda_grid.size() + c] = std::move(cell);
    }
  }
  if (!dir.empty()) {
    write_json(dir / "sweep.json", sweep_document(s, {"ca", "ba", "asr", "dsr", "detection_accuracy"}, cell_metrics));
    report_directory(dir);
  }
  return s;
}

// ---- vaccination ----

VaccinationOutcome vaccinate(const ExperimentConfig& config, int target_class, const RunOptions& options) {
  for (const auto& w : config.validate()) std::cerr << "warning: " << w << std::endl;
  const auto& vac = config.vaccination;
  const int k = config.dataset.name == "cifar10" ? 10 : config.dataset.class_count;
  if (target_class < 0 || target_class >= k) throw ArgumentError("vaccination target class out of range");
  if (vac.trigger.kind == TriggerKind::kCleanLabel) {
    throw ArgumentError("the vaccine trigger must be a dirty-label trigger (patch, blend or warp)");
  }
  const std::string hash = config_hash(config) + "-t" + std::to_string(target_class);
  fs::path dir;
  if (!options.out.empty()) {
    dir = prepare_run_directory(options.out, "vaccinate-" + hash, options.force);
    save_config(dir / "config.json", config);
  }

  const PreparedData data = prepare_data(config);
  const DatasetSplit& dp = data.poisoned_train;

  VaccinationOutcome out;
  out.vaccinated = stage("vaccine", [&] {
    std::vector<ExampleId> candidates;
    for (const auto& ex : dp) {
      const bool noise = std::binary_search(data.manifest.noise_ids.begin(), data.manifest.noise_ids.end(), ex.id);
      if (!data.manifest.contains(ex.id) && !noise) candidates.push_back(ex.id);
    }
    const std::size_t count = std::min(round_count(vac.lambda, dp.size()), candidates.size());
    const auto chosen = select_by_hash(candidates, count, derive_seed(vac.seed, 1));
    const auto processed = select_by_hash(chosen, round_count(vac.processed_fraction, chosen.size()),
                                          derive_seed(vac.seed, 2));
    NABDataset nab;
    std::vector<LabeledExample> examples;
    examples.reserve(dp.size());
    for (const auto& ex : dp) {
      if (!std::binary_search(chosen.begin(), chosen.end(), ex.id)) {
        examples.push_back(ex);
        continue;
      }
      const ImageTensor triggered = apply_trigger(ex.image, vac.trigger, derive_seed(vac.seed, 3, ex.id));
      if (std::binary_search(processed.begin(), processed.end(), ex.id)) {
        examples.push_back({ex.id, apply_stamp(triggered, config.defense.stamp), ex.label, Provenance::kDefenderStamped});
        nab.stamped_ids.push_back(ex.id);
      } else {
        examples.push_back({ex.id, triggered, target_class, Provenance::kAttackerPoisoned});
      }
    }
    nab.split = DatasetSplit(dp.name() + "-vaccinated", dp.class_count(), std::move(examples));
    return nab;
  });
  log(options, "vaccine: " + std::to_string(out.vaccinated.stamped_ids.size()) + " stamped examples");

  EvalSetup eval{config.attack.trigger, config.attack.target, config.defense.stamp};
  if (!config.attack.enabled) {
    eval.trigger = vac.trigger;
    eval.target = TargetMap{TargetMode::kAllToOne, target_class};
  }
  out.traced_trigger = eval.trigger;
  ExperimentConfig run_cfg = config;
  ensure_mode(run_cfg, EvalMode::kDefended);
  run_cfg.evaluation.probe_each_epoch = true;

  auto sub = [&](const char* name) {
    if (dir.empty()) return fs::path();
    fs::create_directories(dir / name);
    return dir / name;
  };
  log(options, "vaccinated run");
  out.with_vaccine = train_and_evaluate(run_cfg, hash, out.vaccinated.split, data.test, eval, sub("vaccinated"), options);
  log(options, "baseline run");
  out.without_vaccine = train_and_evaluate(run_cfg, hash, dp, data.test, eval, sub("baseline"), options);

  if (!dir.empty()) {
    Json j;
    j["target_class"] = target_class;
    j["traced_trigger"] = eval.trigger.name();
    Json runs;
    for (const auto& [name, o] : {std::pair<const char*, const RunOutcome*>{"vaccinated", &out.with_vaccine},
                                  std::pair<const char*, const RunOutcome*>{"baseline", &out.without_vaccine}}) {
      const MetricsReport& m = o->metrics.at(EvalMode::kDefended);
      Json per_epoch = Json::array();
      for (const auto& e : o->per_epoch) per_epoch.push_back(to_json(e));
      runs[name] = {{"metrics", to_json(m)}, {"per_epoch", per_epoch}};
      write_json(dir / name / "metrics.json", metrics_document(*o));
    }
    j["runs"] = std::move(runs);
    write_json(dir / "vaccination.json", j);
    if (wants(config, "csv")) {
      write_text(dir / "vaccinated" / "per_epoch.csv", per_epoch_csv(out.with_vaccine.per_epoch));
      write_text(dir / "baseline" / "per_epoch.csv", per_epoch_csv(out.without_vaccine.per_epoch));
    }
    report_directory(dir);
  }
  return out;
}

std::vector<fs::path> make_dataset(const ExperimentConfig& config, const fs::path& dir, bool force) {
  config.validate();
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw Error("dataset directory " + dir.string() + " is not empty; pass --force to overwrite");
  }
  fs::create_directories(dir);
  const PreparedData data = prepare_data(config);
  std::vector<fs::path> written{dir / "train_clean.nabsplit", dir / "test.nabsplit", dir / "verified.nabsplit"};
  save_split(written[0], {data.clean_train, std::nullopt, std::nullopt});
  save_split(written[1], {data.test, std::nullopt, std::nullopt});
  save_split(written[2], {data.verified, std::nullopt, std::nullopt});
  if (config.attack.enabled) {
    written.push_back(dir / "train_poisoned.nabsplit");
    save_split(written.back(), {data.poisoned_train, data.manifest, std::nullopt});
  }
  save_config(dir / "config.json", config);
  written.push_back(dir / "config.json");
  return written;
}

}  // namespace nab
