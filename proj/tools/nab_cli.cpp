// Command-line front end: run, sweep-da-pla, sweep-mu-lambda, vaccinate, report, make-dataset.
#include <CLI11.hpp>
#include <Eigen/Core>
#include <iostream>

#include "nab/config.hpp"
#include "nab/errors.hpp"
#include "nab/experiment.hpp"
#include "nab/report.hpp"

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data_root;
  bool deterministic = false;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "Experiment config (JSON); defaults when omitted")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Base seed; derives every seed in the config");
  app->add_option("--out", c.out, "Output root (default: output.directory of the config)");
  app->add_option("--data-root", c.data_root, "Dataset root (overrides dataset.root and $NAB_DATA_ROOT)");
  app->add_flag("--deterministic", c.deterministic, "Single-threaded kernels");
  app->add_flag("--force", c.force, "Overwrite an existing run directory");
  app->add_flag("-q,--quiet", c.quiet, "No progress output");
}

nab::ExperimentConfig load(const Common& c) {
  nab::ExperimentConfig cfg = c.config_path.empty() ? nab::ExperimentConfig{} : nab::load_config(c.config_path);
  if (c.seed) nab::apply_seed(cfg, *c.seed);
  if (!c.data_root.empty()) cfg.dataset.root = c.data_root;
  if (!c.out.empty()) cfg.output.directory = c.out;
  if (c.deterministic) Eigen::setNbThreads(1);
  cfg.validate();
  return cfg;
}

nab::RunOptions options(const Common& c, const nab::ExperimentConfig& cfg) {
  nab::RunOptions o;
  o.out = cfg.output.directory;
  o.force = c.force;
  o.verbose = !c.quiet;
  return o;
}

void print_sweep(const nab::SweepResult& s) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& cell : s.cells) {
    std::vector<std::string> r{std::to_string(cell.row), std::to_string(cell.col), cell.status};
    if (cell.outcome) {
      const auto& p = cell.outcome->primary();
      r.push_back(nab::format_percent(p.ca));
      r.push_back(nab::format_percent(p.asr));
    }
    rows.push_back(std::move(r));
  }
  std::cout << nab::format_table({s.row_label, s.col_label, "status", "CA", "ASR"}, rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backdoor poisoning and stamp-based defense testbed"};
  app.require_subcommand(1);

  Common common;
  auto* run = app.add_subcommand("run", "Poison, defend, train and evaluate one configuration");
  add_common(run, common);

  std::vector<double> da_grid, pla_grid;
  auto* sweep_dp = app.add_subcommand("sweep-da-pla", "Oracle detection accuracy x pseudo-label accuracy grid");
  add_common(sweep_dp, common);
  sweep_dp->add_option("--da", da_grid, "Detection accuracies (default: sweep.da_grid)")->delimiter(',');
  sweep_dp->add_option("--pla", pla_grid, "Pseudo-label accuracies (default: sweep.pla_grid)")->delimiter(',');

  std::vector<double> mu_grid, lambda_grid;
  auto* sweep_ml = app.add_subcommand("sweep-mu-lambda", "Detection rate x poisoning rate grid");
  add_common(sweep_ml, common);
  sweep_ml->add_option("--mu", mu_grid, "Detection rates (default: sweep.mu_grid)")->delimiter(',');
  sweep_ml->add_option("--lambda", lambda_grid, "Poisoning rates (default: sweep.lambda_grid)")->delimiter(',');

  int target_class = -1;
  auto* vacc = app.add_subcommand("vaccinate", "Defender-injected backdoor against the configured attack");
  add_common(vacc, common);
  vacc->add_option("--target-class", target_class, "Attack target class known to the defender")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Render tables and plots of a run or sweep directory");
  report->add_option("dir", report_dir, "Run, sweep or vaccination directory")->required();

  std::string dataset_dir;
  auto* make_ds = app.add_subcommand("make-dataset", "Write the clean and poisoned split containers");
  add_common(make_ds, common);
  make_ds->add_option("dir", dataset_dir, "Destination directory")->required();

  auto* show = app.add_subcommand("show-config", "Print the effective config with every default filled in");
  add_common(show, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = load(common);
      const auto outcome = nab::run_experiment(cfg, options(common, cfg));
      std::cout << nab::metrics_table(outcome.metrics);
      std::cout << "run directory: " << (std::filesystem::path(cfg.output.directory) / outcome.config_hash).string()
                << "\n";
    } else if (*sweep_dp) {
      const auto cfg = load(common);
      const auto s = nab::sweep_da_pla(cfg, da_grid.empty() ? cfg.sweep.da_grid : da_grid,
                                       pla_grid.empty() ? cfg.sweep.pla_grid : pla_grid, options(common, cfg));
      print_sweep(s);
    } else if (*sweep_ml) {
      const auto cfg = load(common);
      const auto s = nab::sweep_mu_lambda(cfg, mu_grid.empty() ? cfg.sweep.mu_grid : mu_grid,
                                          lambda_grid.empty() ? cfg.sweep.lambda_grid : lambda_grid,
                                          options(common, cfg));
      print_sweep(s);
    } else if (*vacc) {
      const auto cfg = load(common);
      const auto v = nab::vaccinate(cfg, target_class, options(common, cfg));
      std::cout << "with vaccine\n" << nab::metrics_table(v.with_vaccine.metrics);
      std::cout << "without vaccine\n" << nab::metrics_table(v.without_vaccine.metrics);
    } else if (*report) {
      for (const auto& p : nab::report_directory(report_dir)) std::cout << p.string() << "\n";
    } else if (*make_ds) {
      const auto cfg = load(common);
      for (const auto& p : nab::make_dataset(cfg, dataset_dir, common.force)) std::cout << p.string() << "\n";
    } else if (*show) {
      std::cout << nab::render_config(load(common)).dump(2) << "\n";
    }
  } catch (const nab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nab::StageError& e) {
    std::cerr << "error in stage " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
