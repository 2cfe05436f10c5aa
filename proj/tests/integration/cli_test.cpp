#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "nab/config.hpp"

using namespace nab;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Result nab_cli(const std::string& args) {
  const std::string cmd = std::string(NAB_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path fresh(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("nab_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.dataset.train_size = 80;
  c.dataset.test_size = 40;
  c.dataset.image_size = 16;
  c.defense.detector.name = "oracle";
  c.defense.detector.mu = 0.1;
  c.defense.relabeler.name = "synthetic";
  c.training.epochs = 1;
  c.training.batch_size = 16;
  return c;
}

fs::path write_config(const fs::path& dir, const Json& j) {
  const auto p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST(Cli, ShowConfigPrintsEveryDefault) {
  const auto r = nab_cli("show-config");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(parse_config(Json::parse(r.out)), ExperimentConfig{});
}

TEST(Cli, UnknownConfigKeyIsAConfigError) {
  const auto dir = fresh("unknown");
  Json j = render_config(tiny());
  j["training"]["epochz"] = 3;
  const auto r = nab_cli("run -q -c " + write_config(dir, j).string() + " --out " + (dir / "runs").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("epochz"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(dir / "runs"));
}

TEST(Cli, RunRefusesToOverwriteWithoutForceThenReports) {
  const auto dir = fresh("run");
  const auto cfg = write_config(dir, render_config(tiny()));
  const std::string base = "run -q -c " + cfg.string() + " --seed 4 --out " + (dir / "runs").string();
  const auto first = nab_cli(base);
  ASSERT_EQ(first.status, 0) << first.out;
  EXPECT_NE(first.out.find("run directory: "), std::string::npos);

  const auto again = nab_cli(base);
  EXPECT_NE(again.status, 0);
  EXPECT_EQ(nab_cli(base + " --force").status, 0);

  ASSERT_EQ(std::distance(fs::directory_iterator(dir / "runs"), fs::directory_iterator{}), 1);
  const auto run_dir = fs::directory_iterator(dir / "runs")->path();
  EXPECT_TRUE(fs::exists(run_dir / "metrics.json"));
  const auto rep = nab_cli("report " + run_dir.string());
  EXPECT_EQ(rep.status, 0) << rep.out;
  EXPECT_NE(rep.out.find(".svg"), std::string::npos) << rep.out;
}

TEST(Cli, SeedOverrideIsDeterministic) {
  const auto dir = fresh("seed");
  const auto cfg = write_config(dir, render_config(tiny()));
  const std::string base = "show-config -c " + cfg.string();
  const auto a = Json::parse(nab_cli(base + " --seed 1").out);
  const auto b = Json::parse(nab_cli(base + " --seed 2").out);
  EXPECT_NE(a["attack"]["seed"], b["attack"]["seed"]);
  EXPECT_EQ(a, Json::parse(nab_cli(base + " --seed 1").out));
}

TEST(Cli, MakeDatasetWritesContainers) {
  const auto dir = fresh("dataset");
  const auto cfg = write_config(dir, render_config(tiny()));
  const auto r = nab_cli("make-dataset -q -c " + cfg.string() + " " + (dir / "data").string());
  ASSERT_EQ(r.status, 0) << r.out;
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "data")) files += e.path().extension() == ".nabsplit";
  EXPECT_GE(files, 2u);
}

TEST(Cli, ReportOnAnEmptyDirectoryFails) {
  const auto dir = fresh("empty");
  const auto r = nab_cli("report " + dir.string());
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("metrics"), std::string::npos) << r.out;
}

TEST(Cli, MissingSubcommandOrTargetClassIsRejected) {
  EXPECT_NE(nab_cli("").status, 0);
  EXPECT_NE(nab_cli("vaccinate").status, 0);
}

TEST(Cli, ShippedConfigsAreValid) {
  std::size_t seen = 0;
  for (const auto& e : fs::directory_iterator(fs::path(NAB_SOURCE_DIR) / "configs")) {
    if (e.path().extension() != ".json") continue;
    ++seen;
    const auto r = nab_cli("show-config -c " + e.path().string());
    EXPECT_EQ(r.status, 0) << e.path() << "\n" << r.out;
  }
  EXPECT_GT(seen, 0u);
}
