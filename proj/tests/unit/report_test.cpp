#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nab/errors.hpp"
#include "nab/report.hpp"

using namespace nab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Table, AlignsColumns) {
  const auto t = format_table({"mode", "CA"}, {{"plain", "99.00"}, {"defended", "9.50"}});
  EXPECT_EQ(t, "mode         CA\n"
               "---------------\n"
               "plain     99.00\n"
               "defended   9.50\n");
}

TEST(Table, PercentFormatting) {
  EXPECT_EQ(format_percent(12.345), "12.35");
  EXPECT_EQ(format_percent(std::nullopt), "-");
}

TEST(Table, MetricsTableShowsFilterValues) {
  MetricsReport plain;
  plain.ca = 90;
  plain.asr = 100;
  plain.ba = 10;
  MetricsReport filt = plain;
  filt.mode = EvalMode::kFiltered;
  filt.c_rej = 3;
  filt.dsr = 99.5;
  const auto t = metrics_table({{EvalMode::kPlain, plain}, {EvalMode::kFiltered, filt}});
  EXPECT_NE(t.find("C-REJ"), std::string::npos);
  EXPECT_NE(t.find("99.50"), std::string::npos);
  EXPECT_NE(t.find("plain"), std::string::npos);
}

TEST(Svg, LinePlotAndHeatmapAreWellFormed) {
  const auto svg = svg_line_plot("t", "epoch", "%", {{"ASR", {0, 1, 2}, {0, 50, 100}}, {"CA", {0, 1, 2}, {20, 40, 60}}});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("ASR"), std::string::npos);
  const auto hm = svg_heatmap("h", "da", "pla", {"0.2", "1"}, {"0.5"}, {{12.0}, {std::nullopt}});
  EXPECT_NE(hm.find("n/a"), std::string::npos);
  EXPECT_NE(hm.find("</svg>"), std::string::npos);
  // empty inputs still give a valid document
  EXPECT_NE(svg_line_plot("e", "x", "y", {}).find("</svg>"), std::string::npos);
}

TEST(Csv, InfeasibleCells) {
  EXPECT_EQ(matrix_csv("da\\pla", {"0.2", "1"}, {"0.5", "1"}, {{1.5, 2.0}, {std::nullopt, 4.25}}),
            "da\\pla,0.5,1\n0.2,1.5,2\n1,infeasible,4.25\n");
}

TEST(ReportDirectory, RerendersRunMetrics) {
  const auto dir = fs::temp_directory_path() / "nab_report_test_run";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "metrics.json") << R"({"config_hash": "abc", "modes": {"plain": {"asr": 100.0, "ca": 95.0,
    "ba": 5.0, "mode": "plain", "seed": 0, "config_hash": "abc",
    "per_epoch": [{"epoch": 0, "learning_rate": 0.1, "mean_loss": 1.0, "group_loss": {"clean": 1.0}, "asr": 50.0, "ca": 60.0}]}}})";
  const auto files = report_directory(dir);
  EXPECT_FALSE(files.empty());
  EXPECT_TRUE(fs::exists(dir / "summary.txt"));
  EXPECT_NE(slurp(dir / "summary.txt").find("95.00"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "asr_ca.svg"));
}

TEST(ReportDirectory, MissingArtifactsAreNamed) {
  const auto dir = fs::temp_directory_path() / "nab_report_test_empty";
  fs::remove_all(dir);
  fs::create_directories(dir);
  try {
    report_directory(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("metrics.json"), std::string::npos) << e.what();
  }
  EXPECT_THROW(report_directory(dir / "nope"), Error);
}
