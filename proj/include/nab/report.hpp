#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nab/metrics.hpp"

namespace nab {

/// Left-aligned first column, right-aligned remaining columns.
std::string format_table(const std::vector<std::string>& headers, const std::vector<std::vector<std::string>>& rows);

/// Two decimals, or "-" when absent.
std::string format_percent(std::optional<double> v);

/// One row per evaluation mode: CA, ASR, BA, then the filter columns C-REJ, PSR, B-REJ, DSR.
std::string metrics_table(const std::map<EvalMode, MetricsReport>& reports);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<PlotSeries>& series);

/// Cells with no value (infeasible) are drawn hatched grey.
std::string svg_heatmap(const std::string& title, const std::string& row_label, const std::string& col_label,
                        const std::vector<std::string>& rows, const std::vector<std::string>& cols,
                        const std::vector<std::vector<std::optional<double>>>& values);

/// Matrix CSV: header row is `corner,cols...`, then one row per row label.
std::string matrix_csv(const std::string& corner, const std::vector<std::string>& rows,
                       const std::vector<std::string>& cols,
                       const std::vector<std::vector<std::optional<double>>>& values);

/// ASR/CA vs epoch and loss-by-group vs epoch.
std::string asr_ca_plot(const std::vector<EpochRecord>& epochs, const std::string& title);
std::string loss_plot(const std::vector<EpochRecord>& epochs, const std::string& title);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Re-renders tables and plots from a run or sweep directory. Returns the files written.
/// Throws Error naming the missing artifacts when the directory holds neither.
std::vector<std::filesystem::path> report_directory(const std::filesystem::path& dir);

}  // namespace nab
