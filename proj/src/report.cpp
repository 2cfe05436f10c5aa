#include "nab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "nab/errors.hpp"
#include "nab/serialize.hpp"

namespace nab {

std::string format_table(const std::vector<std::string>& headers, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) width[c] = headers[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      const std::string pad(width[c] - cell.size(), ' ');
      if (c > 0) out += "  ";
      out += c == 0 ? cell + pad : pad + cell;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(headers);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string format_percent(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

std::string metrics_table(const std::map<EvalMode, MetricsReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [mode, r] : reports) {
    rows.push_back({to_string(mode), format_percent(r.ca), format_percent(r.asr), format_percent(r.ba),
                    format_percent(r.c_rej), format_percent(r.psr), format_percent(r.b_rej), format_percent(r.dsr)});
  }
  return format_table({"mode", "CA", "ASR", "BA", "C-REJ", "PSR", "B-REJ", "DSR"}, rows);
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Roughly five round tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t);
  return out;
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<PlotSeries>& series) {
  constexpr double W = 640, H = 400, L = 64, R = 150, T = 36, B = 48;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymin > 0 && ymin < 0.5 * ymax) ymin = 0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  const double pw = W - L - R, ph = H - T - B;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return T + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << L + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
  for (double t : ticks(ymin, ymax)) {
    o << "<line x1=\"" << L << "\" x2=\"" << L + pw << "\" y1=\"" << py(t) << "\" y2=\"" << py(t)
      << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  for (double t : ticks(xmin, xmax)) {
    o << "<text x=\"" << px(t) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << esc(x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << T + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << esc(y_label)
    << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (std::isfinite(s.y[i])) o << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
    o << "\"/>\n";
    const double ly = T + 14 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << L + pw + 10 << "\" x2=\"" << L + pw + 30 << "\" y1=\"" << ly - 4 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << L + pw + 36 << "\" y=\"" << ly << "\">" << esc(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string svg_heatmap(const std::string& title, const std::string& row_label, const std::string& col_label,
                        const std::vector<std::string>& rows, const std::vector<std::string>& cols,
                        const std::vector<std::vector<std::optional<double>>>& values) {
  constexpr double cell = 56, L = 90, T = 50;
  const double W = L + cell * static_cast<double>(cols.size()) + 30;
  const double H = T + cell * static_cast<double>(rows.size()) + 50;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : values)
    for (const auto& v : r)
      if (v) lo = std::min(lo, *v), hi = std::max(hi, *v);
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) hi = lo + 1;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">"
       "<rect width=\"6\" height=\"6\" fill=\"#dddddd\"/><path d=\"M0,6 L6,0\" stroke=\"#999999\"/></pattern></defs>\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
  o << "<text x=\"" << L + cell * static_cast<double>(cols.size()) / 2 << "\" y=\"" << H - 8
    << "\" text-anchor=\"middle\">" << esc(col_label) << "</text>\n";
  o << "<text x=\"12\" y=\"" << T - 10 << "\">" << esc(row_label) << "</text>\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double y = T + cell * static_cast<double>(r);
    o << "<text x=\"" << L - 8 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"end\">" << esc(rows[r])
      << "</text>\n";
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double x = L + cell * static_cast<double>(c);
      const auto v = r < values.size() && c < values[r].size() ? values[r][c] : std::nullopt;
      std::string fill = "url(#hatch)";
      if (v) {
        const double t = (*v - lo) / (hi - lo);
        char buf[16];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(255 - 200 * t), static_cast<int>(255 - 120 * t),
                      255);
        fill = buf;
      }
      o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
        << fill << "\" stroke=\"white\"/>\n";
      o << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\">"
        << (v ? format_percent(v) : "n/a") << "</text>\n";
    }
  }
  for (std::size_t c = 0; c < cols.size(); ++c) {
    o << "<text x=\"" << L + cell * (static_cast<double>(c) + 0.5) << "\" y=\"" << T - 8
      << "\" text-anchor=\"middle\">" << esc(cols[c]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string matrix_csv(const std::string& corner, const std::vector<std::string>& rows,
                       const std::vector<std::string>& cols,
                       const std::vector<std::vector<std::optional<double>>>& values) {
  std::ostringstream o;
  o << corner;
  for (const auto& c : cols) o << ',' << c;
  o << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    o << rows[r];
    for (std::size_t c = 0; c < cols.size(); ++c) {
      o << ',';
      if (values[r][c]) o << num(*values[r][c]);
      else o << "infeasible";
    }
    o << '\n';
  }
  return o.str();
}

std::string asr_ca_plot(const std::vector<EpochRecord>& epochs, const std::string& title) {
  PlotSeries asr{"ASR", {}, {}}, ca{"CA", {}, {}};
  for (const auto& e : epochs) {
    if (e.asr) asr.x.push_back(e.epoch + 1), asr.y.push_back(*e.asr);
    if (e.ca) ca.x.push_back(e.epoch + 1), ca.y.push_back(*e.ca);
  }
  return svg_line_plot(title, "epoch", "%", {asr, ca});
}

std::string loss_plot(const std::vector<EpochRecord>& epochs, const std::string& title) {
  std::set<std::string> groups;
  for (const auto& e : epochs)
    for (const auto& [g, _] : e.group_loss) groups.insert(g);
  std::vector<PlotSeries> series;
  for (const auto& g : groups) {
    PlotSeries s{g, {}, {}};
    for (const auto& e : epochs) {
      auto it = e.group_loss.find(g);
      if (it != e.group_loss.end()) s.x.push_back(e.epoch + 1), s.y.push_back(it->second);
    }
    series.push_back(std::move(s));
  }
  return svg_line_plot(title, "epoch", "mean training loss", series);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

namespace {

std::vector<std::filesystem::path> report_run(const std::filesystem::path& dir) {
  const Json j = read_json(dir / "metrics.json");
  std::map<EvalMode, MetricsReport> reports;
  try {
    for (const auto& [mode, r] : j.at("modes").items()) reports[parse_eval_mode(mode)] = metrics_report_from_json(r);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("metrics.json: " + std::string(e.what()));
  }
  if (reports.empty()) throw FormatError("metrics.json holds no evaluation modes");
  std::string text = metrics_table(reports);
  for (const char* key : {"detection_accuracy", "pseudo_label_accuracy", "stamp_rate"}) {
    if (j.contains(key) && j.at(key).is_number()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s: %.4f\n", key, j.at(key).get<double>());
      text += buf;
    }
  }
  std::vector<std::filesystem::path> written{dir / "summary.txt", dir / "asr_ca.svg", dir / "loss.svg"};
  write_text(written[0], text);
  const auto& epochs = reports.begin()->second.per_epoch;
  write_text(written[1], asr_ca_plot(epochs, "ASR and CA per epoch"));
  write_text(written[2], loss_plot(epochs, "Training loss by group"));
  return written;
}

std::vector<std::filesystem::path> report_sweep(const std::filesystem::path& dir) {
  const Json j = read_json(dir / "sweep.json");
  std::vector<std::filesystem::path> written;
  try {
    const auto rows = j.at("rows").get<std::vector<double>>();
    const auto cols = j.at("cols").get<std::vector<double>>();
    const auto row_label = j.at("row_label").get<std::string>();
    const auto col_label = j.at("col_label").get<std::string>();
    std::vector<std::string> rn, cn;
    for (double r : rows) rn.push_back(num(r));
    for (double c : cols) cn.push_back(num(c));
    std::vector<std::vector<std::string>> table;
    const auto metrics = j.at("metrics").get<std::vector<std::string>>();
    std::map<std::string, std::vector<std::vector<std::optional<double>>>> grids;
    for (const auto& m : metrics) grids[m].assign(rows.size(), std::vector<std::optional<double>>(cols.size()));
    for (const auto& cell : j.at("cells")) {
      const auto r = cell.at("row_index").get<std::size_t>();
      const auto c = cell.at("col_index").get<std::size_t>();
      std::vector<std::string> line{num(rows.at(r)), num(cols.at(c)), cell.at("status").get<std::string>()};
      for (const auto& m : metrics) {
        std::optional<double> v;
        if (cell.contains("metrics") && cell.at("metrics").contains(m)) v = cell.at("metrics").at(m).get<double>();
        grids[m].at(r).at(c) = v;
        line.push_back(format_percent(v));
      }
      table.push_back(std::move(line));
    }
    std::vector<std::string> headers{row_label, col_label, "status"};
    for (const auto& m : metrics) headers.push_back(m);
    written.push_back(dir / "summary.txt");
    write_text(written.back(), format_table(headers, table));
    for (const auto& m : metrics) {
      written.push_back(dir / (m + ".csv"));
      write_text(written.back(), matrix_csv(row_label + "\\" + col_label, rn, cn, grids[m]));
      written.push_back(dir / (m + ".svg"));
      write_text(written.back(), svg_heatmap(m, row_label, col_label, rn, cn, grids[m]));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("sweep.json: " + std::string(e.what()));
  } catch (const std::out_of_range& e) {
    throw FormatError("sweep.json: cell index out of range");
  }
  return written;
}

std::vector<std::filesystem::path> report_vaccination(const std::filesystem::path& dir) {
  const Json j = read_json(dir / "vaccination.json");
  std::vector<PlotSeries> series;
  std::vector<std::vector<std::string>> table;
  try {
    for (const auto& [name, run] : j.at("runs").items()) {
      PlotSeries s{name, {}, {}};
      for (const auto& e : run.at("per_epoch")) {
        const auto rec = epoch_record_from_json(e);
        if (rec.asr) s.x.push_back(rec.epoch + 1), s.y.push_back(*rec.asr);
      }
      const auto m = metrics_report_from_json(run.at("metrics"));
      table.push_back({name, format_percent(m.ca), format_percent(m.asr), format_percent(m.ba)});
      series.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("vaccination.json: " + std::string(e.what()));
  }
  std::vector<std::filesystem::path> written{dir / "summary.txt", dir / "vaccination_asr.svg"};
  write_text(written[0], format_table({"run", "CA", "ASR", "BA"}, table));
  write_text(written[1], svg_line_plot("Attack success rate per epoch", "epoch", "ASR (%)", series));
  return written;
}

}  // namespace

std::vector<std::filesystem::path> report_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw LoadError("report: " + dir.string() + " is not a directory");
  if (std::filesystem::exists(dir / "metrics.json")) return report_run(dir);
  if (std::filesystem::exists(dir / "sweep.json")) return report_sweep(dir);
  if (std::filesystem::exists(dir / "vaccination.json")) return report_vaccination(dir);
  throw LoadError("report: " + dir.string() + " is missing metrics.json (run), sweep.json (sweep) or "
                  "vaccination.json (vaccination)");
}

}  // namespace nab
