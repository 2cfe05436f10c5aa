#include "nab/serialize.hpp"

#include <fstream>

#include "nab/errors.hpp"

namespace nab {

namespace {

Json string_map(const std::map<std::string, std::string>& m) {
  Json j = Json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

std::map<std::string, std::string> string_map_from(const Json& j) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : j.items()) out[k] = v.get<std::string>();
  return out;
}

template <typename T>
void put_optional(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_optional(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed ") + what + " document: " + e.what());
  }
}

}  // namespace

Json to_json(const DetectionReport& report) {
  Json j;
  j["method"] = report.method;
  j["mu"] = report.mu;
  j["suspected_ids"] = report.suspected_ids;
  Json scores = Json::object();
  for (const auto& [id, s] : report.scores) scores[std::to_string(id)] = s;
  j["scores"] = std::move(scores);
  j["metadata"] = string_map(report.metadata);
  return j;
}

DetectionReport detection_report_from_json(const Json& j) {
  return guarded("detection report", [&] {
    DetectionReport r;
    r.method = j.at("method").get<std::string>();
    r.mu = j.at("mu").get<double>();
    r.suspected_ids = j.at("suspected_ids").get<std::vector<ExampleId>>();
    for (const auto& [k, v] : j.at("scores").items()) r.scores[std::stoull(k)] = v.get<double>();
    r.metadata = string_map_from(j.at("metadata"));
    return r;
  });
}

Json to_json(const PseudoLabelMap& map) {
  Json j;
  j["method"] = map.method;
  j["coverage"] = map.coverage;
  Json a = Json::object();
  for (const auto& [id, label] : map.assignments) a[std::to_string(id)] = label;
  j["assignments"] = std::move(a);
  j["metadata"] = string_map(map.metadata);
  return j;
}

PseudoLabelMap pseudo_label_map_from_json(const Json& j) {
  return guarded("pseudo label map", [&] {
    PseudoLabelMap m;
    m.method = j.at("method").get<std::string>();
    m.coverage = j.at("coverage").get<std::vector<ExampleId>>();
    for (const auto& [k, v] : j.at("assignments").items()) m.assignments[std::stoull(k)] = v.get<int>();
    m.metadata = string_map_from(j.at("metadata"));
    return m;
  });
}

Json to_json(const EpochRecord& record) {
  Json j;
  j["epoch"] = record.epoch;
  j["learning_rate"] = record.learning_rate;
  j["mean_loss"] = record.mean_loss;
  Json g = Json::object();
  for (const auto& [k, v] : record.group_loss) g[k] = v;
  j["group_loss"] = std::move(g);
  put_optional(j, "asr", record.asr);
  put_optional(j, "ca", record.ca);
  return j;
}

EpochRecord epoch_record_from_json(const Json& j) {
  return guarded("epoch record", [&] {
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.learning_rate = j.at("learning_rate").get<double>();
    r.mean_loss = j.at("mean_loss").get<double>();
    for (const auto& [k, v] : j.at("group_loss").items()) r.group_loss[k] = v.get<double>();
    r.asr = get_optional<double>(j, "asr");
    r.ca = get_optional<double>(j, "ca");
    return r;
  });
}

Json to_json(const MetricsReport& report) {
  Json j;
  j["mode"] = to_string(report.mode);
  j["seed"] = report.seed;
  j["config_hash"] = report.config_hash;
  j["asr"] = report.asr;
  j["ca"] = report.ca;
  j["ba"] = report.ba;
  put_optional(j, "c_rej", report.c_rej);
  put_optional(j, "psr", report.psr);
  put_optional(j, "b_rej", report.b_rej);
  put_optional(j, "dsr", report.dsr);
  Json epochs = Json::array();
  for (const auto& e : report.per_epoch) epochs.push_back(to_json(e));
  j["per_epoch"] = std::move(epochs);
  return j;
}

MetricsReport metrics_report_from_json(const Json& j) {
  return guarded("metrics", [&] {
    MetricsReport r;
    r.mode = parse_eval_mode(j.at("mode").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.asr = j.at("asr").get<double>();
    r.ca = j.at("ca").get<double>();
    r.ba = j.at("ba").get<double>();
    r.c_rej = get_optional<double>(j, "c_rej");
    r.psr = get_optional<double>(j, "psr");
    r.b_rej = get_optional<double>(j, "b_rej");
    r.dsr = get_optional<double>(j, "dsr");
    for (const auto& e : j.at("per_epoch")) r.per_epoch.push_back(epoch_record_from_json(e));
    return r;
  });
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace nab
