#pragma once

#include <filesystem>
#include "json.hpp"
#include <string>

#include "nab/detection.hpp"
#include "nab/metrics.hpp"
#include "nab/relabel.hpp"

namespace nab {

using Json = nlohmann::ordered_json;

Json to_json(const DetectionReport& report);
DetectionReport detection_report_from_json(const Json& j);

Json to_json(const PseudoLabelMap& map);
PseudoLabelMap pseudo_label_map_from_json(const Json& j);

Json to_json(const EpochRecord& record);
EpochRecord epoch_record_from_json(const Json& j);

Json to_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const Json& j);

/// Pretty-printed, newline-terminated.
void write_json(const std::filesystem::path& path, const Json& j);
/// Throws LoadError when the file is missing, FormatError when it does not parse.
Json read_json(const std::filesystem::path& path);

}  // namespace nab
