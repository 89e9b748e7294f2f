#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqpatch/jpeg_harness.hpp"
#include "freqpatch/metrics.hpp"
#include "freqpatch/optimize.hpp"

namespace freqpatch::cli {

using Json = nlohmann::ordered_json;

class SchemaError : public Error {
 public:
  using Error::Error;
};

Json to_json(const MetricsConfig& cfg);
Json to_json(const AugmentConfig& cfg);
Json to_json(const EvalReport& report);
Json to_json(const JpegSweepReport& report);
Json to_json(const TrainHistory& history);

MetricsConfig metrics_config_from_json(const Json& j);
AugmentConfig augment_config_from_json(const Json& j);
EvalReport eval_report_from_json(const Json& j);
JpegSweepReport jpeg_report_from_json(const Json& j);

// Throws SchemaError naming the first missing or mistyped field. The "kind"
// key selects the schema: "eval_report", "jpeg_sweep" or "train_history".
void check_report_schema(const Json& j);

// Two-space indented, keys in insertion order, trailing newline.
std::string render_json(const Json& j);

// Schema-checked before anything touches the disk.
void write_report(const Json& j, const std::filesystem::path& path);
void write_report(const EvalReport& report, const std::filesystem::path& path);
void write_report(const JpegSweepReport& report, const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
EvalReport read_eval_report(const std::filesystem::path& path);
JpegSweepReport read_jpeg_report(const std::filesystem::path& path);

// One line per image: {"image": i, "detections": [{"box": [...], "objectness": s}, ...]}
void write_predictions(const std::filesystem::path& path,
                       std::span<const std::vector<Detection>> predictions);

}  // namespace freqpatch::cli
