#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "freqpatch/cli/reports.hpp"
#include "freqpatch/detector.hpp"
#include "freqpatch/optimize.hpp"

namespace freqpatch::cli {

// Everything a command needs besides its input/output paths. The seed is
// shared by every stage; train.seed and detector_train.seed follow it.
struct RunConfig {
  AttackMode mode = AttackMode::kOurs;
  std::string run_dir;
  std::uint64_t seed = 0;
  TrainConfig train;  // carries the metrics and augment sections
  DetectorConfig detector;
  DetectorTrainConfig detector_train;
  int data_n = 100;
  int image_side = 128;
  std::vector<int> jpeg_qualities = {50, 75, 95};
};

Json to_json(const RunConfig& cfg);
// Starts from base and overrides the keys present in j. Unknown keys are
// rejected so typos do not pass silently.
RunConfig run_config_from_json(const Json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);
void write_run_config(const RunConfig& cfg, const std::filesystem::path& path);

// Copies seed into the stage configs and applies the mode preset. Idempotent.
RunConfig finalize(RunConfig cfg);

}  // namespace freqpatch::cli
