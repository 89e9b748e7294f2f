#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "freqpatch/metrics.hpp"

namespace freqpatch {

inline constexpr int kDefaultJpegQualities[] = {50, 75, 95};

struct JpegRecord {
  int quality = 0;
  EvalReport report;
  // lossless metric minus compressed metric
  double delta_asr = 0.0;
  double delta_asr_l = 0.0;
  double delta_asr_m = 0.0;
  double delta_asr_s = 0.0;
};

struct JpegSweepReport {
  EvalReport lossless;
  std::vector<JpegRecord> records;
};

// Evaluates the patch as stored, then again after a JPEG round trip at each
// quality. The frequency module is never re-applied here: the patch is the
// final artifact. compressed, when given, receives the decoded patches.
JpegSweepReport jpeg_eval(const DetectorModel& model, const Dataset& data, const Patch& patch,
                          std::span<const int> qualities, const MetricsConfig& cfg,
                          std::uint64_t seed, const EvalOptions& options = {},
                          std::vector<Patch>* compressed = nullptr);

}  // namespace freqpatch
