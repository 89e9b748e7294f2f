#include "freqpatch/jpeg_harness.hpp"

#include <string>

#include "freqpatch/errors.hpp"
#include "freqpatch/imaging.hpp"

namespace freqpatch {

JpegSweepReport jpeg_eval(const DetectorModel& model, const Dataset& data, const Patch& patch,
                          std::span<const int> qualities, const MetricsConfig& cfg,
                          std::uint64_t seed, const EvalOptions& options,
                          std::vector<Patch>* compressed) {
  if (qualities.empty()) throw ContractViolation("jpeg_eval: no qualities given");
  for (int q : qualities) {
    if (q < 1 || q > 100) {
      throw ContractViolation("jpeg_eval: quality " + std::to_string(q) + " outside 1..100");
    }
  }
  JpegSweepReport sweep;
  sweep.lossless = evaluate_patch(model, data, &patch, nullptr, cfg, seed, options);
  for (int q : qualities) {
    Patch reloaded(jpeg_roundtrip(patch.pixels(), q));
    JpegRecord rec;
    rec.quality = q;
    rec.report = evaluate_patch(model, data, &reloaded, nullptr, cfg, seed, options);
    rec.delta_asr = sweep.lossless.asr - rec.report.asr;
    rec.delta_asr_l = sweep.lossless.asr_l - rec.report.asr_l;
    rec.delta_asr_m = sweep.lossless.asr_m - rec.report.asr_m;
    rec.delta_asr_s = sweep.lossless.asr_s - rec.report.asr_s;
    sweep.records.push_back(std::move(rec));
    if (compressed != nullptr) compressed->push_back(std::move(reloaded));
  }
  return sweep;
}

}  // namespace freqpatch
