#include "freqpatch/metrics.hpp"

#include <algorithm>

#include "freqpatch/errors.hpp"
#include "freqpatch/rng.hpp"

namespace freqpatch {

void MetricsConfig::validate() const {
  if (!(t_iou > 0.0 && t_iou < 1.0)) throw ContractViolation("t_iou must be in (0,1)");
  if (!(eps0 > 0.0 && eps0 < eps1 && eps1 < 1.0)) {
    throw ContractViolation("size thresholds must satisfy 0 < eps0 < eps1 < 1");
  }
}

std::string_view to_string(SizeBucket b) {
  switch (b) {
    case SizeBucket::kSmall: return "small";
    case SizeBucket::kMedium: return "medium";
    case SizeBucket::kLarge: return "large";
  }
  return "unknown";
}

std::string_view to_string(EvalMode m) {
  switch (m) {
    case EvalMode::kClean: return "clean";
    case EvalMode::kRandom: return "random";
    case EvalMode::kPatched: return "patched";
  }
  return "unknown";
}

SizeBucket size_bucket(const BoundingBox& box, int image_h, const MetricsConfig& cfg) {
  if (image_h < 1) throw ContractViolation("size_bucket: image height must be >= 1");
  // Boxes are normalised by image height, so the pixel ratio is the
  // normalised height itself.
  const double eps = box.height();
  if (eps < cfg.eps0) return SizeBucket::kSmall;
  if (eps <= cfg.eps1) return SizeBucket::kMedium;
  return SizeBucket::kLarge;
}

std::vector<bool> vanished_flags(std::span<const BoundingBox> gt,
                                 std::span<const Detection> preds, double t_iou) {
  std::vector<bool> flags(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    flags[i] = std::none_of(preds.begin(), preds.end(),
                            [&](const Detection& d) { return iou(gt[i], d.box) >= t_iou; });
  }
  return flags;
}

AsrResult attack_success_rate_checked(std::span<const BoundingBox> gt,
                                      std::span<const Detection> preds, const MetricsConfig& cfg) {
  if (gt.empty()) return {0.0, true};
  const std::vector<bool> flags = vanished_flags(gt, preds, cfg.t_iou);
  const auto vanished = std::count(flags.begin(), flags.end(), true);
  return {static_cast<double>(vanished) / static_cast<double>(gt.size()), false};
}

double attack_success_rate(std::span<const BoundingBox> gt, std::span<const Detection> preds,
                           const MetricsConfig& cfg) {
  return attack_success_rate_checked(gt, preds, cfg).asr;
}

EvalReport evaluate_patch(const DetectorModel& model, const Dataset& data, const Patch* patch,
                          const FrequencyMask* theta, const MetricsConfig& cfg,
                          std::uint64_t seed, const EvalOptions& options) {
  cfg.validate();
  EvalReport report;
  report.config = cfg;
  report.options = options;
  report.seed = seed;
  report.mode = patch == nullptr ? EvalMode::kClean : options.mode;
  report.options.mode = report.mode;

  Patch effective;
  if (patch != nullptr) {
    if (theta != nullptr) {
      effective = fran_forward(*patch, *theta, FranOptions{options.use_ycbcr});
      report.fran_applied = true;
    } else {
      effective = *patch;
    }
  }

  for (std::size_t i = 0; i < data.size(); ++i) {
    const DatasetSample& sample = data[i];
    ++report.images;
    const ImageTensor* image = &sample.image;
    ImageTensor rendered;
    if (patch != nullptr) {
      rendered = render_patch(sample.image, sample.gt_boxes, effective, options.scale_ratio,
                              options.augment, derive_seed(seed, i));
      image = &rendered;
    }
    std::vector<Detection> dets = detect(model, *image);
    if (sample.gt_boxes.empty()) ++report.empty_gt_images;
    const std::vector<bool> flags = vanished_flags(sample.gt_boxes, dets, cfg.t_iou);
    for (std::size_t b = 0; b < sample.gt_boxes.size(); ++b) {
      const SizeBucket bucket = size_bucket(sample.gt_boxes[b], sample.image.height(), cfg);
      ++report.objects[bucket];
      if (flags[b]) ++report.vanished[bucket];
    }
    if (options.keep_predictions) report.predictions.push_back(std::move(dets));
  }
  auto rate = [](long v, long n) { return n == 0 ? 0.0 : static_cast<double>(v) / static_cast<double>(n); };
  report.asr = rate(report.vanished.total(), report.objects.total());
  report.asr_s = rate(report.vanished.small, report.objects.small);
  report.asr_m = rate(report.vanished.medium, report.objects.medium);
  report.asr_l = rate(report.vanished.large, report.objects.large);
  return report;
}

}  // namespace freqpatch
