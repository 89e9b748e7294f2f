#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "freqpatch/box.hpp"
#include "freqpatch/dataset.hpp"
#include "freqpatch/detector.hpp"
#include "freqpatch/fran.hpp"
#include "freqpatch/patch.hpp"
#include "freqpatch/render.hpp"

namespace freqpatch {

struct MetricsConfig {
  double t_iou = 0.5;
  double eps0 = 0.3;
  double eps1 = 0.6;

  // 0 < t_iou < 1 and 0 < eps0 < eps1 < 1.
  void validate() const;
  friend bool operator==(const MetricsConfig&, const MetricsConfig&) = default;
};

enum class SizeBucket { kSmall, kMedium, kLarge };
std::string_view to_string(SizeBucket b);

// Height ratio eps = box pixel height / image height: small below eps0,
// medium on [eps0, eps1], large above eps1.
SizeBucket size_bucket(const BoundingBox& box, int image_h, const MetricsConfig& cfg);

// One flag per ground-truth box: true when no prediction overlaps it with
// iou >= t_iou.
std::vector<bool> vanished_flags(std::span<const BoundingBox> gt,
                                 std::span<const Detection> preds, double t_iou);

struct AsrResult {
  double asr = 0.0;
  bool empty_gt = false;  // asr is defined as 0 in that case
};

AsrResult attack_success_rate_checked(std::span<const BoundingBox> gt,
                                      std::span<const Detection> preds, const MetricsConfig& cfg);
double attack_success_rate(std::span<const BoundingBox> gt, std::span<const Detection> preds,
                           const MetricsConfig& cfg);

enum class EvalMode { kClean, kRandom, kPatched };
std::string_view to_string(EvalMode m);

struct BucketCounts {
  long small = 0;
  long medium = 0;
  long large = 0;

  [[nodiscard]] long total() const { return small + medium + large; }
  long& operator[](SizeBucket b) {
    return b == SizeBucket::kSmall ? small : (b == SizeBucket::kMedium ? medium : large);
  }
  friend bool operator==(const BucketCounts&, const BucketCounts&) = default;
};

struct EvalOptions {
  EvalMode mode = EvalMode::kPatched;
  double scale_ratio = kDefaultScaleRatio;
  AugmentConfig augment = AugmentConfig::disabled();
  bool use_ycbcr = true;  // only used when a mask is supplied
  bool keep_predictions = false;
};

struct EvalReport {
  double asr = 0.0;
  double asr_l = 0.0;
  double asr_m = 0.0;
  double asr_s = 0.0;
  BucketCounts objects;
  BucketCounts vanished;
  long images = 0;
  long empty_gt_images = 0;
  EvalMode mode = EvalMode::kClean;
  bool fran_applied = false;
  MetricsConfig config;
  EvalOptions options;
  std::uint64_t seed = 0;
  std::vector<std::vector<Detection>> predictions;  // filled on request
};

// Runs the detector over every sample, pasting the patch (passed through the
// frequency module first when a mask is given) unless patch is null.
EvalReport evaluate_patch(const DetectorModel& model, const Dataset& data, const Patch* patch,
                          const FrequencyMask* theta, const MetricsConfig& cfg,
                          std::uint64_t seed, const EvalOptions& options = {});

}  // namespace freqpatch
