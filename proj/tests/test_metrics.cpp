#include <gtest/gtest.h>

#include "freqpatch/dataset.hpp"
#include "freqpatch/errors.hpp"
#include "freqpatch/metrics.hpp"
#include "test_util.hpp"

using namespace freqpatch;

namespace {

// Independent overlap arithmetic for the oracle.
double oracle_iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double ih = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = iw * ih;
  const double uni = (a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// Exhaustive all-pairs check: a box survives when any prediction reaches t.
double brute_force_asr(const std::vector<BoundingBox>& gt, const std::vector<Detection>& preds, double t) {
  if (gt.empty()) return 0.0;
  int gone = 0;
  for (const auto& g : gt) {
    bool matched = false;
    for (const auto& p : preds) {
      if (oracle_iou(g, p.box) >= t) matched = true;
    }
    if (!matched) ++gone;
  }
  return static_cast<double>(gone) / static_cast<double>(gt.size());
}

Detection det(const BoundingBox& b, double s = 0.9) { return {b, s, 0}; }

// A box shifted right so that its IOU with the original is exactly r.
BoundingBox shifted_for_iou(const BoundingBox& b, double r) {
  // width w, overlap w - d: iou = (w - d) / (w + d)  =>  d = w (1 - r) / (1 + r)
  const double d = b.width() * (1 - r) / (1 + r);
  return {b.x_min + d, b.y_min, b.x_max + d, b.y_max};
}

}  // namespace

TEST(SizeBucket, Thresholds) {
  const MetricsConfig cfg;
  const auto box_with_height = [](double h) { return BoundingBox{0.1, 0.0, 0.3, h}; };
  EXPECT_EQ(size_bucket(box_with_height(0.2), 100, cfg), SizeBucket::kSmall);
  EXPECT_EQ(size_bucket(box_with_height(0.45), 100, cfg), SizeBucket::kMedium);
  EXPECT_EQ(size_bucket(box_with_height(0.3), 100, cfg), SizeBucket::kMedium);
  EXPECT_EQ(size_bucket(box_with_height(0.6), 100, cfg), SizeBucket::kMedium);
  EXPECT_EQ(size_bucket(box_with_height(0.61), 100, cfg), SizeBucket::kLarge);
}

TEST(Asr, Examples) {
  const MetricsConfig cfg;
  const std::vector<BoundingBox> gt3 = {{0.1, 0.1, 0.2, 0.3}, {0.4, 0.4, 0.5, 0.6}, {0.7, 0.1, 0.9, 0.5}};
  EXPECT_DOUBLE_EQ(attack_success_rate(gt3, {}, cfg), 1.0);

  std::vector<Detection> close;
  for (const auto& g : gt3) close.push_back(det(shifted_for_iou(g, 0.9)));
  EXPECT_NEAR(oracle_iou(gt3[0], close[0].box), 0.9, 1e-9);
  EXPECT_DOUBLE_EQ(attack_success_rate(gt3, close, cfg), 0.0);

  const std::vector<BoundingBox> gt2 = {{0.1, 0.1, 0.3, 0.4}, {0.5, 0.5, 0.7, 0.9}};
  const std::vector<Detection> mixed = {det(shifted_for_iou(gt2[0], 0.6)), det(shifted_for_iou(gt2[1], 0.4))};
  EXPECT_DOUBLE_EQ(attack_success_rate(gt2, mixed, cfg), 0.5);
  EXPECT_DOUBLE_EQ(attack_success_rate(gt2, mixed, cfg), brute_force_asr(gt2, mixed, 0.5));
}

TEST(Asr, EmptyGroundTruthIsFlagged) {
  const AsrResult r = attack_success_rate_checked({}, {}, MetricsConfig{});
  EXPECT_TRUE(r.empty_gt);
  EXPECT_EQ(r.asr, 0.0);
}

TEST(Asr, MatchesBruteForceOracle) {
  Rng rng(1);
  const MetricsConfig cfg;
  for (int t = 0; t < 1000; ++t) {
    std::vector<BoundingBox> gt;
    std::vector<Detection> preds;
    const int ng = rng.uniform_int(0, 5);
    const int np = rng.uniform_int(0, 5);
    for (int i = 0; i < ng; ++i) gt.push_back(testutil::random_box(rng));
    for (int i = 0; i < np; ++i) {
      // Half the predictions are perturbed copies of a GT box so matches occur.
      if (ng > 0 && rng.uniform() < 0.5) {
        BoundingBox b = gt[rng.uniform_int(0, ng - 1)];
        const double dx = rng.uniform(-0.05, 0.05);
        const double dy = rng.uniform(-0.05, 0.05);
        b = {std::clamp(b.x_min + dx, 0.0, 0.98), std::clamp(b.y_min + dy, 0.0, 0.98),
             std::clamp(b.x_max + dx, 0.02, 1.0), std::clamp(b.y_max + dy, 0.02, 1.0)};
        if (b.x_min >= b.x_max || b.y_min >= b.y_max) b = testutil::random_box(rng);
        preds.push_back(det(b, rng.uniform()));
      } else {
        preds.push_back(det(testutil::random_box(rng), rng.uniform()));
      }
    }
    ASSERT_EQ(attack_success_rate(gt, preds, cfg), brute_force_asr(gt, preds, cfg.t_iou)) << "instance " << t;
  }
}

TEST(Asr, MonotoneInPredictions) {
  Rng rng(2);
  const MetricsConfig cfg;
  for (int t = 0; t < 200; ++t) {
    std::vector<BoundingBox> gt;
    for (int i = 0; i < 4; ++i) gt.push_back(testutil::random_box(rng));
    std::vector<Detection> preds;
    for (int i = 0; i < 4; ++i) {
      preds.push_back(det(i % 2 ? testutil::random_box(rng) : shifted_for_iou(gt[i], rng.uniform(0.3, 0.9))));
    }
    const double base = attack_success_rate(gt, preds, cfg);
    std::vector<Detection> fewer(preds.begin() + 1, preds.end());
    EXPECT_GE(attack_success_rate(gt, fewer, cfg), base);
    std::vector<Detection> more = preds;
    more.push_back(det(testutil::random_box(rng)));
    EXPECT_LE(attack_success_rate(gt, more, cfg), base);
  }
}

TEST(Asr, VanishedFlagsPerBox) {
  const std::vector<BoundingBox> gt = {{0.1, 0.1, 0.3, 0.4}, {0.5, 0.5, 0.7, 0.9}};
  const std::vector<Detection> preds = {det(gt[1])};
  const std::vector<bool> f = vanished_flags(gt, preds, 0.5);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_TRUE(f[0]);
  EXPECT_FALSE(f[1]);
}

TEST(MetricsConfig, Validation) {
  EXPECT_NO_THROW(MetricsConfig{}.validate());
  EXPECT_THROW((MetricsConfig{0.0, 0.3, 0.6}).validate(), ContractViolation);
  EXPECT_THROW((MetricsConfig{0.5, 0.6, 0.3}).validate(), ContractViolation);
  EXPECT_THROW((MetricsConfig{0.5, 0.3, 1.0}).validate(), ContractViolation);
}

class EvalReportIdentities : public ::testing::TestWithParam<int> {};

TEST_P(EvalReportIdentities, PartitionAndWeightedSum) {
  const int seed = GetParam();
  const Dataset data = generate_synthetic_dataset(40, 64, seed);
  DetectorConfig dc;
  dc.input_side = 64;
  dc.grid_size = 8;
  dc.objectness_threshold = 0.3;
  const DetectorModel model(dc, seed);
  const Patch p = make_random_patch(16, seed);
  const MetricsConfig cfg;
  for (const EvalReport& r : {evaluate_patch(model, data, nullptr, nullptr, cfg, 1),
                              evaluate_patch(model, data, &p, nullptr, cfg, 1)}) {
    long total = 0;
    for (const auto& s : data) total += static_cast<long>(s.gt_boxes.size());
    EXPECT_EQ(r.objects.total(), total);
    EXPECT_EQ(r.images, 40);
    const double n = static_cast<double>(r.objects.total());
    const double weighted = (r.objects.small * r.asr_s + r.objects.medium * r.asr_m + r.objects.large * r.asr_l) / n;
    EXPECT_NEAR(r.asr, weighted, 1e-12);
    EXPECT_EQ(r.vanished.total(), r.vanished.small + r.vanished.medium + r.vanished.large);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, EvalReportIdentities, ::testing::Values(1, 2, 3));

TEST(EvaluatePatch, DeterministicAndModeTagged) {
  const Dataset data = generate_synthetic_dataset(10, 64, 4);
  DetectorConfig dc;
  dc.input_side = 64;
  dc.grid_size = 8;
  const DetectorModel model(dc, 5);
  const Patch p = make_random_patch(16, 6);
  EvalOptions opt;
  opt.augment = AugmentConfig{};
  opt.mode = EvalMode::kRandom;
  const EvalReport a = evaluate_patch(model, data, &p, nullptr, MetricsConfig{}, 9, opt);
  const EvalReport b = evaluate_patch(model, data, &p, nullptr, MetricsConfig{}, 9, opt);
  EXPECT_EQ(a.asr, b.asr);
  EXPECT_EQ(a.vanished, b.vanished);
  EXPECT_EQ(a.mode, EvalMode::kRandom);
  EXPECT_EQ(evaluate_patch(model, data, nullptr, nullptr, MetricsConfig{}, 9).mode, EvalMode::kClean);
  const FrequencyMask theta(16, 16, 1.0);
  EXPECT_TRUE(evaluate_patch(model, data, &p, &theta, MetricsConfig{}, 9).fran_applied);
}

TEST(EvaluatePatch, EmptyGroundTruthImagesCounted) {
  Dataset data = generate_synthetic_dataset(3, 64, 7);
  data[1].gt_boxes.clear();
  DetectorConfig dc;
  dc.input_side = 64;
  dc.grid_size = 8;
  const EvalReport r = evaluate_patch(DetectorModel(dc, 1), data, nullptr, nullptr, MetricsConfig{}, 0);
  EXPECT_EQ(r.empty_gt_images, 1);
  EXPECT_EQ(r.objects.total(), static_cast<long>(data[0].gt_boxes.size() + data[2].gt_boxes.size()));
}
