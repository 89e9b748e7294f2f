#include <gtest/gtest.h>

#include "freqpatch/errors.hpp"
#include "freqpatch/imaging.hpp"
#include "freqpatch/jpeg_harness.hpp"
#include "test_util.hpp"

using namespace freqpatch;

namespace {

DetectorModel small_model() {
  DetectorConfig c;
  c.input_side = 64;
  c.grid_size = 8;
  c.base_channels = 8;
  c.objectness_threshold = 0.018;
  return DetectorModel(c, 23);
}

}  // namespace

TEST(JpegSweep, DeltasAndCompressedArtifacts) {
  const Dataset data = generate_synthetic_dataset(15, 64, 40);
  const Patch patch = testutil::random_patch(24, 41);
  const std::vector<int> q = {50, 75, 95};
  std::vector<Patch> compressed;
  const JpegSweepReport rep = jpeg_eval(small_model(), data, patch, q, MetricsConfig{}, 3, {}, &compressed);
  const EvalReport lossless = evaluate_patch(small_model(), data, &patch, nullptr, MetricsConfig{}, 3);
  EXPECT_EQ(rep.lossless.asr, lossless.asr);
  ASSERT_EQ(rep.records.size(), 3u);
  ASSERT_EQ(compressed.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const JpegRecord& r = rep.records[i];
    EXPECT_EQ(r.quality, q[i]);
    EXPECT_EQ(r.delta_asr, rep.lossless.asr - r.report.asr);
    EXPECT_EQ(r.delta_asr_l, rep.lossless.asr_l - r.report.asr_l);
    EXPECT_EQ(r.delta_asr_m, rep.lossless.asr_m - r.report.asr_m);
    EXPECT_EQ(r.delta_asr_s, rep.lossless.asr_s - r.report.asr_s);
    EXPECT_EQ(compressed[i].pixels(), jpeg_roundtrip(patch.pixels(), q[i]));
    const EvalReport direct = evaluate_patch(small_model(), data, &compressed[i], nullptr, MetricsConfig{}, 3);
    EXPECT_EQ(direct.asr, r.report.asr);
    // FRAN is never re-applied when scoring the artifact
    EXPECT_FALSE(r.report.fran_applied);
  }
}

TEST(JpegSweep, DeterministicPerSeedAndQuality) {
  const Dataset data = generate_synthetic_dataset(8, 64, 42);
  const Patch patch = testutil::random_patch(20, 43);
  const std::vector<int> q = {60};
  EvalOptions opt;
  opt.augment = AugmentConfig{};
  const JpegSweepReport a = jpeg_eval(small_model(), data, patch, q, MetricsConfig{}, 5, opt);
  const JpegSweepReport b = jpeg_eval(small_model(), data, patch, q, MetricsConfig{}, 5, opt);
  EXPECT_EQ(a.records[0].report.vanished, b.records[0].report.vanished);
  EXPECT_EQ(a.records[0].delta_asr, b.records[0].delta_asr);
}

TEST(JpegSweep, BadQualities) {
  const Dataset data = generate_synthetic_dataset(2, 64, 44);
  const Patch patch = testutil::random_patch(8, 45);
  EXPECT_THROW(jpeg_eval(small_model(), data, patch, std::vector<int>{}, MetricsConfig{}, 0), ContractViolation);
  EXPECT_THROW(jpeg_eval(small_model(), data, patch, std::vector<int>{0}, MetricsConfig{}, 0), ContractViolation);
  EXPECT_THROW(jpeg_eval(small_model(), data, patch, std::vector<int>{75, 101}, MetricsConfig{}, 0),
               ContractViolation);
  EXPECT_EQ(std::vector<int>(std::begin(kDefaultJpegQualities), std::end(kDefaultJpegQualities)),
            (std::vector<int>{50, 75, 95}));
}
