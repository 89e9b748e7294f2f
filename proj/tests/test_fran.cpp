#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "freqpatch/errors.hpp"
#include "freqpatch/fran.hpp"
#include "freqpatch/imaging.hpp"
#include "freqpatch/losses.hpp"
#include "test_util.hpp"

using namespace freqpatch;
using testutil::random_image;
using testutil::random_patch;

namespace {

FrequencyMask random_mask(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 2.0) {
  Rng rng(seed);
  FrequencyMask m(h, w);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

double output_sum(const Patch& p) {
  double s = 0.0;
  for (double v : p.pixels().values()) s += v;
  return s;
}

}  // namespace

TEST(Fft, MatchesNaiveDft) {
  for (auto [h, w] : {std::pair{4, 4}, {5, 7}, {8, 3}, {1, 6}}) {
    const ImageTensor img = random_image(h, w, h * 31 + w, -1, 1);
    const Spectrum s = fft2(img.plane(0), h, w);
    const auto oracle = testutil::naive_dft2(img.plane(0), h, w);
    for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_LT(std::abs(s.data[i] - oracle[i]), 1e-9);
  }
}

TEST(Fft, ConstantIsDcOnly) {
  const ImageTensor img(6, 5, ColorSpace::kRgb, 0.25);
  const Spectrum s = fft2(img.plane(0), 6, 5);
  EXPECT_NEAR(s.at(0, 0).real(), 0.25 * 30, 1e-12);
  for (std::size_t i = 1; i < s.data.size(); ++i) EXPECT_LT(std::abs(s.data[i]), 1e-12);
}

TEST(Fft, ImpulseGivesAllOnes) {
  ImageTensor img(4, 6);
  img.at(0, 0, 0) = 1.0;
  const Spectrum s = fft2(img.plane(0), 4, 6);
  for (const auto& z : s.data) EXPECT_LT(std::abs(z - std::complex<double>(1.0, 0.0)), 1e-12);
}

TEST(Fft, AllOnesInvertsToImpulse) {
  Spectrum s{3, 5, std::vector<std::complex<double>>(15, 1.0)};
  const InverseTransform r = ifft2(s);
  EXPECT_NEAR(r.real[0], 1.0, 1e-12);
  for (std::size_t i = 1; i < r.real.size(); ++i) EXPECT_NEAR(r.real[i], 0.0, 1e-12);
  EXPECT_LT(r.max_imag, 1e-12);
}

TEST(Fft, RoundTrip) {
  const ImageTensor img = random_image(16, 12, 9);
  const InverseTransform r = ifft2(fft2(img.plane(1), 16, 12));
  EXPECT_LT(testutil::max_abs_diff(r.real, img.plane(1)), 1e-6);
}

TEST(Fft, Parseval) {
  const ImageTensor img = random_image(15, 14, 10, -1, 1);
  const Spectrum s = fft2(img.plane(2), 15, 14);
  double spatial = 0.0;
  for (double v : img.plane(2)) spatial += v * v;
  double spectral = 0.0;
  for (const auto& z : s.data) spectral += std::norm(z);
  spectral /= static_cast<double>(s.data.size());
  EXPECT_NEAR(spectral / spatial, 1.0, 1e-5);
}

TEST(Fft, RealInputIsConjugateSymmetric) {
  const ImageTensor img = random_image(7, 6, 11);
  const Spectrum s = fft2(img.plane(0), 7, 6);
  for (int u = 0; u < 7; ++u)
    for (int v = 0; v < 6; ++v)
      EXPECT_LT(std::abs(s.at(u, v) - std::conj(s.at((7 - u) % 7, (6 - v) % 6))), 1e-10);
}

TEST(Fft, NonFiniteInputRejected) {
  std::vector<double> x(4, 0.0);
  x[2] = std::nan("");
  EXPECT_THROW(fft2(x, 2, 2), Error);
}

TEST(SymmetrizeMask, OnesAreFixed) {
  const FrequencyMask m(5, 4, 1.0);
  EXPECT_EQ(symmetrize_mask(m), m);
}

TEST(SymmetrizeMask, MirrorPairAveraged) {
  FrequencyMask m(4, 4, 0.0);
  for (int c = 0; c < 3; ++c) m.at(c, 1, 0) = 2.0;
  const FrequencyMask s = symmetrize_mask(m);
  for (int c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(s.at(c, 1, 0), 1.0);
    EXPECT_DOUBLE_EQ(s.at(c, 3, 0), 1.0);
  }
}

TEST(SymmetrizeMask, MirrorIdentityEverywhere) {
  for (auto [h, w] : {std::pair{4, 4}, {5, 3}, {6, 7}, {1, 1}, {2, 9}}) {
    const FrequencyMask s = symmetrize_mask(random_mask(h, w, h * 7 + w));
    for (int c = 0; c < 3; ++c)
      for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) EXPECT_EQ(s.at(c, u, v), s.at(c, (h - u) % h, (w - v) % w));
  }
}

TEST(Fran, OnesMaskIsIdentity) {
  const Patch p = random_patch(16, 12);
  const Patch out = fran_forward(p, FrequencyMask(16, 16, 1.0));
  EXPECT_LT(testutil::max_abs_diff(out.pixels().values(), p.pixels().values()), 1e-5);
  const Patch rgb = fran_forward(p, FrequencyMask(16, 16, 1.0), FranOptions{false});
  EXPECT_LT(testutil::max_abs_diff(rgb.pixels().values(), p.pixels().values()), 1e-5);
}

TEST(Fran, DcOnlyMaskGivesChannelMeans) {
  const Patch p = random_patch(8, 13);
  FrequencyMask m(8, 8, 0.0);
  for (int c = 0; c < 3; ++c) m.at(c, 0, 0) = 1.0;
  const Patch out = fran_forward(p, m);
  const ImageTensor ycc = rgb_to_ycbcr(p.pixels());
  ImageTensor mean(1, 1, ColorSpace::kYCbCr);
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (double v : ycc.plane(c)) s += v;
    mean.at(c, 0, 0) = s / 64.0;
  }
  ImageTensor expected = ycbcr_to_rgb(mean);
  expected.clamp(0.0, 1.0);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) EXPECT_NEAR(out.pixels().at(c, y, x), expected.at(c, 0, 0), 1e-9);
}

TEST(Fran, LowPassSmoothsCheckerboard) {
  ImageTensor img(16, 16);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) img.at(c, y, x) = 0.2 + 0.6 * ((x + y) % 2);
  const Patch p(img);
  FrequencyMask m(16, 16, 0.0);
  for (int c = 0; c < 3; ++c)
    for (int u = 0; u < 16; ++u)
      for (int v = 0; v < 16; ++v) {
        const int fu = std::min(u, 16 - u);
        const int fv = std::min(v, 16 - v);
        if (fu < 4 && fv < 4) m.at(c, u, v) = 1.0;
      }
  EXPECT_LT(tv_r_loss(fran_forward(p, m).pixels()), tv_r_loss(p.pixels()));
}

TEST(Fran, ShapeMismatchRejected) {
  const Patch p = random_patch(8, 1);
  EXPECT_THROW(fran_forward(p, FrequencyMask(8, 7)), ShapeError);
  EXPECT_THROW(fran_forward(p, FrequencyMask(4, 4)), ShapeError);
}

TEST(Fran, ImaginaryResidualStaysTiny) {
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int side = 4 + t % 9;
    const FranTrace tr = fran_forward_traced(random_patch(side, 1000 + t), random_mask(side, side, 2000 + t, -3, 3));
    worst = std::max(worst, tr.max_imag_residual);
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Fran, LinearBeforeClamp) {
  const Patch a = random_patch(10, 21);
  const Patch b = random_patch(10, 22);
  const FrequencyMask m = random_mask(10, 10, 23);
  const double w = 0.3;
  Patch mix = Patch::filled(10, 0.0);
  for (std::size_t i = 0; i < mix.pixels().size(); ++i) {
    mix.pixels().values()[i] = w * a.pixels().values()[i] + (1 - w) * b.pixels().values()[i];
  }
  const ImageTensor pa = fran_forward_traced(a, m).preclamp;
  const ImageTensor pb = fran_forward_traced(b, m).preclamp;
  const ImageTensor pm = fran_forward_traced(mix, m).preclamp;
  for (std::size_t i = 0; i < pm.size(); ++i) {
    EXPECT_NEAR(pm.values()[i], w * pa.values()[i] + (1 - w) * pb.values()[i], 1e-10);
  }
}

// Probe: the sum of output pixels. Values are kept well inside (0,1) and the
// mask near 1 so the clamp stays inactive around the sample points.
class FranGradient : public ::testing::TestWithParam<bool> {};

TEST_P(FranGradient, MatchesCentralDifferences) {
  const bool ycc = GetParam();
  const int side = 9;
  Patch p = random_patch(side, 31, 0.35, 0.65);
  FrequencyMask theta = random_mask(side, side, 32, 0.9, 1.1);
  const FranOptions opt{ycc};
  const FranTrace tr = fran_forward_traced(p, theta, opt);
  ImageTensor ones(side, side, ColorSpace::kRgb, 1.0);
  const FranGradients g = fran_backward(tr, ones);

  Rng rng(33);
  std::vector<double> px(p.pixels().values().begin(), p.pixels().values().end());
  const auto f_patch = [&] {
    Patch q(p.pixels());
    std::copy(px.begin(), px.end(), q.pixels().values().begin());
    return output_sum(fran_forward(q, theta, opt));
  };
  for (int k = 0; k < 20; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(px.size()) - 1));
    const double num = testutil::central_difference(px, i, f_patch);
    EXPECT_LT(testutil::relative_error(g.patch.values()[i], num), 1e-3) << "patch coord " << i;
  }

  std::vector<double> th(theta.values().begin(), theta.values().end());
  const auto f_theta = [&] {
    FrequencyMask t2 = theta;
    std::copy(th.begin(), th.end(), t2.values().begin());
    return output_sum(fran_forward(p, t2, opt));
  };
  for (int k = 0; k < 20; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(th.size()) - 1));
    const double num = testutil::central_difference(th, i, f_theta);
    EXPECT_LT(testutil::relative_error(g.theta.values()[i], num), 1e-3) << "theta coord " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(ColourSpaces, FranGradient, ::testing::Values(true, false));

TEST(Fran, GradientWithRandomWeights) {
  // A non-uniform upstream gradient exercises every spectral bin.
  const int side = 8;
  const Patch p = random_patch(side, 41, 0.35, 0.65);
  const FrequencyMask theta = random_mask(side, side, 42, 0.95, 1.05);
  const ImageTensor w = random_image(side, side, 43, -1, 1);
  const auto probe = [&](const Patch& q, const FrequencyMask& t) {
    return testutil::dot(fran_forward(q, t).pixels().values(), w.values());
  };
  const FranGradients g = fran_backward(fran_forward_traced(p, theta), w);
  std::vector<double> th(theta.values().begin(), theta.values().end());
  Rng rng(44);
  for (int k = 0; k < 20; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(th.size()) - 1));
    const double num = testutil::central_difference(th, i, [&] {
      FrequencyMask t2 = theta;
      std::copy(th.begin(), th.end(), t2.values().begin());
      return probe(p, t2);
    });
    EXPECT_LT(testutil::relative_error(g.theta.values()[i], num), 1e-3);
  }
}

TEST(Fran, ClampBlocksGradient) {
  const Patch p = Patch::filled(4, 1.0);
  FrequencyMask theta(4, 4, 1.0);
  for (int c = 0; c < 3; ++c) theta.at(c, 0, 0) = 3.0;  // drives the output above 1
  const FranTrace tr = fran_forward_traced(p, theta);
  for (double v : tr.output.pixels().values()) EXPECT_LE(v, 1.0);
  const FranGradients g = fran_backward(tr, ImageTensor(4, 4, ColorSpace::kRgb, 1.0));
  for (double v : g.patch.values()) EXPECT_EQ(v, 0.0);
}

TEST(MaskVisualization, ConstantMaskIsBlack) {
  const ImageTensor img = mask_visualization(FrequencyMask(6, 6, 2.5));
  for (double v : img.values()) EXPECT_EQ(v, 0.0);
}

TEST(MaskVisualization, DcLandsInTheCentre) {
  FrequencyMask m(8, 6, 0.0);
  m.at(0, 0, 0) = 10.0;
  const ImageTensor img = mask_visualization(m);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 6; ++x) EXPECT_EQ(img.at(c, y, x), (y == 4 && x == 3) ? 1.0 : 0.0);
}

TEST(MaskVisualization, RandomMaskSpansUnitRange) {
  const ImageTensor img = mask_visualization(random_mask(9, 9, 5, -4, 4));
  const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
  EXPECT_EQ(*lo, 0.0);
  EXPECT_EQ(*hi, 1.0);
}

TEST(MaskFile, RoundTripAndBadMagic) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "freqpatch_mask_roundtrip.bin";
  std::filesystem::remove(path);
  FrequencyMask m = random_mask(5, 7, 6);
  for (double& v : m.values()) v = static_cast<float>(v);
  write_mask(path, m);
  EXPECT_EQ(read_mask(path), m);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << "XXXXjunk";
  EXPECT_THROW(read_mask(path), IoError);
  std::filesystem::remove(path);
}
