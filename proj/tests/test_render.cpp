#include <gtest/gtest.h>

#include "freqpatch/errors.hpp"
#include "freqpatch/imaging.hpp"
#include "freqpatch/render.hpp"
#include "test_util.hpp"

using namespace freqpatch;
using testutil::random_image;
using testutil::random_patch;

namespace {

const AugmentConfig kNoJitter = AugmentConfig::disabled();

// Independent geometry: the square each box should receive.
struct Square {
  int top, left, side;
};

Square expected_square(const BoundingBox& b, int h, int w, double ratio) {
  const int side = static_cast<int>(std::lround(ratio * b.height() * h));
  return {static_cast<int>(std::lround(b.center_y() * h - side / 2.0)),
          static_cast<int>(std::lround(b.center_x() * w - side / 2.0)), side};
}

bool inside(const Square& s, int y, int x) {
  return s.side >= 1 && y >= s.top && y < s.top + s.side && x >= s.left && x < s.left + s.side;
}

}  // namespace

TEST(Render, NoBoxesIsNoOp) {
  const ImageTensor img = random_image(20, 30, 1);
  const Patch p = random_patch(8, 2);
  EXPECT_EQ(render_patch(img, {}, p, 0.3, AugmentConfig{}, 7), img);
}

TEST(Render, SquareSizeAndPlacement) {
  const ImageTensor img(200, 200, ColorSpace::kRgb, 0.0);
  const std::vector<BoundingBox> boxes = {{0.2, 0.25, 0.4, 0.75}};  // 100 px tall
  const RenderTrace tr = render_patch_traced(img, boxes, random_patch(50, 3), 0.3, kNoJitter, 0);
  ASSERT_EQ(tr.placements.size(), 1u);
  EXPECT_EQ(tr.placements[0].side, 30);
  EXPECT_EQ(tr.placements[0].top, 85);
  EXPECT_EQ(tr.placements[0].left, 45);
  EXPECT_DOUBLE_EQ(tr.placements[0].top + 15.0, 0.5 * (50 + 150));
  EXPECT_DOUBLE_EQ(tr.placements[0].left + 15.0, 0.5 * (40 + 80));
}

TEST(Render, DisjointBoxesPasteResizedPatch) {
  const ImageTensor img = random_image(64, 64, 4);
  const Patch p = random_patch(16, 5);
  const std::vector<BoundingBox> boxes = {{0.05, 0.05, 0.3, 0.45}, {0.55, 0.5, 0.9, 0.95}};
  const ImageTensor out = render_patch(img, boxes, p, 0.4, kNoJitter, 0);
  std::vector<Square> squares;
  for (const auto& b : boxes) squares.push_back(expected_square(b, 64, 64, 0.4));
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      int hit = -1;
      for (int s = 0; s < 2; ++s)
        if (inside(squares[s], y, x)) hit = s;
      for (int c = 0; c < 3; ++c) {
        if (hit < 0) {
          EXPECT_EQ(out.at(c, y, x), img.at(c, y, x));
        } else {
          const Square& sq = squares[hit];
          const ImageTensor r = resize_bilinear(p.pixels(), sq.side, sq.side);
          EXPECT_EQ(out.at(c, y, x), r.at(c, y - sq.top, x - sq.left));
        }
      }
    }
  }
}

TEST(Render, ModifiedRegionIsUnionOfSquares) {
  Rng rng(6);
  for (int t = 0; t < 40; ++t) {
    const int h = 24 + t % 17;
    const int w = 30 + t % 11;
    const ImageTensor img = random_image(h, w, 100 + t);
    std::vector<BoundingBox> boxes;
    const int n = rng.uniform_int(0, 5);
    for (int i = 0; i < n; ++i) boxes.push_back(testutil::random_box(rng));
    const double ratio = rng.uniform(0.2, 1.0);
    const RenderTrace tr =
        render_patch_traced(img, boxes, random_patch(12, 200 + t), ratio, AugmentConfig{}, t);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        bool covered = false;
        for (const auto& b : boxes) covered = covered || inside(expected_square(b, h, w, ratio), y, x);
        const int owner = tr.owner[static_cast<std::size_t>(y) * w + x];
        EXPECT_EQ(owner >= 0, covered);
        if (!covered) {
          for (int c = 0; c < 3; ++c) EXPECT_EQ(tr.image.at(c, y, x), img.at(c, y, x));
        }
      }
    }
  }
}

TEST(Render, LaterBoxesPaintOver) {
  const ImageTensor img(40, 40, ColorSpace::kRgb, 0.0);
  const std::vector<BoundingBox> boxes = {{0.1, 0.1, 0.6, 0.9}, {0.2, 0.2, 0.7, 0.8}};
  const RenderTrace tr = render_patch_traced(img, boxes, Patch::filled(4, 1.0), 0.5, kNoJitter, 0);
  // the centre pixel is covered by both squares
  EXPECT_EQ(tr.owner[20 * 40 + 17], 1);
}

TEST(Render, TinyBoxesAreSkipped) {
  const ImageTensor img(32, 32, ColorSpace::kRgb, 0.3);
  const std::vector<BoundingBox> boxes = {{0.1, 0.1, 0.2, 0.12}, {0.3, 0.3, 0.6, 0.9}};
  const RenderTrace tr = render_patch_traced(img, boxes, Patch::filled(4, 1.0), 0.3, kNoJitter, 0);
  EXPECT_EQ(tr.skipped_boxes, 1);
  EXPECT_EQ(tr.placements.size(), 1u);
}

TEST(Render, ClippedAtImageBorder) {
  const ImageTensor img(20, 20, ColorSpace::kRgb, 0.0);
  const std::vector<BoundingBox> boxes = {{0.0, 0.0, 0.1, 1.0}};
  const ImageTensor out = render_patch(img, boxes, Patch::filled(4, 1.0), 1.0, kNoJitter, 0);
  // 20 px square centred at x = 1: columns 0..10 painted
  for (int x = 0; x < 20; ++x) EXPECT_EQ(out.at(0, 10, x), x <= 10 ? 1.0 : 0.0);
}

TEST(Render, JitterIsSeededAndBounded) {
  const ImageTensor img = random_image(32, 32, 7);
  const std::vector<BoundingBox> boxes = {{0.1, 0.1, 0.7, 0.9}};
  const Patch p = random_patch(10, 8);
  const ImageTensor a = render_patch(img, boxes, p, 0.5, AugmentConfig{}, 11);
  EXPECT_EQ(a, render_patch(img, boxes, p, 0.5, AugmentConfig{}, 11));
  EXPECT_NE(a, render_patch(img, boxes, p, 0.5, AugmentConfig{}, 12));
  for (double v : a.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Render, NoBoxesMeansZeroGradient) {
  const ImageTensor img = random_image(16, 16, 9);
  const RenderTrace tr = render_patch_traced(img, {}, random_patch(6, 10), 0.3, AugmentConfig{}, 0);
  const ImageTensor g = render_backward(tr, random_image(16, 16, 11, -1, 1));
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Render, BackwardIsAdjointOfPaste) {
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const ImageTensor img = random_image(40, 36, 300 + t);
    std::vector<BoundingBox> boxes;
    for (int i = 0; i < 3; ++i) boxes.push_back(testutil::random_box(rng, 0.2));
    const Patch u = random_patch(9, 400 + t);
    const ImageTensor v = random_image(40, 36, 500 + t, -1, 1);
    const RenderTrace tr = render_patch_traced(img, boxes, u, 0.6, kNoJitter, t);
    const ImageTensor base = render_patch(img, boxes, Patch::filled(9, 0.0), 0.6, kNoJitter, t);
    std::vector<double> lin(tr.image.size());
    for (std::size_t i = 0; i < lin.size(); ++i) lin[i] = tr.image.values()[i] - base.values()[i];
    const double lhs = testutil::dot(lin, v.values());
    const double rhs = testutil::dot(u.pixels().values(), render_backward(tr, v).values());
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Render, GradientWithJitterMatchesFiniteDifferences) {
  const ImageTensor img = random_image(30, 30, 13);
  const std::vector<BoundingBox> boxes = {{0.1, 0.1, 0.5, 0.9}, {0.5, 0.2, 0.95, 0.8}};
  Patch p = random_patch(7, 14, 0.3, 0.7);
  const ImageTensor w = random_image(30, 30, 15, -1, 1);
  const RenderTrace tr = render_patch_traced(img, boxes, p, 0.5, AugmentConfig{}, 3);
  const ImageTensor g = render_backward(tr, w);
  std::vector<double> x(p.pixels().values().begin(), p.pixels().values().end());
  const auto f = [&] {
    Patch q = p;
    std::copy(x.begin(), x.end(), q.pixels().values().begin());
    return testutil::dot(render_patch(img, boxes, q, 0.5, AugmentConfig{}, 3).values(), w.values());
  };
  Rng rng(16);
  for (int k = 0; k < 20; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(x.size()) - 1));
    EXPECT_LT(testutil::relative_error(g.values()[i], testutil::central_difference(x, i, f)), 1e-3);
  }
}

TEST(Render, BadInputsRejected) {
  const ImageTensor img(8, 8);
  const Patch p = Patch::filled(4, 0.5);
  EXPECT_THROW(render_patch(img, {}, p, 0.0, kNoJitter, 0), ContractViolation);
  EXPECT_THROW(render_patch(img, {}, p, 1.5, kNoJitter, 0), ContractViolation);
  EXPECT_THROW(render_patch(ImageTensor(8, 8, ColorSpace::kYCbCr), {}, p, 0.3, kNoJitter, 0),
               ContractViolation);
}

TEST(RandomPatch, ShapeMeanAndDeterminism) {
  const Patch p = make_random_patch(kDefaultPatchSide, 17);
  EXPECT_EQ(p.side(), 950);
  EXPECT_EQ(p.pixels().size(), 3u * 950 * 950);
  double s = 0.0;
  for (double v : p.pixels().values()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    s += v;
  }
  const double mean = s / static_cast<double>(p.pixels().size());
  EXPECT_GE(mean, 0.49);
  EXPECT_LE(mean, 0.51);
  EXPECT_EQ(make_random_patch(64, 3), make_random_patch(64, 3));
  EXPECT_NE(make_random_patch(64, 3), make_random_patch(64, 4));
}

TEST(PatchType, RequiresSquareRgb) {
  EXPECT_THROW(Patch(ImageTensor(4, 5)), ShapeError);
  EXPECT_THROW(Patch(ImageTensor(4, 4, ColorSpace::kYCbCr)), Error);
}

TEST(Boxes, IouExamples) {
  const BoundingBox a{0.0, 0.0, 0.2, 0.2};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, {0.5, 0.5, 0.7, 0.7}), 0.0);
  EXPECT_NEAR(iou(a, {0.1, 0.1, 0.3, 0.3}), 1.0 / 7.0, 1e-12);
  EXPECT_TRUE(a.valid());
  EXPECT_FALSE((BoundingBox{0.3, 0.1, 0.3, 0.2}).valid());
  EXPECT_FALSE((BoundingBox{-0.1, 0.1, 0.3, 0.2}).valid());
}
