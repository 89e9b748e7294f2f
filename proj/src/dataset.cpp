#include "freqpatch/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "freqpatch/errors.hpp"
#include "freqpatch/rng.hpp"

namespace freqpatch {
namespace {

using Color = std::array<double, 3>;

Color random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

void put_pixel(ImageTensor& img, int y, int x, const Color& c) {
  if (y < 0 || x < 0 || y >= img.height() || x >= img.width()) return;
  for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = std::clamp(c[ch], 0.0, 1.0);
}

void fill_rect(ImageTensor& img, int top, int left, int h, int w, const Color& c) {
  for (int y = top; y < top + h; ++y) {
    for (int x = left; x < left + w; ++x) put_pixel(img, y, x, c);
  }
}

void fill_ellipse(ImageTensor& img, double cy, double cx, double ry, double rx, const Color& c) {
  const int y0 = static_cast<int>(std::floor(cy - ry));
  const int y1 = static_cast<int>(std::ceil(cy + ry));
  const int x0 = static_cast<int>(std::floor(cx - rx));
  const int x1 = static_cast<int>(std::ceil(cx + rx));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dy = (y + 0.5 - cy) / ry;
      const double dx = (x + 0.5 - cx) / rx;
      if (dy * dy + dx * dx <= 1.0) put_pixel(img, y, x, c);
    }
  }
}

// Torso fill: plain, stripes, checks or speckle noise.
void fill_textured_rect(ImageTensor& img, int top, int left, int h, int w, Rng& rng) {
  const Color a = random_color(rng);
  const Color b = random_color(rng);
  const int kind = rng.uniform_int(0, 3);
  const int period = rng.uniform_int(2, 6);
  for (int y = top; y < top + h; ++y) {
    for (int x = left; x < left + w; ++x) {
      bool use_b = false;
      switch (kind) {
        case 1: use_b = ((y - top) / period) % 2 == 1; break;
        case 2: use_b = (((y - top) / period) + ((x - left) / period)) % 2 == 1; break;
        case 3: use_b = rng.uniform() < 0.3; break;
        default: break;
      }
      put_pixel(img, y, x, use_b ? b : a);
    }
  }
}

void draw_background(ImageTensor& img, Rng& rng) {
  const int h = img.height();
  const int w = img.width();
  const Color top = random_color(rng);
  const Color bottom = random_color(rng);
  for (int y = 0; y < h; ++y) {
    const double t = h > 1 ? static_cast<double>(y) / (h - 1) : 0.0;
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = (1.0 - t) * top[c] + t * bottom[c];
    }
  }
  const int shapes = rng.uniform_int(4, 10);
  for (int s = 0; s < shapes; ++s) {
    const Color col = random_color(rng);
    const int kind = rng.uniform_int(0, 2);
    const int sh = rng.uniform_int(3, std::max(4, h / 3));
    const int sw = rng.uniform_int(3, std::max(4, w / 3));
    const int y = rng.uniform_int(-sh / 2, h - 1);
    const int x = rng.uniform_int(-sw / 2, w - 1);
    if (kind == 0) {
      fill_rect(img, y, x, sh, sw, col);
    } else if (kind == 1) {
      fill_ellipse(img, y + sh / 2.0, x + sw / 2.0, sh / 2.0, sw / 2.0, col);
    } else {
      // thin bar
      if (rng.uniform() < 0.5) {
        fill_rect(img, y, x, 2, sw * 2, col);
      } else {
        fill_rect(img, y, x, sh * 2, 2, col);
      }
    }
  }
  for (double& v : img.values()) v = std::clamp(v + rng.uniform(-0.03, 0.03), 0.0, 1.0);
}

struct ProxyGeometry {
  int top;
  int left;
  int height;
  int width;
};

void draw_proxy(ImageTensor& img, const ProxyGeometry& g, Rng& rng) {
  // dark silhouette one pixel larger than the body parts
  const Color outline = {rng.uniform(0.0, 0.12), rng.uniform(0.0, 0.12), rng.uniform(0.0, 0.12)};
  fill_rect(img, g.top - 1, g.left - 1, g.height + 2, g.width + 2, outline);
  const double head_frac = rng.uniform(0.18, 0.24);
  const double torso_frac = rng.uniform(0.36, 0.44);
  const int head_h = std::max(2, static_cast<int>(std::lround(head_frac * g.height)));
  const int torso_h = std::max(2, static_cast<int>(std::lround(torso_frac * g.height)));
  const int legs_h = g.height - head_h - torso_h;
  const Color skin = {rng.uniform(0.45, 0.95), rng.uniform(0.3, 0.75), rng.uniform(0.2, 0.6)};
  const double head_rx = std::max(1.0, 0.28 * g.width);
  fill_ellipse(img, g.top + head_h / 2.0, g.left + g.width / 2.0, head_h / 2.0, head_rx, skin);
  fill_textured_rect(img, g.top + head_h, g.left, torso_h, g.width, rng);
  const Color leg = {rng.uniform(0.0, 0.5), rng.uniform(0.0, 0.5), rng.uniform(0.0, 0.6)};
  const int leg_w = std::max(1, static_cast<int>(std::lround(0.36 * g.width)));
  const int inset = std::max(0, static_cast<int>(std::lround(0.06 * g.width)));
  fill_rect(img, g.top + head_h + torso_h, g.left + inset, legs_h, leg_w, leg);
  fill_rect(img, g.top + head_h + torso_h, g.left + g.width - inset - leg_w, legs_h, leg_w, leg);
}

double pixel_iou(const ProxyGeometry& a, const ProxyGeometry& b) {
  const int ix = std::max(0, std::min(a.left + a.width, b.left + b.width) - std::max(a.left, b.left));
  const int iy = std::max(0, std::min(a.top + a.height, b.top + b.height) - std::max(a.top, b.top));
  const double inter = static_cast<double>(ix) * iy;
  const double uni = static_cast<double>(a.width) * a.height +
                     static_cast<double>(b.width) * b.height - inter;
  return inter / uni;
}

// Height-ratio ranges per bucket, kept clear of the 0.3 / 0.6 boundaries.
constexpr std::array<std::array<double, 2>, 3> kBucketRatio = {{{0.17, 0.29}, {0.31, 0.59}, {0.61, 0.90}}};
constexpr int kGridCell = 8;

}  // namespace

ImageTensor generate_background(int image_side, std::uint64_t rng_seed) {
  if (image_side < 8) throw ContractViolation("image_side must be >= 8");
  ImageTensor img(image_side, image_side, ColorSpace::kRgb);
  Rng rng(derive_seed(rng_seed, 0xb9));
  draw_background(img, rng);
  return img;
}

Dataset generate_synthetic_dataset(int n, int image_side, std::uint64_t rng_seed) {
  if (n < 1) throw ContractViolation("generate_synthetic_dataset: n must be >= 1");
  if (image_side < 32) throw ContractViolation("generate_synthetic_dataset: image_side must be >= 32");
  Dataset data;
  data.reserve(static_cast<std::size_t>(n));
  std::array<long, 3> bucket_counts = {0, 0, 0};
  const int cell = std::max(1, image_side * kGridCell / 128);

  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(rng_seed, static_cast<std::uint64_t>(i)));
    DatasetSample sample;
    sample.image = ImageTensor(image_side, image_side, ColorSpace::kRgb);
    draw_background(sample.image, rng);

    const int wanted = rng.uniform_int(1, 4);
    std::vector<ProxyGeometry> placed;
    for (int p = 0; p < wanted; ++p) {
      // Least-filled bucket first keeps the three shares balanced.
      std::array<int, 3> buckets = {0, 1, 2};
      std::stable_sort(buckets.begin(), buckets.end(),
                       [&](int a, int b) { return bucket_counts[a] < bucket_counts[b]; });
      bool done = false;
      for (int bucket : buckets) {
        for (int attempt = 0; attempt < 30 && !done; ++attempt) {
          const double ratio = rng.uniform(kBucketRatio[bucket][0], kBucketRatio[bucket][1]);
          ProxyGeometry g{};
          g.height = static_cast<int>(std::lround(ratio * image_side));
          // Keep the realised ratio inside its bucket after rounding.
          const double realised = static_cast<double>(g.height) / image_side;
          const bool in_bucket = bucket == 0   ? realised < 0.3
                                 : bucket == 1 ? (realised >= 0.3 && realised <= 0.6)
                                               : realised > 0.6;
          if (!in_bucket || g.height > image_side) continue;
          g.width = std::max(3, static_cast<int>(std::lround(g.height * rng.uniform(0.36, 0.5))));
          g.top = rng.uniform_int(0, image_side - g.height);
          g.left = rng.uniform_int(0, image_side - g.width);
          const int cy = (2 * g.top + g.height) / 2 / cell;
          const int cx = (2 * g.left + g.width) / 2 / cell;
          const bool clash = std::any_of(placed.begin(), placed.end(), [&](const ProxyGeometry& o) {
            const int ocy = (2 * o.top + o.height) / 2 / cell;
            const int ocx = (2 * o.left + o.width) / 2 / cell;
            return (ocy == cy && ocx == cx) || pixel_iou(o, g) > 0.0;
          });
          if (clash) continue;
          placed.push_back(g);
          ++bucket_counts[bucket];
          done = true;
        }
        if (done) break;
      }
    }
    for (const ProxyGeometry& g : placed) {
      draw_proxy(sample.image, g, rng);
      const double s = image_side;
      sample.gt_boxes.push_back({g.left / s, g.top / s, (g.left + g.width) / s, (g.top + g.height) / s});
    }
    if (sample.gt_boxes.empty()) throw InvariantError("generator produced an image without proxies");
    data.push_back(std::move(sample));
  }
  return data;
}

}  // namespace freqpatch
