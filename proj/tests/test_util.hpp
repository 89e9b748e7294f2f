#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "freqpatch/box.hpp"
#include "freqpatch/image.hpp"
#include "freqpatch/patch.hpp"
#include "freqpatch/rng.hpp"

namespace testutil {

using freqpatch::ImageTensor;

inline ImageTensor random_image(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0,
                                freqpatch::ColorSpace cs = freqpatch::ColorSpace::kRgb) {
  freqpatch::Rng rng(seed);
  ImageTensor img(h, w, cs);
  for (double& v : img.values()) v = rng.uniform(lo, hi);
  return img;
}

inline freqpatch::Patch random_patch(int side, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  return freqpatch::Patch(random_image(side, side, seed, lo, hi));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Central difference of f along one coordinate of x.
inline double central_difference(std::vector<double>& x, std::size_t i,
                                 const std::function<double()>& f, double h = 1e-5) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = f();
  x[i] = saved - h;
  const double down = f();
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / scale;
}

// O(N^2) DFT used as an oracle for the FFT.
inline std::vector<std::complex<double>> naive_dft2(std::span<const double> x, int h, int w) {
  std::vector<std::complex<double>> out(static_cast<std::size_t>(h) * w);
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      std::complex<double> acc = 0.0;
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          const double phase = -2.0 * std::numbers::pi * (static_cast<double>(u) * y / h +
                                                          static_cast<double>(v) * xx / w);
          acc += x[static_cast<std::size_t>(y) * w + xx] * std::polar(1.0, phase);
        }
      }
      out[static_cast<std::size_t>(u) * w + v] = acc;
    }
  }
  return out;
}

inline freqpatch::BoundingBox random_box(freqpatch::Rng& rng, double min_side = 0.05) {
  const double w = rng.uniform(min_side, 0.6);
  const double h = rng.uniform(min_side, 0.6);
  const double x0 = rng.uniform(0.0, 1.0 - w);
  const double y0 = rng.uniform(0.0, 1.0 - h);
  return {x0, y0, x0 + w, y0 + h};
}

}  // namespace testutil
