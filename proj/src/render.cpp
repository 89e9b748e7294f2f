#include "freqpatch/render.hpp"

#include <algorithm>
#include <cmath>

#include "freqpatch/errors.hpp"
#include "freqpatch/imaging.hpp"
#include "freqpatch/rng.hpp"

namespace freqpatch {

RenderTrace render_patch_traced(const ImageTensor& image, std::span<const BoundingBox> boxes,
                                const Patch& patch, double scale_ratio,
                                const AugmentConfig& augment, std::uint64_t rng_seed) {
  if (image.empty() || image.colorspace() != ColorSpace::kRgb) {
    throw ContractViolation("render_patch: image must be a non-empty RGB image");
  }
  if (!(scale_ratio > 0.0 && scale_ratio <= 1.0)) {
    throw ContractViolation("render_patch: scale_ratio must be in (0, 1]");
  }
  if (patch.empty()) throw ContractViolation("render_patch: empty patch");

  const int img_h = image.height();
  const int img_w = image.width();
  RenderTrace trace;
  trace.image = image;
  trace.patch_side = patch.side();
  trace.owner.assign(image.plane_size(), -1);

  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const BoundingBox& box = boxes[b];
    const double box_px_h = box.height() * img_h;
    const int side = static_cast<int>(std::lround(scale_ratio * box_px_h));
    if (side < 1) {
      ++trace.skipped_boxes;
      continue;
    }
    PatchPlacement place;
    place.side = side;
    place.top = static_cast<int>(std::lround(box.center_y() * img_h - 0.5 * side));
    place.left = static_cast<int>(std::lround(box.center_x() * img_w - 0.5 * side));

    Rng rng(derive_seed(rng_seed, b));
    if (augment.contrast) place.contrast = rng.uniform(augment.contrast_min, augment.contrast_max);
    if (augment.brightness) {
      place.brightness = rng.uniform(-augment.brightness_range, augment.brightness_range);
    }
    ImageTensor scaled = resize_bilinear(patch.pixels(), side, side);
    place.unclamped.assign(scaled.size(), 1);
    auto vals = scaled.values();
    for (std::size_t k = 0; k < vals.size(); ++k) {
      double v = place.contrast * vals[k] + place.brightness;
      if (augment.noise) v += rng.uniform(-augment.noise_range, augment.noise_range);
      if (v < 0.0 || v > 1.0) {
        place.unclamped[k] = 0;
        v = std::clamp(v, 0.0, 1.0);
      }
      vals[k] = v;
    }

    const int index = static_cast<int>(trace.placements.size());
    for (int i = 0; i < side; ++i) {
      const int y = place.top + i;
      if (y < 0 || y >= img_h) continue;
      for (int j = 0; j < side; ++j) {
        const int x = place.left + j;
        if (x < 0 || x >= img_w) continue;
        for (int c = 0; c < 3; ++c) trace.image.at(c, y, x) = scaled.at(c, i, j);
        trace.owner[static_cast<std::size_t>(y) * img_w + x] = index;
      }
    }
    trace.placements.push_back(std::move(place));
  }
  return trace;
}

ImageTensor render_patch(const ImageTensor& image, std::span<const BoundingBox> boxes,
                         const Patch& patch, double scale_ratio, const AugmentConfig& augment,
                         std::uint64_t rng_seed) {
  return render_patch_traced(image, boxes, patch, scale_ratio, augment, rng_seed).image;
}

ImageTensor render_backward(const RenderTrace& trace, const ImageTensor& grad_image) {
  if (grad_image.height() != trace.image.height() || grad_image.width() != trace.image.width()) {
    throw ShapeError("render_backward: gradient shape does not match the rendered image");
  }
  const int img_h = grad_image.height();
  const int img_w = grad_image.width();
  ImageTensor grad_patch(trace.patch_side, trace.patch_side, ColorSpace::kRgb, 0.0);
  for (std::size_t p = 0; p < trace.placements.size(); ++p) {
    const PatchPlacement& place = trace.placements[p];
    const int side = place.side;
    ImageTensor grad_scaled(side, side, ColorSpace::kRgb, 0.0);
    bool touched = false;
    for (int i = 0; i < side; ++i) {
      const int y = place.top + i;
      if (y < 0 || y >= img_h) continue;
      for (int j = 0; j < side; ++j) {
        const int x = place.left + j;
        if (x < 0 || x >= img_w) continue;
        if (trace.owner[static_cast<std::size_t>(y) * img_w + x] != static_cast<int>(p)) continue;
        for (int c = 0; c < 3; ++c) {
          const std::size_t k = static_cast<std::size_t>(c) * side * side +
                                static_cast<std::size_t>(i) * side + j;
          if (place.unclamped[k]) {
            grad_scaled.at(c, i, j) = place.contrast * grad_image.at(c, y, x);
            touched = true;
          }
        }
      }
    }
    if (!touched) continue;
    const ImageTensor g = resize_bilinear_adjoint(grad_scaled, trace.patch_side, trace.patch_side);
    auto dst = grad_patch.values();
    const auto src = g.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
  return grad_patch;
}

}  // namespace freqpatch
