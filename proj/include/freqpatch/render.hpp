#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "freqpatch/box.hpp"
#include "freqpatch/image.hpp"
#include "freqpatch/patch.hpp"

namespace freqpatch {

inline constexpr double kDefaultScaleRatio = 0.3;

// Photometric jitter applied to each pasted patch copy:
// v' = clamp(contrast * v + brightness + noise, 0, 1).
struct AugmentConfig {
  bool brightness = true;
  double brightness_range = 0.1;   // offset ~ U(-range, range)
  bool contrast = true;
  double contrast_min = 0.9;       // scale ~ U(min, max)
  double contrast_max = 1.1;
  bool noise = true;
  double noise_range = 0.05;       // per pixel ~ U(-range, range)

  static AugmentConfig disabled() {
    AugmentConfig cfg;
    cfg.brightness = cfg.contrast = cfg.noise = false;
    return cfg;
  }
  [[nodiscard]] bool any() const { return brightness || contrast || noise; }

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

struct PatchPlacement {
  int top = 0;
  int left = 0;
  int side = 0;
  double contrast = 1.0;
  double brightness = 0.0;
  // 1 where the jittered value was inside [0,1] before clamping (CHW).
  std::vector<std::uint8_t> unclamped;
};

struct RenderTrace {
  ImageTensor image;
  int patch_side = 0;
  std::vector<PatchPlacement> placements;
  // Index into placements of the copy that painted each pixel, or -1.
  std::vector<int> owner;
  int skipped_boxes = 0;
};

// Pastes a copy of the patch over every box, resized to a square of side
// round(scale_ratio * box pixel height) centred on the box centre. Later
// boxes paint over earlier ones. Boxes whose copy would be smaller than one
// pixel are skipped and counted.
RenderTrace render_patch_traced(const ImageTensor& image, std::span<const BoundingBox> boxes,
                                const Patch& patch, double scale_ratio,
                                const AugmentConfig& augment, std::uint64_t rng_seed);

ImageTensor render_patch(const ImageTensor& image, std::span<const BoundingBox> boxes,
                         const Patch& patch, double scale_ratio, const AugmentConfig& augment,
                         std::uint64_t rng_seed);

// Gradient with respect to the patch pixels given a gradient on the rendered
// image.
ImageTensor render_backward(const RenderTrace& trace, const ImageTensor& grad_image);

}  // namespace freqpatch
