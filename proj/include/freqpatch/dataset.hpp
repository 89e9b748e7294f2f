#pragma once

#include <cstdint>
#include <vector>

#include "freqpatch/box.hpp"
#include "freqpatch/image.hpp"

namespace freqpatch {

struct DatasetSample {
  ImageTensor image;
  std::vector<BoundingBox> gt_boxes;  // never empty for generated samples
};

using Dataset = std::vector<DatasetSample>;

// Cluttered scenes holding 1-4 person proxies (head ellipse, textured torso,
// legs). Proxy heights are drawn so the small/medium/large height-ratio
// buckets (0.3 / 0.6 boundaries) are filled in near-equal shares.
Dataset generate_synthetic_dataset(int n, int image_side, std::uint64_t rng_seed);

// A scene with clutter only, no proxies.
ImageTensor generate_background(int image_side, std::uint64_t rng_seed);

}  // namespace freqpatch
