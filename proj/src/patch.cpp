#include "freqpatch/patch.hpp"

#include <string>

#include "freqpatch/errors.hpp"
#include "freqpatch/rng.hpp"

namespace freqpatch {

Patch::Patch(ImageTensor pixels) : pixels_(std::move(pixels)) {
  if (pixels_.empty() || pixels_.height() != pixels_.width()) {
    throw ShapeError("patch must be a non-empty square image, got " +
                     std::to_string(pixels_.height()) + "x" + std::to_string(pixels_.width()));
  }
  if (pixels_.colorspace() != ColorSpace::kRgb) {
    throw ContractViolation("patch pixels must be RGB");
  }
}

Patch Patch::filled(int side, double value) {
  return Patch(ImageTensor(side, side, ColorSpace::kRgb, value));
}

Patch make_random_patch(int side, std::uint64_t seed) {
  if (side < 1) throw ContractViolation("patch side must be >= 1");
  ImageTensor px(side, side, ColorSpace::kRgb);
  Rng rng(seed);
  for (double& v : px.values()) v = rng.uniform();
  return Patch(std::move(px));
}

}  // namespace freqpatch
