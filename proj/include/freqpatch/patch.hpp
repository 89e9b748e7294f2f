#pragma once

#include <cstdint>

#include "freqpatch/image.hpp"

namespace freqpatch {

inline constexpr int kDefaultPatchSide = 950;

// Square RGB adversarial patch. Values stay in [0,1] except transiently
// inside an optimiser step.
class Patch {
 public:
  Patch() = default;
  explicit Patch(ImageTensor pixels);
  static Patch filled(int side, double value);

  [[nodiscard]] bool empty() const { return pixels_.empty(); }
  [[nodiscard]] int side() const { return pixels_.height(); }
  [[nodiscard]] const ImageTensor& pixels() const { return pixels_; }
  ImageTensor& pixels() { return pixels_; }

  friend bool operator==(const Patch&, const Patch&) = default;

 private:
  ImageTensor pixels_;
};

// I.i.d. uniform [0,1] pixels, deterministic in the seed.
Patch make_random_patch(int side, std::uint64_t seed);

}  // namespace freqpatch
