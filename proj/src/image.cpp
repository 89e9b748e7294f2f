#include "freqpatch/image.hpp"

#include <algorithm>
#include <string>

#include "freqpatch/errors.hpp"

namespace freqpatch {

std::string_view to_string(ColorSpace cs) {
  return cs == ColorSpace::kRgb ? "RGB" : "YCbCr";
}

ImageTensor::ImageTensor(int height, int width, ColorSpace cs, double fill)
    : height_(height), width_(width), colorspace_(cs) {
  if (height < 1 || width < 1) {
    throw ShapeError("image dimensions must be positive, got " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  data_.assign(static_cast<std::size_t>(kChannels) * plane_size(), fill);
}

void ImageTensor::clamp(double lo, double hi) {
  for (double& v : data_) v = std::clamp(v, lo, hi);
}

}  // namespace freqpatch
