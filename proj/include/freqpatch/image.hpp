#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace freqpatch {

enum class ColorSpace { kRgb, kYCbCr };

std::string_view to_string(ColorSpace cs);

// Planar three-channel image. Storage is channel-major (CHW): plane c holds
// height*width values in row-major order. RGB values live in [0,1] after any
// clamp; YCbCr uses Y in [0,1] and chroma centred on 0.5.
class ImageTensor {
 public:
  static constexpr int kChannels = 3;

  // Empty placeholder; every accessor other than empty() requires a sized image.
  ImageTensor() = default;
  ImageTensor(int height, int width, ColorSpace cs = ColorSpace::kRgb,
              double fill = 0.0);

  [[nodiscard]] bool empty() const { return data_.empty(); }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] ColorSpace colorspace() const { return colorspace_; }
  void set_colorspace(ColorSpace cs) { colorspace_ = cs; }

  [[nodiscard]] std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  double& at(int c, int y, int x) {
    return data_[static_cast<std::size_t>(c) * plane_size() +
                 static_cast<std::size_t>(y) * width_ + x];
  }
  [[nodiscard]] double at(int c, int y, int x) const {
    return data_[static_cast<std::size_t>(c) * plane_size() +
                 static_cast<std::size_t>(y) * width_ + x];
  }

  std::span<double> plane(int c) {
    return {data_.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
  }
  [[nodiscard]] std::span<const double> plane(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
  }
  std::span<double> values() { return data_; }
  [[nodiscard]] std::span<const double> values() const { return data_; }

  void clamp(double lo, double hi);
  [[nodiscard]] bool same_shape(const ImageTensor& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  ColorSpace colorspace_ = ColorSpace::kRgb;
  std::vector<double> data_;
};

}  // namespace freqpatch
