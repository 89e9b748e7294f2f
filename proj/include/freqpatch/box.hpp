#pragma once

namespace freqpatch {

// Axis-aligned box in coordinates normalised by image width/height.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  [[nodiscard]] double width() const { return x_max - x_min; }
  [[nodiscard]] double height() const { return y_max - y_min; }
  [[nodiscard]] double area() const { return width() * height(); }
  [[nodiscard]] double center_x() const { return 0.5 * (x_min + x_max); }
  [[nodiscard]] double center_y() const { return 0.5 * (y_min + y_max); }

  // x_min < x_max, y_min < y_max and every coordinate in [0,1].
  [[nodiscard]] bool valid() const {
    return x_min < x_max && y_min < y_max && x_min >= 0.0 && y_min >= 0.0 &&
           x_max <= 1.0 && y_max <= 1.0;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double iou(const BoundingBox& a, const BoundingBox& b);

}  // namespace freqpatch
