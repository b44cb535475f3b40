#pragma once

#include "abacf/image.hpp"

namespace abacf {

// Axis-aligned box in frame coordinates (1-based pixel centres).
struct BoundingBox {
  Point center;
  double width = 0.0;
  double height = 0.0;

  // OTB ground-truth form: 1-based top-left pixel plus size.
  static BoundingBox from_top_left(double x, double y, double w, double h) {
    return {{x + w / 2.0 - 0.5, y + h / 2.0 - 0.5}, w, h};
  }
  double left() const { return center.x - width / 2.0 + 0.5; }
  double top() const { return center.y - height / 2.0 + 0.5; }

  friend bool operator==(const BoundingBox& a, const BoundingBox& b) {
    return a.center.x == b.center.x && a.center.y == b.center.y && a.width == b.width && a.height == b.height;
  }
};

}  // namespace abacf
