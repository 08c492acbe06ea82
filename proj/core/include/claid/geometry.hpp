#pragma once

#include <algorithm>

namespace claid {

// Axis-aligned pixel box, half-open: [x0, x1) x [y0, y1).
struct BBox {
  float x0 = 0.0F;
  float y0 = 0.0F;
  float x1 = 0.0F;
  float y1 = 0.0F;

  [[nodiscard]] float width() const { return std::max(0.0F, x1 - x0); }
  [[nodiscard]] float height() const { return std::max(0.0F, y1 - y0); }
  [[nodiscard]] double area() const {
    const double w = static_cast<double>(x1) - x0;
    const double h = static_cast<double>(y1) - y0;
    return w > 0.0 && h > 0.0 ? w * h : 0.0;
  }
  [[nodiscard]] bool empty() const { return !(x1 > x0 && y1 > y0); }

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline double intersection_area(const BBox& a, const BBox& b) {
  const double w = static_cast<double>(std::min(a.x1, b.x1)) - std::max(a.x0, b.x0);
  const double h = static_cast<double>(std::min(a.y1, b.y1)) - std::max(a.y0, b.y0);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

}  // namespace claid
