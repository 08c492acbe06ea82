#pragma once

#include <cstddef>
#include <span>

namespace claid::detail {

// Sequential double-precision dot product; the reference evaluation order.
inline double dot_exact(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * b[k];
  return s;
}

inline double dot_mixed(std::span<const float> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * b[k];
  return s;
}

}  // namespace claid::detail
