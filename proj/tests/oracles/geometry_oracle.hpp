#pragma once

// Test-only reference routes for geometry: lattice counting and exhaustive
// enumeration. Deliberately slow and independent of include/insdet.

#include <algorithm>
#include <optional>

namespace oracle {

struct IntBox {
  int x0, y0, x1, y1;  // half-open
};

// IoU by counting unit cells of the integer lattice.
inline double lattice_iou(const IntBox& a, const IntBox& b) {
  const int lo_x = std::min(a.x0, b.x0), hi_x = std::max(a.x1, b.x1);
  const int lo_y = std::min(a.y0, b.y0), hi_y = std::max(a.y1, b.y1);
  long inter = 0, uni = 0;
  for (int y = lo_y; y < hi_y; ++y) {
    for (int x = lo_x; x < hi_x; ++x) {
      const bool in_a = x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1;
      const bool in_b = x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

// Smallest side of an in-image square containing `tight`, by enumerating
// every square position and side. Nullopt when no square fits around it.
inline std::optional<int> minimal_containing_square(const IntBox& tight, int w, int h) {
  for (int side = 1; side <= std::min(w, h); ++side) {
    for (int y = 0; y + side <= h; ++y) {
      for (int x = 0; x + side <= w; ++x) {
        if (x <= tight.x0 && y <= tight.y0 && x + side >= tight.x1 && y + side >= tight.y1) {
          return side;
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace oracle
