#pragma once

#include <cstddef>
#include <vector>

namespace crackbench {

/// Top-left pixel offset of a square window, row-major.
struct GridOffset {
  int row = 0;
  int col = 0;

  friend bool operator==(const GridOffset&, const GridOffset&) = default;
};

/// Number of windows along one axis: floor((extent - window) / stride) + 1,
/// or 0 when the window does not fit.
inline int grid_steps(int extent, int window, int stride) {
  if (window <= 0 || stride <= 0 || extent < window) {
    return 0;
  }
  return (extent - window) / stride + 1;
}

inline std::size_t grid_count(int height, int width, int window, int stride) {
  return static_cast<std::size_t>(grid_steps(height, window, stride)) *
         static_cast<std::size_t>(grid_steps(width, window, stride));
}

/// Offsets of every window that fits fully inside a height x width image,
/// ordered by (row, col). With cover_edges, one extra clamped window is added
/// along each axis whose last grid window leaves an uncovered margin.
inline std::vector<GridOffset> grid_offsets(int height, int width, int window, int stride,
                                            bool cover_edges = false) {
  auto axis = [&](int extent) {
    std::vector<int> starts;
    const int steps = grid_steps(extent, window, stride);
    starts.reserve(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i < steps; ++i) {
      starts.push_back(i * stride);
    }
    if (cover_edges && steps > 0 && starts.back() + window < extent) {
      starts.push_back(extent - window);
    }
    return starts;
  };

  const auto rows = axis(height);
  const auto cols = axis(width);
  std::vector<GridOffset> out;
  out.reserve(rows.size() * cols.size());
  for (int r : rows) {
    for (int c : cols) {
      out.push_back({r, c});
    }
  }
  return out;
}

} // namespace crackbench
