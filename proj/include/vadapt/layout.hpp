#pragma once

#include <cstdint>
#include <vector>

#include "vadapt/error.hpp"

namespace vadapt {

struct GridHW {
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::int64_t tokens() const { return h * w; }
  bool operator==(const GridHW&) const = default;
};

// Token bookkeeping for a multi-level flattened feature stack: per-level
// grids, exclusive-prefix-sum offsets into the token axis, and the total.
struct ScaleLayout {
  std::vector<GridHW> levels;
  std::vector<std::int64_t> offsets;
  std::int64_t total = 0;

  static ScaleLayout from_grids(std::vector<GridHW> grids) {
    ScaleLayout lay;
    lay.levels = std::move(grids);
    std::int64_t off = 0;
    for (const auto& g : lay.levels) {
      lay.offsets.push_back(off);
      off += g.tokens();
    }
    lay.total = off;
    return lay;
  }

  std::size_t level_count() const { return levels.size(); }

  std::int64_t level_size(std::size_t l) const { return levels[l].tokens(); }
};

// Grids at strides 8/16/32 for an input of extent (h, w); requires
// divisibility by 32.
inline ScaleLayout pyramid_layout(std::int64_t h, std::int64_t w) {
  if (h % 32 != 0 || w % 32 != 0)
    throw ShapeError("input extents must be divisible by 32, got " +
                     std::to_string(h) + "x" + std::to_string(w));
  return ScaleLayout::from_grids(
      {{h / 8, w / 8}, {h / 16, w / 16}, {h / 32, w / 32}});
}

}  // namespace vadapt
