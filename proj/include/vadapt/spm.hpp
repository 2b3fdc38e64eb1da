#pragma once

#include <array>
#include <utility>
#include <vector>

#include "vadapt/config.hpp"
#include "vadapt/layout.hpp"
#include "vadapt/nn.hpp"
#include "vadapt/ops.hpp"

namespace vadapt {

// Flattens [b,d,h,w] maps to token rows and concatenates them level by
// level; the layout records grids and offsets.
template <class T>
std::pair<Tensor<T>, ScaleLayout> flatten_levels(
    const std::vector<Tensor<T>>& maps, Tape<T>* tape) {
  std::vector<Tensor<T>> rows;
  std::vector<GridHW> grids;
  for (const auto& m : maps) {
    const auto b = m.dim(0), d = m.dim(1), h = m.dim(2), w = m.dim(3);
    grids.push_back({h, w});
    Tensor<T> t = ops::permute(m, {0, 2, 3, 1}, tape);
    rows.push_back(ops::reshape(t, {b, h * w, d}, tape));
  }
  return {ops::concat(rows, 1, tape), ScaleLayout::from_grids(std::move(grids))};
}

// Exact inverse of flatten_levels.
template <class T>
std::vector<Tensor<T>> split_levels(const Tensor<T>& tokens,
                                    const ScaleLayout& layout, Tape<T>* tape) {
  if (tokens.dim(1) != layout.total)
    throw ShapeError("split_levels: token count " + std::to_string(tokens.dim(1)) +
                     " does not match layout total " + std::to_string(layout.total));
  const auto b = tokens.dim(0), d = tokens.dim(2);
  std::vector<Tensor<T>> maps;
  for (std::size_t l = 0; l < layout.level_count(); ++l) {
    const auto g = layout.levels[l];
    Tensor<T> s = ops::slice(tokens, 1, layout.offsets[l], g.tokens(), tape);
    s = ops::reshape(s, {b, g.h, g.w, d}, tape);
    maps.push_back(ops::permute(s, {0, 3, 1, 2}, tape));
  }
  return maps;
}

// Convolutional stem and downsampling tower: stride-4 base from three 3x3
// convolutions and a max pool, then stride-2 3x3 convolutions doubling the
// channel count at each of strides 8/16/32, then 1x1 projections to d.
template <class T>
struct SpatialPrior {
  Conv2d<T> stem1, stem2, stem3;
  GroupNorm1<T> stem1_n, stem2_n, stem3_n;
  Conv2d<T> down8, down16, down32;
  GroupNorm1<T> down8_n, down16_n, down32_n;
  std::array<Conv2d<T>, 3> proj;
  std::array<GroupNorm1<T>, 3> proj_n;

  static SpatialPrior make(const SpmConfig& cfg, std::int64_t d, Rng& rng) {
    SpatialPrior s;
    const auto sc = cfg.stem_channels;
    const auto [c8, c16, c32] = cfg.level_channels;
    s.stem1 = Conv2d<T>::make("spm.stem1", 3, sc, 3, 2, 1, rng);
    s.stem2 = Conv2d<T>::make("spm.stem2", sc, sc, 3, 1, 1, rng);
    s.stem3 = Conv2d<T>::make("spm.stem3", sc, sc, 3, 1, 1, rng);
    s.stem1_n = GroupNorm1<T>::make("spm.stem1_n", sc);
    s.stem2_n = GroupNorm1<T>::make("spm.stem2_n", sc);
    s.stem3_n = GroupNorm1<T>::make("spm.stem3_n", sc);
    s.down8 = Conv2d<T>::make("spm.down8", sc, c8, 3, 2, 1, rng);
    s.down16 = Conv2d<T>::make("spm.down16", c8, c16, 3, 2, 1, rng);
    s.down32 = Conv2d<T>::make("spm.down32", c16, c32, 3, 2, 1, rng);
    s.down8_n = GroupNorm1<T>::make("spm.down8_n", c8);
    s.down16_n = GroupNorm1<T>::make("spm.down16_n", c16);
    s.down32_n = GroupNorm1<T>::make("spm.down32_n", c32);
    const std::array<std::int64_t, 3> widths = {c8, c16, c32};
    for (int l = 0; l < 3; ++l) {
      s.proj[static_cast<std::size_t>(l)] =
          Conv2d<T>::make("spm.proj" + std::to_string(l), widths[static_cast<std::size_t>(l)], d, 1, 1, 0, rng);
      s.proj_n[static_cast<std::size_t>(l)] =
          GroupNorm1<T>::make("spm.proj" + std::to_string(l) + "_n", d);
    }
    return s;
  }

  // image [b,3,H,W] (H, W divisible by 32) -> d-channel maps at strides
  // 8/16/32
  std::vector<Tensor<T>> level_maps(const Tensor<T>& image, Tape<T>* tape) const {
    if (image.dim(2) % 32 != 0 || image.dim(3) % 32 != 0)
      throw ShapeError("spm: image extents must be divisible by 32");
    Tensor<T> x = ops::relu(stem1_n(stem1(image, tape), tape), tape);
    x = ops::relu(stem2_n(stem2(x, tape), tape), tape);
    x = ops::relu(stem3_n(stem3(x, tape), tape), tape);
    x = ops::maxpool2d(x, 3, 2, 1, tape);  // stride 4
    Tensor<T> f8 = ops::relu(down8_n(down8(x, tape), tape), tape);
    Tensor<T> f16 = ops::relu(down16_n(down16(f8, tape), tape), tape);
    Tensor<T> f32 = ops::relu(down32_n(down32(f16, tape), tape), tape);
    std::vector<Tensor<T>> out;
    const std::array<const Tensor<T>*, 3> lv = {&f8, &f16, &f32};
    for (std::size_t l = 0; l < 3; ++l)
      out.push_back(proj_n[l](proj[l](*lv[l], tape), tape));
    return out;
  }

  // flattened spatial tokens [b, T, d] in level order 1/8, 1/16, 1/32
  std::pair<Tensor<T>, ScaleLayout> forward(const Tensor<T>& image,
                                            Tape<T>* tape) const {
    return flatten_levels(level_maps(image, tape), tape);
  }

  void collect(ParamRefs<T>& out) {
    stem1.collect(out);
    stem1_n.collect(out);
    stem2.collect(out);
    stem2_n.collect(out);
    stem3.collect(out);
    stem3_n.collect(out);
    down8.collect(out);
    down8_n.collect(out);
    down16.collect(out);
    down16_n.collect(out);
    down32.collect(out);
    down32_n.collect(out);
    for (int l = 0; l < 3; ++l) {
      proj[static_cast<std::size_t>(l)].collect(out);
      proj_n[static_cast<std::size_t>(l)].collect(out);
    }
  }
};

}  // namespace vadapt
