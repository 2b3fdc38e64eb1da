#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "vadapt/config.hpp"
#include "vadapt/layout.hpp"
#include "vadapt/nn.hpp"
#include "vadapt/ops.hpp"

namespace vadapt {

// Normalized (x, y) base coordinates of the queries, one pixel-center point
// per token: ((j+0.5)/w, (i+0.5)/h), levels concatenated row-major.
template <class T>
Tensor<T> make_reference_points(const ScaleLayout& layout) {
  if (layout.total <= 0) throw ShapeError("reference points: empty layout");
  TensorBuilder<T> out({layout.total, 2});
  T* p = out.ptr();
  for (const auto& g : layout.levels)
    for (std::int64_t i = 0; i < g.h; ++i)
      for (std::int64_t j = 0; j < g.w; ++j) {
        *p++ = static_cast<T>((static_cast<double>(j) + 0.5) / static_cast<double>(g.w));
        *p++ = static_cast<T>((static_cast<double>(i) + 0.5) / static_cast<double>(g.h));
      }
  return std::move(out).freeze();
}

template <class T>
Tensor<T> make_reference_points(GridHW grid) {
  return make_reference_points<T>(ScaleLayout::from_grids({grid}));
}

// Multi-scale deformable cross-attention. Each query predicts, per head and
// value level, `points` sampling offsets around its reference point plus a
// weight; weights are softmaxed jointly over (levels x points); the output
// is the projected weighted sum of bilinearly sampled value features.
//
// The value/output projections run through a bottleneck of
// round(ratio * dim) channels. Offsets are expressed in grid cells of the
// sampled level and divided by (w_l, h_l) before use.
template <class T>
struct DeformAttn {
  Linear<T> value_proj;   // dim -> vdim
  Linear<T> out_proj;     // vdim -> dim
  Linear<T> offset_head;  // dim -> heads * levels * points * 2
  Linear<T> weight_head;  // dim -> heads * levels * points
  std::int64_t heads = 1, levels = 1, points = 4, dim = 0, vdim = 0;

  // Offset head starts at zero weight with ring biases: point k sits at
  // angle 2*pi*k/points, scaled by (level+1). Weight head starts at zero,
  // so initial attention is uniform 1/(levels*points). The output
  // projection starts at zero so a freshly built module is a no-op behind
  // its residual connections.
  static DeformAttn make(const std::string& name, std::int64_t dim,
                         std::int64_t vdim, std::int64_t heads,
                         std::int64_t levels, std::int64_t points, Rng& rng) {
    if (vdim % heads != 0)
      throw ConfigError("deform attention: heads must divide value width");
    DeformAttn a;
    a.dim = dim;
    a.vdim = vdim;
    a.heads = heads;
    a.levels = levels;
    a.points = points;
    a.value_proj = Linear<T>::make(name + ".value", dim, vdim, rng);
    a.out_proj = Linear<T>::make(name + ".out", vdim, dim, rng, /*zero_init=*/true);
    a.offset_head = Linear<T>::make(name + ".offset", dim, heads * levels * points * 2, rng, true);
    a.weight_head = Linear<T>::make(name + ".weight", dim, heads * levels * points, rng, true);
    std::vector<T> bias(static_cast<std::size_t>(heads * levels * points * 2));
    for (std::int64_t m = 0; m < heads; ++m)
      for (std::int64_t l = 0; l < levels; ++l)
        for (std::int64_t k = 0; k < points; ++k) {
          const double angle = 2.0 * 3.14159265358979323846 * static_cast<double>(k) /
                               static_cast<double>(points);
          const auto at = ((m * levels + l) * points + k) * 2;
          bias[static_cast<std::size_t>(at)] = static_cast<T>(std::cos(angle) * static_cast<double>(l + 1));
          bias[static_cast<std::size_t>(at + 1)] = static_cast<T>(std::sin(angle) * static_cast<double>(l + 1));
        }
    a.offset_head.b.value = Tensor<T>::from_data({heads * levels * points * 2}, std::move(bias));
    return a;
  }

  // query [b,tq,dim], refs [tq,2], value [b,tv,dim] laid out per `layout`.
  // attn_out, when set, receives the softmaxed weights [b,tq,heads,levels*points].
  Tensor<T> forward(const Tensor<T>& query, const Tensor<T>& refs,
                    const Tensor<T>& value, const ScaleLayout& layout,
                    Tape<T>* tape, Tensor<T>* attn_out = nullptr) const {
    const auto b = query.dim(0), tq = query.dim(1);
    if (static_cast<std::int64_t>(layout.level_count()) != levels)
      throw ShapeError("deform attention: layout level count mismatch");
    if (value.dim(1) != layout.total)
      throw ShapeError("deform attention: value token count " +
                       std::to_string(value.dim(1)) + " != layout total " +
                       std::to_string(layout.total));
    if (refs.dim(0) != tq || refs.dim(1) != 2)
      throw ShapeError("deform attention: reference point count mismatch");
    const auto m = heads, k = points, l = levels;
    const auto dh = vdim / m;

    Tensor<T> v = value_proj(value, tape);  // [b,tv,vdim]
    Tensor<T> offsets = offset_head(query, tape);
    offsets = ops::reshape(offsets, {b, tq, m, l, k, 2}, tape);
    Tensor<T> logits = weight_head(query, tape);
    logits = ops::reshape(logits, {b, tq, m, l * k}, tape);
    Tensor<T> weights = ops::softmax_lastdim(logits, tape);  // joint over levels x points
    if (attn_out) *attn_out = weights;
    weights = ops::reshape(weights, {b, tq, m, l, k}, tape);

    // reference points tiled to [b,tq,m,k,2] (constant, untracked)
    Tensor<T> refs_tiled;
    {
      TensorBuilder<T> rb({b, tq, m, k, 2});
      T* rp = rb.ptr();
      const T* src = refs.ptr();
      for (std::int64_t bi = 0; bi < b; ++bi)
        for (std::int64_t t = 0; t < tq; ++t)
          for (std::int64_t mi = 0; mi < m * k; ++mi) {
            *rp++ = src[t * 2];
            *rp++ = src[t * 2 + 1];
          }
      refs_tiled = std::move(rb).freeze();
    }

    Tensor<T> total;
    for (std::int64_t li = 0; li < l; ++li) {
      const auto g = layout.levels[static_cast<std::size_t>(li)];
      // level value map split per head: [b*m, dh, h, w]
      Tensor<T> vm = ops::slice(v, 1, layout.offsets[static_cast<std::size_t>(li)], g.tokens(), tape);
      vm = ops::reshape(vm, {b, g.h, g.w, m, dh}, tape);
      vm = ops::permute(vm, {0, 3, 4, 1, 2}, tape);
      vm = ops::reshape(vm, {b * m, dh, g.h, g.w}, tape);

      // sampling locations = ref + offset / (w_l, h_l)
      Tensor<T> off = ops::slice(offsets, 3, li, 1, tape);
      off = ops::reshape(off, {b, tq, m, k, 2}, tape);
      Tensor<T> inv = Tensor<T>::from_data(
          {2}, {static_cast<T>(1.0 / static_cast<double>(g.w)),
                static_cast<T>(1.0 / static_cast<double>(g.h))});
      off = ops::mul_vec(off, inv, tape);
      Tensor<T> loc = ops::cadd(off, refs_tiled, tape);
      loc = ops::permute(loc, {0, 2, 1, 3, 4}, tape);  // [b,m,tq,k,2]
      loc = ops::reshape(loc, {b * m, tq * k, 2}, tape);

      Tensor<T> sampled = ops::bilinear_sample(vm, loc, tape);  // [b*m, tq*k, dh]

      Tensor<T> wl = ops::slice(weights, 3, li, 1, tape);
      wl = ops::reshape(wl, {b, tq, m, k}, tape);
      wl = ops::permute(wl, {0, 2, 1, 3}, tape);
      wl = ops::reshape(wl, {b * m, tq * k}, tape);

      Tensor<T> contrib = ops::scale_channels(sampled, wl, tape);
      contrib = ops::reshape(contrib, {b * m, tq, k, dh}, tape);
      contrib = ops::sum_axis(contrib, 2, tape);  // [b*m, tq, dh]
      total = total.defined() ? ops::add(total, contrib, tape) : contrib;
    }

    total = ops::reshape(total, {b, m, tq, dh}, tape);
    total = ops::permute(total, {0, 2, 1, 3}, tape);
    total = ops::reshape(total, {b, tq, vdim}, tape);
    return out_proj(total, tape);
  }

  void collect(ParamRefs<T>& out) {
    value_proj.collect(out);
    out_proj.collect(out);
    offset_head.collect(out);
    weight_head.collect(out);
  }
};

// Dense multi-head cross-attention over every key position: the quadratic
// alternative behind the same call surface.
template <class T>
struct DenseCrossAttn {
  Linear<T> q_proj, k_proj, v_proj, out_proj;
  std::int64_t heads = 1, dim = 0;

  static DenseCrossAttn make(const std::string& name, std::int64_t dim,
                             std::int64_t heads, Rng& rng) {
    if (dim % heads != 0)
      throw ConfigError("dense attention: heads must divide dim");
    DenseCrossAttn a;
    a.dim = dim;
    a.heads = heads;
    a.q_proj = Linear<T>::make(name + ".q", dim, dim, rng);
    a.k_proj = Linear<T>::make(name + ".k", dim, dim, rng);
    a.v_proj = Linear<T>::make(name + ".v", dim, dim, rng);
    a.out_proj = Linear<T>::make(name + ".out", dim, dim, rng, /*zero_init=*/true);
    return a;
  }

  // attn_out, when set, receives the softmaxed map [b*heads, tq, tv]
  Tensor<T> forward(const Tensor<T>& query, const Tensor<T>& value,
                    Tape<T>* tape, Tensor<T>* attn_out = nullptr) const {
    const auto b = query.dim(0), tq = query.dim(1);
    const auto tv = value.dim(1);
    const auto dh = dim / heads;
    auto split = [&](const Tensor<T>& x, std::int64_t t) {
      Tensor<T> r = ops::reshape(x, {b, t, heads, dh}, tape);
      r = ops::permute(r, {0, 2, 1, 3}, tape);
      return ops::reshape(r, {b * heads, t, dh}, tape);
    };
    Tensor<T> q = split(q_proj(query, tape), tq);
    Tensor<T> kk = split(k_proj(value, tape), tv);
    Tensor<T> v = split(v_proj(value, tape), tv);
    Tensor<T> kt = ops::permute(kk, {0, 2, 1}, tape);
    Tensor<T> scores = ops::bmm(q, kt, tape);
    scores = ops::scale(scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))), tape);
    Tensor<T> probs = ops::softmax_lastdim(scores, tape);
    if (attn_out) *attn_out = probs;
    Tensor<T> ctx = ops::bmm(probs, v, tape);
    ctx = ops::reshape(ctx, {b, heads, tq, dh}, tape);
    ctx = ops::permute(ctx, {0, 2, 1, 3}, tape);
    ctx = ops::reshape(ctx, {b, tq, dim}, tape);
    return out_proj(ctx, tape);
  }

  void collect(ParamRefs<T>& out) {
    q_proj.collect(out);
    k_proj.collect(out);
    v_proj.collect(out);
    out_proj.collect(out);
  }
};

// The attention slot used by the interaction modules: deformable by
// default, dense-global for the ablation swap.
template <class T>
struct CrossAttention {
  AttnKind kind = AttnKind::deformable;
  std::optional<DeformAttn<T>> deform;
  std::optional<DenseCrossAttn<T>> dense;

  static CrossAttention make(const std::string& name, AttnKind kind,
                             std::int64_t dim, std::int64_t vdim,
                             std::int64_t heads, std::int64_t levels,
                             std::int64_t points, Rng& rng) {
    CrossAttention c;
    c.kind = kind;
    if (kind == AttnKind::deformable)
      c.deform = DeformAttn<T>::make(name, dim, vdim, heads, levels, points, rng);
    else
      c.dense = DenseCrossAttn<T>::make(name, dim, heads, rng);
    return c;
  }

  Tensor<T> forward(const Tensor<T>& query, const Tensor<T>& refs,
                    const Tensor<T>& value, const ScaleLayout& layout,
                    Tape<T>* tape) const {
    if (kind == AttnKind::deformable)
      return deform->forward(query, refs, value, layout, tape);
    return dense->forward(query, value, tape);
  }

  void collect(ParamRefs<T>& out) {
    if (deform) deform->collect(out);
    if (dense) dense->collect(out);
  }
};

}  // namespace vadapt
