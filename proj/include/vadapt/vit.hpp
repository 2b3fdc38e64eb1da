#pragma once

#include <cmath>
#include <vector>

#include "vadapt/config.hpp"
#include "vadapt/layout.hpp"
#include "vadapt/nn.hpp"
#include "vadapt/ops.hpp"

namespace vadapt {

// tokens [b, t, d] + table [t, d], broadcast over the batch axis
template <class T>
Tensor<T> add_token_table(const Tensor<T>& tokens, const Tensor<T>& table,
                          Tape<T>* tape) {
  const auto b = tokens.dim(0);
  Tensor<T> flat = ops::reshape(tokens, {b, tokens.dim(1) * tokens.dim(2)}, tape);
  Tensor<T> row = ops::reshape(table, {table.numel()}, tape);
  return ops::reshape(ops::add_bias(flat, row, tape), tokens.dims(), tape);
}

// Multi-head self-attention over [n, t, d]. Optionally exports the
// post-softmax attention map [n*heads, t, t].
template <class T>
Tensor<T> mhsa(const Tensor<T>& x, std::int64_t heads, const Linear<T>& qkv,
               const Linear<T>& proj, Tape<T>* tape,
               Tensor<T>* attn_out = nullptr) {
  const auto n = x.dim(0), t = x.dim(1), d = x.dim(2);
  const auto dh = d / heads;
  Tensor<T> q3 = qkv(x, tape);  // [n, t, 3d]
  q3 = ops::reshape(q3, {n, t, 3, heads, dh}, tape);
  q3 = ops::permute(q3, {2, 0, 3, 1, 4}, tape);  // [3, n, heads, t, dh]
  auto take = [&](std::int64_t i) {
    Tensor<T> s = ops::slice(q3, 0, i, 1, tape);
    return ops::reshape(s, {n * heads, t, dh}, tape);
  };
  Tensor<T> q = take(0), k = take(1), v = take(2);
  Tensor<T> kt = ops::permute(k, {0, 2, 1}, tape);  // [n*heads, dh, t]
  Tensor<T> scores = ops::bmm(q, kt, tape);
  scores = ops::scale(scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))), tape);
  Tensor<T> probs = ops::softmax_lastdim(scores, tape);
  if (attn_out) *attn_out = probs;
  Tensor<T> ctx = ops::bmm(probs, v, tape);  // [n*heads, t, dh]
  ctx = ops::reshape(ctx, {n, heads, t, dh}, tape);
  ctx = ops::permute(ctx, {0, 2, 1, 3}, tape);
  ctx = ops::reshape(ctx, {n, t, d}, tape);
  return proj(ctx, tape);
}

// Pre-norm transformer encoder layer; window mode partitions the grid into
// non-overlapping windows before attention and restores it afterwards.
template <class T>
struct EncoderLayer {
  LayerNorm<T> ln1, ln2;
  Linear<T> qkv, proj;
  Linear<T> fc1, fc2;
  std::int64_t heads = 1;
  bool global = true;

  static EncoderLayer make(const std::string& name, std::int64_t d,
                           std::int64_t ffn, std::int64_t heads, bool global,
                           Rng& rng) {
    EncoderLayer l;
    l.ln1 = LayerNorm<T>::make(name + ".ln1", d);
    l.ln2 = LayerNorm<T>::make(name + ".ln2", d);
    l.qkv = Linear<T>::make(name + ".qkv", d, 3 * d, rng);
    l.proj = Linear<T>::make(name + ".proj", d, d, rng);
    l.fc1 = Linear<T>::make(name + ".fc1", d, ffn, rng);
    l.fc2 = Linear<T>::make(name + ".fc2", ffn, d, rng);
    l.heads = heads;
    return l;
  }

  Tensor<T> forward(const Tensor<T>& tokens, GridHW grid, std::int64_t window,
                    Tape<T>* tape, Tensor<T>* attn_out = nullptr) const {
    const auto b = tokens.dim(0);
    Tensor<T> normed = ln1(tokens, tape);
    Tensor<T> attn;
    if (global || (grid.h == window && grid.w == window)) {
      attn = mhsa(normed, heads, qkv, proj, tape, attn_out);
    } else {
      Tensor<T> win = ops::window_partition(normed, grid.h, grid.w, window, tape);
      Tensor<T> out = mhsa(win, heads, qkv, proj, tape, attn_out);
      attn = ops::window_unpartition(out, grid.h, grid.w, window, b, tape);
    }
    Tensor<T> x = ops::add(tokens, attn, tape);
    Tensor<T> f = fc2(ops::gelu(fc1(ln2(x, tape), tape), tape), tape);
    return ops::add(x, f, tape);
  }

  void collect(ParamRefs<T>& out) {
    ln1.collect(out);
    ln2.collect(out);
    qkv.collect(out);
    proj.collect(out);
    fc1.collect(out);
    fc2.collect(out);
  }
};

// True at index i when layer i runs global attention. With block_last the
// global layer closes each interval: (i+1) == 0 mod interval.
inline std::vector<bool> make_global_schedule(std::int64_t layers,
                                              std::int64_t interval,
                                              bool block_last) {
  std::vector<bool> global(static_cast<std::size_t>(layers));
  for (std::int64_t i = 0; i < layers; ++i)
    global[static_cast<std::size_t>(i)] =
        block_last ? ((i + 1) % interval == 0) : (i % interval == 0);
  return global;
}

// The plain ViT stream: patch embedding, learnable position table, L
// encoder layers on the 1/16 token grid.
template <class T>
struct VitBackbone {
  Conv2d<T> patch;  // kernel = stride = patch size
  Param<T> pos;     // [pos_grid tokens, d]
  GridHW pos_grid;
  std::int64_t patch_size = 16;
  std::int64_t window = 14;
  std::vector<EncoderLayer<T>> layers;
  LayerNorm<T> final_ln;

  static VitBackbone make(const ModelConfig& cfg, Rng& rng) {
    VitBackbone v;
    v.patch = Conv2d<T>::make("vit.patch", 3, cfg.dim, cfg.patch, cfg.patch, 0, rng);
    v.pos_grid = {cfg.pos_grid, cfg.pos_grid};
    v.pos = {"vit.pos", init::trunc_normal02<T>({cfg.pos_grid * cfg.pos_grid, cfg.dim}, rng)};
    v.patch_size = cfg.patch;
    v.window = cfg.window;
    const auto schedule = make_global_schedule(
        cfg.layers, cfg.resolved_global_interval(), cfg.global_block_last);
    for (std::int64_t i = 0; i < cfg.layers; ++i)
      v.layers.push_back(EncoderLayer<T>::make("vit.layer" + std::to_string(i),
                                               cfg.dim, cfg.ffn, cfg.heads,
                                               schedule[static_cast<std::size_t>(i)], rng));
    v.final_ln = LayerNorm<T>::make("vit.final_ln", cfg.dim);
    return v;
  }

  // image [b,3,H,W] -> tokens [b, (H/p)(W/p), d]
  Tensor<T> patch_tokens(const Tensor<T>& image, Tape<T>* tape) const {
    if (image.dim(2) % patch_size != 0 || image.dim(3) % patch_size != 0)
      throw ShapeError("image extents not divisible by patch size " +
                       std::to_string(patch_size));
    Tensor<T> fm = patch(image, tape);  // [b, d, h, w]
    const auto b = fm.dim(0), d = fm.dim(1), h = fm.dim(2), w = fm.dim(3);
    Tensor<T> t = ops::permute(fm, {0, 2, 3, 1}, tape);
    return ops::reshape(t, {b, h * w, d}, tape);
  }

  GridHW token_grid(const Tensor<T>& image) const {
    return {image.dim(2) / patch_size, image.dim(3) / patch_size};
  }

  // position table resized bilinearly when the runtime grid differs from
  // the base grid
  Tensor<T> position_table(GridHW grid, Tape<T>* tape) const {
    Tensor<T> p = pos.use(tape);
    if (grid == pos_grid) return p;
    const auto d = p.dim(1);
    Tensor<T> m = ops::permute(p, {1, 0}, tape);  // [d, t0]
    m = ops::reshape(m, {1, d, pos_grid.h, pos_grid.w}, tape);
    m = ops::bilinear_resize(m, grid.h, grid.w, tape);
    m = ops::reshape(m, {d, grid.tokens()}, tape);
    return ops::permute(m, {1, 0}, tape);
  }

  Tensor<T> embed(const Tensor<T>& image, Tape<T>* tape) const {
    Tensor<T> tokens = patch_tokens(image, tape);
    GridHW grid = token_grid(image);
    return add_token_table(tokens, position_table(grid, tape), tape);
  }

  Tensor<T> run_layers(const Tensor<T>& tokens, GridHW grid, std::int64_t from,
                       std::int64_t to, Tape<T>* tape) const {
    Tensor<T> x = tokens;
    for (std::int64_t i = from; i < to; ++i)
      x = layers[static_cast<std::size_t>(i)].forward(x, grid, window, tape);
    return x;
  }

  // layers [i*L/N, (i+1)*L/N) of an N-block split
  Tensor<T> run_block(const Tensor<T>& tokens, GridHW grid, std::int64_t block,
                      std::int64_t num_blocks, Tape<T>* tape) const {
    const auto l = static_cast<std::int64_t>(layers.size());
    if (l % num_blocks != 0)
      throw ConfigError("layer count not divisible by block count");
    const auto per = l / num_blocks;
    return run_layers(tokens, grid, block * per, (block + 1) * per, tape);
  }

  // full plain stream; appends each block-boundary state to trace when given
  Tensor<T> forward_plain(const Tensor<T>& image, std::int64_t num_blocks,
                          Tape<T>* tape,
                          std::vector<Tensor<T>>* trace = nullptr) const {
    Tensor<T> x = embed(image, tape);
    GridHW grid = token_grid(image);
    for (std::int64_t i = 0; i < num_blocks; ++i) {
      x = run_block(x, grid, i, num_blocks, tape);
      if (trace) trace->push_back(x);
    }
    return x;
  }

  void collect(ParamRefs<T>& out) {
    patch.collect(out);
    out.push_back(&pos);
    for (auto& l : layers) l.collect(out);
    final_ln.collect(out);
  }
};

}  // namespace vadapt
