#pragma once

#include "vadapt/deform.hpp"
#include "vadapt/spm.hpp"

namespace vadapt {

// Writes spatial features into the ViT stream through cross-attention
// (ViT tokens query the spatial tokens) behind a zero-initialized gate
// vector, so a fresh injector leaves the stream untouched.
template <class T>
struct Injector {
  LayerNorm<T> q_norm, v_norm;
  CrossAttention<T> attn;
  Param<T> gate;  // [dim], zeros

  static Injector make(const std::string& name, const ModelConfig& cfg, Rng& rng) {
    Injector inj;
    inj.q_norm = LayerNorm<T>::make(name + ".qn", cfg.dim);
    inj.v_norm = LayerNorm<T>::make(name + ".vn", cfg.dim);
    inj.attn = CrossAttention<T>::make(name + ".attn", cfg.attn_kind, cfg.dim,
                                       cfg.value_dim(), cfg.adapter_heads,
                                       /*levels=*/3, cfg.points, rng);
    inj.gate = {name + ".gate", Tensor<T>::zeros({cfg.dim})};
    return inj;
  }

  Tensor<T> forward(const Tensor<T>& vit_tokens, const Tensor<T>& vit_refs,
                    const Tensor<T>& sp_tokens, const ScaleLayout& sp_layout,
                    Tape<T>* tape) const {
    Tensor<T> a = attn.forward(q_norm(vit_tokens, tape), vit_refs,
                               v_norm(sp_tokens, tape), sp_layout, tape);
    return ops::add(vit_tokens, ops::mul_vec(a, gate.use(tape), tape), tape);
  }

  void collect(ParamRefs<T>& out) {
    q_norm.collect(out);
    v_norm.collect(out);
    attn.collect(out);
    out.push_back(&gate);
  }
};

// Refines the spatial stream from the ViT block output: cross-attention
// (spatial tokens query the ViT tokens) followed by a thin FFN, both
// residual. The attention output projection and the second FFN layer start
// at zero, so a fresh extractor is the identity.
template <class T>
struct Extractor {
  LayerNorm<T> q_norm, v_norm, ffn_norm;
  CrossAttention<T> attn;
  Linear<T> fc1, fc2;

  static Extractor make(const std::string& name, const ModelConfig& cfg, Rng& rng) {
    Extractor ext;
    ext.q_norm = LayerNorm<T>::make(name + ".qn", cfg.dim);
    ext.v_norm = LayerNorm<T>::make(name + ".vn", cfg.dim);
    ext.ffn_norm = LayerNorm<T>::make(name + ".fn", cfg.dim);
    ext.attn = CrossAttention<T>::make(name + ".attn", cfg.attn_kind, cfg.dim,
                                       cfg.value_dim(), cfg.adapter_heads,
                                       /*levels=*/1, cfg.points, rng);
    ext.fc1 = Linear<T>::make(name + ".fc1", cfg.dim, cfg.adapter_ffn_hidden, rng);
    ext.fc2 = Linear<T>::make(name + ".fc2", cfg.adapter_ffn_hidden, cfg.dim, rng,
                              /*zero_init=*/true);
    return ext;
  }

  Tensor<T> forward(const Tensor<T>& sp_tokens, const Tensor<T>& sp_refs,
                    const Tensor<T>& vit_tokens, GridHW vit_grid,
                    Tape<T>* tape) const {
    const ScaleLayout vit_layout = ScaleLayout::from_grids({vit_grid});
    Tensor<T> a = attn.forward(q_norm(sp_tokens, tape), sp_refs,
                               v_norm(vit_tokens, tape), vit_layout, tape);
    Tensor<T> x = ops::add(sp_tokens, a, tape);
    Tensor<T> f = fc2(ops::gelu(fc1(ffn_norm(x, tape), tape), tape), tape);
    return ops::add(x, f, tape);
  }

  void collect(ParamRefs<T>& out) {
    q_norm.collect(out);
    v_norm.collect(out);
    ffn_norm.collect(out);
    attn.collect(out);
    fc1.collect(out);
    fc2.collect(out);
  }
};

// Interaction-mode "add": every spatial level is bilinearly resized to the
// 1/16 grid, the levels are averaged, and the mean is added to the ViT
// stream. No learned parameters.
template <class T>
Tensor<T> inject_resize_add(const Tensor<T>& vit_tokens, GridHW vit_grid,
                            const Tensor<T>& sp_tokens,
                            const ScaleLayout& sp_layout, Tape<T>* tape) {
  auto maps = split_levels(sp_tokens, sp_layout, tape);
  Tensor<T> acc;
  for (auto& m : maps) {
    Tensor<T> r = ops::bilinear_resize(m, vit_grid.h, vit_grid.w, tape);
    acc = acc.defined() ? ops::add(acc, r, tape) : r;
  }
  acc = ops::scale(acc, static_cast<T>(1.0 / static_cast<double>(maps.size())), tape);
  const auto b = acc.dim(0), d = acc.dim(1);
  Tensor<T> rows = ops::permute(acc, {0, 2, 3, 1}, tape);
  rows = ops::reshape(rows, {b, vit_grid.tokens(), d}, tape);
  return ops::add(vit_tokens, rows, tape);
}

}  // namespace vadapt
