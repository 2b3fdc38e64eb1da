#pragma once

#include <utility>

#include "vadapt/interaction.hpp"
#include "vadapt/vit.hpp"

namespace vadapt {

// Output feature maps at strides 4/8/16/32, d channels each.
template <class T>
struct Pyramid {
  Tensor<T> p4, p8, p16, p32;
};

struct ParamCounts {
  std::int64_t backbone = 0;
  std::int64_t adapter = 0;
  std::int64_t total = 0;
  std::int64_t tensors = 0;
};

// tokens [b, h*w, d] -> map [b, d, h, w]
template <class T>
Tensor<T> tokens_to_map(const Tensor<T>& tokens, GridHW grid, Tape<T>* tape) {
  const auto b = tokens.dim(0), d = tokens.dim(2);
  Tensor<T> m = ops::reshape(tokens, {b, grid.h, grid.w, d}, tape);
  return ops::permute(m, {0, 3, 1, 2}, tape);
}

// The assembled model: plain ViT stream, spatial prior, N interaction
// blocks (inject -> encoder block -> extract, with a stack of three
// extractors closing the last block), and the output pyramid.
template <class T>
struct AdapterModel {
  ModelConfig cfg;
  VitBackbone<T> backbone;
  SpatialPrior<T> spm;
  std::vector<Injector<T>> injectors;
  std::vector<Extractor<T>> extractors;  // per-block (N-1) then final stack (3)
  ConvTranspose2d<T> up4;
  GroupNorm1<T> up4_norm;

  static AdapterModel make(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    return build(cfg, rng);
  }

  // zero-filled weights; for shape and count inspection only
  static AdapterModel make_for_audit(const ModelConfig& cfg) {
    Rng rng = Rng::zeroed();
    return build(cfg, rng);
  }

  static AdapterModel build(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    AdapterModel m;
    m.cfg = cfg;
    m.backbone = VitBackbone<T>::make(cfg, rng);
    m.spm = SpatialPrior<T>::make(cfg.spm, cfg.dim, rng);
    if (cfg.mode == InteractionMode::attention) {
      for (std::int64_t i = 0; i < cfg.interactions; ++i)
        m.injectors.push_back(Injector<T>::make(
            "adapter.block" + std::to_string(i) + ".inject", cfg, rng));
      for (std::int64_t i = 0; i + 1 < cfg.interactions; ++i)
        m.extractors.push_back(Extractor<T>::make(
            "adapter.block" + std::to_string(i) + ".extract", cfg, rng));
      for (int j = 0; j < 3; ++j)
        m.extractors.push_back(Extractor<T>::make(
            "adapter.final.extract" + std::to_string(j), cfg, rng));
    }
    m.up4 = ConvTranspose2d<T>::make("adapter.up4", cfg.dim, cfg.dim, 2, 2, rng);
    m.up4_norm = GroupNorm1<T>::make("adapter.up4_n", cfg.dim);
    return m;
  }

  struct Trace {
    std::vector<Tensor<T>> vit_blocks;  // stream after each encoder block
    Tensor<T> final_vit;                // post final norm
    Tensor<T> final_sp;
  };

  // Runs the N interaction blocks over prepared token streams; returns
  // (vit tokens, spatial tokens) after the last block.
  std::pair<Tensor<T>, Tensor<T>> interaction_loop(
      Tensor<T> vit_tokens, GridHW grid, Tensor<T> sp_tokens,
      const ScaleLayout& sp_layout, Tape<T>* tape, Trace* trace = nullptr) const {
    const auto n = cfg.interactions;
    Tensor<T> vit_refs, sp_refs;
    if (cfg.mode == InteractionMode::attention &&
        cfg.attn_kind == AttnKind::deformable) {
      vit_refs = make_reference_points<T>(grid);
      sp_refs = make_reference_points<T>(sp_layout);
    } else if (cfg.mode == InteractionMode::attention) {
      vit_refs = Tensor<T>::zeros({grid.tokens(), 2});
      sp_refs = Tensor<T>::zeros({sp_layout.total, 2});
    }
    for (std::int64_t i = 0; i < n; ++i) {
      switch (cfg.mode) {
        case InteractionMode::attention:
          vit_tokens = injectors[static_cast<std::size_t>(i)].forward(
              vit_tokens, vit_refs, sp_tokens, sp_layout, tape);
          break;
        case InteractionMode::add:
          vit_tokens = inject_resize_add(vit_tokens, grid, sp_tokens, sp_layout, tape);
          break;
        case InteractionMode::none:
          break;
      }
      vit_tokens = backbone.run_block(vit_tokens, grid, i, n, tape);
      if (trace) trace->vit_blocks.push_back(vit_tokens);
      if (cfg.mode != InteractionMode::attention) continue;
      if (i + 1 < n) {
        sp_tokens = extractors[static_cast<std::size_t>(i)].forward(
            sp_tokens, sp_refs, vit_tokens, grid, tape);
      } else if (cfg.stacked_sequential) {
        for (std::int64_t j = 0; j < 3; ++j)
          sp_tokens = extractors[static_cast<std::size_t>(n - 1 + j)].forward(
              sp_tokens, sp_refs, vit_tokens, grid, tape);
      } else {
        // parallel-sum variant: deltas from the same input, summed
        Tensor<T> base = sp_tokens;
        Tensor<T> acc = base;
        for (std::int64_t j = 0; j < 3; ++j) {
          Tensor<T> o = extractors[static_cast<std::size_t>(n - 1 + j)].forward(
              base, sp_refs, vit_tokens, grid, tape);
          acc = ops::add(acc, ops::sub(o, base, tape), tape);
        }
        sp_tokens = acc;
      }
    }
    return {vit_tokens, sp_tokens};
  }

  Pyramid<T> forward(const Tensor<T>& image, Tape<T>* tape,
                     Trace* trace = nullptr) const {
    auto [sp_tokens, sp_layout] = spm.forward(image, tape);
    Tensor<T> tokens = backbone.embed(image, tape);
    const GridHW grid = backbone.token_grid(image);
    if (grid.h != sp_layout.levels[1].h || grid.w != sp_layout.levels[1].w)
      throw ShapeError("1/16 grids of the two streams disagree");
    auto [vit_out, sp_out] =
        interaction_loop(tokens, grid, sp_tokens, sp_layout, tape, trace);
    Tensor<T> vit_final = backbone.final_ln(vit_out, tape);
    if (trace) {
      trace->final_vit = vit_final;
      trace->final_sp = sp_out;
    }
    auto maps = split_levels(sp_out, sp_layout, tape);
    Tensor<T> p8 = maps[0], p16 = maps[1], p32 = maps[2];
    if (cfg.fuse_vit)
      p16 = ops::add(p16, tokens_to_map(vit_final, grid, tape), tape);
    Tensor<T> p4 = up4_norm(up4(p8, tape), tape);
    return {p4, p8, p16, p32};
  }

  void collect(ParamRefs<T>& out) {
    backbone.collect(out);
    spm.collect(out);
    for (auto& inj : injectors) inj.collect(out);
    for (auto& ext : extractors) ext.collect(out);
    up4.collect(out);
    up4_norm.collect(out);
  }

  ParamCounts count_parameters() {
    ParamRefs<T> refs;
    collect(refs);
    ParamCounts counts;
    for (auto* p : refs) {
      const auto n = p->value.numel();
      counts.total += n;
      counts.tensors += 1;
      if (p->name.rfind("vit.", 0) == 0)
        counts.backbone += n;
      else
        counts.adapter += n;
    }
    return counts;
  }
};

}  // namespace vadapt
