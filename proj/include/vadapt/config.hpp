#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace vadapt {

enum class AttnKind { deformable, dense_global };
enum class InteractionMode { attention, add, none };
enum class Precision { f32, f64 };

struct SpmConfig {
  std::int64_t stem_channels = 64;
  std::array<std::int64_t, 3> level_channels = {128, 256, 512};
};

// Hyperparameters of one model variant. Backbone fields describe the plain
// ViT stream; adapter fields describe the side network.
struct ModelConfig {
  std::string name = "custom";

  // backbone
  std::int64_t layers = 12;
  std::int64_t dim = 384;
  std::int64_t ffn = 1536;
  std::int64_t heads = 6;
  std::int64_t patch = 16;
  std::int64_t pos_grid = 14;         // base grid of the position embedding
  std::int64_t window = 14;           // window attention extent
  std::int64_t global_interval = 0;   // 0 = layers/4
  bool global_block_last = true;      // global layer last (vs first) in each interval

  // adapter
  std::int64_t interactions = 4;          // N
  std::int64_t adapter_ffn_hidden = 96;   // round(0.25 * dim)
  std::int64_t adapter_heads = 6;
  std::int64_t points = 4;                // sampling points per head per level
  double deform_ratio = 0.5;              // value bottleneck width / dim
  AttnKind attn_kind = AttnKind::deformable;
  InteractionMode mode = InteractionMode::attention;
  bool fuse_vit = true;              // add final ViT map into the 1/16 level
  bool stacked_sequential = true;    // final extractor stack: sequential vs parallel-sum
  SpmConfig spm;

  // published reference sizes in millions (0 = none for this variant)
  double ref_backbone_m = 0.0;
  double ref_adapter_m = 0.0;

  std::int64_t resolved_global_interval() const {
    return global_interval > 0 ? global_interval : layers / 4;
  }
  std::int64_t value_dim() const {
    return static_cast<std::int64_t>(deform_ratio * static_cast<double>(dim) + 0.5);
  }

  void validate() const;
};

// Named variants: micro (desk-scale), tiny, small, base, large.
ModelConfig preset(const std::string& name);

const char* to_string(AttnKind k);
const char* to_string(InteractionMode m);
AttnKind attn_kind_from_string(const std::string& s);
InteractionMode mode_from_string(const std::string& s);

}  // namespace vadapt
