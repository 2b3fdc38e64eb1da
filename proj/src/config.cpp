#include "vadapt/config.hpp"

#include "vadapt/error.hpp"

namespace vadapt {

void ModelConfig::validate() const {
  if (layers <= 0 || dim <= 0 || ffn <= 0 || heads <= 0)
    throw ConfigError("backbone extents must be positive");
  if (layers % interactions != 0)
    throw ConfigError("layer count " + std::to_string(layers) +
                      " not divisible by interaction count " +
                      std::to_string(interactions));
  if (dim % heads != 0)
    throw ConfigError("backbone heads must divide dim");
  if (value_dim() % adapter_heads != 0)
    throw ConfigError("adapter heads must divide the value width " +
                      std::to_string(value_dim()));
  if (points <= 0) throw ConfigError("sampling point count must be positive");
  if (window <= 0) throw ConfigError("window size must be positive");
  if (layers % resolved_global_interval() != 0)
    throw ConfigError("global-attention interval must divide layer count");
  for (auto c : spm.level_channels)
    if (c <= 0) throw ConfigError("spm channel counts must be positive");
  if (spm.stem_channels <= 0) throw ConfigError("spm stem width must be positive");
}

ModelConfig preset(const std::string& name) {
  ModelConfig c;
  c.name = name;
  if (name == "micro") {
    // desk-scale variant: window 4, shrunken stem, one layer per block
    c.layers = 4;
    c.dim = 32;
    c.ffn = 128;
    c.heads = 4;
    c.interactions = 4;
    c.adapter_ffn_hidden = 8;
    c.adapter_heads = 4;
    c.window = 4;
    c.pos_grid = 4;
    c.global_interval = 4;
    c.spm = SpmConfig{16, {32, 64, 128}};
  } else if (name == "tiny") {
    c.layers = 12;
    c.dim = 192;
    c.ffn = 768;
    c.heads = 3;
    c.adapter_ffn_hidden = 48;
    c.adapter_heads = 6;
    c.ref_backbone_m = 5.5;
    c.ref_adapter_m = 2.5;
  } else if (name == "small") {
    c.layers = 12;
    c.dim = 384;
    c.ffn = 1536;
    c.heads = 6;
    c.adapter_ffn_hidden = 96;
    c.adapter_heads = 6;
    c.ref_backbone_m = 21.7;
    c.ref_adapter_m = 5.8;
  } else if (name == "base") {
    c.layers = 12;
    c.dim = 768;
    c.ffn = 3072;
    c.heads = 12;
    c.adapter_ffn_hidden = 192;
    c.adapter_heads = 12;
    c.ref_backbone_m = 85.8;
    c.ref_adapter_m = 14.0;
  } else if (name == "large") {
    c.layers = 24;
    c.dim = 1024;
    c.ffn = 4096;
    c.heads = 16;
    c.adapter_ffn_hidden = 256;
    c.adapter_heads = 16;
    c.ref_backbone_m = 303.3;
    c.ref_adapter_m = 23.7;
  } else {
    throw UsageError("unknown preset '" + name +
                     "' (expected micro|tiny|small|base|large)");
  }
  c.validate();
  return c;
}

const char* to_string(AttnKind k) {
  return k == AttnKind::deformable ? "deformable" : "dense-global";
}

const char* to_string(InteractionMode m) {
  switch (m) {
    case InteractionMode::attention: return "attention";
    case InteractionMode::add: return "add";
    default: return "none";
  }
}

AttnKind attn_kind_from_string(const std::string& s) {
  if (s == "deformable") return AttnKind::deformable;
  if (s == "dense-global" || s == "global") return AttnKind::dense_global;
  throw UsageError("unknown attention kind '" + s + "'");
}

InteractionMode mode_from_string(const std::string& s) {
  if (s == "attention") return InteractionMode::attention;
  if (s == "add") return InteractionMode::add;
  if (s == "none") return InteractionMode::none;
  throw UsageError("unknown interaction mode '" + s + "'");
}

}  // namespace vadapt
