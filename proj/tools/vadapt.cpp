#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vadapt/analysis.hpp"
#include "vadapt/gradcheck.hpp"
#include "vadapt/model.hpp"
#include "vadapt/pnm.hpp"
#include "vadapt/run_config.hpp"
#include "vadapt/toy.hpp"
#include "vadapt/weights_io.hpp"

namespace {

using namespace vadapt;

struct CommonOpts {
  std::string preset = "micro";
  std::string config_path;
  std::uint64_t seed = 1;
  std::string precision = "f32";
  std::int64_t size = 64;
  std::string image_path;
  std::string mode, attention;
  std::int64_t interactions = 0;
  std::int64_t window = 0;
  bool serial = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--preset", o.preset, "model variant: micro|tiny|small|base|large");
  cmd->add_option("--config", o.config_path, "key = value run-config file");
  cmd->add_option("--seed", o.seed, "rng seed");
  cmd->add_option("--precision", o.precision, "f32|f64");
  cmd->add_option("--size", o.size, "square input extent for generated images");
  cmd->add_option("--image", o.image_path, "input image (binary ppm, P6)");
  cmd->add_option("--mode", o.mode, "interaction mode: attention|add|none");
  cmd->add_option("--attention", o.attention, "attention kind: deformable|dense-global");
  cmd->add_option("--interactions", o.interactions, "interaction count N");
  cmd->add_option("--window", o.window, "window attention extent");
  cmd->add_flag("--serial", o.serial, "disable OpenMP kernel paths");
}

// config-file values fill in flags that were not given on the command line
void merge_config(CLI::App* cmd, CommonOpts& o) {
  if (o.config_path.empty()) return;
  const KeyValues kv = read_run_config(o.config_path);
  auto take = [&](const char* key, auto& dst) {
    if (cmd->count(std::string("--") + key) > 0) return;
    auto it = kv.find(key);
    if (it == kv.end()) return;
    using V = std::decay_t<decltype(dst)>;
    if constexpr (std::is_same_v<V, std::string>)
      dst = it->second;
    else if constexpr (std::is_same_v<V, bool>)
      dst = it->second == "true" || it->second == "1";
    else
      dst = static_cast<V>(std::stoll(it->second));
  };
  take("preset", o.preset);
  take("seed", o.seed);
  take("precision", o.precision);
  take("size", o.size);
  take("image", o.image_path);
  take("mode", o.mode);
  take("attention", o.attention);
  take("interactions", o.interactions);
  take("window", o.window);
  take("serial", o.serial);
}

ModelConfig resolve_config(const CommonOpts& o) {
  ModelConfig cfg = preset(o.preset);
  if (!o.mode.empty()) cfg.mode = mode_from_string(o.mode);
  if (!o.attention.empty()) cfg.attn_kind = attn_kind_from_string(o.attention);
  if (o.interactions > 0) cfg.interactions = o.interactions;
  if (o.window > 0) cfg.window = o.window;
  cfg.validate();
  return cfg;
}

Precision resolve_precision(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw UsageError("unknown precision '" + s + "' (expected f32|f64)");
}

template <class T>
Tensor<T> load_or_generate_image(const CommonOpts& o) {
  if (!o.image_path.empty()) {
    const PpmImage img = read_ppm(o.image_path);
    if (img.h % 32 || img.w % 32)
      throw UsageError("image extents must be divisible by 32, got " +
                       std::to_string(img.w) + "x" + std::to_string(img.h));
    std::vector<T> data(img.rgb.begin(), img.rgb.end());
    return Tensor<T>::from_data({1, 3, img.h, img.w}, std::move(data));
  }
  if (o.size % 32)
    throw UsageError("--size must be divisible by 32");
  Rng rng(o.seed ^ 0x51ED0ull);
  return Tensor<T>::rand_uniform({1, 3, o.size, o.size}, rng, 0.0, 1.0);
}

template <class T>
int run_forward(const CommonOpts& o, const std::string& save_features,
                const std::string& export_dir) {
  const ModelConfig cfg = resolve_config(o);
  auto model = AdapterModel<T>::make(cfg, o.seed);
  Tensor<T> image = load_or_generate_image<T>(o);
  auto pyr = model.forward(image, nullptr);
  std::printf("P4 %lldx%lld, P8 %lldx%lld, P16 %lldx%lld, P32 %lldx%lld\n",
              (long long)pyr.p4.dim(2), (long long)pyr.p4.dim(3),
              (long long)pyr.p8.dim(2), (long long)pyr.p8.dim(3),
              (long long)pyr.p16.dim(2), (long long)pyr.p16.dim(3),
              (long long)pyr.p32.dim(2), (long long)pyr.p32.dim(3));
  const std::array<std::pair<const char*, const Tensor<T>*>, 4> levels = {
      {{"p4", &pyr.p4}, {"p8", &pyr.p8}, {"p16", &pyr.p16}, {"p32", &pyr.p32}}};
  if (!save_features.empty()) {
    std::vector<WeightsEntry> entries;
    for (auto& [name, t] : levels) {
      WeightsEntry e;
      e.name = name;
      e.dtype = dtype_tag<T>();
      for (auto d : t->dims()) e.dims.push_back(static_cast<std::uint32_t>(d));
      e.payload.resize(static_cast<std::size_t>(t->numel()) * sizeof(T));
      std::memcpy(e.payload.data(), t->ptr(), e.payload.size());
      entries.push_back(std::move(e));
    }
    write_weights_file(save_features, std::move(entries));
    std::printf("features written to %s\n", save_features.c_str());
  }
  if (!export_dir.empty()) {
    std::filesystem::create_directories(export_dir);
    for (auto& [name, t] : levels) {
      std::vector<double> buf(t->data().begin(), t->data().end());
      analysis::export_feature_map(buf, t->dim(1), t->dim(2), t->dim(3),
                                   export_dir + "/" + name + ".pgm");
    }
    std::printf("feature maps written to %s\n", export_dir.c_str());
  }
  return 0;
}

int run_params(const std::string& which) {
  const std::vector<std::string> names =
      which == "all" ? std::vector<std::string>{"micro", "tiny", "small", "base", "large"}
                     : std::vector<std::string>{which};
  bool all_ok = true;
  for (const auto& name : names) {
    const ModelConfig cfg = preset(name);
    auto model = AdapterModel<float>::make_for_audit(cfg);
    const ParamCounts c = model.count_parameters();
    std::printf("%-6s backbone %11lld  adapter %10lld  total %11lld\n", name.c_str(),
                (long long)c.backbone, (long long)c.adapter, (long long)c.total);
    if (cfg.ref_backbone_m > 0) {
      const double bb_m = static_cast<double>(c.backbone) / 1e6;
      const double ad_m = static_cast<double>(c.adapter) / 1e6;
      const double bb_dev = (bb_m - cfg.ref_backbone_m) / cfg.ref_backbone_m;
      const double ad_dev = (ad_m - cfg.ref_adapter_m) / cfg.ref_adapter_m;
      const bool bb_ok = std::abs(bb_dev) <= 0.03;
      const bool ad_ok = std::abs(ad_dev) <= 0.15;
      std::printf("       backbone %6.1fM vs paper: %.1fM (%+.1f%%, tol 3%%)  [%s]\n", bb_m,
                  cfg.ref_backbone_m, bb_dev * 100.0, bb_ok ? "ok" : "FAIL");
      std::printf("       adapter  %6.1fM vs paper: %.1fM (%+.1f%%, tol 15%%) [%s]\n", ad_m,
                  cfg.ref_adapter_m, ad_dev * 100.0, ad_ok ? "ok" : "FAIL");
      all_ok = all_ok && bb_ok && ad_ok;
    }
  }
  return all_ok ? 0 : 1;
}

int run_gradcheck(const CommonOpts& o, bool skip_model) {
  if (resolve_precision(o.precision) != Precision::f64)
    throw UsageError("gradcheck runs in f64 (finite differences are unreliable in f32)");
  if (o.preset != "micro")
    throw UsageError("gradcheck covers the micro preset; larger variants cost hours in "
                     "finite differences");
  const auto reports = gradcheck_suite(!skip_model);
  bool all_ok = true;
  for (const auto& r : reports) {
    std::printf("%-28s rel_err %.3e  tol %.0e  coords %4lld  [%s]\n", r.name.c_str(),
                r.max_rel_err, r.tolerance, (long long)r.coords_checked,
                r.ok ? "ok" : "FAIL");
    all_ok = all_ok && r.ok;
  }
  return all_ok ? 0 : 1;
}

template <class T>
int run_spectrum(const CommonOpts& o, const std::string& level, int samples, int bins,
                 const std::string& out_path) {
  const ModelConfig cfg = resolve_config(o);
  auto model = AdapterModel<T>::make(cfg, o.seed);
  Tensor<T> image;
  if (!o.image_path.empty()) {
    image = load_or_generate_image<T>(o);
  } else {
    Rng rng(o.seed ^ 0x51ED0ull);
    image = Tensor<T>::rand_uniform({samples, 3, o.size, o.size}, rng, 0.0, 1.0);
  }
  Tensor<T> map;
  if (level == "image") {
    map = image;
  } else {
    auto pyr = model.forward(image, nullptr);
    if (level == "p4") map = pyr.p4;
    else if (level == "p8") map = pyr.p8;
    else if (level == "p16") map = pyr.p16;
    else if (level == "p32") map = pyr.p32;
    else throw UsageError("unknown level '" + level + "' (p4|p8|p16|p32|image)");
  }
  std::vector<double> buf(map.data().begin(), map.data().end());
  const auto profile = analysis::spectrum_profile(buf, map.dim(0), map.dim(1),
                                                  map.dim(2), map.dim(3), bins);
  if (out_path.empty()) {
    std::fputs(analysis::profile_csv(profile).c_str(), stdout);
  } else {
    analysis::write_profile_csv(profile, out_path);
    std::printf("profile written to %s\n", out_path.c_str());
  }
  return 0;
}

int run_toy_train(const CommonOpts& o, const std::string& kind, int steps,
                  const std::string& out_path, bool freeze, int eval_interval) {
  toy::TrainConfig tc;
  tc.model = resolve_config(o);
  if (kind == "plain-vit") tc.kind = toy::ModelKind::plain_vit;
  else if (kind == "vit-adapter") tc.kind = toy::ModelKind::vit_adapter;
  else throw UsageError("unknown kind '" + kind + "' (plain-vit|vit-adapter)");
  tc.seed = o.seed;
  tc.steps = steps;
  tc.image_size = static_cast<int>(o.size);
  tc.freeze_backbone = freeze;
  tc.eval_interval = eval_interval;
  tc.log_path = out_path;
  const auto result = toy::train(tc);
  std::printf("final_miou=%.6f\n", result.final_miou);
  return 0;
}

template <class T>
int run_export_weights(const CommonOpts& o, const std::string& out_path,
                       const std::string& load_path) {
  const ModelConfig cfg = resolve_config(o);
  auto model = AdapterModel<T>::make(cfg, o.seed);
  ParamRefs<T> refs;
  model.collect(refs);
  if (!load_path.empty()) load_params<T>(load_path, refs);
  save_params<T>(out_path, refs);
  std::printf("wrote %zu entries to %s\n", refs.size(), out_path.c_str());
  return 0;
}

int run_describe(const CommonOpts& o) {
  const ModelConfig cfg = resolve_config(o);
  std::printf("preset = %s\n", cfg.name.c_str());
  std::printf("layers = %lld\ndim = %lld\nffn = %lld\nheads = %lld\n",
              (long long)cfg.layers, (long long)cfg.dim, (long long)cfg.ffn,
              (long long)cfg.heads);
  std::printf("patch = %lld\npos_grid = %lld\nwindow = %lld\nglobal_interval = %lld\n",
              (long long)cfg.patch, (long long)cfg.pos_grid, (long long)cfg.window,
              (long long)cfg.resolved_global_interval());
  std::printf("interactions = %lld\nadapter_ffn_hidden = %lld\nadapter_heads = %lld\n",
              (long long)cfg.interactions, (long long)cfg.adapter_ffn_hidden,
              (long long)cfg.adapter_heads);
  std::printf("points = %lld\ndeform_ratio = %g\nvalue_dim = %lld\n", (long long)cfg.points,
              cfg.deform_ratio, (long long)cfg.value_dim());
  std::printf("attention = %s\nmode = %s\n", to_string(cfg.attn_kind), to_string(cfg.mode));
  std::printf("spm_stem = %lld\nspm_levels = %lld,%lld,%lld\n", (long long)cfg.spm.stem_channels,
              (long long)cfg.spm.level_channels[0], (long long)cfg.spm.level_channels[1],
              (long long)cfg.spm.level_channels[2]);
  std::printf("seed = %llu\nprecision = %s\n", (unsigned long long)o.seed,
              o.precision.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ViT-Adapter reference implementation: multi-scale feature "
               "pyramids from a plain ViT plus a spatial-prior side network"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string save_features, export_dir, params_preset = "all", level = "p8";
  std::string toy_kind = "vit-adapter", out_path, load_path;
  int steps = 1000, samples = 1, bins = 32, eval_interval = 200;
  bool skip_model = false, freeze = false;

  auto* c_forward = app.add_subcommand("forward", "run the model, report the pyramid");
  add_common(c_forward, o);
  c_forward->add_option("--save-features", save_features, "write pyramid tensors (vadw)");
  c_forward->add_option("--export-pgm", export_dir, "write channel-mean maps as pgm files");

  auto* c_params = app.add_subcommand("params", "parameter audit against the published table");
  c_params->add_option("--preset", params_preset, "variant or 'all'");

  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  add_common(c_grad, o);
  c_grad->get_option("--precision")->default_val("f64");
  c_grad->add_flag("--skip-model", skip_model, "per-op checks only");

  auto* c_spec = app.add_subcommand("spectrum", "radial log-amplitude profile of a feature map");
  add_common(c_spec, o);
  c_spec->add_option("--level", level, "p4|p8|p16|p32|image");
  c_spec->add_option("--samples", samples, "generated images to average over");
  c_spec->add_option("--bins", bins, "radial bin count");
  c_spec->add_option("--out", out_path, "output csv (stdout when omitted)");

  auto* c_toy = app.add_subcommand("toy-train", "train on the synthetic dense task");
  add_common(c_toy, o);
  c_toy->get_option("--size")->default_val("128");
  c_toy->add_option("--kind", toy_kind, "plain-vit|vit-adapter");
  c_toy->add_option("--steps", steps, "optimizer steps");
  c_toy->add_option("--eval-interval", eval_interval, "held-out evaluation cadence");
  c_toy->add_option("--out", out_path, "training log csv");
  c_toy->add_flag("--freeze-backbone", freeze, "train adapter and head only");

  auto* c_export = app.add_subcommand("export-weights", "serialize model weights");
  add_common(c_export, o);
  c_export->add_option("--out", out_path, "output file")->required();
  c_export->add_option("--load", load_path, "load this file before saving");

  auto* c_desc = app.add_subcommand("describe", "print the resolved configuration");
  add_common(c_desc, o);

  try {
    app.parse(argc, argv);
    CLI::App* sub = app.get_subcommands().front();
    merge_config(sub, o);
    kernels::set_parallel(!o.serial);
    const Precision prec = resolve_precision(o.precision);
    auto dispatch = [&](auto&& fn) {
      return prec == Precision::f64 ? fn.template operator()<double>()
                                    : fn.template operator()<float>();
    };
    if (sub == c_forward)
      return dispatch([&]<class T>() { return run_forward<T>(o, save_features, export_dir); });
    if (sub == c_params) return run_params(params_preset);
    if (sub == c_grad) return run_gradcheck(o, skip_model);
    if (sub == c_spec)
      return dispatch([&]<class T>() { return run_spectrum<T>(o, level, samples, bins, out_path); });
    if (sub == c_toy) return run_toy_train(o, toy_kind, steps, out_path, freeze, eval_interval);
    if (sub == c_export)
      return dispatch([&]<class T>() { return run_export_weights<T>(o, out_path, load_path); });
    if (sub == c_desc) return run_describe(o);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
