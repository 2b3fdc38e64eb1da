#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vadapt/model.hpp"

namespace vadapt::toy {

// One synthetic scene: noisy background with 2-5 axis-aligned rectangles
// and circles drawn in class-specific colors; later shapes overdraw.
// Labels: 0 = background, 1..4 = shape classes.
struct Sample {
  std::int64_t size = 0;
  std::vector<float> image;        // [3, size, size] in [0,1]
  std::vector<std::int32_t> label; // [size, size]
};

inline constexpr int kClasses = 5;

// Deterministic for a fixed seed; background fraction kept inside
// (0.25, 0.85) by rejection.
std::vector<Sample> generate_dataset(std::uint64_t seed, int n, int image_size = 128);

// Mean IoU over the classes present in the ground truth.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;  // counts[truth * classes + pred]

  explicit ConfusionMatrix(int k) : classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}
  void add(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth);
  double miou() const;
};

double miou(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
            int classes);

// Per-level 1x1 projections to class logits, summed at stride 4, then
// upsampled to full resolution.
template <class T>
struct SegHead {
  std::array<Conv2d<T>, 4> proj;

  static SegHead make(std::int64_t dim, int classes, Rng& rng) {
    SegHead h;
    for (int l = 0; l < 4; ++l)
      h.proj[static_cast<std::size_t>(l)] = Conv2d<T>::make(
          "head.proj" + std::to_string(l), dim, classes, 1, 1, 0, rng);
    return h;
  }

  Tensor<T> forward(const Pyramid<T>& pyr, std::int64_t out_h, std::int64_t out_w,
                    Tape<T>* tape) const {
    const std::array<const Tensor<T>*, 4> maps = {&pyr.p4, &pyr.p8, &pyr.p16, &pyr.p32};
    Tensor<T> acc;
    for (std::size_t l = 0; l < 4; ++l) {
      Tensor<T> lg = proj[l](*maps[l], tape);
      if (l > 0) lg = ops::bilinear_resize(lg, pyr.p4.dim(2), pyr.p4.dim(3), tape);
      acc = acc.defined() ? ops::add(acc, lg, tape) : lg;
    }
    return ops::bilinear_resize(acc, out_h, out_w, tape);
  }

  void collect(ParamRefs<T>& out) {
    for (auto& p : proj) p.collect(out);
  }
};

enum class ModelKind { plain_vit, vit_adapter };

struct TrainConfig {
  ModelKind kind = ModelKind::vit_adapter;
  ModelConfig model;  // micro-scale; `mode` selects the interaction ablation
  std::uint64_t seed = 1;
  int steps = 1000;
  int batch = 8;
  int image_size = 128;
  double lr = 1e-3;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int train_samples = 200;
  int eval_samples = 24;
  int eval_interval = 200;
  bool freeze_backbone = false;
  std::string log_path;  // CSV `step,loss,miou` written when nonempty
};

struct LogRow {
  int step;
  double loss;
  double miou;
};

struct TrainResult {
  double final_miou = 0.0;
  std::vector<LogRow> log;
};

// Trains the selected kind on the synthetic task and reports held-out mean
// IoU. Bit-deterministic for a fixed config and seed.
TrainResult train(const TrainConfig& cfg);

std::string log_csv(const std::vector<LogRow>& rows);

}  // namespace vadapt::toy
