#include "vadapt/toy.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>

#include "vadapt/optim.hpp"

namespace vadapt::toy {

namespace {

constexpr double kClassColors[4][3] = {
    {0.90, 0.12, 0.12},  // 1
    {0.12, 0.80, 0.15},  // 2
    {0.15, 0.25, 0.90},  // 3
    {0.85, 0.80, 0.10},  // 4
};
constexpr double kBackground = 0.45;
constexpr double kNoise = 0.12;

Sample make_sample(std::uint64_t seed, int img) {
  Rng rng(seed);
  Sample s;
  s.size = img;
  s.label.assign(static_cast<std::size_t>(img) * img, 0);

  // geometry, redrawn until the background fraction is reasonable
  for (;;) {
    std::fill(s.label.begin(), s.label.end(), 0);
    const int nshapes = static_cast<int>(rng.uniform_int(2, 5));
    for (int n = 0; n < nshapes; ++n) {
      const bool circle = rng.uniform_int(0, 1) == 1;
      const auto cls = static_cast<std::int32_t>(rng.uniform_int(1, 4));
      if (circle) {
        const auto r = rng.uniform_int(8, 24);
        const auto cy = rng.uniform_int(r, img - 1 - r);
        const auto cx = rng.uniform_int(r, img - 1 - r);
        for (auto y = cy - r; y <= cy + r; ++y)
          for (auto x = cx - r; x <= cx + r; ++x)
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
              s.label[static_cast<std::size_t>(y * img + x)] = cls;
      } else {
        const auto w = rng.uniform_int(16, 48);
        const auto h = rng.uniform_int(16, 48);
        const auto y0 = rng.uniform_int(0, img - h);
        const auto x0 = rng.uniform_int(0, img - w);
        for (auto y = y0; y < y0 + h; ++y)
          for (auto x = x0; x < x0 + w; ++x)
            s.label[static_cast<std::size_t>(y * img + x)] = cls;
      }
    }
    const auto bg = static_cast<double>(std::count(s.label.begin(), s.label.end(), 0)) /
                    static_cast<double>(s.label.size());
    if (bg > 0.25 && bg < 0.85) break;
  }

  s.image.assign(static_cast<std::size_t>(3) * img * img, 0.0f);
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(img) * img; ++i) {
    const auto cls = s.label[static_cast<std::size_t>(i)];
    for (int ch = 0; ch < 3; ++ch) {
      const double base = cls == 0 ? kBackground : kClassColors[cls - 1][ch];
      const double v = std::clamp(base + rng.normal(0.0, kNoise), 0.0, 1.0);
      s.image[static_cast<std::size_t>(ch) * img * img + static_cast<std::size_t>(i)] =
          static_cast<float>(v);
    }
  }
  return s;
}

}  // namespace

std::vector<Sample> generate_dataset(std::uint64_t seed, int n, int image_size) {
  if (n <= 0) throw UsageError("generate_dataset: n must be positive");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.push_back(make_sample(seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(i + 1),
                              image_size));
  return out;
}

void ConfusionMatrix::add(std::span<const std::int32_t> pred,
                          std::span<const std::int32_t> truth) {
  if (pred.size() != truth.size())
    throw ShapeError("confusion matrix: prediction/truth size mismatch");
  for (std::size_t i = 0; i < pred.size(); ++i)
    counts[static_cast<std::size_t>(truth[i]) * static_cast<std::size_t>(classes) +
           static_cast<std::size_t>(pred[i])] += 1;
}

double ConfusionMatrix::miou() const {
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    std::int64_t truth_c = 0, pred_c = 0;
    for (int j = 0; j < classes; ++j) {
      truth_c += counts[static_cast<std::size_t>(c) * classes + j];
      pred_c += counts[static_cast<std::size_t>(j) * classes + c];
    }
    if (truth_c == 0) continue;
    const auto inter = counts[static_cast<std::size_t>(c) * classes + c];
    const auto uni = truth_c + pred_c - inter;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++present;
  }
  return present > 0 ? sum / present : 0.0;
}

double miou(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
            int classes) {
  ConfusionMatrix cm(classes);
  cm.add(pred, truth);
  return cm.miou();
}

namespace {

using TF = Tensor<float>;

struct ToyNet {
  ModelKind kind;
  std::optional<AdapterModel<float>> adapter;
  std::optional<VitBackbone<float>> plain;
  SegHead<float> head;
  std::int64_t interactions = 4;

  static ToyNet make(const TrainConfig& cfg) {
    ToyNet net;
    net.kind = cfg.kind;
    net.interactions = cfg.model.interactions;
    Rng rng(cfg.seed);
    if (cfg.kind == ModelKind::vit_adapter) {
      net.adapter = AdapterModel<float>::make(cfg.model, cfg.seed);
    } else {
      net.plain = VitBackbone<float>::make(cfg.model, rng);
    }
    Rng head_rng(cfg.seed ^ 0xABCDEF12345ull);
    net.head = SegHead<float>::make(cfg.model.dim, kClasses, head_rng);
    return net;
  }

  TF logits(const TF& image, Tape<float>* tape) const {
    const auto h = image.dim(2), w = image.dim(3);
    if (kind == ModelKind::vit_adapter) {
      auto pyr = adapter->forward(image, tape);
      return head.forward(pyr, h, w, tape);
    }
    // plain stream reuses the single 1/16 map at every pyramid stride
    TF tokens = plain->forward_plain(image, interactions, tape);
    tokens = plain->final_ln(tokens, tape);
    TF map = tokens_to_map(tokens, plain->token_grid(image), tape);
    Pyramid<float> pyr;
    pyr.p4 = ops::bilinear_resize(map, h / 4, w / 4, tape);
    pyr.p8 = ops::bilinear_resize(map, h / 8, w / 8, tape);
    pyr.p16 = map;
    pyr.p32 = ops::bilinear_resize(map, h / 32, w / 32, tape);
    return head.forward(pyr, h, w, tape);
  }

  ParamRefs<float> params() {
    ParamRefs<float> refs;
    if (adapter) adapter->collect(refs);
    if (plain) plain->collect(refs);
    head.collect(refs);
    return refs;
  }
};

TF stack_images(const std::vector<Sample>& data, std::span<const std::int64_t> idx,
                int img) {
  TensorBuilder<float> b({static_cast<std::int64_t>(idx.size()), 3, img, img});
  float* p = b.ptr();
  const std::size_t per = static_cast<std::size_t>(3) * img * img;
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(data[static_cast<std::size_t>(idx[i])].image.data(), per, p + i * per);
  return std::move(b).freeze();
}

std::vector<std::int32_t> argmax_map(const TF& logits) {
  // [b,k,h,w] -> per-pixel argmax [b*h*w]
  const auto b = logits.dim(0), k = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  TensorBuilder<float> rows({b * hw, k});
  kernels::Kern<float>::permute(logits.ptr(), rows.ptr(), logits.dims().data(),
                                std::array<int, 4>{0, 2, 3, 1}.data(), 4);
  std::vector<std::int32_t> out(static_cast<std::size_t>(b * hw));
  kernels::Kern<float>::argmax_rows(rows.ptr(), out.data(), b * hw, k);
  return out;
}

double evaluate(ToyNet& net, const std::vector<Sample>& data, std::int64_t from,
                std::int64_t count, int img, int batch) {
  ConfusionMatrix cm(kClasses);
  for (std::int64_t at = 0; at < count; at += batch) {
    const auto n = std::min<std::int64_t>(batch, count - at);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = from + at + i;
    TF images = stack_images(data, idx, img);
    TF lg = net.logits(images, nullptr);
    const auto pred = argmax_map(lg);
    const std::size_t per = static_cast<std::size_t>(img) * img;
    for (std::int64_t i = 0; i < n; ++i)
      cm.add(std::span<const std::int32_t>(pred.data() + static_cast<std::size_t>(i) * per, per),
             data[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])].label);
  }
  return cm.miou();
}

}  // namespace

std::string log_csv(const std::vector<LogRow>& rows) {
  std::string out = "step,loss,miou\n";
  char line[96];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%d,%.6f,%.6f\n", r.step, r.loss, r.miou);
    out += line;
  }
  return out;
}

TrainResult train(const TrainConfig& cfg) {
  cfg.model.validate();
  const int img = cfg.image_size;
  auto data = generate_dataset(cfg.seed, cfg.train_samples + cfg.eval_samples, img);

  ToyNet net = ToyNet::make(cfg);
  ParamRefs<float> params = net.params();
  std::vector<bool> frozen(params.size(), false);
  if (cfg.freeze_backbone)
    for (std::size_t i = 0; i < params.size(); ++i)
      frozen[i] = params[i]->name.rfind("vit.", 0) == 0;

  AdamW<float> opt;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.attach(params);

  Rng batch_rng(cfg.seed * 31 + 7);
  TrainResult result;
  double last_miou = evaluate(net, data, cfg.train_samples, cfg.eval_samples, img, cfg.batch);

  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(cfg.batch));
    for (auto& i : idx) i = batch_rng.uniform_int(0, cfg.train_samples - 1);
    TF images = stack_images(data, idx, img);
    auto labels = std::make_shared<std::vector<std::int32_t>>();
    labels->reserve(static_cast<std::size_t>(cfg.batch) * img * img);
    for (auto i : idx)
      labels->insert(labels->end(), data[static_cast<std::size_t>(i)].label.begin(),
                     data[static_cast<std::size_t>(i)].label.end());

    Tape<float> tape;
    std::vector<TF> watched;
    watched.reserve(params.size());
    for (auto* p : params) {
      p->value = tape.watch(p->value);
      watched.push_back(p->value);
    }
    TF lg = net.logits(images, &tape);
    TF rows = ops::permute(lg, {0, 2, 3, 1}, &tape);
    rows = ops::reshape(rows, {lg.dim(0) * lg.dim(2) * lg.dim(3), lg.dim(1)}, &tape);
    TF loss = ops::softmax_xent<float>(
        rows, std::shared_ptr<const std::vector<std::int32_t>>(labels), &tape);
    tape.backward(loss);
    opt.step(params, tape, watched, &frozen);

    if (step % cfg.eval_interval == 0 || step == cfg.steps)
      last_miou = evaluate(net, data, cfg.train_samples, cfg.eval_samples, img, cfg.batch);
    result.log.push_back({step, static_cast<double>(loss.scalar()), last_miou});
  }
  result.final_miou = last_miou;

  if (!cfg.log_path.empty()) {
    std::ofstream f(cfg.log_path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + cfg.log_path + "' for writing");
    const std::string csv = log_csv(result.log);
    f.write(csv.data(), static_cast<std::streamsize>(csv.size()));
    char tail[48];
    std::snprintf(tail, sizeof tail, "final_miou=%.6f\n", result.final_miou);
    f << tail;
    if (!f) throw IoError("write failed for '" + cfg.log_path + "'");
  }
  return result;
}

}  // namespace vadapt::toy
