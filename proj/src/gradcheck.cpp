#include "vadapt/gradcheck.hpp"

namespace vadapt {

namespace {

using D = double;
using TD = Tensor<double>;

TD rnd(Dims dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return TD::rand_uniform(std::move(dims), rng, lo, hi);
}

// fixed random projection to scalarize a tensor output
std::function<TD(const TD&, Tape<D>*)> make_probe(const Dims& dims, Rng& rng) {
  TD r = rnd(dims, rng, 0.5, 1.5);
  return [r](const TD& out, Tape<D>* tape) {
    return ops::sum_all(ops::cmul(out, r, tape), tape);
  };
}

}  // namespace

std::vector<GradCheckReport> gradcheck_suite(bool include_full_model) {
  std::vector<GradCheckReport> reports;
  const double tol_op = 1e-5;
  const double tol_model = 1e-4;
  Rng rng(20240501);

  // --- primitive ops -------------------------------------------------------
  {
    auto probe = make_probe({5, 3}, rng);
    reports.push_back(check_gradients(
        "matmul", {rnd({5, 7}, rng), rnd({7, 3}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::matmul(l[0], l[1], t), t);
        },
        tol_op, 11, 1e-5, 12));
  }
  {
    auto probe = make_probe({2, 3, 5}, rng);
    reports.push_back(check_gradients(
        "bmm", {rnd({2, 3, 4}, rng), rnd({2, 4, 5}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::bmm(l[0], l[1], t), t);
        },
        tol_op, 12));
  }
  {
    auto probe = make_probe({1, 3, 3, 3}, rng);
    reports.push_back(check_gradients(
        "conv2d", {rnd({1, 2, 6, 6}, rng), rnd({3, 2, 3, 3}, rng), rnd({3}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::conv2d(l[0], l[1], &l[2], 2, 1, t), t);
        },
        tol_op, 13, 1e-5, 8));
  }
  {
    auto probe = make_probe({1, 3, 8, 8}, rng);
    reports.push_back(check_gradients(
        "conv_transpose2d",
        {rnd({1, 2, 4, 4}, rng), rnd({2, 3, 2, 2}, rng), rnd({3}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::conv_transpose2d(l[0], l[1], &l[2], 2, 0, t), t);
        },
        tol_op, 14, 1e-5, 8));
  }
  {
    auto probe = make_probe({1, 2, 3, 3}, rng);
    reports.push_back(check_gradients(
        "maxpool2d", {rnd({1, 2, 6, 6}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::maxpool2d(l[0], 3, 2, 1, t), t);
        },
        tol_op, 15, 1e-5, 10));
  }
  {
    auto probe = make_probe({3, 8}, rng);
    reports.push_back(check_gradients(
        "layernorm", {rnd({3, 8}, rng), rnd({8}, rng, 0.5, 1.5), rnd({8}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::layernorm(l[0], l[1], l[2], 1e-6, t), t);
        },
        tol_op, 16, 1e-5, 8));
  }
  {
    auto probe = make_probe({2, 3, 4, 4}, rng);
    reports.push_back(check_gradients(
        "groupnorm1",
        {rnd({2, 3, 4, 4}, rng), rnd({3}, rng, 0.5, 1.5), rnd({3}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::groupnorm1(l[0], l[1], l[2], 1e-5, t), t);
        },
        tol_op, 17, 1e-5, 8));
  }
  {
    auto probe = make_probe({3, 7}, rng);
    reports.push_back(check_gradients(
        "softmax", {rnd({3, 7}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::softmax_lastdim(l[0], t), t);
        },
        tol_op, 18, 1e-5, 10));
  }
  {
    auto probe = make_probe({11}, rng);
    reports.push_back(check_gradients(
        "gelu", {rnd({11}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::gelu(l[0], t), t);
        },
        tol_op, 19, 1e-5, 11));
  }
  {
    auto probe = make_probe({11}, rng);
    reports.push_back(check_gradients(
        "relu", {rnd({11}, rng, 0.1, 1.0)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::relu(l[0], t), t);
        },
        tol_op, 20, 1e-5, 11));
  }
  {
    // interior points away from cell boundaries
    std::vector<double> pts;
    Rng prng(77);
    for (int i = 0; i < 7; ++i) {
      pts.push_back(prng.uniform(0.15, 0.85) + prng.uniform(-0.03, 0.03));
      pts.push_back(prng.uniform(0.15, 0.85) + prng.uniform(-0.03, 0.03));
    }
    auto probe = make_probe({1, 7, 3}, rng);
    reports.push_back(check_gradients(
        "bilinear_sample",
        {rnd({1, 3, 5, 5}, rng), TD::from_data({1, 7, 2}, pts)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::bilinear_sample(l[0], l[1], t), t);
        },
        tol_op, 21, 1e-5, 10));
  }
  {
    auto probe = make_probe({1, 2, 9, 5}, rng);
    reports.push_back(check_gradients(
        "bilinear_resize", {rnd({1, 2, 6, 6}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::bilinear_resize(l[0], 9, 5, t), t);
        },
        tol_op, 22, 1e-5, 10));
  }
  {
    auto probe = make_probe({4, 6}, rng);
    reports.push_back(check_gradients(
        "add_bias+mul_vec", {rnd({4, 6}, rng), rnd({6}, rng), rnd({6}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::mul_vec(ops::add_bias(l[0], l[1], t), l[2], t), t);
        },
        tol_op, 23, 1e-5, 8));
  }
  {
    auto probe = make_probe({2, 5, 3}, rng);
    reports.push_back(check_gradients(
        "scale_channels", {rnd({2, 5, 3}, rng), rnd({2, 5}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          return probe(ops::scale_channels(l[0], l[1], t), t);
        },
        tol_op, 24, 1e-5, 8));
  }
  {
    auto probe = make_probe({2, 4}, rng);
    reports.push_back(check_gradients(
        "sum_axis+slice+concat", {rnd({2, 3, 4}, rng), rnd({2, 2, 4}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          TD c = ops::concat<D>({l[0], l[1]}, 1, t);
          TD s = ops::slice(c, 1, 1, 4, t);
          return probe(ops::sum_axis(s, 1, t), t);
        },
        tol_op, 25, 1e-5, 8));
  }
  {
    auto probe = make_probe({2, 12, 3}, rng);
    reports.push_back(check_gradients(
        "window_partition_roundtrip", {rnd({2, 12, 3}, rng)},
        [probe](const std::vector<TD>& l, Tape<D>* t) {
          TD w = ops::window_partition(l[0], 4, 3, 1, t);
          TD u = ops::window_unpartition(w, 4, 3, 1, 2, t);
          return probe(u, t);
        },
        tol_op, 26, 1e-5, 8));
  }
  {
    auto labels = std::make_shared<const std::vector<std::int32_t>>(
        std::vector<std::int32_t>{0, 3, 2, 1, 4, 0, 2, -1, 3});
    reports.push_back(check_gradients(
        "softmax_xent", {rnd({9, 5}, rng)},
        [labels](const std::vector<TD>& l, Tape<D>* t) {
          return ops::softmax_xent(l[0], labels, t);
        },
        tol_op, 27, 1e-5, 12));
  }

  // --- composite modules ---------------------------------------------------
  {
    Rng mk(101);
    auto layer = EncoderLayer<double>::make("gc", 8, 16, 2, true, mk);
    ParamRefs<double> refs;
    layer.collect(refs);
    jitter_params(refs, mk);
    std::vector<TD> leaves;
    for (auto* p : refs) leaves.push_back(p->value);
    auto probe = make_probe({1, 9, 8}, rng);
    TD x = rnd({1, 9, 8}, rng);
    reports.push_back(check_gradients(
        "encoder_layer(global)", leaves,
        [&, probe, x](const std::vector<TD>& l, Tape<D>* t) {
          for (std::size_t i = 0; i < refs.size(); ++i) refs[i]->value = l[i];
          return probe(layer.forward(x, {3, 3}, 3, t), t);
        },
        tol_op, 28, 1e-5, 3));
  }
  {
    Rng mk(102);
    auto layer = EncoderLayer<double>::make("gc", 8, 16, 2, false, mk);
    ParamRefs<double> refs;
    layer.collect(refs);
    jitter_params(refs, mk);
    std::vector<TD> leaves;
    for (auto* p : refs) leaves.push_back(p->value);
    auto probe = make_probe({1, 16, 8}, rng);
    TD x = rnd({1, 16, 8}, rng);
    reports.push_back(check_gradients(
        "encoder_layer(window)", leaves,
        [&, probe, x](const std::vector<TD>& l, Tape<D>* t) {
          for (std::size_t i = 0; i < refs.size(); ++i) refs[i]->value = l[i];
          return probe(layer.forward(x, {4, 4}, 2, t), t);
        },
        tol_op, 29, 1e-5, 3));
  }
  {
    Rng mk(103);
    auto attn = DeformAttn<double>::make("gc", 4, 4, 2, 2, 4, mk);
    ParamRefs<double> refs;
    attn.collect(refs);
    jitter_params(refs, mk, 0.08);
    std::vector<TD> leaves;
    for (auto* p : refs) leaves.push_back(p->value);
    const ScaleLayout lay = ScaleLayout::from_grids({{2, 2}, {1, 1}});
    TD refs_pts = make_reference_points<double>(lay);
    TD query = rnd({1, 5, 4}, rng);
    TD qrefs = rnd({5, 2}, rng, 0.2, 0.8);
    TD value = rnd({1, lay.total, 4}, rng);
    auto probe = make_probe({1, 5, 4}, rng);
    (void)refs_pts;
    reports.push_back(check_gradients(
        "deform_attn", leaves,
        [&, probe, query, qrefs, value, lay](const std::vector<TD>& l, Tape<D>* t) {
          for (std::size_t i = 0; i < refs.size(); ++i) refs[i]->value = l[i];
          return probe(attn.forward(query, qrefs, value, lay, t), t);
        },
        tol_op, 30, 1e-5, 4));
  }
  {
    Rng mk(104);
    auto attn = DenseCrossAttn<double>::make("gc", 6, 2, mk);
    ParamRefs<double> refs;
    attn.collect(refs);
    jitter_params(refs, mk);
    std::vector<TD> leaves;
    for (auto* p : refs) leaves.push_back(p->value);
    TD query = rnd({2, 3, 6}, rng);
    TD value = rnd({2, 5, 6}, rng);
    auto probe = make_probe({2, 3, 6}, rng);
    reports.push_back(check_gradients(
        "dense_global_attn", leaves,
        [&, probe, query, value](const std::vector<TD>& l, Tape<D>* t) {
          for (std::size_t i = 0; i < refs.size(); ++i) refs[i]->value = l[i];
          return probe(attn.forward(query, value, t), t);
        },
        tol_op, 31, 1e-5, 4));
  }
  {
    ModelConfig mc = preset("micro");
    Rng mk(105);
    auto inj = Injector<double>::make("gc", mc, mk);
    ParamRefs<double> refs;
    inj.collect(refs);
    jitter_params(refs, mk, 0.08);
    std::vector<TD> leaves;
    for (auto* p : refs) leaves.push_back(p->value);
    const GridHW grid{2, 2};
    const ScaleLayout lay = ScaleLayout::from_grids({{4, 4}, {2, 2}, {1, 1}});
    TD vit = rnd({1, grid.tokens(), mc.dim}, rng);
    TD sp = rnd({1, lay.total, mc.dim}, rng);
    TD vrefs = make_reference_points<double>(grid);
    auto probe = make_probe({1, grid.tokens(), mc.dim}, rng);
    reports.push_back(check_gradients(
        "injector", leaves,
        [&, probe, vit, sp, vrefs, lay](const std::vector<TD>& l, Tape<D>* t) {
          for (std::size_t i = 0; i < refs.size(); ++i) refs[i]->value = l[i];
          return probe(inj.forward(vit, vrefs, sp, lay, t), t);
        },
        tol_op, 32, 1e-5, 3));
  }
  {
    ModelConfig mc = preset("micro");
    Rng mk(106);
    auto ext = Extractor<double>::make("gc", mc, mk);
    ParamRefs<double> refs;
    ext.collect(refs);
    jitter_params(refs, mk, 0.08);
    std::vector<TD> leaves;
    for (auto* p : refs) leaves.push_back(p->value);
    const GridHW grid{2, 2};
    const ScaleLayout lay = ScaleLayout::from_grids({{4, 4}, {2, 2}, {1, 1}});
    TD vit = rnd({1, grid.tokens(), mc.dim}, rng);
    TD sp = rnd({1, lay.total, mc.dim}, rng);
    TD srefs = make_reference_points<double>(lay);
    auto probe = make_probe({1, lay.total, mc.dim}, rng);
    reports.push_back(check_gradients(
        "extractor", leaves,
        [&, probe, vit, sp, srefs, lay, grid](const std::vector<TD>& l, Tape<D>* t) {
          for (std::size_t i = 0; i < refs.size(); ++i) refs[i]->value = l[i];
          return probe(ext.forward(sp, srefs, vit, grid, t), t);
        },
        tol_op, 33, 1e-5, 3));
  }
  {
    ModelConfig mc = preset("micro");
    Rng mk(107);
    auto spm = SpatialPrior<double>::make(mc.spm, mc.dim, mk);
    ParamRefs<double> refs;
    spm.collect(refs);
    jitter_params(refs, mk);
    std::vector<TD> leaves;
    for (auto* p : refs) leaves.push_back(p->value);
    TD img = rnd({1, 3, 32, 32}, rng, 0.0, 1.0);
    const ScaleLayout lay = pyramid_layout(32, 32);
    auto probe = make_probe({1, lay.total, mc.dim}, rng);
    reports.push_back(check_gradients(
        "spatial_prior", leaves,
        [&, probe, img](const std::vector<TD>& l, Tape<D>* t) {
          for (std::size_t i = 0; i < refs.size(); ++i) refs[i]->value = l[i];
          return probe(spm.forward(img, t).first, t);
        },
        tol_op, 34, 1e-5, 2));
  }

  // --- full model ----------------------------------------------------------
  if (include_full_model) {
    auto model = AdapterModel<double>::make(preset("micro"), 9001);
    ParamRefs<double> refs;
    model.collect(refs);
    Rng mk(108);
    jitter_params(refs, mk, 0.05);
    std::vector<TD> leaves;
    for (auto* p : refs) leaves.push_back(p->value);
    TD img = rnd({1, 3, 64, 64}, rng, 0.0, 1.0);
    leaves.push_back(img);
    auto probe4 = make_probe({1, 32, 16, 16}, rng);
    auto probe8 = make_probe({1, 32, 8, 8}, rng);
    auto probe16 = make_probe({1, 32, 4, 4}, rng);
    auto probe32 = make_probe({1, 32, 2, 2}, rng);
    reports.push_back(check_gradients(
        "full_micro_model", leaves,
        [&, probe4, probe8, probe16, probe32](const std::vector<TD>& l, Tape<D>* t) {
          for (std::size_t i = 0; i < refs.size(); ++i) refs[i]->value = l[i];
          auto pyr = model.forward(l.back(), t);
          TD loss = ops::add(probe4(pyr.p4, t), probe8(pyr.p8, t), t);
          loss = ops::add(loss, probe16(pyr.p16, t), t);
          return ops::add(loss, probe32(pyr.p32, t), t);
        },
        // the loss runs through the whole network, so the difference
        // quotient carries more rounding noise than single ops; the wider
        // floor bounds absolute error at 1e-6 for gradients the quotient
        // cannot resolve relatively
        tol_model, 35, 1e-5, 2, /*floor=*/1e-2));
  }

  return reports;
}

}  // namespace vadapt
