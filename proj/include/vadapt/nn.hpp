#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vadapt/ops.hpp"
#include "vadapt/rng.hpp"

namespace vadapt {

// Named trainable tensor. The value is replaced wholesale on optimizer
// steps; forward passes pin it to the tape via use().
template <class T>
struct Param {
  std::string name;
  Tensor<T> value;

  Tensor<T> use(Tape<T>* tape) const {
    return tape ? tape->watch(value) : value;
  }
};

template <class T>
using ParamRefs = std::vector<Param<T>*>;

namespace init {

// fan-in scaled normal for conv / projection weights
template <class T>
Tensor<T> he_normal(Dims dims, std::int64_t fan_in, Rng& rng) {
  return Tensor<T>::randn(std::move(dims), rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

template <class T>
Tensor<T> trunc_normal02(Dims dims, Rng& rng) {
  Tensor<T> t = Tensor<T>::randn(dims, rng, 0.02);
  // clip to +-2 sigma
  std::vector<T> v(t.data().begin(), t.data().end());
  for (auto& x : v) x = std::clamp(x, T(-0.04), T(0.04));
  return Tensor<T>::from_data(std::move(dims), std::move(v));
}

}  // namespace init

// y = x W + b over the last axis: x [..., in] -> [..., out]
template <class T>
struct Linear {
  Param<T> w;  // [in, out]
  Param<T> b;  // [out]

  static Linear make(const std::string& name, std::int64_t in, std::int64_t out,
                     Rng& rng, bool zero_init = false) {
    Linear l;
    l.w = {name + ".w", zero_init ? Tensor<T>::zeros({in, out})
                                  : init::trunc_normal02<T>({in, out}, rng)};
    l.b = {name + ".b", Tensor<T>::zeros({out})};
    return l;
  }

  Tensor<T> operator()(const Tensor<T>& x, Tape<T>* tape) const {
    const auto in = w.value.dim(0), out = w.value.dim(1);
    Dims od = x.dims();
    od.back() = out;
    Tensor<T> flat = ops::reshape(x, {x.numel() / in, in}, tape);
    Tensor<T> y = ops::matmul(flat, w.use(tape), tape);
    y = ops::add_bias(y, b.use(tape), tape);
    return ops::reshape(y, od, tape);
  }

  void collect(ParamRefs<T>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <class T>
struct LayerNorm {
  Param<T> gamma;
  Param<T> beta;
  T eps = T(1e-6);

  static LayerNorm make(const std::string& name, std::int64_t d) {
    return {{name + ".g", Tensor<T>::full({d}, T(1))},
            {name + ".b", Tensor<T>::zeros({d})},
            T(1e-6)};
  }

  Tensor<T> operator()(const Tensor<T>& x, Tape<T>* tape) const {
    return ops::layernorm(x, gamma.use(tape), beta.use(tape), eps, tape);
  }

  void collect(ParamRefs<T>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

// group norm with one group; batch-free, so single-image runs are
// deterministic
template <class T>
struct GroupNorm1 {
  Param<T> gamma;
  Param<T> beta;
  T eps = T(1e-5);

  static GroupNorm1 make(const std::string& name, std::int64_t c) {
    return {{name + ".g", Tensor<T>::full({c}, T(1))},
            {name + ".b", Tensor<T>::zeros({c})},
            T(1e-5)};
  }

  Tensor<T> operator()(const Tensor<T>& x, Tape<T>* tape) const {
    return ops::groupnorm1(x, gamma.use(tape), beta.use(tape), eps, tape);
  }

  void collect(ParamRefs<T>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

template <class T>
struct Conv2d {
  Param<T> w;  // [o, c, kh, kw]
  Param<T> b;  // [o]
  std::int64_t stride = 1;
  std::int64_t pad = 0;

  static Conv2d make(const std::string& name, std::int64_t c, std::int64_t o,
                     std::int64_t k, std::int64_t stride, std::int64_t pad,
                     Rng& rng) {
    Conv2d conv;
    conv.w = {name + ".w", init::he_normal<T>({o, c, k, k}, c * k * k, rng)};
    conv.b = {name + ".b", Tensor<T>::zeros({o})};
    conv.stride = stride;
    conv.pad = pad;
    return conv;
  }

  Tensor<T> operator()(const Tensor<T>& x, Tape<T>* tape) const {
    Tensor<T> bias = b.use(tape);
    return ops::conv2d(x, w.use(tape), &bias, stride, pad, tape);
  }

  void collect(ParamRefs<T>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <class T>
struct ConvTranspose2d {
  Param<T> w;  // [c, o, kh, kw]
  Param<T> b;  // [o]
  std::int64_t stride = 2;

  static ConvTranspose2d make(const std::string& name, std::int64_t c,
                              std::int64_t o, std::int64_t k,
                              std::int64_t stride, Rng& rng) {
    ConvTranspose2d conv;
    conv.w = {name + ".w", init::he_normal<T>({c, o, k, k}, c * k * k, rng)};
    conv.b = {name + ".b", Tensor<T>::zeros({o})};
    conv.stride = stride;
    return conv;
  }

  Tensor<T> operator()(const Tensor<T>& x, Tape<T>* tape) const {
    Tensor<T> bias = b.use(tape);
    return ops::conv_transpose2d(x, w.use(tape), &bias, stride, 0, tape);
  }

  void collect(ParamRefs<T>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

}  // namespace vadapt
