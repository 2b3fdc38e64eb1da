#pragma once

#include <vector>

#include "vadapt/kernels.hpp"
#include "vadapt/nn.hpp"
#include "vadapt/tape.hpp"

namespace vadapt {

// Adaptive moments with decoupled weight decay. Decay applies to rank>=2
// tensors (projection and convolution weights), not to vectors (biases,
// norm parameters, gates).
template <class T>
struct AdamW {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;

  struct Slot {
    std::vector<T> m, v;
  };
  std::vector<Slot> slots;
  std::int64_t step_count = 0;

  void attach(const ParamRefs<T>& params) {
    slots.clear();
    slots.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto n = static_cast<std::size_t>(params[i]->value.numel());
      slots[i].m.assign(n, T(0));
      slots[i].v.assign(n, T(0));
    }
  }

  // `watched[i]` is the tape-tracked tensor of params[i] from the step's
  // forward pass; frozen[i] (optional) skips the update.
  void step(ParamRefs<T>& params, Tape<T>& tape,
            const std::vector<Tensor<T>>& watched,
            const std::vector<bool>* frozen = nullptr) {
    ++step_count;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (frozen && (*frozen)[i]) continue;
      Tensor<T> g = tape.grad(watched[i]);
      auto& s = slots[i];
      std::vector<T> value(params[i]->value.data().begin(), params[i]->value.data().end());
      const T wd = params[i]->value.rank() >= 2 ? static_cast<T>(weight_decay) : T(0);
      kernels::Kern<T>::adamw(value.data(), s.m.data(), s.v.data(), g.ptr(),
                              static_cast<std::int64_t>(value.size()),
                              static_cast<T>(lr), static_cast<T>(beta1),
                              static_cast<T>(beta2), static_cast<T>(eps), wd,
                              step_count);
      params[i]->value = Tensor<T>::from_data(params[i]->value.dims(), std::move(value));
    }
  }
};

}  // namespace vadapt
