#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "vadapt/tensor.hpp"

namespace vadapt {

// Reverse-mode differentiation tape. Operations append nodes in forward
// order; backward() replays them once in reverse. A tape belongs to a single
// forward pass and a single thread; concurrent passes use separate tapes.
//
// Gradients live in per-tensor slots. A slot's buffer stays empty until the
// first contribution arrives, letting backward() skip nodes whose output was
// never used. Contributions accumulate with +=, so a tensor consumed by
// several ops receives the sum.
template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a leaf (parameter or input). Idempotent per buffer: watching
  // the same tensor twice returns the same slot, so every use contributes to
  // one gradient.
  Tensor<T> watch(const Tensor<T>& t) {
    if (t.grad_id() >= 0) return t;
    const void* key = t.ptr();
    if (auto it = watched_.find(key); it != watched_.end())
      return t.with_grad_id(it->second);
    const std::int64_t id = new_slot(t);
    watched_.emplace(key, id);
    return t.with_grad_id(id);
  }

  bool tracked(const Tensor<T>& t) const { return t.grad_id() >= 0; }

  // Called by ops: gives the forward result a gradient slot.
  Tensor<T> track_output(const Tensor<T>& out) {
    return out.with_grad_id(new_slot(out));
  }

  void add_node(std::function<void(Tape&)> backward) {
    nodes_.push_back(std::move(backward));
  }

  // Gradient buffer of a tracked tensor; empty span means "all zeros so far".
  std::span<T> grad_buf(std::int64_t id) {
    auto& g = slots_[static_cast<std::size_t>(id)].grad;
    return {g.data(), g.size()};
  }

  // Gradient buffer, materializing zeros on first touch.
  std::vector<T>& grad_accum(std::int64_t id) {
    auto& s = slots_[static_cast<std::size_t>(id)];
    if (s.grad.empty()) s.grad.assign(static_cast<std::size_t>(s.numel), T(0));
    return s.grad;
  }

  // Gradient of a tensor after backward(), as a tensor of the same shape.
  Tensor<T> grad(const Tensor<T>& t) {
    if (t.grad_id() < 0) throw UsageError("grad() of untracked tensor");
    auto& s = slots_[static_cast<std::size_t>(t.grad_id())];
    if (s.grad.empty()) return Tensor<T>::zeros(t.dims());
    return Tensor<T>::from_data(t.dims(), s.grad);
  }

  void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) throw UsageError("backward() needs a scalar loss");
    if (loss.grad_id() < 0)
      throw UsageError("backward() loss is not on this tape");
    if (consumed_) throw UsageError("backward() already ran on this tape");
    consumed_ = true;
    grad_accum(loss.grad_id())[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Slot {
    std::int64_t numel;
    std::shared_ptr<const std::vector<T>> keepalive;
    std::vector<T> grad;
  };

  std::int64_t new_slot(const Tensor<T>& t) {
    slots_.push_back(Slot{t.numel(), t.buffer(), {}});
    return static_cast<std::int64_t>(slots_.size()) - 1;
  }

  std::vector<Slot> slots_;
  std::vector<std::function<void(Tape&)>> nodes_;
  std::unordered_map<const void*, std::int64_t> watched_;
  bool consumed_ = false;
};

}  // namespace vadapt
