#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "vadapt/error.hpp"
#include "vadapt/rng.hpp"

namespace vadapt {

using Dims = std::vector<std::int64_t>;

inline std::int64_t numel_of(const Dims& dims) {
  std::int64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

inline std::string dims_str(const Dims& dims) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. The element buffer is immutable after
// construction and shared between copies, so tensors behave as values and
// are safe to read concurrently. grad_id links the tensor to a slot on the
// tape that produced or watched it (-1 = untracked); it is only meaningful
// while that tape is alive.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Dims dims) {
    std::vector<T> v(static_cast<std::size_t>(numel_of(dims)), T(0));
    return Tensor(std::move(dims), std::move(v));
  }

  static Tensor full(Dims dims, T value) {
    std::vector<T> v(static_cast<std::size_t>(numel_of(dims)), value);
    return Tensor(std::move(dims), std::move(v));
  }

  static Tensor from_data(Dims dims, std::vector<T> data) {
    if (static_cast<std::int64_t>(data.size()) != numel_of(dims))
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match dims " + dims_str(dims));
    return Tensor(std::move(dims), std::move(data));
  }

  static Tensor randn(Dims dims, Rng& rng, double stddev = 1.0) {
    std::vector<T> v(static_cast<std::size_t>(numel_of(dims)));
    for (auto& x : v) x = static_cast<T>(rng.normal(0.0, stddev));
    return Tensor(std::move(dims), std::move(v));
  }

  static Tensor rand_uniform(Dims dims, Rng& rng, double lo, double hi) {
    std::vector<T> v(static_cast<std::size_t>(numel_of(dims)));
    for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
    return Tensor(std::move(dims), std::move(v));
  }

  const Dims& dims() const { return dims_; }
  std::int64_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t rank() const { return dims_.size(); }
  std::int64_t numel() const { return buf_ ? static_cast<std::int64_t>(buf_->size()) : 0; }
  bool defined() const { return static_cast<bool>(buf_); }

  std::span<const T> data() const { return {buf_->data(), buf_->size()}; }
  const T* ptr() const { return buf_->data(); }
  const std::shared_ptr<const std::vector<T>>& buffer() const { return buf_; }

  T scalar() const {
    if (numel() != 1) throw UsageError("scalar() on tensor with numel != 1");
    return (*buf_)[0];
  }

  template <class... Ix>
  T at(Ix... ix) const {
    const std::int64_t idx[] = {static_cast<std::int64_t>(ix)...};
    if (sizeof...(ix) != dims_.size()) throw UsageError("at(): wrong index rank");
    std::int64_t flat = 0;
    for (std::size_t k = 0; k < dims_.size(); ++k) {
      if (idx[k] < 0 || idx[k] >= dims_[k]) throw UsageError("at(): index out of range");
      flat = flat * dims_[k] + idx[k];
    }
    return (*buf_)[static_cast<std::size_t>(flat)];
  }

  // Same buffer, new dims (row-major reinterpretation).
  Tensor reshaped(Dims dims) const {
    if (numel_of(dims) != numel())
      throw ShapeError("reshape from " + dims_str(dims_) + " to " + dims_str(dims));
    Tensor t;
    t.dims_ = std::move(dims);
    t.buf_ = buf_;
    return t;
  }

  std::int64_t grad_id() const { return grad_id_; }
  Tensor with_grad_id(std::int64_t id) const {
    Tensor t = *this;
    t.grad_id_ = id;
    return t;
  }

 private:
  Tensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)) {
    for (auto d : dims_)
      if (d <= 0) throw ShapeError("non-positive extent in dims " + dims_str(dims_));
    buf_ = std::make_shared<const std::vector<T>>(std::move(data));
  }

  Dims dims_;
  std::shared_ptr<const std::vector<T>> buf_;
  std::int64_t grad_id_ = -1;
};

// Writable staging buffer that freezes into an immutable Tensor.
template <class T>
struct TensorBuilder {
  Dims dims;
  std::vector<T> data;

  explicit TensorBuilder(Dims d) : dims(std::move(d)) {
    data.assign(static_cast<std::size_t>(numel_of(dims)), T(0));
  }
  T* ptr() { return data.data(); }
  Tensor<T> freeze() && { return Tensor<T>::from_data(std::move(dims), std::move(data)); }
};

}  // namespace vadapt
