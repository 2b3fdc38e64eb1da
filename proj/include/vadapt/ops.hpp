#pragma once

#include <array>
#include <memory>
#include <vector>

#include "vadapt/kernels.hpp"
#include "vadapt/tape.hpp"
#include "vadapt/tensor.hpp"

// Tape-recorded tensor operations. Every op computes its forward result
// through the kernel layer and, when a tape is supplied and any input is
// tracked, appends the matching backward rule. Passing tape = nullptr runs
// pure inference.
namespace vadapt::ops {

using kernels::Kern;
using i64 = std::int64_t;

namespace detail {

template <class T>
inline void acc(std::vector<T>& dst, std::span<const T> src) {
  Kern<T>::axpy(src.data(), T(1), dst.data(), static_cast<i64>(src.size()));
}

template <class T>
inline bool any_tracked(std::initializer_list<const Tensor<T>*> ts) {
  for (auto* t : ts)
    if (t->grad_id() >= 0) return true;
  return false;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  detail::require(a.dims() == b.dims(), "add: dims mismatch " + dims_str(a.dims()) + " vs " + dims_str(b.dims()));
  TensorBuilder<T> out(a.dims());
  Kern<T>::add(a.ptr(), b.ptr(), out.ptr(), a.numel());
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&a, &b})) {
    y = tape->track_output(y);
    const i64 ga = a.grad_id(), gb = b.grad_id(), gy = y.grad_id();
    tape->add_node([ga, gb, gy](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      if (ga >= 0) detail::acc<T>(t.grad_accum(ga), dy);
      if (gb >= 0) detail::acc<T>(t.grad_accum(gb), dy);
    });
  }
  return y;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  detail::require(a.dims() == b.dims(), "sub: dims mismatch");
  TensorBuilder<T> out(a.dims());
  Kern<T>::sub(a.ptr(), b.ptr(), out.ptr(), a.numel());
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&a, &b})) {
    y = tape->track_output(y);
    const i64 ga = a.grad_id(), gb = b.grad_id(), gy = y.grad_id();
    tape->add_node([ga, gb, gy](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      if (ga >= 0) detail::acc<T>(t.grad_accum(ga), dy);
      if (gb >= 0)
        Kern<T>::axpy(dy.data(), T(-1), t.grad_accum(gb).data(),
                      static_cast<i64>(dy.size()));
    });
  }
  return y;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  detail::require(a.dims() == b.dims(), "mul: dims mismatch");
  TensorBuilder<T> out(a.dims());
  Kern<T>::mul(a.ptr(), b.ptr(), out.ptr(), a.numel());
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&a, &b})) {
    y = tape->track_output(y);
    const i64 ga = a.grad_id(), gb = b.grad_id(), gy = y.grad_id();
    tape->add_node([ga, gb, gy, a, b](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      const i64 n = a.numel();
      if (ga >= 0) {
        auto& da = t.grad_accum(ga);
        const T* bp = b.ptr();
        for (i64 i = 0; i < n; ++i) da[static_cast<std::size_t>(i)] += dy[static_cast<std::size_t>(i)] * bp[i];
      }
      if (gb >= 0) {
        auto& db = t.grad_accum(gb);
        const T* ap = a.ptr();
        for (i64 i = 0; i < n; ++i) db[static_cast<std::size_t>(i)] += dy[static_cast<std::size_t>(i)] * ap[i];
      }
    });
  }
  return y;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s, Tape<T>* tape = nullptr) {
  TensorBuilder<T> out(a.dims());
  Kern<T>::scale(a.ptr(), s, out.ptr(), a.numel());
  Tensor<T> y = std::move(out).freeze();
  if (tape && a.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 ga = a.grad_id(), gy = y.grad_id();
    tape->add_node([ga, gy, s](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      Kern<T>::axpy(dy.data(), s, t.grad_accum(ga).data(),
                    static_cast<i64>(dy.size()));
    });
  }
  return y;
}

// a + c where c is a fixed (untracked) tensor of the same shape
template <class T>
Tensor<T> cadd(const Tensor<T>& a, const Tensor<T>& c, Tape<T>* tape = nullptr) {
  detail::require(a.dims() == c.dims(), "cadd: dims mismatch");
  TensorBuilder<T> out(a.dims());
  Kern<T>::add(a.ptr(), c.ptr(), out.ptr(), a.numel());
  Tensor<T> y = std::move(out).freeze();
  if (tape && a.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 ga = a.grad_id(), gy = y.grad_id();
    tape->add_node([ga, gy](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (!dy.empty()) detail::acc<T>(t.grad_accum(ga), dy);
    });
  }
  return y;
}

// a * c elementwise with a fixed (untracked) tensor
template <class T>
Tensor<T> cmul(const Tensor<T>& a, const Tensor<T>& c, Tape<T>* tape = nullptr) {
  detail::require(a.dims() == c.dims(), "cmul: dims mismatch");
  TensorBuilder<T> out(a.dims());
  Kern<T>::mul(a.ptr(), c.ptr(), out.ptr(), a.numel());
  Tensor<T> y = std::move(out).freeze();
  if (tape && a.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 ga = a.grad_id(), gy = y.grad_id();
    tape->add_node([ga, gy, c](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      auto& da = t.grad_accum(ga);
      const T* cp = c.ptr();
      for (i64 i = 0; i < c.numel(); ++i) da[static_cast<std::size_t>(i)] += dy[static_cast<std::size_t>(i)] * cp[i];
    });
  }
  return y;
}

// x[..., d] + v[d], broadcast over leading axes
template <class T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& v, Tape<T>* tape = nullptr) {
  detail::require(v.rank() == 1 && x.dims().back() == v.dim(0),
                  "add_bias: bias length mismatch");
  const i64 d = v.dim(0);
  const i64 rows = x.numel() / d;
  TensorBuilder<T> out(x.dims());
  Kern<T>::add_rowvec(x.ptr(), v.ptr(), out.ptr(), rows, d);
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&x, &v})) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gv = v.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gv, gy, rows, d](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      if (gx >= 0) detail::acc<T>(t.grad_accum(gx), dy);
      if (gv >= 0)
        Kern<T>::colsum_acc(dy.data(), t.grad_accum(gv).data(), rows, d);
    });
  }
  return y;
}

// x[..., d] * v[d], broadcast over leading axes (gating vector)
template <class T>
Tensor<T> mul_vec(const Tensor<T>& x, const Tensor<T>& v, Tape<T>* tape = nullptr) {
  detail::require(v.rank() == 1 && x.dims().back() == v.dim(0),
                  "mul_vec: vector length mismatch");
  const i64 d = v.dim(0);
  const i64 rows = x.numel() / d;
  TensorBuilder<T> out(x.dims());
  Kern<T>::mul_rowvec(x.ptr(), v.ptr(), out.ptr(), rows, d);
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&x, &v})) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gv = v.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gv, gy, x, v, rows, d](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      if (gx >= 0) {
        auto& dx = t.grad_accum(gx);
        const T* vp = v.ptr();
        for (i64 r = 0; r < rows; ++r)
          for (i64 j = 0; j < d; ++j)
            dx[static_cast<std::size_t>(r * d + j)] += dy[static_cast<std::size_t>(r * d + j)] * vp[j];
      }
      if (gv >= 0) {
        auto& dv = t.grad_accum(gv);
        const T* xp = x.ptr();
        for (i64 j = 0; j < d; ++j) {
          T s = T(0);
          for (i64 r = 0; r < rows; ++r) s += dy[static_cast<std::size_t>(r * d + j)] * xp[r * d + j];
          dv[static_cast<std::size_t>(j)] += s;
        }
      }
    });
  }
  return y;
}

// x[n, p, c] scaled per position by s[n, p]
template <class T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s, Tape<T>* tape = nullptr) {
  detail::require(x.rank() == 3 && s.rank() == 2 && x.dim(0) == s.dim(0) &&
                      x.dim(1) == s.dim(1),
                  "scale_channels: dims mismatch");
  const i64 np = x.dim(0) * x.dim(1), c = x.dim(2);
  TensorBuilder<T> out(x.dims());
  {
    const T* xp = x.ptr();
    const T* sp = s.ptr();
    T* op = out.ptr();
    for (i64 r = 0; r < np; ++r)
      for (i64 j = 0; j < c; ++j) op[r * c + j] = xp[r * c + j] * sp[r];
  }
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&x, &s})) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gs = s.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gs, gy, x, s, np, c](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      if (gx >= 0) {
        auto& dx = t.grad_accum(gx);
        const T* sp = s.ptr();
        for (i64 r = 0; r < np; ++r)
          for (i64 j = 0; j < c; ++j)
            dx[static_cast<std::size_t>(r * c + j)] += dy[static_cast<std::size_t>(r * c + j)] * sp[r];
      }
      if (gs >= 0) {
        auto& ds = t.grad_accum(gs);
        const T* xp = x.ptr();
        for (i64 r = 0; r < np; ++r) {
          T acc = T(0);
          for (i64 j = 0; j < c; ++j) acc += dy[static_cast<std::size_t>(r * c + j)] * xp[r * c + j];
          ds[static_cast<std::size_t>(r)] += acc;
        }
      }
    });
  }
  return y;
}

template <class T>
Tensor<T> gelu(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  TensorBuilder<T> out(x.dims());
  Kern<T>::gelu(x.ptr(), out.ptr(), x.numel());
  Tensor<T> y = std::move(out).freeze();
  if (tape && x.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gy, x](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      Kern<T>::gelu_backward(x.ptr(), dy.data(), t.grad_accum(gx).data(),
                             x.numel());
    });
  }
  return y;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  TensorBuilder<T> out(x.dims());
  Kern<T>::relu(x.ptr(), out.ptr(), x.numel());
  Tensor<T> y = std::move(out).freeze();
  if (tape && x.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gy, x](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      Kern<T>::relu_backward(x.ptr(), dy.data(), t.grad_accum(gx).data(),
                             x.numel());
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// shape

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Dims dims, Tape<T>* tape = nullptr) {
  Tensor<T> y = x.reshaped(std::move(dims));
  if (tape && x.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gy](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (!dy.empty()) detail::acc<T>(t.grad_accum(gx), dy);
    });
  }
  return y;
}

template <class T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm, Tape<T>* tape = nullptr) {
  const int rank = static_cast<int>(x.rank());
  detail::require(static_cast<int>(perm.size()) == rank && rank <= 8,
                  "permute: bad axis list");
  Dims out_dims(x.rank());
  for (int r = 0; r < rank; ++r) out_dims[static_cast<std::size_t>(r)] = x.dim(static_cast<std::size_t>(perm[static_cast<std::size_t>(r)]));
  TensorBuilder<T> out(out_dims);
  Kern<T>::permute(x.ptr(), out.ptr(), x.dims().data(), perm.data(), rank);
  Tensor<T> y = std::move(out).freeze();
  if (tape && x.grad_id() >= 0) {
    y = tape->track_output(y);
    std::vector<int> inv(perm.size());
    for (int r = 0; r < rank; ++r) inv[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])] = r;
    const i64 gx = x.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gy, inv, out_dims, rank](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      std::vector<T> tmp(dy.size());
      Kern<T>::permute(dy.data(), tmp.data(), out_dims.data(), inv.data(), rank);
      detail::acc<T>(t.grad_accum(gx), {tmp.data(), tmp.size()});
    });
  }
  return y;
}

template <class T>
Tensor<T> slice(const Tensor<T>& x, int axis, i64 start, i64 len, Tape<T>* tape = nullptr) {
  detail::require(axis >= 0 && axis < static_cast<int>(x.rank()), "slice: bad axis");
  const i64 adim = x.dim(static_cast<std::size_t>(axis));
  detail::require(start >= 0 && len > 0 && start + len <= adim, "slice: range out of bounds");
  i64 outer = 1, inner = 1;
  for (int r = 0; r < axis; ++r) outer *= x.dim(static_cast<std::size_t>(r));
  for (std::size_t r = static_cast<std::size_t>(axis) + 1; r < x.rank(); ++r) inner *= x.dim(r);
  Dims od = x.dims();
  od[static_cast<std::size_t>(axis)] = len;
  TensorBuilder<T> out(od);
  {
    const T* xp = x.ptr();
    T* op = out.ptr();
    for (i64 o = 0; o < outer; ++o)
      std::copy(xp + (o * adim + start) * inner, xp + (o * adim + start + len) * inner,
                op + o * len * inner);
  }
  Tensor<T> y = std::move(out).freeze();
  if (tape && x.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gy, outer, inner, adim, start, len](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      auto& dx = t.grad_accum(gx);
      for (i64 o = 0; o < outer; ++o)
        for (i64 i = 0; i < len * inner; ++i)
          dx[static_cast<std::size_t>((o * adim + start) * inner + i)] += dy[static_cast<std::size_t>(o * len * inner + i)];
    });
  }
  return y;
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis, Tape<T>* tape = nullptr) {
  detail::require(!parts.empty(), "concat: no inputs");
  const auto& first = parts.front();
  detail::require(axis >= 0 && axis < static_cast<int>(first.rank()), "concat: bad axis");
  i64 total_axis = 0;
  for (const auto& p : parts) {
    detail::require(p.rank() == first.rank(), "concat: rank mismatch");
    for (std::size_t r = 0; r < first.rank(); ++r)
      if (static_cast<int>(r) != axis)
        detail::require(p.dim(r) == first.dim(r), "concat: dims mismatch");
    total_axis += p.dim(static_cast<std::size_t>(axis));
  }
  i64 outer = 1, inner = 1;
  for (int r = 0; r < axis; ++r) outer *= first.dim(static_cast<std::size_t>(r));
  for (std::size_t r = static_cast<std::size_t>(axis) + 1; r < first.rank(); ++r) inner *= first.dim(r);
  Dims od = first.dims();
  od[static_cast<std::size_t>(axis)] = total_axis;
  TensorBuilder<T> out(od);
  {
    T* op = out.ptr();
    i64 off = 0;
    for (const auto& p : parts) {
      const i64 a = p.dim(static_cast<std::size_t>(axis));
      const T* pp = p.ptr();
      for (i64 o = 0; o < outer; ++o)
        std::copy(pp + o * a * inner, pp + (o + 1) * a * inner,
                  op + (o * total_axis + off) * inner);
      off += a;
    }
  }
  Tensor<T> y = std::move(out).freeze();
  bool tracked = false;
  for (const auto& p : parts) tracked = tracked || p.grad_id() >= 0;
  if (tape && tracked) {
    y = tape->track_output(y);
    std::vector<i64> ids, sizes;
    for (const auto& p : parts) {
      ids.push_back(p.grad_id());
      sizes.push_back(p.dim(static_cast<std::size_t>(axis)));
    }
    const i64 gy = y.grad_id();
    tape->add_node([gy, ids, sizes, outer, inner, total_axis](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      i64 off = 0;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        const i64 a = sizes[k];
        if (ids[k] >= 0) {
          auto& dp = t.grad_accum(ids[k]);
          for (i64 o = 0; o < outer; ++o)
            for (i64 i = 0; i < a * inner; ++i)
              dp[static_cast<std::size_t>(o * a * inner + i)] += dy[static_cast<std::size_t>((o * total_axis + off) * inner + i)];
        }
        off += a;
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// reductions

template <class T>
Tensor<T> sum_axis(const Tensor<T>& x, int axis, Tape<T>* tape = nullptr) {
  detail::require(axis >= 0 && axis < static_cast<int>(x.rank()), "sum_axis: bad axis");
  i64 outer = 1, inner = 1;
  const i64 adim = x.dim(static_cast<std::size_t>(axis));
  for (int r = 0; r < axis; ++r) outer *= x.dim(static_cast<std::size_t>(r));
  for (std::size_t r = static_cast<std::size_t>(axis) + 1; r < x.rank(); ++r) inner *= x.dim(r);
  Dims od;
  for (std::size_t r = 0; r < x.rank(); ++r)
    if (static_cast<int>(r) != axis) od.push_back(x.dim(r));
  if (od.empty()) od.push_back(1);
  TensorBuilder<T> out(od);
  Kern<T>::sum_mid_axis(x.ptr(), out.ptr(), outer, adim, inner);
  Tensor<T> y = std::move(out).freeze();
  if (tape && x.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gy, outer, adim, inner](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      auto& dx = t.grad_accum(gx);
      for (i64 o = 0; o < outer; ++o)
        for (i64 a = 0; a < adim; ++a)
          for (i64 i = 0; i < inner; ++i)
            dx[static_cast<std::size_t>((o * adim + a) * inner + i)] += dy[static_cast<std::size_t>(o * inner + i)];
    });
  }
  return y;
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  Tensor<T> y = Tensor<T>::from_data({1}, {Kern<T>::sum_all(x.ptr(), x.numel())});
  if (tape && x.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gy = y.grad_id();
    const i64 n = x.numel();
    tape->add_node([gx, gy, n](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      auto& dx = t.grad_accum(gx);
      for (i64 i = 0; i < n; ++i) dx[static_cast<std::size_t>(i)] += dy[0];
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// linear algebra

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  detail::require(a.rank() == 2 && b.rank() == 2, "matmul: rank-2 operands required");
  detail::require(a.dim(1) == b.dim(0), "matmul: inner extents differ, " +
                                            dims_str(a.dims()) + " x " + dims_str(b.dims()));
  const i64 m = a.dim(0), k = a.dim(1), n = b.dim(1);
  TensorBuilder<T> out({m, n});
  Kern<T>::matmul(a.ptr(), b.ptr(), out.ptr(), m, k, n, false, false, false);
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&a, &b})) {
    y = tape->track_output(y);
    const i64 ga = a.grad_id(), gb = b.grad_id(), gy = y.grad_id();
    tape->add_node([ga, gb, gy, a, b, m, k, n](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      if (ga >= 0)
        Kern<T>::matmul(dy.data(), b.ptr(), t.grad_accum(ga).data(), m, n, k,
                        false, true, true);
      if (gb >= 0)
        Kern<T>::matmul(a.ptr(), dy.data(), t.grad_accum(gb).data(), k, m, n,
                        true, false, true);
    });
  }
  return y;
}

template <class T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  detail::require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) &&
                      a.dim(2) == b.dim(1),
                  "bmm: incompatible dims " + dims_str(a.dims()) + " x " + dims_str(b.dims()));
  const i64 nb = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  TensorBuilder<T> out({nb, m, n});
  Kern<T>::bmm(a.ptr(), b.ptr(), out.ptr(), nb, m, k, n, false, false);
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&a, &b})) {
    y = tape->track_output(y);
    const i64 ga = a.grad_id(), gb = b.grad_id(), gy = y.grad_id();
    tape->add_node([ga, gb, gy, a, b, nb, m, k, n](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      if (ga >= 0) {
        std::vector<T> tmp(static_cast<std::size_t>(nb * m * k));
        Kern<T>::bmm(dy.data(), b.ptr(), tmp.data(), nb, m, n, k, false, true);
        detail::acc<T>(t.grad_accum(ga), {tmp.data(), tmp.size()});
      }
      if (gb >= 0) {
        std::vector<T> tmp(static_cast<std::size_t>(nb * k * n));
        Kern<T>::bmm(a.ptr(), dy.data(), tmp.data(), nb, k, m, n, true, false);
        detail::acc<T>(t.grad_accum(gb), {tmp.data(), tmp.size()});
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// normalization / softmax

template <class T>
Tensor<T> softmax_lastdim(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  const i64 d = x.dims().back();
  const i64 rows = x.numel() / d;
  TensorBuilder<T> out(x.dims());
  Kern<T>::softmax_rows(x.ptr(), out.ptr(), rows, d);
  Tensor<T> y = std::move(out).freeze();
  if (tape && x.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gy, y, rows, d](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      Kern<T>::softmax_rows_backward(y.ptr(), dy.data(),
                                     t.grad_accum(gx).data(), rows, d);
    });
  }
  return y;
}

template <class T>
Tensor<T> softmax(const Tensor<T>& x, int axis, Tape<T>* tape = nullptr) {
  detail::require(axis >= 0 && axis < static_cast<int>(x.rank()), "softmax: bad axis");
  if (axis == static_cast<int>(x.rank()) - 1) return softmax_lastdim(x, tape);
  std::vector<int> perm, inv;
  for (int r = 0; r < static_cast<int>(x.rank()); ++r)
    if (r != axis) perm.push_back(r);
  perm.push_back(axis);
  Tensor<T> xp = permute(x, perm, tape);
  Tensor<T> yp = softmax_lastdim(xp, tape);
  for (int r = 0; r < static_cast<int>(x.rank()); ++r)
    inv.push_back(0);
  for (int r = 0; r < static_cast<int>(x.rank()); ++r) inv[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])] = r;
  return permute(yp, inv, tape);
}

template <class T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma,
                    const Tensor<T>& beta, T eps, Tape<T>* tape = nullptr) {
  const i64 d = x.dims().back();
  detail::require(gamma.rank() == 1 && gamma.dim(0) == d && beta.rank() == 1 &&
                      beta.dim(0) == d,
                  "layernorm: parameter length mismatch");
  const i64 rows = x.numel() / d;
  TensorBuilder<T> out(x.dims());
  auto mean = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  auto rstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  Kern<T>::layernorm(x.ptr(), gamma.ptr(), beta.ptr(), eps, out.ptr(),
                     mean->data(), rstd->data(), rows, d);
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&x, &gamma, &beta})) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gg = gamma.grad_id(), gb = beta.grad_id(),
              gy = y.grad_id();
    tape->add_node([gx, gg, gb, gy, x, gamma, mean, rstd, rows, d](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      // dgamma/dbeta contributions land in scratch when untracked
      std::vector<T> scratch_g, scratch_b, scratch_x;
      T* dxp;
      T* dgp;
      T* dbp;
      if (gx >= 0) dxp = t.grad_accum(gx).data();
      else { scratch_x.assign(static_cast<std::size_t>(rows * d), T(0)); dxp = scratch_x.data(); }
      if (gg >= 0) dgp = t.grad_accum(gg).data();
      else { scratch_g.assign(static_cast<std::size_t>(d), T(0)); dgp = scratch_g.data(); }
      if (gb >= 0) dbp = t.grad_accum(gb).data();
      else { scratch_b.assign(static_cast<std::size_t>(d), T(0)); dbp = scratch_b.data(); }
      Kern<T>::layernorm_backward(x.ptr(), gamma.ptr(), mean->data(),
                                  rstd->data(), dy.data(), dxp, dgp, dbp, rows, d);
    });
  }
  return y;
}

// group normalization, single group: stats over (C,H,W) per sample
template <class T>
Tensor<T> groupnorm1(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps, Tape<T>* tape = nullptr) {
  detail::require(x.rank() == 4, "groupnorm1: expected [b,c,h,w]");
  const i64 b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  detail::require(gamma.rank() == 1 && gamma.dim(0) == c && beta.dim(0) == c,
                  "groupnorm1: parameter length mismatch");
  TensorBuilder<T> out(x.dims());
  auto mean = std::make_shared<std::vector<T>>(static_cast<std::size_t>(b));
  auto rstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(b));
  Kern<T>::groupnorm1(x.ptr(), gamma.ptr(), beta.ptr(), eps, out.ptr(),
                      mean->data(), rstd->data(), b, c, hw);
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&x, &gamma, &beta})) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gg = gamma.grad_id(), gb = beta.grad_id(),
              gy = y.grad_id();
    tape->add_node([gx, gg, gb, gy, x, gamma, mean, rstd, b, c, hw](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      std::vector<T> scratch_g, scratch_b, scratch_x;
      T* dxp;
      T* dgp;
      T* dbp;
      if (gx >= 0) dxp = t.grad_accum(gx).data();
      else { scratch_x.assign(static_cast<std::size_t>(b * c * hw), T(0)); dxp = scratch_x.data(); }
      if (gg >= 0) dgp = t.grad_accum(gg).data();
      else { scratch_g.assign(static_cast<std::size_t>(c), T(0)); dgp = scratch_g.data(); }
      if (gb >= 0) dbp = t.grad_accum(gb).data();
      else { scratch_b.assign(static_cast<std::size_t>(c), T(0)); dbp = scratch_b.data(); }
      Kern<T>::groupnorm1_backward(x.ptr(), gamma.ptr(), mean->data(),
                                   rstd->data(), dy.data(), dxp, dgp, dbp, b, c, hw);
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// convolution / pooling / sampling

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                 i64 stride, i64 pad, Tape<T>* tape = nullptr) {
  detail::require(x.rank() == 4 && w.rank() == 4, "conv2d: expected [b,c,h,w] and [o,c,kh,kw]");
  detail::require(x.dim(1) == w.dim(1), "conv2d: channel mismatch");
  const i64 b = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const i64 o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const i64 oh = (h + 2 * pad - kh) / stride + 1;
  const i64 ow = (ww + 2 * pad - kw) / stride + 1;
  detail::require(h + 2 * pad >= kh && ww + 2 * pad >= kw && oh > 0 && ow > 0,
                  "conv2d: non-positive output extent");
  if (bias)
    detail::require(bias->rank() == 1 && bias->dim(0) == o, "conv2d: bias length mismatch");
  TensorBuilder<T> out({b, o, oh, ow});
  Kern<T>::conv2d(x.ptr(), w.ptr(), bias ? bias->ptr() : nullptr, out.ptr(), b,
                  c, h, ww, o, kh, kw, stride, pad, oh, ow);
  Tensor<T> y = std::move(out).freeze();
  const bool track = tape && (x.grad_id() >= 0 || w.grad_id() >= 0 ||
                              (bias && bias->grad_id() >= 0));
  if (track) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gw = w.grad_id(),
              gbias = bias ? bias->grad_id() : -1, gy = y.grad_id();
    Tensor<T> xc = x, wc = w;
    tape->add_node([gx, gw, gbias, gy, xc, wc, b, c, h, ww, o, kh, kw, stride,
                    pad, oh, ow](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      Kern<T>::conv2d_backward(
          xc.ptr(), wc.ptr(), dy.data(),
          gx >= 0 ? t.grad_accum(gx).data() : nullptr,
          gw >= 0 ? t.grad_accum(gw).data() : nullptr,
          gbias >= 0 ? t.grad_accum(gbias).data() : nullptr, b, c, h, ww, o,
          kh, kw, stride, pad, oh, ow);
    });
  }
  return y;
}

template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>* bias, i64 stride, i64 pad,
                           Tape<T>* tape = nullptr) {
  detail::require(x.rank() == 4 && w.rank() == 4,
                  "conv_transpose2d: expected [b,c,h,w] and [c,o,kh,kw]");
  detail::require(x.dim(1) == w.dim(0), "conv_transpose2d: channel mismatch");
  const i64 b = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const i64 o = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const i64 oh = (h - 1) * stride + kh - 2 * pad;
  const i64 ow = (ww - 1) * stride + kw - 2 * pad;
  detail::require(oh > 0 && ow > 0, "conv_transpose2d: non-positive output extent");
  if (bias)
    detail::require(bias->rank() == 1 && bias->dim(0) == o,
                    "conv_transpose2d: bias length mismatch");
  TensorBuilder<T> out({b, o, oh, ow});
  Kern<T>::conv_transpose2d(x.ptr(), w.ptr(), bias ? bias->ptr() : nullptr,
                            out.ptr(), b, c, h, ww, o, kh, kw, stride, pad, oh,
                            ow);
  Tensor<T> y = std::move(out).freeze();
  const bool track = tape && (x.grad_id() >= 0 || w.grad_id() >= 0 ||
                              (bias && bias->grad_id() >= 0));
  if (track) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gw = w.grad_id(),
              gbias = bias ? bias->grad_id() : -1, gy = y.grad_id();
    Tensor<T> xc = x, wc = w;
    tape->add_node([gx, gw, gbias, gy, xc, wc, b, c, h, ww, o, kh, kw, stride,
                    pad, oh, ow](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      Kern<T>::conv_transpose2d_backward(
          xc.ptr(), wc.ptr(), dy.data(),
          gx >= 0 ? t.grad_accum(gx).data() : nullptr,
          gw >= 0 ? t.grad_accum(gw).data() : nullptr,
          gbias >= 0 ? t.grad_accum(gbias).data() : nullptr, b, c, h, ww, o,
          kh, kw, stride, pad, oh, ow);
    });
  }
  return y;
}

template <class T>
Tensor<T> maxpool2d(const Tensor<T>& x, i64 k, i64 stride, i64 pad,
                    Tape<T>* tape = nullptr) {
  detail::require(x.rank() == 4, "maxpool2d: expected [b,c,h,w]");
  const i64 b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const i64 oh = (h + 2 * pad - k) / stride + 1;
  const i64 ow = (w + 2 * pad - k) / stride + 1;
  detail::require(oh > 0 && ow > 0, "maxpool2d: non-positive output extent");
  TensorBuilder<T> out({b, c, oh, ow});
  auto argmax = std::make_shared<std::vector<i64>>(static_cast<std::size_t>(b * c * oh * ow));
  Kern<T>::maxpool2d(x.ptr(), out.ptr(), argmax->data(), b * c, h, w, k,
                     stride, pad, oh, ow);
  Tensor<T> y = std::move(out).freeze();
  if (tape && x.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gy = y.grad_id();
    const i64 bc = b * c, hw = h * w, ohw = oh * ow;
    tape->add_node([gx, gy, argmax, bc, hw, ohw](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      Kern<T>::maxpool2d_backward(argmax->data(), dy.data(),
                                  t.grad_accum(gx).data(), bc, hw, ohw);
    });
  }
  return y;
}

// value [b,c,h,w], points [b,p,2] normalized (x,y) -> [b,p,c]
template <class T>
Tensor<T> bilinear_sample(const Tensor<T>& value, const Tensor<T>& points,
                          Tape<T>* tape = nullptr) {
  detail::require(value.rank() == 4 && points.rank() == 3 && points.dim(2) == 2 &&
                      value.dim(0) == points.dim(0),
                  "bilinear_sample: expected value [b,c,h,w], points [b,p,2]");
  const i64 b = value.dim(0), c = value.dim(1), h = value.dim(2), w = value.dim(3);
  const i64 p = points.dim(1);
  TensorBuilder<T> out({b, p, c});
  Kern<T>::bilinear_sample(value.ptr(), points.ptr(), out.ptr(), b, c, h, w, p);
  Tensor<T> y = std::move(out).freeze();
  if (tape && detail::any_tracked<T>({&value, &points})) {
    y = tape->track_output(y);
    const i64 gv = value.grad_id(), gp = points.grad_id(), gy = y.grad_id();
    Tensor<T> vc = value, pc = points;
    tape->add_node([gv, gp, gy, vc, pc, b, c, h, w, p](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      Kern<T>::bilinear_sample_backward(
          vc.ptr(), pc.ptr(), dy.data(),
          gv >= 0 ? t.grad_accum(gv).data() : nullptr,
          gp >= 0 ? t.grad_accum(gp).data() : nullptr, b, c, h, w, p);
    });
  }
  return y;
}

// clamp-to-edge bilinear resize of [b,c,h,w] to (oh,ow)
template <class T>
Tensor<T> bilinear_resize(const Tensor<T>& x, i64 oh, i64 ow, Tape<T>* tape = nullptr) {
  detail::require(x.rank() == 4 && oh > 0 && ow > 0, "bilinear_resize: bad arguments");
  const i64 b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  TensorBuilder<T> out({b, c, oh, ow});
  Kern<T>::bilinear_resize(x.ptr(), out.ptr(), b * c, h, w, oh, ow);
  Tensor<T> y = std::move(out).freeze();
  if (tape && x.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 gx = x.grad_id(), gy = y.grad_id();
    const i64 bc = b * c;
    tape->add_node([gx, gy, bc, h, w, oh, ow](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      Kern<T>::bilinear_resize_backward(dy.data(), t.grad_accum(gx).data(), bc,
                                        h, w, oh, ow);
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// loss

// logits [rows, classes] with int labels; labels < 0 are ignored positions.
// Returns mean cross entropy as a scalar tensor.
template <class T>
Tensor<T> softmax_xent(const Tensor<T>& logits,
                       const std::shared_ptr<const std::vector<std::int32_t>>& labels,
                       Tape<T>* tape = nullptr) {
  detail::require(logits.rank() == 2, "softmax_xent: expected [rows, classes]");
  const i64 rows = logits.dim(0), d = logits.dim(1);
  detail::require(static_cast<i64>(labels->size()) == rows,
                  "softmax_xent: label count mismatch");
  auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows * d));
  T loss = T(0);
  Kern<T>::softmax_xent(logits.ptr(), labels->data(), probs->data(), rows, d, &loss);
  Tensor<T> y = Tensor<T>::from_data({1}, {loss});
  if (tape && logits.grad_id() >= 0) {
    y = tape->track_output(y);
    const i64 gx = logits.grad_id(), gy = y.grad_id();
    tape->add_node([gx, gy, probs, labels, rows, d](Tape<T>& t) {
      auto dy = t.grad_buf(gy);
      if (dy.empty()) return;
      Kern<T>::softmax_xent_backward(probs->data(), labels->data(), dy[0],
                                     t.grad_accum(gx).data(), rows, d);
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// window partition helpers (pure permutations)

// tokens [b, h*w, d] on an h x w grid -> [b * (h/s) * (w/s), s*s, d]
template <class T>
Tensor<T> window_partition(const Tensor<T>& tokens, i64 h, i64 w, i64 s,
                           Tape<T>* tape = nullptr) {
  detail::require(tokens.rank() == 3 && tokens.dim(1) == h * w,
                  "window_partition: token count does not match grid");
  detail::require(h % s == 0 && w % s == 0,
                  "window_partition: grid " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible by window " + std::to_string(s));
  const i64 b = tokens.dim(0), d = tokens.dim(2);
  Tensor<T> x = reshape(tokens, {b, h / s, s, w / s, s, d}, tape);
  x = permute(x, {0, 1, 3, 2, 4, 5}, tape);
  return reshape(x, {b * (h / s) * (w / s), s * s, d}, tape);
}

template <class T>
Tensor<T> window_unpartition(const Tensor<T>& windows, i64 h, i64 w, i64 s,
                             i64 b, Tape<T>* tape = nullptr) {
  detail::require(windows.rank() == 3 && windows.dim(1) == s * s &&
                      windows.dim(0) == b * (h / s) * (w / s),
                  "window_unpartition: window tensor shape mismatch");
  const i64 d = windows.dim(2);
  Tensor<T> x = reshape(windows, {b, h / s, w / s, s, s, d}, tape);
  x = permute(x, {0, 1, 3, 2, 4, 5}, tape);
  return reshape(x, {b, h * w, d}, tape);
}

}  // namespace vadapt::ops
