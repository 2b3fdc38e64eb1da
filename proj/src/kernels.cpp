#include "vadapt/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vadapt::kernels {

namespace {
std::atomic<bool> g_parallel{true};
std::atomic<std::uint64_t> g_sample_points{0};

inline bool par() { return g_parallel.load(std::memory_order_relaxed); }
}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return par(); }

int thread_count() {
#ifdef _OPENMP
  return par() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

std::uint64_t sample_point_count() { return g_sample_points.load(); }
void reset_sample_point_count() { g_sample_points.store(0); }

// ---------------------------------------------------------------------------
// matmul

namespace {

// Serial body over a row range [i0,i1). Loop order keeps the k-reduction of
// every output element in ascending order, which pins the floating-point
// result independent of blocking or thread count.
template <class T>
void matmul_rows(const T* a, const T* b, T* c, i64 m, i64 k, i64 n, bool ta,
                 bool tb, bool accumulate, i64 i0, i64 i1) {
  (void)m;
  if (!ta && !tb) {
    for (i64 i = i0; i < i1; ++i) {
      T* crow = c + i * n;
      if (!accumulate) std::fill(crow, crow + n, T(0));
      const T* arow = a + i * k;
      for (i64 kk = 0; kk < k; ++kk) {
        const T s = arow[kk];
        const T* brow = b + kk * n;
        for (i64 j = 0; j < n; ++j) crow[j] += s * brow[j];
      }
    }
  } else if (ta && !tb) {
    // c[i,j] = sum_k a[k,i] * b[k,j]
    for (i64 i = i0; i < i1; ++i) {
      T* crow = c + i * n;
      if (!accumulate) std::fill(crow, crow + n, T(0));
      for (i64 kk = 0; kk < k; ++kk) {
        const T s = a[kk * m + i];
        const T* brow = b + kk * n;
        for (i64 j = 0; j < n; ++j) crow[j] += s * brow[j];
      }
    }
  } else if (!ta && tb) {
    // c[i,j] = dot(a[i,:], b[j,:])
    for (i64 i = i0; i < i1; ++i) {
      const T* arow = a + i * k;
      T* crow = c + i * n;
      for (i64 j = 0; j < n; ++j) {
        const T* brow = b + j * k;
        T acc = accumulate ? crow[j] : T(0);
        for (i64 kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
        crow[j] = acc;
      }
    }
  } else {
    // c[i,j] = sum_k a[k,i] * b[j,k]
    for (i64 i = i0; i < i1; ++i) {
      T* crow = c + i * n;
      for (i64 j = 0; j < n; ++j) {
        const T* brow = b + j * k;
        T acc = accumulate ? crow[j] : T(0);
        for (i64 kk = 0; kk < k; ++kk) acc += a[kk * m + i] * brow[kk];
        crow[j] = acc;
      }
    }
  }
}

}  // namespace

template <class T>
void Kern<T>::matmul(const T* a, const T* b, T* c, i64 m, i64 k, i64 n,
                     bool ta, bool tb, bool accumulate) {
  const bool p = par() && m > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < m; ++i) matmul_rows(a, b, c, m, k, n, ta, tb, accumulate, i, i + 1);
}

template <class T>
void Kern<T>::bmm(const T* a, const T* b, T* c, i64 nb, i64 m, i64 k, i64 n,
                  bool ta, bool tb) {
  const bool p = par();
#pragma omp parallel for schedule(static) if (p)
  for (i64 e = 0; e < nb * m; ++e) {
    const i64 batch = e / m, i = e % m;
    matmul_rows(a + batch * m * k, b + batch * k * n, c + batch * m * n, m, k,
                n, ta, tb, false, i, i + 1);
  }
}

// ---------------------------------------------------------------------------
// elementwise

template <class T>
void Kern<T>::add(const T* a, const T* b, T* out, i64 n) {
  const bool p = par() && n > (1 << 14);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class T>
void Kern<T>::sub(const T* a, const T* b, T* out, i64 n) {
  const bool p = par() && n > (1 << 14);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <class T>
void Kern<T>::mul(const T* a, const T* b, T* out, i64 n) {
  const bool p = par() && n > (1 << 14);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void Kern<T>::scale(const T* a, T s, T* out, i64 n) {
  const bool p = par() && n > (1 << 14);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < n; ++i) out[i] = a[i] * s;
}

template <class T>
void Kern<T>::axpy(const T* a, T s, T* out, i64 n) {
  const bool p = par() && n > (1 << 14);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < n; ++i) out[i] += a[i] * s;
}

template <class T>
void Kern<T>::add_rowvec(const T* x, const T* v, T* out, i64 rows, i64 d) {
  const bool p = par() && rows > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 r = 0; r < rows; ++r) {
    const T* xr = x + r * d;
    T* outr = out + r * d;
    for (i64 j = 0; j < d; ++j) outr[j] = xr[j] + v[j];
  }
}

template <class T>
void Kern<T>::mul_rowvec(const T* x, const T* v, T* out, i64 rows, i64 d) {
  const bool p = par() && rows > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 r = 0; r < rows; ++r) {
    const T* xr = x + r * d;
    T* outr = out + r * d;
    for (i64 j = 0; j < d; ++j) outr[j] = xr[j] * v[j];
  }
}

template <class T>
void Kern<T>::colsum_acc(const T* x, T* out, i64 rows, i64 d) {
  const bool p = par() && d > 64;
#pragma omp parallel for schedule(static) if (p)
  for (i64 j = 0; j < d; ++j) {
    T acc = T(0);
    for (i64 r = 0; r < rows; ++r) acc += x[r * d + j];
    out[j] += acc;
  }
}

// ---------------------------------------------------------------------------
// activations

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

template <class T>
void Kern<T>::gelu(const T* x, T* out, i64 n) {
  const bool p = par() && n > (1 << 13);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < n; ++i) {
    const double v = static_cast<double>(x[i]);
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    out[i] = static_cast<T>(0.5 * v * (1.0 + t));
  }
}

template <class T>
void Kern<T>::gelu_backward(const T* x, const T* dy, T* dx_acc, i64 n) {
  const bool p = par() && n > (1 << 13);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < n; ++i) {
    const double v = static_cast<double>(x[i]);
    const double u = kGeluC * (v + kGeluA * v * v * v);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    const double g = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
    dx_acc[i] += static_cast<T>(static_cast<double>(dy[i]) * g);
  }
}

template <class T>
void Kern<T>::relu(const T* x, T* out, i64 n) {
  const bool p = par() && n > (1 << 14);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void Kern<T>::relu_backward(const T* x, const T* dy, T* dx_acc, i64 n) {
  const bool p = par() && n > (1 << 14);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < n; ++i)
    if (x[i] > T(0)) dx_acc[i] += dy[i];
}

// ---------------------------------------------------------------------------
// softmax / norms

template <class T>
void Kern<T>::softmax_rows(const T* x, T* out, i64 rows, i64 d) {
  const bool p = par() && rows > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 r = 0; r < rows; ++r) {
    const T* xr = x + r * d;
    T* yr = out + r * d;
    T mx = xr[0];
    for (i64 j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    T sum = T(0);
    for (i64 j = 0; j < d; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    for (i64 j = 0; j < d; ++j) yr[j] /= sum;
  }
}

template <class T>
void Kern<T>::softmax_rows_backward(const T* y, const T* dy, T* dx_acc,
                                    i64 rows, i64 d) {
  const bool p = par() && rows > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 r = 0; r < rows; ++r) {
    const T* yr = y + r * d;
    const T* dyr = dy + r * d;
    T s = T(0);
    for (i64 j = 0; j < d; ++j) s += dyr[j] * yr[j];
    T* dxr = dx_acc + r * d;
    for (i64 j = 0; j < d; ++j) dxr[j] += yr[j] * (dyr[j] - s);
  }
}

template <class T>
void Kern<T>::layernorm(const T* x, const T* gamma, const T* beta, T eps,
                        T* out, T* mean, T* rstd, i64 rows, i64 d) {
  const bool p = par() && rows > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 r = 0; r < rows; ++r) {
    const T* xr = x + r * d;
    T mu = T(0);
    for (i64 j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (i64 j = 0; j < d; ++j) {
      const T c = xr[j] - mu;
      var += c * c;
    }
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    T* yr = out + r * d;
    for (i64 j = 0; j < d; ++j) yr[j] = (xr[j] - mu) * rs * gamma[j] + beta[j];
  }
}

template <class T>
void Kern<T>::layernorm_backward(const T* x, const T* gamma, const T* mean,
                                 const T* rstd, const T* dy, T* dx_acc,
                                 T* dgamma_acc, T* dbeta_acc, i64 rows, i64 d) {
  const bool p = par() && rows > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 r = 0; r < rows; ++r) {
    const T* xr = x + r * d;
    const T* dyr = dy + r * d;
    const T mu = mean[r], rs = rstd[r];
    T m1 = T(0), m2 = T(0);
    for (i64 j = 0; j < d; ++j) {
      const T xh = (xr[j] - mu) * rs;
      const T dxh = dyr[j] * gamma[j];
      m1 += dxh;
      m2 += dxh * xh;
    }
    m1 /= static_cast<T>(d);
    m2 /= static_cast<T>(d);
    T* dxr = dx_acc + r * d;
    for (i64 j = 0; j < d; ++j) {
      const T xh = (xr[j] - mu) * rs;
      const T dxh = dyr[j] * gamma[j];
      dxr[j] += (dxh - m1 - xh * m2) * rs;
    }
  }
  // parameter grads in a second pass, parallel over columns
  const bool pc = par() && d > 16;
#pragma omp parallel for schedule(static) if (pc)
  for (i64 j = 0; j < d; ++j) {
    T dg = T(0), db = T(0);
    for (i64 r = 0; r < rows; ++r) {
      const T xh = (x[r * d + j] - mean[r]) * rstd[r];
      dg += dy[r * d + j] * xh;
      db += dy[r * d + j];
    }
    dgamma_acc[j] += dg;
    dbeta_acc[j] += db;
  }
}

template <class T>
void Kern<T>::groupnorm1(const T* x, const T* gamma, const T* beta, T eps,
                         T* out, T* mean, T* rstd, i64 b, i64 c, i64 hw) {
  const i64 chw = c * hw;
  const bool p = par() && b > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 bi = 0; bi < b; ++bi) {
    const T* xb = x + bi * chw;
    T mu = T(0);
    for (i64 i = 0; i < chw; ++i) mu += xb[i];
    mu /= static_cast<T>(chw);
    T var = T(0);
    for (i64 i = 0; i < chw; ++i) {
      const T d0 = xb[i] - mu;
      var += d0 * d0;
    }
    var /= static_cast<T>(chw);
    const T rs = T(1) / std::sqrt(var + eps);
    mean[bi] = mu;
    rstd[bi] = rs;
    T* yb = out + bi * chw;
    for (i64 ci = 0; ci < c; ++ci) {
      const T g = gamma[ci], be = beta[ci];
      for (i64 i = 0; i < hw; ++i) {
        const i64 k = ci * hw + i;
        yb[k] = (xb[k] - mu) * rs * g + be;
      }
    }
  }
}

template <class T>
void Kern<T>::groupnorm1_backward(const T* x, const T* gamma, const T* mean,
                                  const T* rstd, const T* dy, T* dx_acc,
                                  T* dgamma_acc, T* dbeta_acc, i64 b, i64 c,
                                  i64 hw) {
  const i64 chw = c * hw;
  const bool p = par() && b > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 bi = 0; bi < b; ++bi) {
    const T* xb = x + bi * chw;
    const T* dyb = dy + bi * chw;
    const T mu = mean[bi], rs = rstd[bi];
    T s1 = T(0), s2 = T(0);
    for (i64 ci = 0; ci < c; ++ci) {
      const T g = gamma[ci];
      for (i64 i = 0; i < hw; ++i) {
        const i64 k = ci * hw + i;
        const T dxh = dyb[k] * g;
        s1 += dxh;
        s2 += dxh * (xb[k] - mu) * rs;
      }
    }
    s1 /= static_cast<T>(chw);
    s2 /= static_cast<T>(chw);
    T* dxb = dx_acc + bi * chw;
    for (i64 ci = 0; ci < c; ++ci) {
      const T g = gamma[ci];
      for (i64 i = 0; i < hw; ++i) {
        const i64 k = ci * hw + i;
        const T xh = (xb[k] - mu) * rs;
        dxb[k] += (dyb[k] * g - s1 - xh * s2) * rs;
      }
    }
  }
  const bool pc = par() && c > 8;
#pragma omp parallel for schedule(static) if (pc)
  for (i64 ci = 0; ci < c; ++ci) {
    T dg = T(0), db = T(0);
    for (i64 bi = 0; bi < b; ++bi) {
      const T mu = mean[bi], rs = rstd[bi];
      const T* xb = x + bi * chw;
      const T* dyb = dy + bi * chw;
      for (i64 i = 0; i < hw; ++i) {
        const i64 k = ci * hw + i;
        dg += dyb[k] * (xb[k] - mu) * rs;
        db += dyb[k];
      }
    }
    dgamma_acc[ci] += dg;
    dbeta_acc[ci] += db;
  }
}

// ---------------------------------------------------------------------------
// convolution

template <class T>
void Kern<T>::im2col(const T* x, T* col, i64 c, i64 h, i64 w, i64 kh, i64 kw,
                     i64 stride, i64 pad, i64 oh, i64 ow) {
  const i64 rows = c * kh * kw;
  const bool p = par() && rows > 8;
#pragma omp parallel for schedule(static) if (p)
  for (i64 rk = 0; rk < rows; ++rk) {
    const i64 ci = rk / (kh * kw);
    const i64 ky = (rk / kw) % kh;
    const i64 kx = rk % kw;
    T* crow = col + rk * oh * ow;
    const T* xp = x + ci * h * w;
    for (i64 oy = 0; oy < oh; ++oy) {
      const i64 iy = oy * stride + ky - pad;
      for (i64 ox = 0; ox < ow; ++ox) {
        const i64 ix = ox * stride + kx - pad;
        crow[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                 ? xp[iy * w + ix]
                                 : T(0);
      }
    }
  }
}

template <class T>
void Kern<T>::col2im_acc(const T* col, T* x_acc, i64 c, i64 h, i64 w, i64 kh,
                         i64 kw, i64 stride, i64 pad, i64 oh, i64 ow) {
  // parallel over channels: every channel owns its kh*kw col rows, so
  // scatter targets never cross threads
  const bool p = par() && c > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 ci = 0; ci < c; ++ci) {
    T* xp = x_acc + ci * h * w;
    for (i64 ky = 0; ky < kh; ++ky) {
      for (i64 kx = 0; kx < kw; ++kx) {
        const T* crow = col + ((ci * kh + ky) * kw + kx) * oh * ow;
        for (i64 oy = 0; oy < oh; ++oy) {
          const i64 iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (i64 ox = 0; ox < ow; ++ox) {
            const i64 ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= w) continue;
            xp[iy * w + ix] += crow[oy * ow + ox];
          }
        }
      }
    }
  }
}

template <class T>
void Kern<T>::conv2d(const T* x, const T* wgt, const T* bias, T* out, i64 b,
                     i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw, i64 stride,
                     i64 pad, i64 oh, i64 ow) {
  const i64 kdim = c * kh * kw;
  const i64 pdim = oh * ow;
  const bool point = (kh == 1 && kw == 1 && stride == 1 && pad == 0);
  std::vector<T> col;
  if (!point) col.resize(static_cast<std::size_t>(kdim * pdim));
  for (i64 bi = 0; bi < b; ++bi) {
    const T* xb = x + bi * c * h * w;
    const T* cols = point ? xb : col.data();
    if (!point) im2col(xb, col.data(), c, h, w, kh, kw, stride, pad, oh, ow);
    T* ob = out + bi * o * pdim;
    matmul(wgt, cols, ob, o, kdim, pdim, false, false, false);
    if (bias) {
      const bool p = par() && o > 1;
#pragma omp parallel for schedule(static) if (p)
      for (i64 oc = 0; oc < o; ++oc) {
        T* orow = ob + oc * pdim;
        const T bv = bias[oc];
        for (i64 i = 0; i < pdim; ++i) orow[i] += bv;
      }
    }
  }
}

template <class T>
void Kern<T>::conv2d_backward(const T* x, const T* wgt, const T* dy, T* dx_acc,
                              T* dw_acc, T* db_acc, i64 b, i64 c, i64 h, i64 w,
                              i64 o, i64 kh, i64 kw, i64 stride, i64 pad,
                              i64 oh, i64 ow) {
  const i64 kdim = c * kh * kw;
  const i64 pdim = oh * ow;
  const bool point = (kh == 1 && kw == 1 && stride == 1 && pad == 0);
  std::vector<T> col, dcol;
  if (!point) col.resize(static_cast<std::size_t>(kdim * pdim));
  dcol.resize(static_cast<std::size_t>(kdim * pdim));
  for (i64 bi = 0; bi < b; ++bi) {
    const T* xb = x + bi * c * h * w;
    const T* dyb = dy + bi * o * pdim;
    if (dw_acc) {
      const T* cols = point ? xb : col.data();
      if (!point) im2col(xb, col.data(), c, h, w, kh, kw, stride, pad, oh, ow);
      // dW[o,k] += dy[o,p] . col[k,p]
      matmul(dyb, cols, dw_acc, o, pdim, kdim, false, true, true);
    }
    if (dx_acc) {
      // dcol[k,p] = W^T[k,o] dy[o,p]
      matmul(wgt, dyb, dcol.data(), kdim, o, pdim, true, false, false);
      T* dxb = dx_acc + bi * c * h * w;
      if (point) {
        const bool p = par() && c * h * w > (1 << 14);
#pragma omp parallel for schedule(static) if (p)
        for (i64 i = 0; i < c * h * w; ++i) dxb[i] += dcol[static_cast<std::size_t>(i)];
      } else {
        col2im_acc(dcol.data(), dxb, c, h, w, kh, kw, stride, pad, oh, ow);
      }
    }
  }
  if (db_acc) {
    const bool p = par() && o > 1;
#pragma omp parallel for schedule(static) if (p)
    for (i64 oc = 0; oc < o; ++oc) {
      T acc = T(0);
      for (i64 bi = 0; bi < b; ++bi) {
        const T* row = dy + (bi * o + oc) * pdim;
        for (i64 i = 0; i < pdim; ++i) acc += row[i];
      }
      db_acc[oc] += acc;
    }
  }
}

template <class T>
void Kern<T>::conv_transpose2d(const T* x, const T* wgt, const T* bias, T* out,
                               i64 b, i64 c, i64 h, i64 w, i64 o, i64 kh,
                               i64 kw, i64 stride, i64 pad, i64 oh, i64 ow) {
  const bool p = par() && b * o > 1;
#pragma omp parallel for collapse(2) schedule(static) if (p)
  for (i64 bi = 0; bi < b; ++bi) {
    for (i64 oc = 0; oc < o; ++oc) {
      T* op = out + (bi * o + oc) * oh * ow;
      for (i64 oy = 0; oy < oh; ++oy) {
        for (i64 ox = 0; ox < ow; ++ox) {
          T acc = bias ? bias[oc] : T(0);
          for (i64 ci = 0; ci < c; ++ci) {
            const T* xp = x + (bi * c + ci) * h * w;
            const T* wp = wgt + (ci * o + oc) * kh * kw;
            for (i64 ky = 0; ky < kh; ++ky) {
              const i64 ty = oy + pad - ky;
              if (ty < 0 || ty % stride) continue;
              const i64 iy = ty / stride;
              if (iy >= h) continue;
              for (i64 kx = 0; kx < kw; ++kx) {
                const i64 tx = ox + pad - kx;
                if (tx < 0 || tx % stride) continue;
                const i64 ix = tx / stride;
                if (ix >= w) continue;
                acc += xp[iy * w + ix] * wp[ky * kw + kx];
              }
            }
          }
          op[oy * ow + ox] = acc;
        }
      }
    }
  }
}

template <class T>
void Kern<T>::conv_transpose2d_backward(const T* x, const T* wgt, const T* dy,
                                        T* dx_acc, T* dw_acc, T* db_acc, i64 b,
                                        i64 c, i64 h, i64 w, i64 o, i64 kh,
                                        i64 kw, i64 stride, i64 pad, i64 oh,
                                        i64 ow) {
  if (dx_acc) {
    const bool p = par() && b * c > 1;
#pragma omp parallel for collapse(2) schedule(static) if (p)
    for (i64 bi = 0; bi < b; ++bi) {
      for (i64 ci = 0; ci < c; ++ci) {
        T* dxp = dx_acc + (bi * c + ci) * h * w;
        for (i64 iy = 0; iy < h; ++iy) {
          for (i64 ix = 0; ix < w; ++ix) {
            T acc = T(0);
            for (i64 oc = 0; oc < o; ++oc) {
              const T* dyp = dy + (bi * o + oc) * oh * ow;
              const T* wp = wgt + (ci * o + oc) * kh * kw;
              for (i64 ky = 0; ky < kh; ++ky) {
                const i64 oy = iy * stride + ky - pad;
                if (oy < 0 || oy >= oh) continue;
                for (i64 kx = 0; kx < kw; ++kx) {
                  const i64 ox = ix * stride + kx - pad;
                  if (ox < 0 || ox >= ow) continue;
                  acc += dyp[oy * ow + ox] * wp[ky * kw + kx];
                }
              }
            }
            dxp[iy * w + ix] += acc;
          }
        }
      }
    }
  }
  if (dw_acc) {
    const bool p = par() && c * o > 1;
#pragma omp parallel for collapse(2) schedule(static) if (p)
    for (i64 ci = 0; ci < c; ++ci) {
      for (i64 oc = 0; oc < o; ++oc) {
        T* dwp = dw_acc + (ci * o + oc) * kh * kw;
        for (i64 ky = 0; ky < kh; ++ky) {
          for (i64 kx = 0; kx < kw; ++kx) {
            T acc = T(0);
            for (i64 bi = 0; bi < b; ++bi) {
              const T* xp = x + (bi * c + ci) * h * w;
              const T* dyp = dy + (bi * o + oc) * oh * ow;
              for (i64 iy = 0; iy < h; ++iy) {
                const i64 oy = iy * stride + ky - pad;
                if (oy < 0 || oy >= oh) continue;
                for (i64 ix = 0; ix < w; ++ix) {
                  const i64 ox = ix * stride + kx - pad;
                  if (ox < 0 || ox >= ow) continue;
                  acc += xp[iy * w + ix] * dyp[oy * ow + ox];
                }
              }
            }
            dwp[ky * kw + kx] += acc;
          }
        }
      }
    }
  }
  if (db_acc) {
    const bool p = par() && o > 1;
#pragma omp parallel for schedule(static) if (p)
    for (i64 oc = 0; oc < o; ++oc) {
      T acc = T(0);
      for (i64 bi = 0; bi < b; ++bi) {
        const T* row = dy + (bi * o + oc) * oh * ow;
        for (i64 i = 0; i < oh * ow; ++i) acc += row[i];
      }
      db_acc[oc] += acc;
    }
  }
}

template <class T>
void Kern<T>::maxpool2d(const T* x, T* out, i64* argmax, i64 bc, i64 h, i64 w,
                        i64 k, i64 stride, i64 pad, i64 oh, i64 ow) {
  const bool p = par() && bc > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 plane = 0; plane < bc; ++plane) {
    const T* xp = x + plane * h * w;
    T* op = out + plane * oh * ow;
    i64* ap = argmax + plane * oh * ow;
    for (i64 oy = 0; oy < oh; ++oy) {
      for (i64 ox = 0; ox < ow; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        i64 bestIdx = -1;
        for (i64 ky = 0; ky < k; ++ky) {
          const i64 iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (i64 kx = 0; kx < k; ++kx) {
            const i64 ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= w) continue;
            const T v = xp[iy * w + ix];
            if (v > best) {
              best = v;
              bestIdx = iy * w + ix;
            }
          }
        }
        op[oy * ow + ox] = best;
        ap[oy * ow + ox] = bestIdx;
      }
    }
  }
}

template <class T>
void Kern<T>::maxpool2d_backward(const i64* argmax, const T* dy, T* dx_acc,
                                 i64 bc, i64 hw_in, i64 ohw) {
  const bool p = par() && bc > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 plane = 0; plane < bc; ++plane) {
    const i64* ap = argmax + plane * ohw;
    const T* dyp = dy + plane * ohw;
    T* dxp = dx_acc + plane * hw_in;
    for (i64 i = 0; i < ohw; ++i)
      if (ap[i] >= 0) dxp[ap[i]] += dyp[i];
  }
}

// ---------------------------------------------------------------------------
// sampling / resize

template <class T>
void Kern<T>::bilinear_sample(const T* value, const T* points, T* out, i64 b,
                              i64 c, i64 h, i64 w, i64 p) {
  g_sample_points.fetch_add(static_cast<std::uint64_t>(b * p),
                            std::memory_order_relaxed);
  const bool pp = par() && b * p > 1;
#pragma omp parallel for collapse(2) schedule(static) if (pp)
  for (i64 bi = 0; bi < b; ++bi) {
    for (i64 pi = 0; pi < p; ++pi) {
      const T px = points[(bi * p + pi) * 2 + 0];
      const T py = points[(bi * p + pi) * 2 + 1];
      const double u = static_cast<double>(px) * w - 0.5;
      const double v = static_cast<double>(py) * h - 0.5;
      const i64 x0 = static_cast<i64>(std::floor(u));
      const i64 y0 = static_cast<i64>(std::floor(v));
      const T fx = static_cast<T>(u - static_cast<double>(x0));
      const T fy = static_cast<T>(v - static_cast<double>(y0));
      const bool in_x0 = x0 >= 0 && x0 < w, in_x1 = x0 + 1 >= 0 && x0 + 1 < w;
      const bool in_y0 = y0 >= 0 && y0 < h, in_y1 = y0 + 1 >= 0 && y0 + 1 < h;
      const T w00 = (T(1) - fx) * (T(1) - fy);
      const T w10 = fx * (T(1) - fy);
      const T w01 = (T(1) - fx) * fy;
      const T w11 = fx * fy;
      T* op = out + (bi * p + pi) * c;
      const T* vb = value + bi * c * h * w;
      for (i64 ci = 0; ci < c; ++ci) {
        const T* plane = vb + ci * h * w;
        T acc = T(0);
        if (in_y0 && in_x0) acc += w00 * plane[y0 * w + x0];
        if (in_y0 && in_x1) acc += w10 * plane[y0 * w + x0 + 1];
        if (in_y1 && in_x0) acc += w01 * plane[(y0 + 1) * w + x0];
        if (in_y1 && in_x1) acc += w11 * plane[(y0 + 1) * w + x0 + 1];
        op[ci] = acc;
      }
    }
  }
}

template <class T>
void Kern<T>::bilinear_sample_backward(const T* value, const T* points,
                                       const T* dy, T* dvalue_acc,
                                       T* dpoints_acc, i64 b, i64 c, i64 h,
                                       i64 w, i64 p) {
  if (dvalue_acc) {
    // parallel over channels; one thread owns a channel across all batches,
    // so scatter targets are disjoint
    const bool pp = par() && c > 1;
#pragma omp parallel for schedule(static) if (pp)
    for (i64 ci = 0; ci < c; ++ci) {
      for (i64 bi = 0; bi < b; ++bi) {
        T* plane = dvalue_acc + (bi * c + ci) * h * w;
        for (i64 pi = 0; pi < p; ++pi) {
          const T px = points[(bi * p + pi) * 2 + 0];
          const T py = points[(bi * p + pi) * 2 + 1];
          const double u = static_cast<double>(px) * w - 0.5;
          const double v = static_cast<double>(py) * h - 0.5;
          const i64 x0 = static_cast<i64>(std::floor(u));
          const i64 y0 = static_cast<i64>(std::floor(v));
          const T fx = static_cast<T>(u - static_cast<double>(x0));
          const T fy = static_cast<T>(v - static_cast<double>(y0));
          const T g = dy[(bi * p + pi) * c + ci];
          if (g == T(0)) continue;
          const bool in_x0 = x0 >= 0 && x0 < w,
                     in_x1 = x0 + 1 >= 0 && x0 + 1 < w;
          const bool in_y0 = y0 >= 0 && y0 < h,
                     in_y1 = y0 + 1 >= 0 && y0 + 1 < h;
          if (in_y0 && in_x0) plane[y0 * w + x0] += g * (T(1) - fx) * (T(1) - fy);
          if (in_y0 && in_x1) plane[y0 * w + x0 + 1] += g * fx * (T(1) - fy);
          if (in_y1 && in_x0) plane[(y0 + 1) * w + x0] += g * (T(1) - fx) * fy;
          if (in_y1 && in_x1) plane[(y0 + 1) * w + x0 + 1] += g * fx * fy;
        }
      }
    }
  }
  if (dpoints_acc) {
    const bool pp = par() && b * p > 1;
#pragma omp parallel for collapse(2) schedule(static) if (pp)
    for (i64 bi = 0; bi < b; ++bi) {
      for (i64 pi = 0; pi < p; ++pi) {
        const T px = points[(bi * p + pi) * 2 + 0];
        const T py = points[(bi * p + pi) * 2 + 1];
        const double u = static_cast<double>(px) * w - 0.5;
        const double v = static_cast<double>(py) * h - 0.5;
        const i64 x0 = static_cast<i64>(std::floor(u));
        const i64 y0 = static_cast<i64>(std::floor(v));
        const T fx = static_cast<T>(u - static_cast<double>(x0));
        const T fy = static_cast<T>(v - static_cast<double>(y0));
        const bool in_x0 = x0 >= 0 && x0 < w, in_x1 = x0 + 1 >= 0 && x0 + 1 < w;
        const bool in_y0 = y0 >= 0 && y0 < h, in_y1 = y0 + 1 >= 0 && y0 + 1 < h;
        const T* vb = value + bi * c * h * w;
        T du = T(0), dv = T(0);
        for (i64 ci = 0; ci < c; ++ci) {
          const T* plane = vb + ci * h * w;
          const T a = (in_y0 && in_x0) ? plane[y0 * w + x0] : T(0);
          const T bq = (in_y0 && in_x1) ? plane[y0 * w + x0 + 1] : T(0);
          const T cq = (in_y1 && in_x0) ? plane[(y0 + 1) * w + x0] : T(0);
          const T dq = (in_y1 && in_x1) ? plane[(y0 + 1) * w + x0 + 1] : T(0);
          const T g = dy[(bi * p + pi) * c + ci];
          du += g * ((T(1) - fy) * (bq - a) + fy * (dq - cq));
          dv += g * ((T(1) - fx) * (cq - a) + fx * (dq - bq));
        }
        dpoints_acc[(bi * p + pi) * 2 + 0] += du * static_cast<T>(w);
        dpoints_acc[(bi * p + pi) * 2 + 1] += dv * static_cast<T>(h);
      }
    }
  }
}

template <class T>
void Kern<T>::bilinear_resize(const T* x, T* out, i64 bc, i64 h, i64 w, i64 oh,
                              i64 ow) {
  const double sy = static_cast<double>(h) / static_cast<double>(oh);
  const double sx = static_cast<double>(w) / static_cast<double>(ow);
  const bool p = par() && bc > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 plane = 0; plane < bc; ++plane) {
    const T* xp = x + plane * h * w;
    T* op = out + plane * oh * ow;
    for (i64 oy = 0; oy < oh; ++oy) {
      const double v = (oy + 0.5) * sy - 0.5;
      i64 y0 = static_cast<i64>(std::floor(v));
      const T fy = static_cast<T>(v - static_cast<double>(y0));
      const i64 y0c = std::clamp<i64>(y0, 0, h - 1);
      const i64 y1c = std::clamp<i64>(y0 + 1, 0, h - 1);
      for (i64 ox = 0; ox < ow; ++ox) {
        const double u = (ox + 0.5) * sx - 0.5;
        i64 x0 = static_cast<i64>(std::floor(u));
        const T fx = static_cast<T>(u - static_cast<double>(x0));
        const i64 x0c = std::clamp<i64>(x0, 0, w - 1);
        const i64 x1c = std::clamp<i64>(x0 + 1, 0, w - 1);
        op[oy * ow + ox] = (T(1) - fy) * ((T(1) - fx) * xp[y0c * w + x0c] +
                                          fx * xp[y0c * w + x1c]) +
                           fy * ((T(1) - fx) * xp[y1c * w + x0c] +
                                 fx * xp[y1c * w + x1c]);
      }
    }
  }
}

template <class T>
void Kern<T>::bilinear_resize_backward(const T* dy, T* dx_acc, i64 bc, i64 h,
                                       i64 w, i64 oh, i64 ow) {
  const double sy = static_cast<double>(h) / static_cast<double>(oh);
  const double sx = static_cast<double>(w) / static_cast<double>(ow);
  const bool p = par() && bc > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 plane = 0; plane < bc; ++plane) {
    const T* dyp = dy + plane * oh * ow;
    T* dxp = dx_acc + plane * h * w;
    for (i64 oy = 0; oy < oh; ++oy) {
      const double v = (oy + 0.5) * sy - 0.5;
      i64 y0 = static_cast<i64>(std::floor(v));
      const T fy = static_cast<T>(v - static_cast<double>(y0));
      const i64 y0c = std::clamp<i64>(y0, 0, h - 1);
      const i64 y1c = std::clamp<i64>(y0 + 1, 0, h - 1);
      for (i64 ox = 0; ox < ow; ++ox) {
        const double u = (ox + 0.5) * sx - 0.5;
        i64 x0 = static_cast<i64>(std::floor(u));
        const T fx = static_cast<T>(u - static_cast<double>(x0));
        const i64 x0c = std::clamp<i64>(x0, 0, w - 1);
        const i64 x1c = std::clamp<i64>(x0 + 1, 0, w - 1);
        const T g = dyp[oy * ow + ox];
        dxp[y0c * w + x0c] += g * (T(1) - fy) * (T(1) - fx);
        dxp[y0c * w + x1c] += g * (T(1) - fy) * fx;
        dxp[y1c * w + x0c] += g * fy * (T(1) - fx);
        dxp[y1c * w + x1c] += g * fy * fx;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// permutation / reduction

template <class T>
void Kern<T>::permute(const T* x, T* out, const i64* dims, const int* perm,
                      int rank) {
  i64 in_strides[8], out_dims[8], gather_strides[8];
  i64 s = 1;
  for (int r = rank - 1; r >= 0; --r) {
    in_strides[r] = s;
    s *= dims[r];
  }
  const i64 total = s;
  for (int r = 0; r < rank; ++r) {
    out_dims[r] = dims[perm[r]];
    gather_strides[r] = in_strides[perm[r]];
  }
  i64 out_strides[8];
  s = 1;
  for (int r = rank - 1; r >= 0; --r) {
    out_strides[r] = s;
    s *= out_dims[r];
  }
  const bool p = par() && total > (1 << 14);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < total; ++i) {
    i64 rem = i, src = 0;
    for (int r = 0; r < rank; ++r) {
      const i64 q = rem / out_strides[r];
      rem -= q * out_strides[r];
      src += q * gather_strides[r];
    }
    out[i] = x[src];
  }
}

template <class T>
void Kern<T>::sum_mid_axis(const T* x, T* out, i64 outer, i64 axis, i64 inner) {
  const bool p = par() && outer > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 o = 0; o < outer; ++o) {
    T* orow = out + o * inner;
    std::fill(orow, orow + inner, T(0));
    for (i64 a = 0; a < axis; ++a) {
      const T* xrow = x + (o * axis + a) * inner;
      for (i64 i = 0; i < inner; ++i) orow[i] += xrow[i];
    }
  }
}

template <class T>
T Kern<T>::sum_all(const T* x, i64 n) {
  T acc = T(0);
  for (i64 i = 0; i < n; ++i) acc += x[i];
  return acc;
}

// ---------------------------------------------------------------------------
// loss / prediction / optimizer

template <class T>
void Kern<T>::softmax_xent(const T* logits, const std::int32_t* labels,
                           T* probs, i64 rows, i64 d, T* loss_out) {
  softmax_rows(logits, probs, rows, d);
  T total = T(0);
  i64 valid = 0;
  for (i64 r = 0; r < rows; ++r) {
    const std::int32_t lb = labels[r];
    if (lb < 0) continue;
    ++valid;
    const T* xr = logits + r * d;
    T mx = xr[0];
    for (i64 j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    T sum = T(0);
    for (i64 j = 0; j < d; ++j) sum += std::exp(xr[j] - mx);
    total += -(xr[lb] - mx - std::log(sum));
  }
  *loss_out = valid > 0 ? total / static_cast<T>(valid) : T(0);
}

template <class T>
void Kern<T>::softmax_xent_backward(const T* probs, const std::int32_t* labels,
                                    T dloss, T* dlogits_acc, i64 rows, i64 d) {
  i64 valid = 0;
  for (i64 r = 0; r < rows; ++r)
    if (labels[r] >= 0) ++valid;
  if (valid == 0) return;
  const T s = dloss / static_cast<T>(valid);
  const bool p = par() && rows > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 r = 0; r < rows; ++r) {
    const std::int32_t lb = labels[r];
    if (lb < 0) continue;
    const T* pr = probs + r * d;
    T* dr = dlogits_acc + r * d;
    for (i64 j = 0; j < d; ++j) dr[j] += s * (pr[j] - (j == lb ? T(1) : T(0)));
  }
}

template <class T>
void Kern<T>::argmax_rows(const T* x, std::int32_t* out, i64 rows, i64 d) {
  const bool p = par() && rows > 1;
#pragma omp parallel for schedule(static) if (p)
  for (i64 r = 0; r < rows; ++r) {
    const T* xr = x + r * d;
    i64 best = 0;
    for (i64 j = 1; j < d; ++j)
      if (xr[j] > xr[best]) best = j;
    out[r] = static_cast<std::int32_t>(best);
  }
}

template <class T>
void Kern<T>::adamw(T* param, T* m, T* v, const T* grad, i64 n, T lr, T beta1,
                    T beta2, T eps, T weight_decay, i64 step) {
  const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1),
                                               static_cast<double>(step)));
  const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2),
                                               static_cast<double>(step)));
  const bool p = par() && n > (1 << 14);
#pragma omp parallel for schedule(static) if (p)
  for (i64 i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * grad[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * grad[i] * grad[i];
    const T mh = m[i] / bc1;
    const T vh = v[i] / bc2;
    param[i] -= lr * (mh / (std::sqrt(vh) + eps) + weight_decay * param[i]);
  }
}

// ---------------------------------------------------------------------------
// serial reference implementations

template <class T>
void RefKern<T>::matmul(const T* a, const T* b, T* c, i64 m, i64 k, i64 n,
                        bool ta, bool tb, bool accumulate) {
  for (i64 i = 0; i < m; ++i) {
    for (i64 j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * n + j] : T(0);
      for (i64 kk = 0; kk < k; ++kk) {
        const T av = ta ? a[kk * m + i] : a[i * k + kk];
        const T bv = tb ? b[j * k + kk] : b[kk * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
  }
}

template <class T>
void RefKern<T>::conv2d(const T* x, const T* wgt, const T* bias, T* out, i64 b,
                        i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw, i64 stride,
                        i64 pad, i64 oh, i64 ow) {
  for (i64 bi = 0; bi < b; ++bi)
    for (i64 oc = 0; oc < o; ++oc)
      for (i64 oy = 0; oy < oh; ++oy)
        for (i64 ox = 0; ox < ow; ++ox) {
          T acc = T(0);
          for (i64 ci = 0; ci < c; ++ci)
            for (i64 ky = 0; ky < kh; ++ky)
              for (i64 kx = 0; kx < kw; ++kx) {
                const i64 iy = oy * stride + ky - pad;
                const i64 ix = ox * stride + kx - pad;
                const T xv = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                 ? x[((bi * c + ci) * h + iy) * w + ix]
                                 : T(0);
                acc += wgt[((oc * c + ci) * kh + ky) * kw + kx] * xv;
              }
          if (bias) acc += bias[oc];
          out[((bi * o + oc) * oh + oy) * ow + ox] = acc;
        }
}

template <class T>
void RefKern<T>::conv_transpose2d(const T* x, const T* wgt, const T* bias,
                                  T* out, i64 b, i64 c, i64 h, i64 w, i64 o,
                                  i64 kh, i64 kw, i64 stride, i64 pad, i64 oh,
                                  i64 ow) {
  for (i64 bi = 0; bi < b; ++bi)
    for (i64 oc = 0; oc < o; ++oc)
      for (i64 oy = 0; oy < oh; ++oy)
        for (i64 ox = 0; ox < ow; ++ox) {
          T acc = bias ? bias[oc] : T(0);
          for (i64 ci = 0; ci < c; ++ci)
            for (i64 ky = 0; ky < kh; ++ky)
              for (i64 kx = 0; kx < kw; ++kx) {
                const i64 ty = oy + pad - ky;
                const i64 tx = ox + pad - kx;
                if (ty < 0 || tx < 0 || ty % stride || tx % stride) continue;
                const i64 iy = ty / stride, ix = tx / stride;
                if (iy >= h || ix >= w) continue;
                acc += x[((bi * c + ci) * h + iy) * w + ix] *
                       wgt[((ci * o + oc) * kh + ky) * kw + kx];
              }
          out[((bi * o + oc) * oh + oy) * ow + ox] = acc;
        }
}

template <class T>
void RefKern<T>::maxpool2d(const T* x, T* out, i64* argmax, i64 bc, i64 h,
                           i64 w, i64 k, i64 stride, i64 pad, i64 oh, i64 ow) {
  for (i64 plane = 0; plane < bc; ++plane)
    for (i64 oy = 0; oy < oh; ++oy)
      for (i64 ox = 0; ox < ow; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        i64 bestIdx = -1;
        for (i64 ky = 0; ky < k; ++ky)
          for (i64 kx = 0; kx < k; ++kx) {
            const i64 iy = oy * stride + ky - pad;
            const i64 ix = ox * stride + kx - pad;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
            const T v = x[plane * h * w + iy * w + ix];
            if (v > best) {
              best = v;
              bestIdx = iy * w + ix;
            }
          }
        out[plane * oh * ow + oy * ow + ox] = best;
        argmax[plane * oh * ow + oy * ow + ox] = bestIdx;
      }
}

template <class T>
void RefKern<T>::bilinear_sample(const T* value, const T* points, T* out,
                                 i64 b, i64 c, i64 h, i64 w, i64 p) {
  for (i64 bi = 0; bi < b; ++bi)
    for (i64 pi = 0; pi < p; ++pi) {
      const double u =
          static_cast<double>(points[(bi * p + pi) * 2 + 0]) * w - 0.5;
      const double v =
          static_cast<double>(points[(bi * p + pi) * 2 + 1]) * h - 0.5;
      const i64 x0 = static_cast<i64>(std::floor(u));
      const i64 y0 = static_cast<i64>(std::floor(v));
      const T fx = static_cast<T>(u - x0), fy = static_cast<T>(v - y0);
      for (i64 ci = 0; ci < c; ++ci) {
        auto pix = [&](i64 yy, i64 xx) -> T {
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) return T(0);
          return value[((bi * c + ci) * h + yy) * w + xx];
        };
        out[(bi * p + pi) * c + ci] =
            (T(1) - fx) * (T(1) - fy) * pix(y0, x0) +
            fx * (T(1) - fy) * pix(y0, x0 + 1) +
            (T(1) - fx) * fy * pix(y0 + 1, x0) + fx * fy * pix(y0 + 1, x0 + 1);
      }
    }
}

template <class T>
void RefKern<T>::softmax_rows(const T* x, T* out, i64 rows, i64 d) {
  for (i64 r = 0; r < rows; ++r) {
    const T* xr = x + r * d;
    T* yr = out + r * d;
    T mx = xr[0];
    for (i64 j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    T sum = T(0);
    for (i64 j = 0; j < d; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    for (i64 j = 0; j < d; ++j) yr[j] /= sum;
  }
}

template <class T>
void RefKern<T>::layernorm(const T* x, const T* gamma, const T* beta, T eps,
                           T* out, T* mean, T* rstd, i64 rows, i64 d) {
  for (i64 r = 0; r < rows; ++r) {
    const T* xr = x + r * d;
    T mu = T(0);
    for (i64 j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (i64 j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    for (i64 j = 0; j < d; ++j)
      out[r * d + j] = (xr[j] - mu) * rs * gamma[j] + beta[j];
  }
}

template struct Kern<float>;
template struct Kern<double>;
template struct RefKern<float>;
template struct RefKern<double>;

}  // namespace vadapt::kernels
