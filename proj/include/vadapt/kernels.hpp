#pragma once

#include <cstdint>

namespace vadapt::kernels {

using i64 = std::int64_t;

// Runtime switch for the OpenMP paths. Off = every kernel runs its loop
// serially (the loop bodies are identical, so results are bitwise equal
// either way; parallel loops only ever split independent outputs).
void set_parallel(bool enabled);
bool parallel_enabled();
int thread_count();

// Interpolation-op counter for complexity assertions: incremented by the
// number of sampled points on every bilinear_sample call.
std::uint64_t sample_point_count();
void reset_sample_point_count();

// Optimized kernels (OpenMP over independent outputs, im2col convolution,
// register-friendly matmul loop order). Every reduction runs in a fixed
// ascending order per output element, so results are deterministic and
// bitwise identical to RefKern regardless of thread count.
template <class T>
struct Kern {
  // c[m,n] = a x b (+ c if accumulate); ta/tb transpose the operand reads.
  static void matmul(const T* a, const T* b, T* c, i64 m, i64 k, i64 n,
                     bool ta, bool tb, bool accumulate);
  // batched: a[nb,m,k] x b[nb,k,n] -> c[nb,m,n]
  static void bmm(const T* a, const T* b, T* c, i64 nb, i64 m, i64 k, i64 n,
                  bool ta, bool tb);

  static void add(const T* a, const T* b, T* out, i64 n);
  static void sub(const T* a, const T* b, T* out, i64 n);
  static void mul(const T* a, const T* b, T* out, i64 n);
  static void scale(const T* a, T s, T* out, i64 n);
  static void axpy(const T* a, T s, T* out, i64 n);  // out += s * a
  // x[rows,d] plus / times a length-d vector, broadcast over rows
  static void add_rowvec(const T* x, const T* v, T* out, i64 rows, i64 d);
  static void mul_rowvec(const T* x, const T* v, T* out, i64 rows, i64 d);
  // column sum: out[d] += sum_r x[r,d]
  static void colsum_acc(const T* x, T* out, i64 rows, i64 d);

  static void gelu(const T* x, T* out, i64 n);
  static void gelu_backward(const T* x, const T* dy, T* dx_acc, i64 n);
  static void relu(const T* x, T* out, i64 n);
  static void relu_backward(const T* x, const T* dy, T* dx_acc, i64 n);

  // rows x d, softmax along d
  static void softmax_rows(const T* x, T* out, i64 rows, i64 d);
  static void softmax_rows_backward(const T* y, const T* dy, T* dx_acc,
                                    i64 rows, i64 d);

  // layer norm over the last axis; saves mean and 1/std per row
  static void layernorm(const T* x, const T* gamma, const T* beta, T eps,
                        T* out, T* mean, T* rstd, i64 rows, i64 d);
  static void layernorm_backward(const T* x, const T* gamma, const T* mean,
                                 const T* rstd, const T* dy, T* dx_acc,
                                 T* dgamma_acc, T* dbeta_acc, i64 rows, i64 d);

  // group norm with a single group: stats over C*H*W per sample
  static void groupnorm1(const T* x, const T* gamma, const T* beta, T eps,
                         T* out, T* mean, T* rstd, i64 b, i64 c, i64 hw);
  static void groupnorm1_backward(const T* x, const T* gamma, const T* mean,
                                  const T* rstd, const T* dy, T* dx_acc,
                                  T* dgamma_acc, T* dbeta_acc, i64 b, i64 c,
                                  i64 hw);

  static void im2col(const T* x, T* col, i64 c, i64 h, i64 w, i64 kh, i64 kw,
                     i64 stride, i64 pad, i64 oh, i64 ow);
  static void col2im_acc(const T* col, T* x_acc, i64 c, i64 h, i64 w, i64 kh,
                         i64 kw, i64 stride, i64 pad, i64 oh, i64 ow);

  static void conv2d(const T* x, const T* wgt, const T* bias, T* out, i64 b,
                     i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw, i64 stride,
                     i64 pad, i64 oh, i64 ow);
  static void conv2d_backward(const T* x, const T* wgt, const T* dy, T* dx_acc,
                              T* dw_acc, T* db_acc, i64 b, i64 c, i64 h, i64 w,
                              i64 o, i64 kh, i64 kw, i64 stride, i64 pad,
                              i64 oh, i64 ow);

  // weights laid out [c_in, c_out, kh, kw]; oh = (h-1)*stride + kh - 2*pad
  static void conv_transpose2d(const T* x, const T* wgt, const T* bias, T* out,
                               i64 b, i64 c, i64 h, i64 w, i64 o, i64 kh,
                               i64 kw, i64 stride, i64 pad, i64 oh, i64 ow);
  static void conv_transpose2d_backward(const T* x, const T* wgt, const T* dy,
                                        T* dx_acc, T* dw_acc, T* db_acc, i64 b,
                                        i64 c, i64 h, i64 w, i64 o, i64 kh,
                                        i64 kw, i64 stride, i64 pad, i64 oh,
                                        i64 ow);

  static void maxpool2d(const T* x, T* out, i64* argmax, i64 bc, i64 h, i64 w,
                        i64 k, i64 stride, i64 pad, i64 oh, i64 ow);
  static void maxpool2d_backward(const i64* argmax, const T* dy, T* dx_acc,
                                 i64 bc, i64 hw_in, i64 ohw);

  // points in normalized [0,1]^2 (x,y), pixel centers at (i+0.5)/extent,
  // zero padding outside the image
  static void bilinear_sample(const T* value, const T* points, T* out, i64 b,
                              i64 c, i64 h, i64 w, i64 p);
  static void bilinear_sample_backward(const T* value, const T* points,
                                       const T* dy, T* dvalue_acc,
                                       T* dpoints_acc, i64 b, i64 c, i64 h,
                                       i64 w, i64 p);

  // clamp-to-edge bilinear resize of [b*c, h, w] planes
  static void bilinear_resize(const T* x, T* out, i64 bc, i64 h, i64 w, i64 oh,
                              i64 ow);
  static void bilinear_resize_backward(const T* dy, T* dx_acc, i64 bc, i64 h,
                                       i64 w, i64 oh, i64 ow);

  // generic axis permutation, rank <= 8
  static void permute(const T* x, T* out, const i64* dims, const int* perm,
                      int rank);

  // reduce the middle axis of [outer, axis, inner]
  static void sum_mid_axis(const T* x, T* out, i64 outer, i64 axis, i64 inner);
  static T sum_all(const T* x, i64 n);

  // fused softmax + cross entropy over rows; labels < 0 are ignored
  static void softmax_xent(const T* logits, const std::int32_t* labels,
                           T* probs, i64 rows, i64 d, T* loss_out);
  static void softmax_xent_backward(const T* probs,
                                    const std::int32_t* labels, T dloss,
                                    T* dlogits_acc, i64 rows, i64 d);

  static void argmax_rows(const T* x, std::int32_t* out, i64 rows, i64 d);

  static void adamw(T* param, T* m, T* v, const T* grad, i64 n, T lr, T beta1,
                    T beta2, T eps, T weight_decay, i64 step);
};

// Serial reference implementations: direct textbook loops, no im2col, no
// threading. Kept as the comparison baseline for tests and benchmarks.
template <class T>
struct RefKern {
  static void matmul(const T* a, const T* b, T* c, i64 m, i64 k, i64 n,
                     bool ta, bool tb, bool accumulate);
  static void conv2d(const T* x, const T* wgt, const T* bias, T* out, i64 b,
                     i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw, i64 stride,
                     i64 pad, i64 oh, i64 ow);
  static void conv_transpose2d(const T* x, const T* wgt, const T* bias, T* out,
                               i64 b, i64 c, i64 h, i64 w, i64 o, i64 kh,
                               i64 kw, i64 stride, i64 pad, i64 oh, i64 ow);
  static void maxpool2d(const T* x, T* out, i64* argmax, i64 bc, i64 h, i64 w,
                        i64 k, i64 stride, i64 pad, i64 oh, i64 ow);
  static void bilinear_sample(const T* value, const T* points, T* out, i64 b,
                              i64 c, i64 h, i64 w, i64 p);
  static void softmax_rows(const T* x, T* out, i64 rows, i64 d);
  static void layernorm(const T* x, const T* gamma, const T* beta, T eps,
                        T* out, T* mean, T* rstd, i64 rows, i64 d);
};

}  // namespace vadapt::kernels
