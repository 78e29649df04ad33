#pragma once

// Differentiable tensor operations. Every function validates shapes, rejects
// non-finite inputs and records a backward closure when any input requires
// grad. Layouts are row-major; images are NCHW.

#include <vector>

#include "vtmorph/tensor.hpp"

namespace vtmorph {

// Element-wise with numpy-style broadcasting.
template <typename T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T> BasicTensor<T> add_scalar(const BasicTensor<T>& a, T s);
template <typename T> BasicTensor<T> mul_scalar(const BasicTensor<T>& a, T s);

// [.., m, k] x [k, n] or batched [b, m, k] x [b, k, n].
template <typename T> BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

// x: N x C x H x W, weight: O x C x kh x kw, bias: O (may be undefined).
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      int64_t stride, int64_t padding);
// x: N x C x H x W, weight: C x O x kh x kw, bias: O (may be undefined).
// Output extent (H - 1) * stride - 2 * padding + kh.
template <typename T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                                int64_t stride, int64_t padding);

template <typename T> BasicTensor<T> avg_pool2d(const BasicTensor<T>& x, int64_t kernel, int64_t stride);
template <typename T> BasicTensor<T> max_pool2d(const BasicTensor<T>& x, int64_t kernel, int64_t stride);

template <typename T> BasicTensor<T> relu(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope);
template <typename T> BasicTensor<T> sigmoid(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> tanh(const BasicTensor<T>& x);
// tanh approximation.
template <typename T> BasicTensor<T> gelu(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> abs(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> square(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> exp(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> log(const BasicTensor<T>& x);

// Along the last axis.
template <typename T> BasicTensor<T> softmax(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> log_softmax(const BasicTensor<T>& x);

// Per (n, c) plane of an N x C x H x W tensor; no affine part.
template <typename T> BasicTensor<T> instance_norm(const BasicTensor<T>& x, T eps = T(1e-5));
// Over the last axis; no affine part.
template <typename T> BasicTensor<T> layer_norm(const BasicTensor<T>& x, T eps = T(1e-5));

// One extent may be -1.
template <typename T> BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);
template <typename T> BasicTensor<T> transpose(const BasicTensor<T>& x, int64_t axis0, int64_t axis1);
template <typename T> BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, int64_t axis);
// Half-open range [start, end) along `axis`.
template <typename T> BasicTensor<T> slice(const BasicTensor<T>& x, int64_t axis, int64_t start, int64_t end);

template <typename T> BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> sum(const BasicTensor<T>& x, int64_t axis, bool keepdim = false);
template <typename T> BasicTensor<T> mean(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> mean(const BasicTensor<T>& x, int64_t axis, bool keepdim = false);

template <typename T>
BasicTensor<T> operator+(const BasicTensor<T>& a, const BasicTensor<T>& b) { return add(a, b); }
template <typename T>
BasicTensor<T> operator-(const BasicTensor<T>& a, const BasicTensor<T>& b) { return sub(a, b); }
template <typename T>
BasicTensor<T> operator*(const BasicTensor<T>& a, const BasicTensor<T>& b) { return mul(a, b); }
template <typename T>
BasicTensor<T> operator*(const BasicTensor<T>& a, T s) { return mul_scalar(a, s); }
template <typename T>
BasicTensor<T> operator*(T s, const BasicTensor<T>& a) { return mul_scalar(a, s); }
template <typename T>
BasicTensor<T> operator+(const BasicTensor<T>& a, T s) { return add_scalar(a, s); }
template <typename T>
BasicTensor<T> operator-(const BasicTensor<T>& a) { return mul_scalar(a, T(-1)); }

// Mean absolute difference; the L1 reconstruction loss used throughout.
template <typename T>
BasicTensor<T> l1_loss(const BasicTensor<T>& a, const BasicTensor<T>& b) { return mean(abs(sub(a, b))); }

}  // namespace vtmorph
