#include "vtmorph/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vtmorph {

namespace {

using detail::check_finite;
using detail::grad_buffer;
using detail::make_result;

template <typename T>
using NodeT = detail::Node<T>;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

int64_t normalize_axis(int64_t axis, int64_t rank, const char* op) {
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
    }
    return axis;
}

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
    const size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (size_t i = 0; i < rank; ++i) {
        const int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        out[i] = std::max(da, db);
    }
    return out;
}

// Broadcast iteration plan. Adjacent axes with the same broadcast pattern are
// merged, so the innermost loop runs over the longest contiguous stretch.
struct BroadcastPlan {
    Shape extent;
    std::vector<int64_t> stride_a, stride_b;
};

BroadcastPlan broadcast_plan(const Shape& out, const Shape& a, const Shape& b) {
    const size_t rank = out.size();
    auto strides = [&](const Shape& in) {
        std::vector<int64_t> st(rank, 0);
        const size_t offset = rank - in.size();
        int64_t stride = 1;
        for (size_t i = rank; i-- > offset;) {
            st[i] = in[i - offset] == 1 ? 0 : stride;
            stride *= in[i - offset];
        }
        return st;
    };
    const auto sa = strides(a), sb = strides(b);
    BroadcastPlan plan;
    for (size_t i = 0; i < rank; ++i) {
        if (out[i] == 1) continue;
        if (!plan.extent.empty()) {
            const size_t k = plan.extent.size() - 1;
            const bool merge_a = (sa[i] == 0) == (plan.stride_a[k] == 0);
            const bool merge_b = (sb[i] == 0) == (plan.stride_b[k] == 0);
            if (merge_a && merge_b) {
                plan.extent[k] *= out[i];
                plan.stride_a[k] = sa[i];
                plan.stride_b[k] = sb[i];
                continue;
            }
        }
        plan.extent.push_back(out[i]);
        plan.stride_a.push_back(sa[i]);
        plan.stride_b.push_back(sb[i]);
    }
    if (plan.extent.empty()) {
        plan.extent = {1};
        plan.stride_a = {0};
        plan.stride_b = {0};
    }
    return plan;
}

// Calls body(out_offset, a_offset, b_offset, length, a_step, b_step) for
// every innermost run in row-major output order.
template <typename Body>
void for_each_run(const BroadcastPlan& plan, Body body) {
    const size_t rank = plan.extent.size();
    const int64_t len = plan.extent.back();
    const int64_t sa = plan.stride_a.back(), sb = plan.stride_b.back();
    int64_t runs = 1;
    for (size_t i = 0; i + 1 < rank; ++i) runs *= plan.extent[i];
    std::vector<int64_t> counter(rank, 0);
    int64_t ia = 0, ib = 0;
    for (int64_t r = 0; r < runs; ++r) {
        body(r * len, ia, ib, len, sa, sb);
        for (size_t ax = rank - 1; ax-- > 0;) {
            ++counter[ax];
            ia += plan.stride_a[ax];
            ib += plan.stride_b[ax];
            if (counter[ax] < plan.extent[ax]) break;
            ia -= plan.stride_a[ax] * counter[ax];
            ib -= plan.stride_b[ax] * counter[ax];
            counter[ax] = 0;
        }
    }
}

template <typename T, typename F, typename GA, typename GB>
BasicTensor<T> binary(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b, F f, GA da, GB db) {
    check_finite(a, op);
    check_finite(b, op);
    Shape out_shape = broadcast_shapes(a.shape(), b.shape(), op);
    auto plan = broadcast_plan(out_shape, a.shape(), b.shape());
    const T* av = a.data().data();
    const T* bv = b.data().data();
    std::vector<T> out(static_cast<size_t>(shape_numel(out_shape)));
    for_each_run(plan, [&](int64_t o, int64_t ia, int64_t ib, int64_t len, int64_t sa, int64_t sb) {
        T* dst = out.data() + o;
        for (int64_t k = 0; k < len; ++k) dst[k] = f(av[ia + k * sa], bv[ib + k * sb]);
    });
    return make_result<T>(op, out_shape, std::move(out), {a.node(), b.node()},
                          [plan = std::move(plan), da, db](const NodeT<T>& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              const T* av = pa.data.data();
                              const T* bv = pb.data.data();
                              const T* g = self.grad.data();
                              if (pa.requires_grad) {
                                  T* ga = grad_buffer(pa).data();
                                  for_each_run(plan, [&](int64_t o, int64_t ia, int64_t ib, int64_t len, int64_t sa,
                                                         int64_t sb) {
                                      for (int64_t k = 0; k < len; ++k)
                                          ga[ia + k * sa] += g[o + k] * da(av[ia + k * sa], bv[ib + k * sb]);
                                  });
                              }
                              if (pb.requires_grad) {
                                  T* gb = grad_buffer(pb).data();
                                  for_each_run(plan, [&](int64_t o, int64_t ia, int64_t ib, int64_t len, int64_t sa,
                                                         int64_t sb) {
                                      for (int64_t k = 0; k < len; ++k)
                                          gb[ib + k * sb] += g[o + k] * db(av[ia + k * sa], bv[ib + k * sb]);
                                  });
                              }
                          });
}

// `df(x, y)` is the local derivative given input x and output y.
template <typename T, typename F, typename DF>
BasicTensor<T> unary(const char* op, const BasicTensor<T>& x, F f, DF df) {
    check_finite(x, op);
    const auto xv = x.data();
    std::vector<T> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    return make_result<T>(op, x.shape(), std::move(out), {x.node()}, [df](const NodeT<T>& self) {
        auto& px = *self.parents[0];
        auto gx = grad_buffer(px);
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * df(px.data[i], self.data[i]);
    });
}

void require_rank(const Shape& s, size_t rank, const char* op, const char* what) {
    if (s.size() != rank) {
        throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                         shape_str(s));
    }
}

// col is (C * kh * kw) x (N * Ho * Wo), row-major.
template <typename T>
void im2col(const T* img, int64_t N, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t Ho, int64_t Wo, T* col) {
    const int64_t P = Ho * Wo;
    const int64_t cols = N * P;
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t ki = 0; ki < kh; ++ki) {
            for (int64_t kj = 0; kj < kw; ++kj) {
                T* row = col + ((c * kh + ki) * kw + kj) * cols;
                for (int64_t n = 0; n < N; ++n) {
                    const T* plane = img + (n * C + c) * H * W;
                    T* dst = row + n * P;
                    for (int64_t oh = 0; oh < Ho; ++oh) {
                        const int64_t ih = oh * stride - pad + ki;
                        if (ih < 0 || ih >= H) {
                            std::fill(dst + oh * Wo, dst + (oh + 1) * Wo, T(0));
                            continue;
                        }
                        for (int64_t ow = 0; ow < Wo; ++ow) {
                            const int64_t iw = ow * stride - pad + kj;
                            dst[oh * Wo + ow] = (iw >= 0 && iw < W) ? plane[ih * W + iw] : T(0);
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* col, int64_t N, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t Ho, int64_t Wo, T* img) {
    const int64_t P = Ho * Wo;
    const int64_t cols = N * P;
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t ki = 0; ki < kh; ++ki) {
            for (int64_t kj = 0; kj < kw; ++kj) {
                const T* row = col + ((c * kh + ki) * kw + kj) * cols;
                for (int64_t n = 0; n < N; ++n) {
                    T* plane = img + (n * C + c) * H * W;
                    const T* src = row + n * P;
                    for (int64_t oh = 0; oh < Ho; ++oh) {
                        const int64_t ih = oh * stride - pad + ki;
                        if (ih < 0 || ih >= H) continue;
                        for (int64_t ow = 0; ow < Wo; ++ow) {
                            const int64_t iw = ow * stride - pad + kj;
                            if (iw >= 0 && iw < W) plane[ih * W + iw] += src[oh * Wo + ow];
                        }
                    }
                }
            }
        }
    }
}

// [N, C, P] <-> [C, N * P]
// Stride-1 convolution as shifted plane accumulations. Used when the output
// has so few channels that an im2col buffer would cost far more memory
// traffic than the arithmetic itself.
template <typename T>
struct DirectConv {
    int64_t N, C, H, W, O, kh, kw, pad, Ho, Wo;

    // Visits every (n, o, c, ki, kj) tap with the valid output row/column
    // ranges; body(out_plane, in_plane, weight_index, i0, i1, j0, j1, di, dj).
    template <typename Body>
    void taps(Body body) const {
        for (int64_t n = 0; n < N; ++n)
            for (int64_t o = 0; o < O; ++o)
                for (int64_t c = 0; c < C; ++c)
                    for (int64_t ki = 0; ki < kh; ++ki)
                        for (int64_t kj = 0; kj < kw; ++kj) {
                            const int64_t di = ki - pad, dj = kj - pad;
                            const int64_t i0 = std::max<int64_t>(0, -di), i1 = std::min(Ho, H - di);
                            const int64_t j0 = std::max<int64_t>(0, -dj), j1 = std::min(Wo, W - dj);
                            if (i0 >= i1 || j0 >= j1) continue;
                            body((n * O + o) * Ho * Wo, (n * C + c) * H * W, ((o * C + c) * kh + ki) * kw + kj, i0, i1,
                                 j0, j1, di, dj);
                        }
    }

    void forward(const T* x, const T* w, T* y) const {
        taps([&](int64_t op, int64_t ip, int64_t wi, int64_t i0, int64_t i1, int64_t j0, int64_t j1, int64_t di,
                 int64_t dj) {
            const T wv = w[wi];
            for (int64_t i = i0; i < i1; ++i) {
                T* dst = y + op + i * Wo;
                const T* src = x + ip + (i + di) * W + dj;
                for (int64_t j = j0; j < j1; ++j) dst[j] += wv * src[j];
            }
        });
    }

    void backward(const T* x, const T* w, const T* gy, T* gx, T* gw) const {
        taps([&](int64_t op, int64_t ip, int64_t wi, int64_t i0, int64_t i1, int64_t j0, int64_t j1, int64_t di,
                 int64_t dj) {
            const T wv = w[wi];
            T acc = 0;
            for (int64_t i = i0; i < i1; ++i) {
                const T* g = gy + op + i * Wo;
                const T* src = x + ip + (i + di) * W + dj;
                if (gx) {
                    T* dsrc = gx + ip + (i + di) * W + dj;
                    for (int64_t j = j0; j < j1; ++j) dsrc[j] += wv * g[j];
                }
                for (int64_t j = j0; j < j1; ++j) acc += g[j] * src[j];
            }
            if (gw) gw[wi] += acc;
        });
    }
};

template <typename T>
void nc_to_cn(const T* src, int64_t N, int64_t C, int64_t P, T* dst) {
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) std::copy_n(src + (n * C + c) * P, P, dst + c * N * P + n * P);
}

template <typename T>
void cn_to_nc(const T* src, int64_t N, int64_t C, int64_t P, T* dst) {
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) std::copy_n(src + c * N * P + n * P, P, dst + (n * C + c) * P);
}

// Normalizes contiguous groups in place of `out`; returns 1/sigma per group.
template <typename T>
std::vector<T> normalize_groups(std::span<const T> x, int64_t groups, int64_t size, T eps, std::vector<T>& out) {
    std::vector<T> inv_std(static_cast<size_t>(groups));
    out.resize(x.size());
    for (int64_t g = 0; g < groups; ++g) {
        const T* src = x.data() + g * size;
        T mean = 0;
        for (int64_t i = 0; i < size; ++i) mean += src[i];
        mean /= static_cast<T>(size);
        T var = 0;
        for (int64_t i = 0; i < size; ++i) var += (src[i] - mean) * (src[i] - mean);
        var /= static_cast<T>(size);
        const T inv = T(1) / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(g)] = inv;
        T* dst = out.data() + g * size;
        for (int64_t i = 0; i < size; ++i) dst[i] = (src[i] - mean) * inv;
    }
    return inv_std;
}

template <typename T>
void normalize_groups_backward(const NodeT<T>& self, const std::vector<T>& inv_std, int64_t groups, int64_t size) {
    auto& px = *self.parents[0];
    auto gx = grad_buffer(px);
    for (int64_t g = 0; g < groups; ++g) {
        const T* y = self.data.data() + g * size;
        const T* dy = self.grad.data() + g * size;
        T mean_dy = 0, mean_dy_y = 0;
        for (int64_t i = 0; i < size; ++i) {
            mean_dy += dy[i];
            mean_dy_y += dy[i] * y[i];
        }
        mean_dy /= static_cast<T>(size);
        mean_dy_y /= static_cast<T>(size);
        const T inv = inv_std[static_cast<size_t>(g)];
        T* dx = gx.data() + g * size;
        for (int64_t i = 0; i < size; ++i) dx[i] += inv * (dy[i] - mean_dy - y[i] * mean_dy_y);
    }
}

// outer x extent x inner decomposition around `axis`.
struct AxisSplit {
    int64_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int64_t axis) {
    AxisSplit r;
    for (int64_t i = 0; i < axis; ++i) r.outer *= s[static_cast<size_t>(i)];
    r.extent = s[static_cast<size_t>(axis)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T s) {
    return unary<T>(
        "add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
BasicTensor<T> mul_scalar(const BasicTensor<T>& a, T s) {
    return unary<T>(
        "mul_scalar", a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    constexpr const char* op = "matmul";
    check_finite(a, op);
    check_finite(b, op);
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() < 2 || (sb.size() != 2 && sb.size() != 3)) {
        throw ShapeError("matmul: unsupported ranks " + shape_str(sa) + " x " + shape_str(sb));
    }
    const int64_t k = sa.back();
    if (sb[sb.size() - 2] != k) throw ShapeError("matmul: inner extents differ " + shape_str(sa) + " x " + shape_str(sb));
    const int64_t n = sb.back();

    if (sb.size() == 2) {
        const int64_t m = a.numel() / k;
        Shape out_shape(sa.begin(), sa.end() - 1);
        out_shape.push_back(n);
        std::vector<T> out(static_cast<size_t>(m * n));
        MatMap<T>(out.data(), m, n).noalias() =
            ConstMatMap<T>(a.data().data(), m, k) * ConstMatMap<T>(b.data().data(), k, n);
        return make_result<T>(op, out_shape, std::move(out), {a.node(), b.node()}, [m, k, n](const NodeT<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            ConstMatMap<T> g(self.grad.data(), m, n);
            if (pa.requires_grad) {
                MatMap<T>(grad_buffer(pa).data(), m, k).noalias() += g * ConstMatMap<T>(pb.data.data(), k, n).transpose();
            }
            if (pb.requires_grad) {
                MatMap<T>(grad_buffer(pb).data(), k, n).noalias() += ConstMatMap<T>(pa.data.data(), m, k).transpose() * g;
            }
        });
    }

    if (sa.size() != 3 || sa[0] != sb[0]) {
        throw ShapeError("matmul: batched operands need equal batch, got " + shape_str(sa) + " x " + shape_str(sb));
    }
    const int64_t batch = sa[0];
    const int64_t m = sa[1];
    std::vector<T> out(static_cast<size_t>(batch * m * n));
    for (int64_t i = 0; i < batch; ++i) {
        MatMap<T>(out.data() + i * m * n, m, n).noalias() =
            ConstMatMap<T>(a.data().data() + i * m * k, m, k) * ConstMatMap<T>(b.data().data() + i * k * n, k, n);
    }
    return make_result<T>(op, {batch, m, n}, std::move(out), {a.node(), b.node()},
                          [batch, m, k, n](const NodeT<T>& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              for (int64_t i = 0; i < batch; ++i) {
                                  ConstMatMap<T> g(self.grad.data() + i * m * n, m, n);
                                  if (pa.requires_grad) {
                                      MatMap<T>(grad_buffer(pa).data() + i * m * k, m, k).noalias() +=
                                          g * ConstMatMap<T>(pb.data.data() + i * k * n, k, n).transpose();
                                  }
                                  if (pb.requires_grad) {
                                      MatMap<T>(grad_buffer(pb).data() + i * k * n, k, n).noalias() +=
                                          ConstMatMap<T>(pa.data.data() + i * m * k, m, k).transpose() * g;
                                  }
                              }
                          });
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      int64_t stride, int64_t padding) {
    constexpr const char* op = "conv2d";
    require_rank(x.shape(), 4, op, "input");
    require_rank(weight.shape(), 4, op, "weight");
    check_finite(x, op);
    check_finite(weight, op);
    if (stride < 1 || padding < 0) throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
    const int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    const int64_t O = weight.size(0), kh = weight.size(2), kw = weight.size(3);
    if (weight.size(1) != C) {
        throw ShapeError("conv2d: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
    }
    const bool has_bias = bias.defined();
    if (has_bias) {
        check_finite(bias, op);
        if (bias.shape() != Shape{O}) throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " for weight " + shape_str(weight.shape()));
    }
    const int64_t Ho = (H + 2 * padding - kh) / stride + 1;
    const int64_t Wo = (W + 2 * padding - kw) / stride + 1;
    if (H + 2 * padding < kh || W + 2 * padding < kw) {
        throw ShapeError("conv2d: kernel " + shape_str(weight.shape()) + " larger than padded input " + shape_str(x.shape()));
    }
    const int64_t K = C * kh * kw;
    const int64_t P = Ho * Wo;
    const bool direct = stride == 1 && O <= 4;
    const DirectConv<T> dc{N, C, H, W, O, kh, kw, padding, Ho, Wo};
    std::vector<T> out(static_cast<size_t>(N * O * P), T(0));
    if (direct) {
        dc.forward(x.data().data(), weight.data().data(), out.data());
    } else {
        std::vector<T> col(static_cast<size_t>(K * N * P));
        im2col(x.data().data(), N, C, H, W, kh, kw, stride, padding, Ho, Wo, col.data());
        RowMat<T> y = ConstMatMap<T>(weight.data().data(), O, K) * ConstMatMap<T>(col.data(), K, N * P);
        cn_to_nc(y.data(), N, O, P, out.data());
    }
    if (has_bias) {
        const auto bv = bias.data();
        for (int64_t n = 0; n < N; ++n)
            for (int64_t o = 0; o < O; ++o) {
                T* dst = out.data() + (n * O + o) * P;
                for (int64_t p = 0; p < P; ++p) dst[p] += bv[static_cast<size_t>(o)];
            }
    }
    std::vector<std::shared_ptr<NodeT<T>>> parents{x.node(), weight.node()};
    if (has_bias) parents.push_back(bias.node());
    return make_result<T>(
        op, {N, O, Ho, Wo}, std::move(out), std::move(parents),
        [=](const NodeT<T>& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                auto gb = grad_buffer(*self.parents[2]);
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t o = 0; o < O; ++o) {
                        const T* src = self.grad.data() + (n * O + o) * P;
                        T acc = 0;
                        for (int64_t p = 0; p < P; ++p) acc += src[p];
                        gb[static_cast<size_t>(o)] += acc;
                    }
            }
            if (direct) {
                dc.backward(px.data.data(), pw.data.data(), self.grad.data(),
                            px.requires_grad ? grad_buffer(px).data() : nullptr,
                            pw.requires_grad ? grad_buffer(pw).data() : nullptr);
                return;
            }
            RowMat<T> gy(O, N * P);
            nc_to_cn(self.grad.data(), N, O, P, gy.data());
            if (pw.requires_grad) {
                std::vector<T> cols(static_cast<size_t>(K * N * P));
                im2col(px.data.data(), N, C, H, W, kh, kw, stride, padding, Ho, Wo, cols.data());
                MatMap<T>(grad_buffer(pw).data(), O, K).noalias() +=
                    gy * ConstMatMap<T>(cols.data(), K, N * P).transpose();
            }
            if (px.requires_grad) {
                RowMat<T> gcol = ConstMatMap<T>(pw.data.data(), O, K).transpose() * gy;
                col2im(gcol.data(), N, C, H, W, kh, kw, stride, padding, Ho, Wo, grad_buffer(px).data());
            }
        });
}

template <typename T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                                int64_t stride, int64_t padding) {
    constexpr const char* op = "conv_transpose2d";
    require_rank(x.shape(), 4, op, "input");
    require_rank(weight.shape(), 4, op, "weight");
    check_finite(x, op);
    check_finite(weight, op);
    if (stride < 1 || padding < 0) throw ShapeError("conv_transpose2d: stride must be >= 1 and padding >= 0");
    const int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    const int64_t O = weight.size(1), kh = weight.size(2), kw = weight.size(3);
    if (weight.size(0) != C) {
        throw ShapeError("conv_transpose2d: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
    }
    const bool has_bias = bias.defined();
    if (has_bias) {
        check_finite(bias, op);
        if (bias.shape() != Shape{O}) throw ShapeError("conv_transpose2d: bias " + shape_str(bias.shape()) + " for weight " + shape_str(weight.shape()));
    }
    const int64_t Ho = (H - 1) * stride - 2 * padding + kh;
    const int64_t Wo = (W - 1) * stride - 2 * padding + kw;
    if (Ho <= 0 || Wo <= 0) throw ShapeError("conv_transpose2d: empty output for input " + shape_str(x.shape()));
    const int64_t K = O * kh * kw;
    const int64_t P = H * W;
    RowMat<T> xin(C, N * P);
    nc_to_cn(x.data().data(), N, C, P, xin.data());
    RowMat<T> col = ConstMatMap<T>(weight.data().data(), C, K).transpose() * xin;
    std::vector<T> out(static_cast<size_t>(N * O * Ho * Wo), T(0));
    col2im(col.data(), N, O, Ho, Wo, kh, kw, stride, padding, H, W, out.data());
    if (has_bias) {
        const auto bv = bias.data();
        for (int64_t n = 0; n < N; ++n)
            for (int64_t o = 0; o < O; ++o) {
                T* dst = out.data() + (n * O + o) * Ho * Wo;
                for (int64_t p = 0; p < Ho * Wo; ++p) dst[p] += bv[static_cast<size_t>(o)];
            }
    }
    std::vector<std::shared_ptr<NodeT<T>>> parents{x.node(), weight.node()};
    if (has_bias) parents.push_back(bias.node());
    return make_result<T>(
        op, {N, O, Ho, Wo}, std::move(out), std::move(parents),
        [=](const NodeT<T>& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            RowMat<T> gcol(K, N * P);
            im2col(self.grad.data(), N, O, Ho, Wo, kh, kw, stride, padding, H, W, gcol.data());
            if (px.requires_grad) {
                RowMat<T> gx = ConstMatMap<T>(pw.data.data(), C, K) * gcol;
                std::vector<T> tmp(static_cast<size_t>(N * C * P));
                cn_to_nc(gx.data(), N, C, P, tmp.data());
                auto g = grad_buffer(px);
                for (size_t i = 0; i < tmp.size(); ++i) g[i] += tmp[i];
            }
            if (pw.requires_grad) {
                RowMat<T> xs(C, N * P);
                nc_to_cn(px.data.data(), N, C, P, xs.data());
                MatMap<T>(grad_buffer(pw).data(), C, K).noalias() += xs * gcol.transpose();
            }
            if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                auto gb = grad_buffer(*self.parents[2]);
                const int64_t plane = Ho * Wo;
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t o = 0; o < O; ++o) {
                        const T* src = self.grad.data() + (n * O + o) * plane;
                        T acc = 0;
                        for (int64_t p = 0; p < plane; ++p) acc += src[p];
                        gb[static_cast<size_t>(o)] += acc;
                    }
            }
        });
}

template <typename T>
BasicTensor<T> avg_pool2d(const BasicTensor<T>& x, int64_t kernel, int64_t stride) {
    constexpr const char* op = "avg_pool2d";
    require_rank(x.shape(), 4, op, "input");
    check_finite(x, op);
    const int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    if (kernel < 1 || stride < 1 || kernel > H || kernel > W) throw ShapeError("avg_pool2d: bad kernel for " + shape_str(x.shape()));
    const int64_t Ho = (H - kernel) / stride + 1, Wo = (W - kernel) / stride + 1;
    const T scale = T(1) / static_cast<T>(kernel * kernel);
    std::vector<T> out(static_cast<size_t>(N * C * Ho * Wo));
    const auto xv = x.data();
    for (int64_t p = 0; p < N * C; ++p)
        for (int64_t oh = 0; oh < Ho; ++oh)
            for (int64_t ow = 0; ow < Wo; ++ow) {
                T acc = 0;
                for (int64_t i = 0; i < kernel; ++i)
                    for (int64_t j = 0; j < kernel; ++j)
                        acc += xv[static_cast<size_t>(p * H * W + (oh * stride + i) * W + ow * stride + j)];
                out[static_cast<size_t>((p * Ho + oh) * Wo + ow)] = acc * scale;
            }
    return make_result<T>(op, {N, C, Ho, Wo}, std::move(out), {x.node()}, [=](const NodeT<T>& self) {
        auto g = grad_buffer(*self.parents[0]);
        for (int64_t p = 0; p < N * C; ++p)
            for (int64_t oh = 0; oh < Ho; ++oh)
                for (int64_t ow = 0; ow < Wo; ++ow) {
                    const T go = self.grad[static_cast<size_t>((p * Ho + oh) * Wo + ow)] * scale;
                    for (int64_t i = 0; i < kernel; ++i)
                        for (int64_t j = 0; j < kernel; ++j)
                            g[static_cast<size_t>(p * H * W + (oh * stride + i) * W + ow * stride + j)] += go;
                }
    });
}

template <typename T>
BasicTensor<T> max_pool2d(const BasicTensor<T>& x, int64_t kernel, int64_t stride) {
    constexpr const char* op = "max_pool2d";
    require_rank(x.shape(), 4, op, "input");
    check_finite(x, op);
    const int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    if (kernel < 1 || stride < 1 || kernel > H || kernel > W) throw ShapeError("max_pool2d: bad kernel for " + shape_str(x.shape()));
    const int64_t Ho = (H - kernel) / stride + 1, Wo = (W - kernel) / stride + 1;
    std::vector<T> out(static_cast<size_t>(N * C * Ho * Wo));
    std::vector<int64_t> argmax(out.size());
    const auto xv = x.data();
    for (int64_t p = 0; p < N * C; ++p)
        for (int64_t oh = 0; oh < Ho; ++oh)
            for (int64_t ow = 0; ow < Wo; ++ow) {
                int64_t best = p * H * W + oh * stride * W + ow * stride;
                for (int64_t i = 0; i < kernel; ++i)
                    for (int64_t j = 0; j < kernel; ++j) {
                        const int64_t idx = p * H * W + (oh * stride + i) * W + ow * stride + j;
                        if (xv[static_cast<size_t>(idx)] > xv[static_cast<size_t>(best)]) best = idx;
                    }
                const auto o = static_cast<size_t>((p * Ho + oh) * Wo + ow);
                out[o] = xv[static_cast<size_t>(best)];
                argmax[o] = best;
            }
    return make_result<T>(op, {N, C, Ho, Wo}, std::move(out), {x.node()},
                          [argmax = std::move(argmax)](const NodeT<T>& self) {
                              auto g = grad_buffer(*self.parents[0]);
                              for (size_t o = 0; o < argmax.size(); ++o)
                                  g[static_cast<size_t>(argmax[o])] += self.grad[o];
                          });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
    return unary<T>(
        "relu", x, [](T v) { return v > 0 ? v : T(0); }, [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope) {
    return unary<T>(
        "leaky_relu", x, [slope](T v) { return v > 0 ? v : slope * v; },
        [slope](T v, T) { return v > 0 ? T(1) : slope; });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
    return unary<T>(
        "sigmoid", x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x) {
    return unary<T>(
        "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
    constexpr T c = T(0.7978845608028654);  // sqrt(2 / pi)
    constexpr T a = T(0.044715);
    return unary<T>(
        "gelu", x, [](T v) { return T(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v))); },
        [](T v, T) {
            const T t = std::tanh(c * (v + a * v * v * v));
            return T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * c * (T(1) + T(3) * a * v * v);
        });
}

template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& x) {
    return unary<T>(
        "abs", x, [](T v) { return std::abs(v); },
        [](T v, T) { return v > 0 ? T(1) : (v < 0 ? T(-1) : T(0)); });
}

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& x) {
    return unary<T>(
        "square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
BasicTensor<T> exp(const BasicTensor<T>& x) {
    return unary<T>(
        "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
BasicTensor<T> log(const BasicTensor<T>& x) {
    return unary<T>(
        "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
    constexpr const char* op = "softmax";
    check_finite(x, op);
    const int64_t D = x.shape().back();
    const int64_t rows = x.numel() / D;
    const auto xv = x.data();
    std::vector<T> out(xv.size());
    for (int64_t r = 0; r < rows; ++r) {
        const T* src = xv.data() + r * D;
        T* dst = out.data() + r * D;
        const T mx = *std::max_element(src, src + D);
        T total = 0;
        for (int64_t i = 0; i < D; ++i) total += (dst[i] = std::exp(src[i] - mx));
        for (int64_t i = 0; i < D; ++i) dst[i] /= total;
    }
    return make_result<T>(op, x.shape(), std::move(out), {x.node()}, [rows, D](const NodeT<T>& self) {
        auto g = grad_buffer(*self.parents[0]);
        for (int64_t r = 0; r < rows; ++r) {
            const T* y = self.data.data() + r * D;
            const T* dy = self.grad.data() + r * D;
            T dot = 0;
            for (int64_t i = 0; i < D; ++i) dot += dy[i] * y[i];
            for (int64_t i = 0; i < D; ++i) g[static_cast<size_t>(r * D + i)] += y[i] * (dy[i] - dot);
        }
    });
}

template <typename T>
BasicTensor<T> log_softmax(const BasicTensor<T>& x) {
    constexpr const char* op = "log_softmax";
    check_finite(x, op);
    const int64_t D = x.shape().back();
    const int64_t rows = x.numel() / D;
    const auto xv = x.data();
    std::vector<T> out(xv.size());
    for (int64_t r = 0; r < rows; ++r) {
        const T* src = xv.data() + r * D;
        T* dst = out.data() + r * D;
        const T mx = *std::max_element(src, src + D);
        T total = 0;
        for (int64_t i = 0; i < D; ++i) total += std::exp(src[i] - mx);
        const T lse = mx + std::log(total);
        for (int64_t i = 0; i < D; ++i) dst[i] = src[i] - lse;
    }
    return make_result<T>(op, x.shape(), std::move(out), {x.node()}, [rows, D](const NodeT<T>& self) {
        auto g = grad_buffer(*self.parents[0]);
        for (int64_t r = 0; r < rows; ++r) {
            const T* y = self.data.data() + r * D;
            const T* dy = self.grad.data() + r * D;
            T total = 0;
            for (int64_t i = 0; i < D; ++i) total += dy[i];
            for (int64_t i = 0; i < D; ++i) g[static_cast<size_t>(r * D + i)] += dy[i] - std::exp(y[i]) * total;
        }
    });
}

template <typename T>
BasicTensor<T> instance_norm(const BasicTensor<T>& x, T eps) {
    constexpr const char* op = "instance_norm";
    require_rank(x.shape(), 4, op, "input");
    check_finite(x, op);
    const int64_t groups = x.size(0) * x.size(1);
    const int64_t size = x.size(2) * x.size(3);
    std::vector<T> out;
    auto inv_std = normalize_groups<T>(x.data(), groups, size, eps, out);
    return make_result<T>(op, x.shape(), std::move(out), {x.node()},
                          [inv_std = std::move(inv_std), groups, size](const NodeT<T>& self) {
                              normalize_groups_backward(self, inv_std, groups, size);
                          });
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, T eps) {
    constexpr const char* op = "layer_norm";
    check_finite(x, op);
    const int64_t size = x.shape().back();
    const int64_t groups = x.numel() / size;
    std::vector<T> out;
    auto inv_std = normalize_groups<T>(x.data(), groups, size, eps, out);
    return make_result<T>(op, x.shape(), std::move(out), {x.node()},
                          [inv_std = std::move(inv_std), groups, size](const NodeT<T>& self) {
                              normalize_groups_backward(self, inv_std, groups, size);
                          });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
    int64_t known = 1;
    int inferred = -1;
    for (size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == -1) {
            if (inferred >= 0) throw ShapeError("reshape: more than one -1 in " + shape_str(shape));
            inferred = static_cast<int>(i);
        } else {
            known *= shape[i];
        }
    }
    if (inferred >= 0 && known > 0 && x.numel() % known == 0) shape[static_cast<size_t>(inferred)] = x.numel() / known;
    if (shape_numel(shape) != x.numel() || std::any_of(shape.begin(), shape.end(), [](int64_t e) { return e <= 0; })) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    std::vector<T> out(x.data().begin(), x.data().end());
    return make_result<T>("reshape", std::move(shape), std::move(out), {x.node()}, [](const NodeT<T>& self) {
        auto g = grad_buffer(*self.parents[0]);
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& x, int64_t axis0, int64_t axis1) {
    const auto& in = x.shape();
    const auto rank = static_cast<int64_t>(in.size());
    axis0 = normalize_axis(axis0, rank, "transpose");
    axis1 = normalize_axis(axis1, rank, "transpose");
    Shape out_shape = in;
    std::swap(out_shape[static_cast<size_t>(axis0)], out_shape[static_cast<size_t>(axis1)]);
    std::vector<int64_t> in_stride(in.size());
    int64_t s = 1;
    for (size_t i = in.size(); i-- > 0;) {
        in_stride[i] = s;
        s *= in[i];
    }
    std::vector<int64_t> stride = in_stride;
    std::swap(stride[static_cast<size_t>(axis0)], stride[static_cast<size_t>(axis1)]);
    const int64_t n = x.numel();
    std::vector<int64_t> map(static_cast<size_t>(n));
    std::vector<int64_t> counter(in.size(), 0);
    int64_t src = 0;
    for (int64_t i = 0; i < n; ++i) {
        map[static_cast<size_t>(i)] = src;
        for (size_t ax = out_shape.size(); ax-- > 0;) {
            ++counter[ax];
            src += stride[ax];
            if (counter[ax] < out_shape[ax]) break;
            src -= stride[ax] * counter[ax];
            counter[ax] = 0;
        }
    }
    const auto xv = x.data();
    std::vector<T> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = xv[static_cast<size_t>(map[static_cast<size_t>(i)])];
    return make_result<T>("transpose", std::move(out_shape), std::move(out), {x.node()},
                          [map = std::move(map)](const NodeT<T>& self) {
                              auto g = grad_buffer(*self.parents[0]);
                              for (size_t i = 0; i < map.size(); ++i) g[static_cast<size_t>(map[i])] += self.grad[i];
                          });
}

template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, int64_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts.front().shape();
    axis = normalize_axis(axis, static_cast<int64_t>(first.size()), "concat");
    Shape out_shape = first;
    out_shape[static_cast<size_t>(axis)] = 0;
    std::vector<int64_t> extents;
    for (const auto& p : parts) {
        check_finite(p, "concat");
        const auto& s = p.shape();
        bool ok = s.size() == first.size();
        for (size_t i = 0; ok && i < s.size(); ++i) ok = i == static_cast<size_t>(axis) || s[i] == first[i];
        if (!ok) throw ShapeError("concat: " + shape_str(first) + " and " + shape_str(s) + " differ off-axis");
        extents.push_back(s[static_cast<size_t>(axis)]);
        out_shape[static_cast<size_t>(axis)] += s[static_cast<size_t>(axis)];
    }
    const auto split = split_at(out_shape, axis);
    std::vector<T> out(static_cast<size_t>(shape_numel(out_shape)));
    std::vector<std::shared_ptr<NodeT<T>>> parents;
    int64_t offset = 0;
    for (size_t k = 0; k < parts.size(); ++k) {
        const auto src = parts[k].data();
        const int64_t chunk = extents[k] * split.inner;
        for (int64_t o = 0; o < split.outer; ++o) {
            std::copy_n(src.data() + o * chunk, chunk, out.data() + o * split.extent * split.inner + offset);
        }
        offset += chunk;
        parents.push_back(parts[k].node());
    }
    return make_result<T>("concat", std::move(out_shape), std::move(out), std::move(parents),
                          [extents, split](const NodeT<T>& self) {
                              int64_t offset = 0;
                              for (size_t k = 0; k < extents.size(); ++k) {
                                  const int64_t chunk = extents[k] * split.inner;
                                  auto& p = *self.parents[k];
                                  if (p.requires_grad) {
                                      auto g = grad_buffer(p);
                                      for (int64_t o = 0; o < split.outer; ++o) {
                                          const T* src = self.grad.data() + o * split.extent * split.inner + offset;
                                          for (int64_t i = 0; i < chunk; ++i) g[static_cast<size_t>(o * chunk + i)] += src[i];
                                      }
                                  }
                                  offset += chunk;
                              }
                          });
}

template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& x, int64_t axis, int64_t start, int64_t end) {
    axis = normalize_axis(axis, x.dim(), "slice");
    const int64_t extent = x.size(axis);
    if (start < 0 || end > extent || start >= end) {
        throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(end) + ") invalid for axis " +
                         std::to_string(axis) + " of " + shape_str(x.shape()));
    }
    check_finite(x, "slice");
    const auto split = split_at(x.shape(), axis);
    Shape out_shape = x.shape();
    out_shape[static_cast<size_t>(axis)] = end - start;
    const int64_t chunk = (end - start) * split.inner;
    std::vector<T> out(static_cast<size_t>(split.outer * chunk));
    const auto xv = x.data();
    for (int64_t o = 0; o < split.outer; ++o) {
        std::copy_n(xv.data() + o * extent * split.inner + start * split.inner, chunk, out.data() + o * chunk);
    }
    return make_result<T>("slice", std::move(out_shape), std::move(out), {x.node()},
                          [split, chunk, start, extent](const NodeT<T>& self) {
                              auto g = grad_buffer(*self.parents[0]);
                              for (int64_t o = 0; o < split.outer; ++o) {
                                  T* dst = g.data() + o * extent * split.inner + start * split.inner;
                                  const T* src = self.grad.data() + o * chunk;
                                  for (int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
                              }
                          });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
    check_finite(x, "sum");
    T total = 0;
    for (auto v : x.data()) total += v;
    return make_result<T>("sum", {1}, {total}, {x.node()}, [](const NodeT<T>& self) {
        auto g = grad_buffer(*self.parents[0]);
        for (auto& v : g) v += self.grad[0];
    });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x, int64_t axis, bool keepdim) {
    check_finite(x, "sum");
    axis = normalize_axis(axis, x.dim(), "sum");
    const auto split = split_at(x.shape(), axis);
    Shape out_shape = x.shape();
    if (keepdim || out_shape.size() == 1) {
        out_shape[static_cast<size_t>(axis)] = 1;
    } else {
        out_shape.erase(out_shape.begin() + axis);
    }
    std::vector<T> out(static_cast<size_t>(split.outer * split.inner), T(0));
    const auto xv = x.data();
    for (int64_t o = 0; o < split.outer; ++o)
        for (int64_t e = 0; e < split.extent; ++e)
            for (int64_t i = 0; i < split.inner; ++i)
                out[static_cast<size_t>(o * split.inner + i)] +=
                    xv[static_cast<size_t>((o * split.extent + e) * split.inner + i)];
    return make_result<T>("sum_axis", std::move(out_shape), std::move(out), {x.node()}, [split](const NodeT<T>& self) {
        auto g = grad_buffer(*self.parents[0]);
        for (int64_t o = 0; o < split.outer; ++o)
            for (int64_t e = 0; e < split.extent; ++e)
                for (int64_t i = 0; i < split.inner; ++i)
                    g[static_cast<size_t>((o * split.extent + e) * split.inner + i)] +=
                        self.grad[static_cast<size_t>(o * split.inner + i)];
    });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
    check_finite(x, "mean");
    const T scale = T(1) / static_cast<T>(x.numel());
    T total = 0;
    for (auto v : x.data()) total += v;
    return make_result<T>("mean", {1}, {total * scale}, {x.node()}, [scale](const NodeT<T>& self) {
        auto g = grad_buffer(*self.parents[0]);
        for (auto& v : g) v += self.grad[0] * scale;
    });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x, int64_t axis, bool keepdim) {
    const int64_t extent = x.size(axis);
    auto s = sum(x, axis, keepdim);
    const T scale = T(1) / static_cast<T>(extent);
    std::vector<T> out(s.data().begin(), s.data().end());
    for (auto& v : out) v *= scale;
    return make_result<T>("mean_axis", s.shape(), std::move(out), {s.node()}, [scale](const NodeT<T>& self) {
        auto g = grad_buffer(*self.parents[0]);
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * scale;
    });
}

#define VTMORPH_INSTANTIATE(T)                                                                                   \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                   \
    template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                                   \
    template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                                   \
    template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                                                \
    template BasicTensor<T> mul_scalar(const BasicTensor<T>&, T);                                                \
    template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                                \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, int64_t, \
                                   int64_t);                                                                     \
    template BasicTensor<T> conv_transpose2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                             int64_t, int64_t);                                                  \
    template BasicTensor<T> avg_pool2d(const BasicTensor<T>&, int64_t, int64_t);                                 \
    template BasicTensor<T> max_pool2d(const BasicTensor<T>&, int64_t, int64_t);                                 \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                         \
    template BasicTensor<T> leaky_relu(const BasicTensor<T>&, T);                                                \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> tanh(const BasicTensor<T>&);                                                         \
    template BasicTensor<T> gelu(const BasicTensor<T>&);                                                         \
    template BasicTensor<T> abs(const BasicTensor<T>&);                                                          \
    template BasicTensor<T> square(const BasicTensor<T>&);                                                       \
    template BasicTensor<T> exp(const BasicTensor<T>&);                                                          \
    template BasicTensor<T> log(const BasicTensor<T>&);                                                          \
    template BasicTensor<T> softmax(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> log_softmax(const BasicTensor<T>&);                                                  \
    template BasicTensor<T> instance_norm(const BasicTensor<T>&, T);                                             \
    template BasicTensor<T> layer_norm(const BasicTensor<T>&, T);                                                \
    template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                               \
    template BasicTensor<T> transpose(const BasicTensor<T>&, int64_t, int64_t);                                  \
    template BasicTensor<T> concat(const std::vector<BasicTensor<T>>&, int64_t);                                 \
    template BasicTensor<T> slice(const BasicTensor<T>&, int64_t, int64_t, int64_t);                             \
    template BasicTensor<T> sum(const BasicTensor<T>&);                                                          \
    template BasicTensor<T> sum(const BasicTensor<T>&, int64_t, bool);                                           \
    template BasicTensor<T> mean(const BasicTensor<T>&);                                                         \
    template BasicTensor<T> mean(const BasicTensor<T>&, int64_t, bool);

VTMORPH_INSTANTIATE(float)
VTMORPH_INSTANTIATE(double)

#undef VTMORPH_INSTANTIATE

}  // namespace vtmorph
