#include "vtmorph/spatial.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace vtmorph {

using detail::check_finite;
using detail::grad_buffer;
using detail::make_result;

AffineParams AffineParams::rotation(double radians) {
    const double c = std::cos(radians), s = std::sin(radians);
    return {{c, s, 0.0, -s, c, 0.0}};
}

AffineParams AffineParams::from_components(double scale, double rotation, double shear, double tx, double ty) {
    const double c = std::cos(rotation), s = std::sin(rotation);
    // scale * [[c, s], [-s, c]] * [[1, shear], [0, 1]]
    return {{scale * c, scale * (c * shear + s), tx, -scale * s, scale * (c - s * shear), ty}};
}

SingularTransformError::SingularTransformError(double det)
    : std::domain_error("singular affine transform (determinant " + std::to_string(det) + ")"), determinant(det) {}

AffineParams invert(const AffineParams& theta) {
    const auto& m = theta.v;
    const double det = theta.determinant();
    if (!(std::abs(det) > 1e-8)) throw SingularTransformError(det);
    const double ia = m[4] / det, ib = -m[1] / det, ic = -m[3] / det, id = m[0] / det;
    return {{ia, ib, -(ia * m[2] + ib * m[5]), ic, id, -(ic * m[2] + id * m[5])}};
}

AffineParams compose(const AffineParams& first, const AffineParams& second) {
    const auto& p = first.v;
    const auto& q = second.v;
    return {{p[0] * q[0] + p[1] * q[3], p[0] * q[1] + p[1] * q[4], p[0] * q[2] + p[1] * q[5] + p[2],
             p[3] * q[0] + p[4] * q[3], p[3] * q[1] + p[4] * q[4], p[3] * q[2] + p[4] * q[5] + p[5]}};
}

double corner_error(const AffineParams& predicted, const AffineParams& truth, int64_t height, int64_t width) {
    double total = 0.0;
    for (double y : {-1.0, 1.0}) {
        for (double x : {-1.0, 1.0}) {
            const auto [px, py] = predicted.apply(x, y);
            const auto [tx, ty] = truth.apply(x, y);
            total += std::hypot((px - tx) * static_cast<double>(width) / 2.0,
                                (py - ty) * static_cast<double>(height) / 2.0);
        }
    }
    return total / 4.0;
}

std::string format_theta(const AffineParams& theta) {
    std::string out;
    char buf[64];
    for (size_t i = 0; i < 6; ++i) {
        const auto res = std::to_chars(buf, buf + sizeof(buf), theta.v[i]);
        if (i) out += ',';
        out.append(buf, res.ptr);
    }
    return out;
}

AffineParams parse_theta(const std::string& text) {
    AffineParams theta;
    std::istringstream is(text);
    std::string field;
    size_t i = 0;
    while (std::getline(is, field, ',')) {
        if (i >= 6) throw std::invalid_argument("theta: more than six fields in '" + text + "'");
        const auto first = field.find_first_not_of(" \t");
        const auto last = field.find_last_not_of(" \t\r");
        if (first == std::string::npos) throw std::invalid_argument("theta: empty field in '" + text + "'");
        double value = 0.0;
        const auto res = std::from_chars(field.data() + first, field.data() + last + 1, value);
        if (res.ec != std::errc() || res.ptr != field.data() + last + 1 || !std::isfinite(value)) {
            throw std::invalid_argument("theta: bad number '" + field + "'");
        }
        theta.v[i++] = value;
    }
    if (i != 6) throw std::invalid_argument("theta: expected six fields in '" + text + "'");
    return theta;
}

template <typename T>
BasicTensor<T> theta_tensor(const std::vector<AffineParams>& thetas, bool requires_grad) {
    std::vector<T> values;
    for (const auto& t : thetas)
        for (double v : t.v) values.push_back(static_cast<T>(v));
    return BasicTensor<T>::from_vector({static_cast<int64_t>(thetas.size()), 6}, std::move(values), requires_grad);
}

template <typename T>
std::vector<AffineParams> thetas_from_tensor(const BasicTensor<T>& theta) {
    if (theta.dim() != 2 || theta.size(1) != 6) throw ShapeError("theta must be N x 6, got " + shape_str(theta.shape()));
    std::vector<AffineParams> out(static_cast<size_t>(theta.size(0)));
    const auto d = theta.data();
    for (size_t n = 0; n < out.size(); ++n)
        for (size_t k = 0; k < 6; ++k) out[n].v[k] = static_cast<double>(d[n * 6 + k]);
    return out;
}

template <typename T>
BasicTensor<T> affine_grid(const BasicTensor<T>& theta, const Shape& out_shape) {
    constexpr const char* op = "affine_grid";
    if (theta.dim() != 2 || theta.size(1) != 6) throw ShapeError("affine_grid: theta must be N x 6, got " + shape_str(theta.shape()));
    if (out_shape.size() != 4 || out_shape[0] != theta.size(0)) {
        throw ShapeError("affine_grid: output shape " + shape_str(out_shape) + " does not match theta " +
                         shape_str(theta.shape()));
    }
    for (auto e : out_shape) {
        if (e <= 0) throw ShapeError("affine_grid: non-positive output shape " + shape_str(out_shape));
    }
    check_finite(theta, op);
    const int64_t N = out_shape[0], H = out_shape[2], W = out_shape[3];
    std::vector<T> xs(static_cast<size_t>(W)), ys(static_cast<size_t>(H));
    for (int64_t j = 0; j < W; ++j) xs[static_cast<size_t>(j)] = static_cast<T>((2.0 * j + 1.0) / W - 1.0);
    for (int64_t i = 0; i < H; ++i) ys[static_cast<size_t>(i)] = static_cast<T>((2.0 * i + 1.0) / H - 1.0);
    const auto th = theta.data();
    std::vector<T> grid(static_cast<size_t>(N * H * W * 2));
    for (int64_t n = 0; n < N; ++n) {
        const T* t = th.data() + n * 6;
        for (int64_t i = 0; i < H; ++i)
            for (int64_t j = 0; j < W; ++j) {
                const T x = xs[static_cast<size_t>(j)], y = ys[static_cast<size_t>(i)];
                T* g = grid.data() + ((n * H + i) * W + j) * 2;
                g[0] = t[0] * x + t[1] * y + t[2];
                g[1] = t[3] * x + t[4] * y + t[5];
            }
    }
    return make_result<T>(op, {N, H, W, 2}, std::move(grid), {theta.node()},
                          [xs = std::move(xs), ys = std::move(ys), N, H, W](const detail::Node<T>& self) {
                              auto gt = grad_buffer(*self.parents[0]);
                              for (int64_t n = 0; n < N; ++n) {
                                  T acc[6] = {0, 0, 0, 0, 0, 0};
                                  for (int64_t i = 0; i < H; ++i)
                                      for (int64_t j = 0; j < W; ++j) {
                                          const T* g = self.grad.data() + ((n * H + i) * W + j) * 2;
                                          const T x = xs[static_cast<size_t>(j)], y = ys[static_cast<size_t>(i)];
                                          acc[0] += g[0] * x;
                                          acc[1] += g[0] * y;
                                          acc[2] += g[0];
                                          acc[3] += g[1] * x;
                                          acc[4] += g[1] * y;
                                          acc[5] += g[1];
                                      }
                                  for (int k = 0; k < 6; ++k) gt[static_cast<size_t>(n * 6 + k)] += acc[k];
                              }
                          });
}

namespace {

template <typename T>
struct Corners {
    int64_t x0, y0;
    T wx1, wy1;
};

template <typename T>
Corners<T> locate(T gx, T gy, int64_t H, int64_t W) {
    const T ix = ((gx + T(1)) * static_cast<T>(W) - T(1)) / T(2);
    const T iy = ((gy + T(1)) * static_cast<T>(H) - T(1)) / T(2);
    // Rounding in the grid arithmetic can leave a sample a few ulps off a
    // pixel center; snapping those keeps identity warps exact at any size.
    const auto snap = [](T v, int64_t extent) {
        const T r = std::round(v);
        const T tol = T(8) * std::numeric_limits<T>::epsilon() * static_cast<T>(extent);
        return std::abs(v - r) <= tol ? r : v;
    };
    const T sx = snap(ix, W), sy = snap(iy, H);
    const T fx = std::floor(sx), fy = std::floor(sy);
    return {static_cast<int64_t>(fx), static_cast<int64_t>(fy), sx - fx, sy - fy};
}

}  // namespace

template <typename T>
BasicTensor<T> grid_sample_bilinear(const BasicTensor<T>& img, const BasicTensor<T>& grid) {
    constexpr const char* op = "grid_sample";
    if (img.dim() != 4) throw ShapeError("grid_sample: image must be N x C x H x W, got " + shape_str(img.shape()));
    if (grid.dim() != 4 || grid.size(3) != 2 || grid.size(0) != img.size(0)) {
        throw ShapeError("grid_sample: grid " + shape_str(grid.shape()) + " does not match image " +
                         shape_str(img.shape()));
    }
    check_finite(img, op);
    check_finite(grid, op);
    const int64_t N = img.size(0), C = img.size(1), H = img.size(2), W = img.size(3);
    const int64_t Ho = grid.size(1), Wo = grid.size(2);
    const auto iv = img.data();
    const auto gv = grid.data();
    std::vector<T> out(static_cast<size_t>(N * C * Ho * Wo));
    auto pixel = [&](const T* plane, int64_t y, int64_t x) -> T {
        return (x >= 0 && x < W && y >= 0 && y < H) ? plane[y * W + x] : T(0);
    };
    for (int64_t n = 0; n < N; ++n)
        for (int64_t i = 0; i < Ho; ++i)
            for (int64_t j = 0; j < Wo; ++j) {
                const T* g = gv.data() + ((n * Ho + i) * Wo + j) * 2;
                const auto c = locate(g[0], g[1], H, W);
                const T wx0 = T(1) - c.wx1, wy0 = T(1) - c.wy1;
                for (int64_t ch = 0; ch < C; ++ch) {
                    const T* plane = iv.data() + (n * C + ch) * H * W;
                    out[static_cast<size_t>(((n * C + ch) * Ho + i) * Wo + j)] =
                        wy0 * (wx0 * pixel(plane, c.y0, c.x0) + c.wx1 * pixel(plane, c.y0, c.x0 + 1)) +
                        c.wy1 * (wx0 * pixel(plane, c.y0 + 1, c.x0) + c.wx1 * pixel(plane, c.y0 + 1, c.x0 + 1));
                }
            }
    return make_result<T>(
        op, {N, C, Ho, Wo}, std::move(out), {img.node(), grid.node()},
        [N, C, H, W, Ho, Wo](const detail::Node<T>& self) {
            auto& pimg = *self.parents[0];
            auto& pgrid = *self.parents[1];
            const T* iv = pimg.data.data();
            const T* gv = pgrid.data.data();
            T* gi = pimg.requires_grad ? grad_buffer(pimg).data() : nullptr;
            T* gg = pgrid.requires_grad ? grad_buffer(pgrid).data() : nullptr;
            auto inside = [&](int64_t y, int64_t x) { return x >= 0 && x < W && y >= 0 && y < H; };
            for (int64_t n = 0; n < N; ++n)
                for (int64_t i = 0; i < Ho; ++i)
                    for (int64_t j = 0; j < Wo; ++j) {
                        const T* g = gv + ((n * Ho + i) * Wo + j) * 2;
                        const auto c = locate(g[0], g[1], H, W);
                        const T wx0 = T(1) - c.wx1, wy0 = T(1) - c.wy1;
                        const int64_t xs[2] = {c.x0, c.x0 + 1};
                        const int64_t ys[2] = {c.y0, c.y0 + 1};
                        const T wxs[2] = {wx0, c.wx1};
                        const T wys[2] = {wy0, c.wy1};
                        T dix = 0, diy = 0;
                        for (int64_t ch = 0; ch < C; ++ch) {
                            const T go = self.grad[static_cast<size_t>(((n * C + ch) * Ho + i) * Wo + j)];
                            if (go == T(0)) continue;
                            const int64_t base = (n * C + ch) * H * W;
                            for (int a = 0; a < 2; ++a)
                                for (int b = 0; b < 2; ++b) {
                                    if (!inside(ys[a], xs[b])) continue;
                                    const int64_t idx = base + ys[a] * W + xs[b];
                                    if (gi) gi[idx] += go * wys[a] * wxs[b];
                                    const T v = iv[idx] * go;
                                    dix += v * wys[a] * (b == 0 ? T(-1) : T(1));
                                    diy += v * wxs[b] * (a == 0 ? T(-1) : T(1));
                                }
                        }
                        if (gg) {
                            T* gout = gg + ((n * Ho + i) * Wo + j) * 2;
                            gout[0] += dix * static_cast<T>(W) / T(2);
                            gout[1] += diy * static_cast<T>(H) / T(2);
                        }
                    }
        });
}

template <typename T>
BasicTensor<T> warp(const BasicTensor<T>& img, const BasicTensor<T>& theta) {
    return grid_sample_bilinear(img, affine_grid(theta, img.shape()));
}

#define VTMORPH_INSTANTIATE(T)                                                                 \
    template BasicTensor<T> theta_tensor<T>(const std::vector<AffineParams>&, bool);           \
    template std::vector<AffineParams> thetas_from_tensor<T>(const BasicTensor<T>&);           \
    template BasicTensor<T> affine_grid<T>(const BasicTensor<T>&, const Shape&);               \
    template BasicTensor<T> grid_sample_bilinear<T>(const BasicTensor<T>&, const BasicTensor<T>&); \
    template BasicTensor<T> warp<T>(const BasicTensor<T>&, const BasicTensor<T>&);

VTMORPH_INSTANTIATE(float)
VTMORPH_INSTANTIATE(double)

#undef VTMORPH_INSTANTIATE

}  // namespace vtmorph
