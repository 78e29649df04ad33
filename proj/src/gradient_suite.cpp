#include <algorithm>
#include <cmath>

#include "vtmorph/gradcheck.hpp"
#include "vtmorph/ops.hpp"
#include "vtmorph/rng.hpp"
#include "vtmorph/spatial.hpp"

namespace vtmorph {

namespace {

using T64 = Tensor64;

T64 uniform_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
    std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return T64::from_vector(shape, std::move(v));
}

// Magnitudes in [0.1, 1] with random sign: keeps inputs clear of the kinks
// of relu, leaky_relu and abs.
T64 signed_tensor(const Shape& shape, Rng& rng) {
    std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
    return T64::from_vector(shape, std::move(v));
}

// Distinct values at least 0.05 apart, so max-pool winners cannot swap under
// a finite-difference nudge.
T64 distinct_tensor(const Shape& shape, Rng& rng) {
    const auto n = static_cast<size_t>(shape_numel(shape));
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = 0.1 * static_cast<double>(i) + rng.uniform(0.0, 0.05) - 0.5;
    rng.shuffle(v.begin(), v.end());
    return T64::from_vector(shape, std::move(v));
}

// Reduces an op output to a scalar with random weights, so every output
// coordinate contributes with a different sensitivity.
T64 weighted_sum(const T64& y, Rng& rng) {
    auto w = uniform_tensor(y.shape(), rng, -1.5, 1.5);
    return sum(mul(y, w));
}

using MultiFn = std::function<T64(const std::vector<T64>&)>;

// Checks the gradient with respect to every input in turn, holding the
// others fixed, and keeps the worst result.
GradCheckResult check_all(const std::vector<T64>& inputs, const MultiFn& f, uint64_t weight_seed) {
    GradCheckResult worst;
    for (size_t k = 0; k < inputs.size(); ++k) {
        auto fn = [&, k](const T64& x) {
            auto args = inputs;
            args[k] = x;
            Rng wr(weight_seed);
            return weighted_sum(f(args), wr);
        };
        auto r = grad_check(fn, inputs[k]);
        if (!r.ok) return r;
        worst.max_rel_error = std::max(worst.max_rel_error, r.max_rel_error);
    }
    return worst;
}

GradCase unary(std::string op, std::function<T64(const T64&)> f, std::function<T64(Rng&)> make) {
    return {std::move(op), [f, make](uint64_t seed) {
                Rng rng(seed);
                auto x = make(rng);
                return check_all({x}, [&](const std::vector<T64>& a) { return f(a[0]); }, rng.next_u64());
            }};
}

GradCase multi(std::string op, MultiFn f, std::function<std::vector<T64>(Rng&)> make) {
    return {std::move(op), [f, make](uint64_t seed) {
                Rng rng(seed);
                auto xs = make(rng);
                return check_all(xs, f, rng.next_u64());
            }};
}

// Normalized grid coordinates kept 0.02 away from every pixel-center line,
// where bilinear interpolation has a kink.
T64 safe_grid(const Shape& shape, int64_t W, int64_t H, Rng& rng) {
    std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
    for (size_t i = 0; i < v.size(); ++i) {
        const int64_t extent = (i % 2 == 0) ? W : H;
        double g;
        bool near;
        do {
            g = rng.uniform(-1.2, 1.2);
            near = false;
            for (int64_t k = -1; k <= extent; ++k) {
                const double center = (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(extent) - 1.0;
                near = near || std::abs(g - center) < 0.02;
            }
        } while (near);
        v[i] = g;
    }
    return T64::from_vector(shape, std::move(v));
}

std::vector<GradCase> build_suite() {
    std::vector<GradCase> s;
    auto u = [](Shape shape, double lo, double hi) {
        return [shape, lo, hi](Rng& r) { return uniform_tensor(shape, r, lo, hi); };
    };

    s.push_back(multi("add", [](const std::vector<T64>& a) { return add(a[0], a[1]); },
                      [](Rng& r) { return std::vector{uniform_tensor({2, 3, 2}, r, -1, 1), uniform_tensor({3, 1}, r, -1, 1)}; }));
    s.push_back(multi("sub", [](const std::vector<T64>& a) { return sub(a[0], a[1]); },
                      [](Rng& r) { return std::vector{uniform_tensor({2, 1, 3}, r, -1, 1), uniform_tensor({4, 1}, r, -1, 1)}; }));
    s.push_back(multi("mul", [](const std::vector<T64>& a) { return mul(a[0], a[1]); },
                      [](Rng& r) { return std::vector{uniform_tensor({3, 4}, r, -1, 1), uniform_tensor({4}, r, -1, 1)}; }));
    s.push_back(unary("add_scalar", [](const T64& x) { return add_scalar(x, 0.7); }, u({2, 4}, -1, 1)));
    s.push_back(unary("mul_scalar", [](const T64& x) { return mul_scalar(x, -1.3); }, u({2, 4}, -1, 1)));
    s.push_back(multi("matmul",
                      [](const std::vector<T64>& a) {
                          // Plain and batched forms share the node name.
                          auto plain = matmul(a[0], a[1]);
                          auto batched = matmul(reshape(a[0], {2, 1, 3}), reshape(a[2], {2, 3, 2}));
                          return concat<double>({reshape(plain, {-1}), reshape(batched, {-1})}, 0);
                      },
                      [](Rng& r) {
                          return std::vector{uniform_tensor({2, 3}, r, -1, 1), uniform_tensor({3, 4}, r, -1, 1),
                                             uniform_tensor({2, 3, 2}, r, -1, 1)};
                      }));
    s.push_back(multi("conv2d",
                      [](const std::vector<T64>& a) {
                          auto same = conv2d(a[0], a[1], a[2], 1, 1);
                          auto strided = conv2d(a[0], a[1], a[2], 2, 0);
                          return concat<double>({reshape(same, {-1}), reshape(strided, {-1})}, 0);
                      },
                      [](Rng& r) {
                          return std::vector{uniform_tensor({1, 1, 4, 4}, r, -1, 1), uniform_tensor({2, 1, 2, 2}, r, -1, 1),
                                             uniform_tensor({2}, r, -1, 1)};
                      }));
    s.push_back(multi("conv_transpose2d",
                      [](const std::vector<T64>& a) { return conv_transpose2d(a[0], a[1], a[2], 2, 1); },
                      [](Rng& r) {
                          return std::vector{uniform_tensor({1, 2, 2, 2}, r, -1, 1), uniform_tensor({2, 1, 4, 4}, r, -1, 1),
                                             uniform_tensor({1}, r, -1, 1)};
                      }));
    s.push_back(unary("avg_pool2d", [](const T64& x) { return avg_pool2d(x, 2, 2); }, u({1, 1, 4, 4}, -1, 1)));
    s.push_back(unary("max_pool2d", [](const T64& x) { return max_pool2d(x, 2, 2); },
                      [](Rng& r) { return distinct_tensor({1, 1, 4, 4}, r); }));
    s.push_back(unary("relu", [](const T64& x) { return relu(x); }, [](Rng& r) { return signed_tensor({3, 4}, r); }));
    s.push_back(unary("leaky_relu", [](const T64& x) { return leaky_relu(x, 0.2); },
                      [](Rng& r) { return signed_tensor({3, 4}, r); }));
    s.push_back(unary("sigmoid", [](const T64& x) { return sigmoid(x); }, u({3, 4}, -3, 3)));
    s.push_back(unary("tanh", [](const T64& x) { return vtmorph::tanh(x); }, u({3, 4}, -2, 2)));
    s.push_back(unary("gelu", [](const T64& x) { return gelu(x); }, u({3, 4}, -3, 3)));
    s.push_back(unary("abs", [](const T64& x) { return vtmorph::abs(x); }, [](Rng& r) { return signed_tensor({3, 4}, r); }));
    s.push_back(unary("square", [](const T64& x) { return square(x); }, u({3, 4}, -2, 2)));
    s.push_back(unary("exp", [](const T64& x) { return vtmorph::exp(x); }, u({3, 4}, -2, 2)));
    s.push_back(unary("log", [](const T64& x) { return vtmorph::log(x); }, u({3, 4}, 0.2, 3)));
    s.push_back(unary("softmax", [](const T64& x) { return softmax(x); }, u({2, 5}, -2, 2)));
    s.push_back(unary("log_softmax", [](const T64& x) { return log_softmax(x); }, u({2, 5}, -2, 2)));
    s.push_back(unary("instance_norm", [](const T64& x) { return instance_norm(x); }, u({1, 2, 2, 3}, -1, 1)));
    s.push_back(unary("layer_norm", [](const T64& x) { return layer_norm(x); }, u({3, 4}, -1, 1)));
    s.push_back(unary("reshape", [](const T64& x) { return reshape(x, {4, -1}); }, u({2, 3, 2}, -1, 1)));
    s.push_back(unary("transpose", [](const T64& x) { return transpose(x, 0, 2); }, u({2, 3, 2}, -1, 1)));
    s.push_back(multi("concat", [](const std::vector<T64>& a) { return concat(a, 1); },
                      [](Rng& r) { return std::vector{uniform_tensor({2, 3}, r, -1, 1), uniform_tensor({2, 2}, r, -1, 1)}; }));
    s.push_back(unary("slice", [](const T64& x) { return slice(x, 1, 1, 3); }, u({3, 4}, -1, 1)));
    s.push_back(unary("sum", [](const T64& x) { return mul(sum(x), sum(x)); }, u({3, 4}, -1, 1)));
    s.push_back(unary("sum_axis", [](const T64& x) { return sum(x, 1, true); }, u({3, 4}, -1, 1)));
    s.push_back(unary("mean", [](const T64& x) { return mul(mean(x), mean(x)); }, u({3, 4}, -1, 1)));
    s.push_back(unary("mean_axis", [](const T64& x) { return mean(x, 0); }, u({3, 4}, -1, 1)));
    s.push_back(unary("affine_grid", [](const T64& theta) { return affine_grid(theta, {2, 1, 2, 3}); }, u({2, 6}, -1, 1)));
    s.push_back(multi("grid_sample", [](const std::vector<T64>& a) { return grid_sample_bilinear(a[0], a[1]); },
                      [](Rng& r) {
                          return std::vector{uniform_tensor({1, 1, 3, 3}, r, -1, 1), safe_grid({1, 2, 2, 2}, 3, 3, r)};
                      }));
    return s;
}

}  // namespace

const std::vector<GradCase>& gradient_suite() {
    static const std::vector<GradCase> suite = build_suite();
    return suite;
}

}  // namespace vtmorph
