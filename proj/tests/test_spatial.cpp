#include <doctest.h>

#include <cmath>
#include <numbers>

#include "vtmorph/gradcheck.hpp"
#include "vtmorph/ops.hpp"
#include "vtmorph/rng.hpp"
#include "vtmorph/spatial.hpp"

using namespace vtmorph;

namespace {

AffineParams random_mild(Rng& rng) {
    return AffineParams::from_components(rng.uniform(0.9, 1.1), rng.uniform(-0.17, 0.17), rng.uniform(-0.05, 0.05),
                                         rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15));
}

bool near(const AffineParams& a, const AffineParams& b, double tol) {
    for (size_t i = 0; i < 6; ++i)
        if (std::abs(a.v[i] - b.v[i]) > tol) return false;
    return true;
}

// Smooth test image in [0, 1].
Tensor blob_image(int64_t size) {
    std::vector<float> v(static_cast<size_t>(size * size));
    for (int64_t i = 0; i < size; ++i)
        for (int64_t j = 0; j < size; ++j) {
            const double y = (2.0 * i + 1.0) / size - 1.0, x = (2.0 * j + 1.0) / size - 1.0;
            v[static_cast<size_t>(i * size + j)] =
                static_cast<float>(0.5 + 0.3 * std::sin(3.0 * x) * std::cos(2.0 * y) + 0.15 * std::exp(-4.0 * (x * x + y * y)));
        }
    return Tensor::from_vector({1, 1, size, size}, std::move(v));
}

}  // namespace

TEST_CASE("identity grid is the canonical pixel-center mesh") {
    auto g = affine_grid(theta_tensor<double>({AffineParams::identity()}), {1, 1, 3, 4});
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 4; ++j) {
            CHECK(g.at({0, i, j, 0}) == doctest::Approx((2.0 * j + 1.0) / 4.0 - 1.0));
            CHECK(g.at({0, i, j, 1}) == doctest::Approx((2.0 * i + 1.0) / 3.0 - 1.0));
        }
}

TEST_CASE("translation theta shifts every x coordinate") {
    auto base = affine_grid(theta_tensor<double>({AffineParams::identity()}), {1, 1, 4, 4});
    auto g = affine_grid(theta_tensor<double>({AffineParams::translation(0.5, 0.0)}), {1, 1, 4, 4});
    for (int64_t k = 0; k < 32; k += 2) {
        CHECK(g.data()[k] == doctest::Approx(base.data()[k] + 0.5));
        CHECK(g.data()[k + 1] == base.data()[k + 1]);
    }
}

TEST_CASE("quarter turn maps the top-right corner to the top-left") {
    const auto [x, y] = AffineParams::rotation(std::numbers::pi / 2).apply(1.0, -1.0);
    CHECK(x == doctest::Approx(-1.0));
    CHECK(y == doctest::Approx(-1.0));
}

TEST_CASE("identity warp is exact") {
    for (int64_t size : {64, 48, 37}) {
        auto img = blob_image(size);
        auto out = warp(img, theta_tensor<float>({AffineParams::identity()}));
        CHECK(std::equal(out.data().begin(), out.data().end(), img.data().begin()));
    }
}

TEST_CASE("one-pixel translation of a ramp shifts indices and pads with zero") {
    std::vector<double> ramp(16);
    for (int i = 0; i < 16; ++i) ramp[static_cast<size_t>(i)] = i + 1;
    auto img = Tensor64::from_vector({1, 1, 4, 4}, ramp);
    // Sampling one pixel to the right: out(i, j) = in(i, j + 1).
    auto out = warp(img, theta_tensor<double>({AffineParams::translation(2.0 / 4.0, 0.0)}));
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t j = 0; j < 4; ++j) {
            const double expected = j + 1 < 4 ? ramp[static_cast<size_t>(i * 4 + j + 1)] : 0.0;
            CHECK(out.at({0, 0, i, j}) == doctest::Approx(expected).epsilon(1e-12));
        }
}

TEST_CASE("warp is linear in the image and preserves constants in bounds") {
    Rng rng(5);
    auto img = blob_image(32);
    auto theta = theta_tensor<float>({AffineParams::from_components(0.8, 0.1, 0.0, 0.02, -0.03)});
    auto a = warp(img, theta);
    auto b = warp(mul_scalar(img, 3.0f), theta);
    for (int64_t k = 0; k < a.numel(); ++k) CHECK(b.data()[k] == doctest::Approx(3.0f * a.data()[k]).epsilon(1e-5));

    auto flat = warp(Tensor::full({1, 1, 32, 32}, 0.7f), theta);
    for (float v : flat.data()) CHECK(v == doctest::Approx(0.7f).epsilon(1e-6));
}

TEST_CASE("affine_grid is exactly linear in theta") {
    Rng rng(11);
    std::vector<double> t1(6), t2(6), ts(6);
    for (size_t k = 0; k < 6; ++k) {
        t1[k] = rng.uniform(-1, 1);
        t2[k] = rng.uniform(-1, 1);
        ts[k] = t1[k] + t2[k];
    }
    const Shape shape{1, 1, 5, 6};
    auto g1 = affine_grid(Tensor64::from_vector({1, 6}, t1), shape);
    auto g2 = affine_grid(Tensor64::from_vector({1, 6}, t2), shape);
    auto gs = affine_grid(Tensor64::from_vector({1, 6}, ts), shape);
    auto g0 = affine_grid(Tensor64::zeros({1, 6}), shape);
    for (int64_t k = 0; k < gs.numel(); ++k)
        CHECK(gs.data()[k] == doctest::Approx(g1.data()[k] + g2.data()[k] - g0.data()[k]).epsilon(1e-14));
}

TEST_CASE("round-trip warp recovers the interior") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto theta = random_mild(rng);
        auto img = blob_image(64);
        auto there = warp(img, theta_tensor<float>({theta}));
        auto back = warp(there, theta_tensor<float>({invert(theta)}));
        double err = 0.0;
        int count = 0;
        for (int64_t i = 16; i < 48; ++i)
            for (int64_t j = 16; j < 48; ++j) {
                err += std::abs(back.at({0, 0, i, j}) - img.at({0, 0, i, j}));
                ++count;
            }
        CHECK(err / count < 0.02);
    }
}

TEST_CASE("invert and compose") {
    CHECK(invert(AffineParams::identity()) == AffineParams::identity());
    CHECK(near(invert(AffineParams::translation(0.3, -0.2)), AffineParams::translation(-0.3, 0.2), 0.0));
    CHECK(near(compose(AffineParams::rotation(0.3), AffineParams::rotation(0.5)), AffineParams::rotation(0.8), 1e-12));

    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        const auto t = random_mild(rng);
        CHECK(near(compose(invert(t), t), AffineParams::identity(), 1e-6));
        CHECK(near(compose(t, invert(t)), AffineParams::identity(), 1e-6));
    }

    AffineParams singular{{1.0, 2.0, 0.0, 2.0, 4.0, 0.0}};
    try {
        invert(singular);
        FAIL("expected SingularTransformError");
    } catch (const SingularTransformError& e) {
        CHECK(e.determinant == 0.0);
    }
}

TEST_CASE("composed warps match one warp by the composed theta") {
    auto img = blob_image(64);
    const auto first = AffineParams::from_components(1.05, 0.1, 0.0, 0.05, 0.0);
    const auto second = AffineParams::translation(0.0, 0.08);
    auto twice = warp(warp(img, theta_tensor<float>({first})), theta_tensor<float>({second}));
    auto once = warp(img, theta_tensor<float>({compose(first, second)}));
    double err = 0.0;
    for (int64_t i = 16; i < 48; ++i)
        for (int64_t j = 16; j < 48; ++j) err += std::abs(twice.at({0, 0, i, j}) - once.at({0, 0, i, j}));
    CHECK(err / (32.0 * 32.0) < 0.01);
}

TEST_CASE("corner error") {
    const auto t = AffineParams::from_components(1.02, 0.1, 0.01, 0.03, -0.04);
    CHECK(corner_error(t, t, 64, 64) == 0.0);
    CHECK(corner_error(AffineParams::translation(2.0 / 64.0, 0.0), AffineParams::identity(), 64, 64) == 1.0);
    CHECK(corner_error(AffineParams::identity(), AffineParams::translation(0.0, 2.0 / 48.0), 48, 80) ==
          doctest::Approx(1.0).epsilon(1e-15));

    // Independent per-corner hand mapping.
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_mild(rng), q = random_mild(rng);
        const int64_t H = 40, W = 64;
        double total = 0.0;
        const double corners[4][2] = {{-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
        for (const auto& c : corners) {
            const double px = p.v[0] * c[0] + p.v[1] * c[1] + p.v[2], py = p.v[3] * c[0] + p.v[4] * c[1] + p.v[5];
            const double qx = q.v[0] * c[0] + q.v[1] * c[1] + q.v[2], qy = q.v[3] * c[0] + q.v[4] * c[1] + q.v[5];
            const double dx = (px - qx) * W / 2.0, dy = (py - qy) * H / 2.0;
            total += std::sqrt(dx * dx + dy * dy);
        }
        CHECK(corner_error(p, q, H, W) == doctest::Approx(total / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("theta text round trips exactly") {
    Rng rng(29);
    for (int i = 0; i < 100; ++i) {
        const auto t = random_mild(rng);
        CHECK(parse_theta(format_theta(t)) == t);
    }
    CHECK(format_theta(AffineParams::identity()) == "1,0,0,0,1,0");
    CHECK_THROWS(parse_theta("1,0,0,0,1"));
    CHECK_THROWS(parse_theta("1,0,0,0,1,x"));
    CHECK_THROWS(parse_theta("1,0,0,0,1,0,0"));
}

TEST_CASE("grid gradient matches finite differences") {
    Rng rng(31);
    auto img = Tensor64::from_vector({1, 1, 5, 5}, [&] {
        std::vector<double> v(25);
        for (auto& x : v) x = rng.uniform();
        return v;
    }());
    const auto theta = AffineParams::from_components(0.93, 0.07, 0.02, 0.031, -0.017);
    auto r = grad_check([&](const Tensor64& th) { return sum(warp(img, th)); }, theta_tensor<double>({theta}));
    CHECK(r.ok);
    CHECK(r.max_rel_error < 1e-3);

    auto th = theta_tensor<double>({theta}, true);
    backward(sum(warp(img, th)));
    double norm = 0.0;
    for (double g : th.grad()) norm += g * g;
    CHECK(norm > 0.0);
}

TEST_CASE("shape mismatches are rejected") {
    CHECK_THROWS_AS(affine_grid(Tensor::zeros({2, 6}), {1, 1, 4, 4}), ShapeError);
    CHECK_THROWS_AS(affine_grid(Tensor::zeros({1, 5}), {1, 1, 4, 4}), ShapeError);
    CHECK_THROWS_AS(grid_sample_bilinear(Tensor::zeros({1, 1, 4, 4}), Tensor::zeros({2, 4, 4, 2})), ShapeError);
}
