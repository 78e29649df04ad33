#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vtmorph/networks.hpp"
#include "vtmorph/ops.hpp"
#include "vtmorph/rng.hpp"

using namespace vtmorph;

namespace {

Tensor random_batch(Shape shape, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::vector<float> v(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : v) x = static_cast<float>(rng.uniform(-scale, scale));
    return Tensor::from_vector(std::move(shape), std::move(v));
}

Tensor item(const Tensor& batch, int64_t i) { return slice(batch, 0, i, i + 1); }

}  // namespace

TEST_CASE("U-Net preserves shape and starts at zero output") {
    Rng rng(0);
    UNetGenerator<float> g({4, 8, true}, 64, rng);
    const auto y = g(random_batch({2, 1, 64, 64}, 1));
    CHECK(y.shape() == Shape{2, 1, 64, 64});
    CHECK(std::all_of(y.data().begin(), y.data().end(), [](float v) { return v == 0.0f; }));

    Rng rng32(0);
    UNetGenerator<float> g32({3, 8, true}, 32, rng32);
    CHECK(g32(random_batch({1, 1, 32, 32}, 2)).shape() == Shape{1, 1, 32, 32});
}

TEST_CASE("U-Net output stays within tanh range") {
    Rng rng(1);
    UNetGenerator<float> g({4, 8, false}, 64, rng);
    // 1000 random samples through the full network, in batches.
    float lo = 0, hi = 0;
    for (uint64_t b = 0; b < 10; ++b) {
        const auto y = g(random_batch({100, 1, 64, 64}, 10 + b, 3.0));
        const auto [mn, mx] = std::minmax_element(y.data().begin(), y.data().end());
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
    }
    CHECK(lo >= -1.0f);
    CHECK(hi <= 1.0f);
    CHECK(hi > lo);
}

TEST_CASE("U-Net rejects unsupported sizes") {
    Rng rng(0);
    CHECK_THROWS_AS(UNetGenerator<float>({4, 8, true}, 48, rng), std::invalid_argument);
    CHECK_THROWS_AS(UNetGenerator<float>({4, 8, true}, 16, rng), std::invalid_argument);
    CHECK_THROWS_AS(UNetGenerator<float>({6, 8, true}, 32, rng), std::invalid_argument);
    UNetGenerator<float> g({4, 8, true}, 64, rng);
    CHECK_THROWS_AS(g(random_batch({1, 1, 32, 32}, 0)), ShapeError);
}

TEST_CASE("patch discriminator emits a logit map, deterministic and input sensitive") {
    Rng rng(3), rng_again(3);
    PatchDiscriminator<float> d({3, 8}, 64, rng), d_again({3, 8}, 64, rng_again);
    const auto cond = random_batch({2, 1, 64, 64}, 4), cand = random_batch({2, 1, 64, 64}, 5);
    const auto logits = d(cond, cand);
    CHECK(logits.shape() == Shape{2, 1, 8, 8});
    const auto again = d_again(cond, cand);
    CHECK(std::equal(logits.data().begin(), logits.data().end(), again.data().begin()));

    const auto swapped = concat<float>({item(cand, 1), item(cand, 0)}, 0);
    const auto other = d(cond, swapped);
    bool changed = false;
    for (int64_t i = 0; i < logits.numel(); ++i) changed = changed || logits.data()[i] != other.data()[i];
    CHECK(changed);
    CHECK_THROWS_AS(d(cond, random_batch({2, 1, 32, 32}, 6)), ShapeError);
}

TEST_CASE("ViT: 64 tokens, row-stochastic attention, no cross-batch leakage") {
    Rng rng(7);
    VitConfig cfg;
    cfg.dim = 32;
    cfg.depth = 2;
    cfg.heads = 4;
    VitEncoder<float> vit(cfg, 64, rng);
    const auto x = random_batch({3, 2, 64, 64}, 8);
    std::vector<Tensor> attention;
    const auto e = vit(x, &attention);
    CHECK(e.shape() == Shape{3, 32});
    REQUIRE(attention.size() == 2);
    for (const auto& a : attention) {
        CHECK(a.shape() == Shape{3 * 4, 64, 64});
        for (int64_t r = 0; r < a.numel() / 64; ++r) {
            double s = 0;
            for (int64_t c = 0; c < 64; ++c) s += a.data()[static_cast<size_t>(r * 64 + c)];
            CHECK(std::abs(s - 1.0) < 1e-5);
        }
    }

    const auto permuted = vit(concat<float>({item(x, 2), item(x, 0), item(x, 1)}, 0));
    const int64_t perm[3] = {2, 0, 1};
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 32; ++j) CHECK(permuted.at({i, j}) == doctest::Approx(e.at({perm[i], j})).epsilon(1e-5));

    Rng r2(0);
    VitConfig bad = cfg;
    bad.patch = 4;
    CHECK_THROWS_AS(VitEncoder<float>(bad, 64, r2), std::invalid_argument);
    CHECK_THROWS_AS(VitEncoder<float>(cfg, 48, r2), std::invalid_argument);
}

TEST_CASE("regressor: five blocks, identity at step 0, width checks") {
    Rng rng(9);
    MlpRegressor<float> reg({16, {16, 16, 16, 16, 16}}, rng);
    CHECK(reg.block_count() == 5);
    const auto theta = reg(random_batch({4, 16}, 10, 5.0));
    CHECK(theta.shape() == Shape{4, 6});
    const float identity[6] = {1, 0, 0, 0, 1, 0};
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t k = 0; k < 6; ++k) CHECK(theta.at({i, k}) == identity[k]);
    CHECK_THROWS_AS(reg(random_batch({1, 8}, 0)), ShapeError);

    Rng rng2(9);
    MlpRegressor<float> two({16, {16, 16}}, rng2);
    CHECK(reg.params().scalar_count() > two.params().scalar_count());
}

TEST_CASE("gradient flows from theta back to the ViT patch embedding") {
    Rng rng(11);
    VitConfig cfg;
    cfg.dim = 16;
    cfg.depth = 1;
    cfg.heads = 2;
    VitEncoder<double> vit(cfg, 64, rng);
    MlpRegressor<double> reg({16, {16, 16, 16, 16, 16}}, rng);
    // Give the output layer nonzero weights so the path is live.
    for (auto& [name, t] : reg.params().items()) {
        if (name == "out.weight") {
            auto w = t;
            for (auto& v : w.mutable_data()) v = 0.05;
        }
    }
    std::vector<double> xv(2 * 64 * 64);
    Rng xr(12);
    for (auto& v : xv) v = xr.uniform(-1, 1);
    const auto x = Tensor64::from_vector({1, 2, 64, 64}, xv);
    auto loss = [&] { return sum(square(reg(vit(x)))); };
    auto weight = vit.params().get("patch_embed.weight");
    for (auto& p : vit.params().tensors()) p.zero_grad();
    backward(loss());
    REQUIRE(weight.has_grad());
    // Largest analytic entry, then a central difference on that single weight.
    size_t k = 0;
    for (size_t i = 0; i < weight.grad().size(); ++i)
        if (std::abs(weight.grad()[i]) > std::abs(weight.grad()[k])) k = i;
    const double analytic = weight.grad()[k];
    CHECK(analytic != 0.0);
    const double h = 1e-5, saved = weight.data()[k];
    weight.mutable_data()[k] = saved + h;
    const double up = loss().item();
    weight.mutable_data()[k] = saved - h;
    const double down = loss().item();
    weight.mutable_data()[k] = saved;
    CHECK(std::abs((up - down) / (2 * h) - analytic) <= 1e-4 * std::max(1.0, std::abs(analytic)));
}
