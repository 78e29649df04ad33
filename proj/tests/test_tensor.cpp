#include <doctest.h>

#include <chrono>
#include <cmath>

#include "vtmorph/gradcheck.hpp"
#include "vtmorph/ops.hpp"
#include "vtmorph/optim.hpp"

using namespace vtmorph;

TEST_CASE("matmul shape arithmetic") {
    auto a = Tensor::full({2, 3}, 1.0f);
    auto b = Tensor::full({3, 4}, 2.0f);
    auto c = matmul(a, b);
    CHECK(c.shape() == Shape{2, 4});
    for (float v : c.data()) CHECK(v == 6.0f);
}

TEST_CASE("relu on a small vector") {
    auto y = relu(Tensor::from_vector({3}, {-1.0f, 0.0f, 2.0f}));
    CHECK(std::vector<float>(y.data().begin(), y.data().end()) == std::vector<float>{0.0f, 0.0f, 2.0f});
}

TEST_CASE("same-padded 3x3 conv keeps the extent") {
    auto x = Tensor::full({1, 1, 8, 8}, 1.0f);
    auto w = Tensor::full({1, 1, 3, 3}, 1.0f);
    auto y = conv2d(x, w, Tensor{}, 1, 1);
    CHECK(y.shape() == Shape{1, 1, 8, 8});
    CHECK(y.at({0, 0, 0, 0}) == 4.0f);
    CHECK(y.at({0, 0, 3, 3}) == 9.0f);
}

TEST_CASE("gradient of a sum of squares") {
    auto x = Tensor64::from_vector({2}, {1.0, 2.0}, true);
    backward(sum(mul(x, x)));
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 4.0);
}

TEST_CASE("gradient of sum(W v) has outer-product structure") {
    // d/dW_ij sum_i (W v)_i = v_j for every row i.
    auto W = Tensor64::from_vector({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    auto v = Tensor64::from_vector({3, 1}, {0.5, -1.0, 2.0});
    backward(sum(matmul(W, v)));
    const std::vector<double> expected{0.5, -1.0, 2.0, 0.5, -1.0, 2.0};
    for (size_t i = 0; i < expected.size(); ++i) CHECK(W.grad()[i] == expected[i]);
}

TEST_CASE("leaf gradients accumulate until zeroed") {
    auto x = Tensor64::from_vector({2}, {1.0, -3.0}, true);
    backward(sum(mul_scalar(x, 2.0)));
    backward(sum(mul_scalar(x, 2.0)));
    CHECK(x.grad()[0] == 4.0);
    x.zero_grad();
    CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("backward rejects non-scalar and detached losses") {
    auto x = Tensor64::from_vector({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(backward(mul(x, x)), GraphError);
    CHECK_THROWS_AS(backward(sum(x).detach()), GraphError);
}

TEST_CASE("non-finite inputs are rejected") {
    CHECK_THROWS_AS(Tensor::from_vector({1}, {std::nanf("")}), NonFiniteError);
    CHECK_THROWS_AS(vtmorph::log(Tensor64::from_vector({1}, {0.0})), NonFiniteError);
}

TEST_CASE("intermediate gradients are released after backward") {
    auto x = Tensor64::from_vector({3}, {1.0, 2.0, 3.0}, true);
    auto h = mul(x, x);
    backward(sum(h));
    CHECK_FALSE(h.has_grad());
    CHECK(x.has_grad());
}

TEST_CASE("no-grad mode records nothing") {
    auto x = Tensor64::from_vector({2}, {1.0, 2.0}, true);
    NoGradGuard guard;
    auto y = sum(mul(x, x));
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("grad_check examples") {
    auto x = Tensor64::from_vector({4}, {0.3, -1.2, 2.0, 0.7});
    auto sq = grad_check([](const Tensor64& t) { return sum(square(t)); }, x);
    CHECK(sq.ok);
    CHECK(sq.max_rel_error < 1e-6);

    auto constant = grad_check([](const Tensor64&) { return Tensor64::scalar(3.0); }, x);
    CHECK(constant.max_rel_error == 0.0);

    // Softmax cross-entropy of random logits against class 2.
    auto logits = Tensor64::from_vector({1, 5}, {0.4, -1.1, 0.9, 2.2, -0.3});
    auto onehot = Tensor64::from_vector({1, 5}, {0, 0, 1, 0, 0});
    auto ce = grad_check([&](const Tensor64& t) { return mul_scalar(sum(mul(log_softmax(t), onehot)), -1.0); }, logits);
    CHECK(ce.max_rel_error < 1e-4);

    CHECK_FALSE(grad_check([](const Tensor64& t) { return sum(t); }, x, 1e-2).ok);
    auto bad = grad_check([](const Tensor64& t) { return sum(vtmorph::log(t)); }, x);
    CHECK_FALSE(bad.ok);
    CHECK(std::isinf(bad.max_rel_error));
}

TEST_CASE("gradient suite covers every op and passes") {
    const auto start = std::chrono::steady_clock::now();
    auto report = run_gradient_suite(100, 1e-4);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& row : report.rows) {
        INFO(row.op << " worst " << row.worst_error << " seed " << row.worst_seed << " " << row.failure);
        CHECK(row.passed);
    }
    CHECK(report.rows.size() >= 33);
    CHECK(seconds < 120.0);
}

TEST_CASE("a corrupted backward is caught") {
    testing_hooks::corrupt_gradient("gelu");
    auto report = run_gradient_suite(3, 1e-4);
    testing_hooks::clear_corruption();
    CHECK_FALSE(report.passed());
    CHECK(std::string(report.worst()->op) == "gelu");
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    std::vector<Tensor> params{Tensor::from_vector({2}, {1.0f, -2.0f}, true)};
    OptimState<float> state(params, {});
    std::vector<float> zeros(2, 0.0f);
    adam_step(params, {std::span<const float>(zeros)}, state);
    CHECK(params[0].data()[0] == 1.0f);
    CHECK(params[0].data()[1] == -2.0f);
    CHECK(state.step == 1);
}

TEST_CASE("adam first step moves by the learning rate") {
    std::vector<Tensor64> params{Tensor64::from_vector({1}, {0.0}, true)};
    OptimState<double> state(params, {.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8});
    std::vector<double> g{1.0};
    adam_step(params, {std::span<const double>(g)}, state);
    CHECK(params[0].data()[0] == doctest::Approx(-0.1).epsilon(1e-6));
    const double after_one = params[0].data()[0];
    adam_step(params, {std::span<const double>(g)}, state);
    CHECK(params[0].data()[0] < after_one);
}

TEST_CASE("adam rejects mismatched gradients") {
    std::vector<Tensor> params{Tensor::zeros({2}, true)};
    OptimState<float> state(params, {});
    std::vector<float> g(3, 0.0f);
    CHECK_THROWS(adam_step(params, {std::span<const float>(g)}, state));
}
