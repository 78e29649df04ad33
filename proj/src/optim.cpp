#include "vtmorph/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace vtmorph {

template <typename T>
OptimState<T>::OptimState(const std::vector<BasicTensor<T>>& params, AdamConfig cfg) : config(cfg) {
    if (!(cfg.lr > 0 && cfg.beta1 > 0 && cfg.beta1 < 1 && cfg.beta2 > 0 && cfg.beta2 < 1 && cfg.eps > 0)) {
        throw std::invalid_argument("adam: hyperparameters must be positive with betas below 1");
    }
    for (const auto& p : params) {
        first_moment.emplace_back(static_cast<size_t>(p.numel()), T(0));
        second_moment.emplace_back(static_cast<size_t>(p.numel()), T(0));
    }
}

template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, const std::vector<std::span<const T>>& grads,
               OptimState<T>& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw ShapeError("adam: " + std::to_string(params.size()) + " params, " + std::to_string(grads.size()) +
                         " grads, " + std::to_string(state.first_moment.size()) + " moment buffers");
    }
    for (size_t i = 0; i < params.size(); ++i) {
        const auto n = static_cast<size_t>(params[i].numel());
        if (grads[i].size() != n || state.first_moment[i].size() != n || state.second_moment[i].size() != n) {
            throw ShapeError("adam: size mismatch for parameter " + std::to_string(i) + " of shape " +
                             shape_str(params[i].shape()));
        }
    }
    state.step += 1;
    const auto& cfg = state.config;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    for (size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].mutable_data();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const auto g = grads[i];
        for (size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * g[j];
            v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
            const double m_hat = static_cast<double>(m[j]) / c1;
            const double v_hat = static_cast<double>(v[j]) / c2;
            p[j] -= static_cast<T>(cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
        }
    }
}

template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, OptimState<T>& state) {
    std::vector<std::vector<T>> zeros;
    std::vector<std::span<const T>> grads;
    grads.reserve(params.size());
    zeros.reserve(params.size());
    for (auto& p : params) {
        if (p.has_grad()) {
            grads.push_back(p.grad());
        } else {
            zeros.emplace_back(static_cast<size_t>(p.numel()), T(0));
            grads.emplace_back(zeros.back());
        }
    }
    adam_step(params, grads, state);
}

template struct OptimState<float>;
template struct OptimState<double>;
template void adam_step<float>(std::vector<Tensor>&, const std::vector<std::span<const float>>&, OptimState<float>&);
template void adam_step<double>(std::vector<Tensor64>&, const std::vector<std::span<const double>>&,
                                OptimState<double>&);
template void adam_step<float>(std::vector<Tensor>&, OptimState<float>&);
template void adam_step<double>(std::vector<Tensor64>&, OptimState<double>&);

}  // namespace vtmorph
