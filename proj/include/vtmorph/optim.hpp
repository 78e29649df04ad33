#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vtmorph/tensor.hpp"

namespace vtmorph {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moment buffers for one parameter group. A group owns its state exclusively;
// separate networks that must not share statistics get separate states.
template <typename T>
struct OptimState {
    AdamConfig config;
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;
    int64_t step = 0;

    OptimState() = default;
    OptimState(const std::vector<BasicTensor<T>>& params, AdamConfig cfg);
};

// Bias-corrected Adam update using explicit gradients (one per parameter).
template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, const std::vector<std::span<const T>>& grads,
               OptimState<T>& state);

// Same, reading each parameter's accumulated gradient; a parameter without a
// gradient buffer counts as zero gradient.
template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, OptimState<T>& state);

template <typename T>
void zero_grads(std::vector<BasicTensor<T>>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace vtmorph
