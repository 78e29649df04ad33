#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vtmorph/tensor.hpp"

namespace vtmorph {

struct GradCheckResult {
    // max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8);
    // +inf when the check could not run.
    double max_rel_error = 0.0;
    bool ok = true;
    std::string failure;
};

using ScalarFn = std::function<Tensor64(const Tensor64&)>;

// Central finite differences against reverse-mode gradients in 64-bit mode.
// eps must lie in [1e-7, 1e-3].
GradCheckResult grad_check(const ScalarFn& f, const Tensor64& x, double eps = 1e-6);

struct GradCase {
    std::string op;
    // Builds random inputs from the seed and returns the worst error over
    // every differentiable input of the op.
    std::function<GradCheckResult(uint64_t seed)> run;
};

// One entry per differentiable op, named after the op's graph-node name.
const std::vector<GradCase>& gradient_suite();

struct GradSuiteRow {
    std::string op;
    double worst_error = 0.0;
    uint64_t worst_seed = 0;
    bool passed = true;
    std::string failure;
};

struct GradSuiteReport {
    std::vector<GradSuiteRow> rows;
    double threshold = 1e-4;
    bool passed() const;
    const GradSuiteRow* worst() const;
};

GradSuiteReport run_gradient_suite(int seeds = 100, double threshold = 1e-4);

}  // namespace vtmorph
