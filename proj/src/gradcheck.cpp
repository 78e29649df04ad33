#include "vtmorph/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vtmorph {

GradCheckResult grad_check(const ScalarFn& f, const Tensor64& x, double eps) {
    GradCheckResult result;
    auto fail = [&](std::string why) {
        result.ok = false;
        result.max_rel_error = std::numeric_limits<double>::infinity();
        result.failure = std::move(why);
        return result;
    };
    if (!(eps >= 1e-7 && eps <= 1e-3)) return fail("eps outside [1e-7, 1e-3]");

    std::vector<double> analytic;
    std::vector<double> base(x.data().begin(), x.data().end());
    try {
        auto leaf = Tensor64::from_vector(x.shape(), base, true);
        auto y = f(leaf);
        if (y.numel() != 1) return fail("function is not scalar-valued: " + shape_str(y.shape()));
        if (y.requires_grad()) {
            backward(y);
            analytic.assign(leaf.grad().begin(), leaf.grad().end());
        } else {
            analytic.assign(base.size(), 0.0);
        }
    } catch (const std::exception& e) {
        return fail(std::string("analytic pass failed: ") + e.what());
    }

    NoGradGuard no_grad;
    for (size_t i = 0; i < base.size(); ++i) {
        double fp, fm;
        try {
            auto plus = base;
            plus[i] += eps;
            fp = f(Tensor64::from_vector(x.shape(), std::move(plus))).item();
            auto minus = base;
            minus[i] -= eps;
            fm = f(Tensor64::from_vector(x.shape(), std::move(minus))).item();
        } catch (const std::exception& e) {
            return fail(std::string("numeric pass failed: ") + e.what());
        }
        const double numeric = (fp - fm) / (2.0 * eps);
        if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) return fail("non-finite gradient value");
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic[i] - numeric) / denom);
    }
    return result;
}

bool GradSuiteReport::passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const GradSuiteRow& r) { return r.passed; });
}

const GradSuiteRow* GradSuiteReport::worst() const {
    const GradSuiteRow* w = nullptr;
    for (const auto& r : rows) {
        if (!w || r.worst_error > w->worst_error) w = &r;
    }
    return w;
}

GradSuiteReport run_gradient_suite(int seeds, double threshold) {
    GradSuiteReport report;
    report.threshold = threshold;
    for (const auto& c : gradient_suite()) {
        GradSuiteRow row;
        row.op = c.op;
        for (int s = 0; s < seeds; ++s) {
            const auto seed = static_cast<uint64_t>(s) + 1;
            const auto r = c.run(seed);
            if (!r.ok && row.failure.empty()) row.failure = r.failure;
            if (!(r.max_rel_error <= row.worst_error)) {
                row.worst_error = r.max_rel_error;
                row.worst_seed = seed;
            }
        }
        row.passed = row.failure.empty() && row.worst_error < threshold;
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace vtmorph
