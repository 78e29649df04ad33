#pragma once

// Parameterized layers and the named-parameter registry shared by every network.

#include <string>
#include <utility>
#include <vector>

#include "vtmorph/ops.hpp"
#include "vtmorph/rng.hpp"

namespace vtmorph {

template <typename T>
class ParamList {
public:
    void add(std::string name, BasicTensor<T> tensor);
    const std::vector<std::pair<std::string, BasicTensor<T>>>& items() const { return items_; }
    std::vector<BasicTensor<T>> tensors() const;
    // Throws std::out_of_range for unknown names.
    const BasicTensor<T>& get(const std::string& name) const;
    int64_t scalar_count() const;

private:
    std::vector<std::pair<std::string, BasicTensor<T>>> items_;
};

namespace init {
template <typename T>
BasicTensor<T> normal(Shape shape, double stddev, Rng& rng);
// U(-b, b) with b = sqrt(6 / fan_in): keeps ReLU activations at unit scale.
template <typename T>
BasicTensor<T> kaiming_uniform(Shape shape, int64_t fan_in, Rng& rng);
}  // namespace init

template <typename T>
struct Linear {
    BasicTensor<T> weight;  // in x out
    BasicTensor<T> bias;    // out

    Linear() = default;
    // init_std > 0: N(0, init_std); == 0: zeros; < 0: Kaiming uniform.
    Linear(int64_t in, int64_t out, Rng& rng, double init_std = -1.0);
    BasicTensor<T> operator()(const BasicTensor<T>& x) const;
    void register_params(ParamList<T>& params, const std::string& prefix) const;
    int64_t in_features() const { return weight.size(0); }
    int64_t out_features() const { return weight.size(1); }
};

template <typename T>
struct Conv2d {
    BasicTensor<T> weight;  // out x in x k x k
    BasicTensor<T> bias;    // out, may be undefined
    int64_t stride = 1;
    int64_t padding = 0;

    Conv2d() = default;
    Conv2d(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding, bool with_bias, double init_std,
           Rng& rng);
    BasicTensor<T> operator()(const BasicTensor<T>& x) const;
    void register_params(ParamList<T>& params, const std::string& prefix) const;
};

template <typename T>
struct ConvTranspose2d {
    BasicTensor<T> weight;  // in x out x k x k
    BasicTensor<T> bias;
    int64_t stride = 2;
    int64_t padding = 1;

    ConvTranspose2d() = default;
    ConvTranspose2d(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding, bool with_bias,
                    double init_std, Rng& rng);
    BasicTensor<T> operator()(const BasicTensor<T>& x) const;
    void register_params(ParamList<T>& params, const std::string& prefix) const;
};

// Instance norm with per-channel affine (gamma = 1, beta = 0 at init).
template <typename T>
struct InstanceNorm2d {
    BasicTensor<T> gamma;  // 1 x C x 1 x 1
    BasicTensor<T> beta;

    InstanceNorm2d() = default;
    explicit InstanceNorm2d(int64_t channels);
    BasicTensor<T> operator()(const BasicTensor<T>& x) const;
    void register_params(ParamList<T>& params, const std::string& prefix) const;
};

template <typename T>
struct LayerNorm {
    BasicTensor<T> gamma;  // D
    BasicTensor<T> beta;

    LayerNorm() = default;
    explicit LayerNorm(int64_t dim);
    BasicTensor<T> operator()(const BasicTensor<T>& x) const;
    void register_params(ParamList<T>& params, const std::string& prefix) const;
};

}  // namespace vtmorph
