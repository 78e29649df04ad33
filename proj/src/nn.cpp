#include "vtmorph/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace vtmorph {

template <typename T>
void ParamList<T>::add(std::string name, BasicTensor<T> tensor) {
    for (const auto& [n, t] : items_) {
        if (n == name) throw std::invalid_argument("duplicate parameter name " + name);
    }
    tensor.set_requires_grad(true);
    items_.emplace_back(std::move(name), std::move(tensor));
}

template <typename T>
std::vector<BasicTensor<T>> ParamList<T>::tensors() const {
    std::vector<BasicTensor<T>> out;
    out.reserve(items_.size());
    for (const auto& [n, t] : items_) out.push_back(t);
    return out;
}

template <typename T>
const BasicTensor<T>& ParamList<T>::get(const std::string& name) const {
    for (const auto& [n, t] : items_) {
        if (n == name) return t;
    }
    throw std::out_of_range("no parameter named " + name);
}

template <typename T>
int64_t ParamList<T>::scalar_count() const {
    int64_t total = 0;
    for (const auto& [n, t] : items_) total += t.numel();
    return total;
}

namespace init {

template <typename T>
BasicTensor<T> normal(Shape shape, double stddev, Rng& rng) {
    std::vector<T> v(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : v) x = static_cast<T>(rng.normal() * stddev);
    return BasicTensor<T>::from_vector(std::move(shape), std::move(v));
}

template <typename T>
BasicTensor<T> kaiming_uniform(Shape shape, int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<T> v(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
    return BasicTensor<T>::from_vector(std::move(shape), std::move(v));
}

}  // namespace init

template <typename T>
Linear<T>::Linear(int64_t in, int64_t out, Rng& rng, double init_std) : bias(BasicTensor<T>::zeros({out})) {
    if (init_std > 0) {
        weight = init::normal<T>({in, out}, init_std, rng);
    } else if (init_std == 0) {
        weight = BasicTensor<T>::zeros({in, out});
    } else {
        weight = init::kaiming_uniform<T>({in, out}, in, rng);
    }
}

template <typename T>
BasicTensor<T> Linear<T>::operator()(const BasicTensor<T>& x) const {
    if (x.shape().back() != in_features()) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " + shape_str(weight.shape()));
    }
    return add(matmul(x, weight), bias);
}

template <typename T>
void Linear<T>::register_params(ParamList<T>& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight);
    params.add(prefix + ".bias", bias);
}

template <typename T>
Conv2d<T>::Conv2d(int64_t in, int64_t out, int64_t kernel, int64_t stride_, int64_t padding_, bool with_bias,
                  double init_std, Rng& rng)
    : weight(init_std > 0 ? init::normal<T>({out, in, kernel, kernel}, init_std, rng)
                          : BasicTensor<T>::zeros({out, in, kernel, kernel})),
      stride(stride_),
      padding(padding_) {
    if (with_bias) bias = BasicTensor<T>::zeros({out});
}

template <typename T>
BasicTensor<T> Conv2d<T>::operator()(const BasicTensor<T>& x) const {
    return conv2d(x, weight, bias, stride, padding);
}

template <typename T>
void Conv2d<T>::register_params(ParamList<T>& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight);
    if (bias.defined()) params.add(prefix + ".bias", bias);
}

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(int64_t in, int64_t out, int64_t kernel, int64_t stride_, int64_t padding_,
                                    bool with_bias, double init_std, Rng& rng)
    : weight(init::normal<T>({in, out, kernel, kernel}, init_std, rng)), stride(stride_), padding(padding_) {
    if (with_bias) bias = BasicTensor<T>::zeros({out});
}

template <typename T>
BasicTensor<T> ConvTranspose2d<T>::operator()(const BasicTensor<T>& x) const {
    return conv_transpose2d(x, weight, bias, stride, padding);
}

template <typename T>
void ConvTranspose2d<T>::register_params(ParamList<T>& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight);
    if (bias.defined()) params.add(prefix + ".bias", bias);
}

template <typename T>
InstanceNorm2d<T>::InstanceNorm2d(int64_t channels)
    : gamma(BasicTensor<T>::full({1, channels, 1, 1}, T(1))), beta(BasicTensor<T>::zeros({1, channels, 1, 1})) {}

template <typename T>
BasicTensor<T> InstanceNorm2d<T>::operator()(const BasicTensor<T>& x) const {
    return add(mul(instance_norm(x), gamma), beta);
}

template <typename T>
void InstanceNorm2d<T>::register_params(ParamList<T>& params, const std::string& prefix) const {
    params.add(prefix + ".gamma", gamma);
    params.add(prefix + ".beta", beta);
}

template <typename T>
LayerNorm<T>::LayerNorm(int64_t dim) : gamma(BasicTensor<T>::full({dim}, T(1))), beta(BasicTensor<T>::zeros({dim})) {}

template <typename T>
BasicTensor<T> LayerNorm<T>::operator()(const BasicTensor<T>& x) const {
    return add(mul(layer_norm(x), gamma), beta);
}

template <typename T>
void LayerNorm<T>::register_params(ParamList<T>& params, const std::string& prefix) const {
    params.add(prefix + ".gamma", gamma);
    params.add(prefix + ".beta", beta);
}

template class ParamList<float>;
template class ParamList<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct Conv2d<float>;
template struct Conv2d<double>;
template struct ConvTranspose2d<float>;
template struct ConvTranspose2d<double>;
template struct InstanceNorm2d<float>;
template struct InstanceNorm2d<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template Tensor init::normal<float>(Shape, double, Rng&);
template Tensor64 init::normal<double>(Shape, double, Rng&);
template Tensor init::kaiming_uniform<float>(Shape, int64_t, Rng&);
template Tensor64 init::kaiming_uniform<double>(Shape, int64_t, Rng&);

}  // namespace vtmorph
