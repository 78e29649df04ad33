#include "vtmorph/networks.hpp"

#include <cmath>
#include <stdexcept>

namespace vtmorph {

namespace {

constexpr double kConvInitStd = 0.02;

bool is_power_of_two(int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

void require_image(const Shape& s, int64_t channels, int64_t size, const char* who) {
    if (s.size() != 4 || s[1] != channels || s[2] != size || s[3] != size) {
        throw ShapeError(std::string(who) + ": expected N x " + std::to_string(channels) + " x " +
                         std::to_string(size) + " x " + std::to_string(size) + ", got " + shape_str(s));
    }
}

// Sine/cosine features of each patch center's normalized x (first half of the
// channels) and y (second half). Frequencies cycle through 1..7 quarter-waves
// across the image so nothing aliases on an 8-wide grid; each cycle shifts the
// phase to keep channels distinct.
template <typename T>
BasicTensor<T> sincos_positions(int64_t grid, int64_t D) {
    std::vector<T> v(static_cast<size_t>(grid * grid * D), T(0));
    const int64_t quarter = D / 4;
    constexpr double kHalfPi = 1.5707963267948966;
    for (int64_t r = 0; r < grid; ++r) {
        for (int64_t c = 0; c < grid; ++c) {
            const double u[2] = {(2.0 * static_cast<double>(c) + 1.0) / static_cast<double>(grid) - 1.0,
                                 (2.0 * static_cast<double>(r) + 1.0) / static_cast<double>(grid) - 1.0};
            T* row = v.data() + (r * grid + c) * D;
            for (int axis = 0; axis < 2; ++axis) {
                for (int64_t k = 0; k < quarter; ++k) {
                    const double a = kHalfPi * static_cast<double>(1 + k % 7) * u[axis] + 0.7 * static_cast<double>(k / 7);
                    row[axis * 2 * quarter + k] = static_cast<T>(std::sin(a));
                    row[axis * 2 * quarter + quarter + k] = static_cast<T>(std::cos(a));
                }
            }
        }
    }
    return BasicTensor<T>::from_vector({grid * grid, D}, std::move(v));
}

}  // namespace

template <typename T>
UNetGenerator<T>::UNetGenerator(const GeneratorConfig& config, int64_t image_size, Rng& rng)
    : config_(config), image_size_(image_size) {
    if (config.stages < 1 || config.base_width < 1) throw std::invalid_argument("unet: stages and width must be positive");
    if (!is_power_of_two(image_size) || image_size < 32 || image_size % (int64_t{1} << config.stages) != 0) {
        throw std::invalid_argument("unet: image size " + std::to_string(image_size) +
                                    " must be a power of two >= 32 divisible by 2^" + std::to_string(config.stages));
    }
    std::vector<int64_t> widths;
    for (int64_t i = 0; i < config.stages; ++i) widths.push_back(config.base_width << i);

    int64_t in = 1;
    for (int64_t i = 0; i < config.stages; ++i) {
        down_.emplace_back(in, widths[i], 4, 2, 1, false, kConvInitStd, rng);
        down_norm_.emplace_back(widths[i]);
        in = widths[i];
    }
    // Decoder stage i upsamples to the resolution of encoder stage i - 1 (or
    // the input for i = 0) and emits that stage's width.
    for (int64_t i = config.stages - 1; i >= 0; --i) {
        const int64_t out = i > 0 ? widths[i - 1] : config.base_width;
        up_.emplace_back(in, out, 4, 2, 1, false, kConvInitStd, rng);
        up_norm_.emplace_back(out);
        in = out + (i > 0 ? widths[i - 1] : 1);
    }
    out_ = Conv2d<T>(in, 1, 3, 1, 1, true, config.zero_final ? 0.0 : kConvInitStd, rng);

    for (size_t i = 0; i < down_.size(); ++i) {
        down_[i].register_params(params_, "down" + std::to_string(i) + ".conv");
        down_norm_[i].register_params(params_, "down" + std::to_string(i) + ".norm");
    }
    for (size_t i = 0; i < up_.size(); ++i) {
        up_[i].register_params(params_, "up" + std::to_string(i) + ".deconv");
        up_norm_[i].register_params(params_, "up" + std::to_string(i) + ".norm");
    }
    out_.register_params(params_, "out.conv");
}

template <typename T>
BasicTensor<T> UNetGenerator<T>::operator()(const BasicTensor<T>& x) const {
    require_image(x.shape(), 1, image_size_, "unet");
    std::vector<BasicTensor<T>> skips{x};
    BasicTensor<T> h = x;
    for (size_t i = 0; i < down_.size(); ++i) {
        h = leaky_relu(down_norm_[i](down_[i](h)), T(0.2));
        skips.push_back(h);
    }
    skips.pop_back();  // the bottleneck has no partner
    for (size_t i = 0; i < up_.size(); ++i) {
        h = relu(up_norm_[i](up_[i](h)));
        h = concat<T>({h, skips.back()}, 1);
        skips.pop_back();
    }
    return tanh(out_(h));
}

template <typename T>
PatchDiscriminator<T>::PatchDiscriminator(const DiscriminatorConfig& config, int64_t image_size, Rng& rng)
    : config_(config), image_size_(image_size) {
    if (config.layers < 1 || config.base_width < 1) throw std::invalid_argument("discriminator: layers and width must be positive");
    if (image_size % (int64_t{1} << config.layers) != 0 || (image_size >> config.layers) < 1) {
        throw std::invalid_argument("discriminator: image size " + std::to_string(image_size) +
                                    " not divisible by 2^" + std::to_string(config.layers));
    }
    int64_t in = 2;
    for (int64_t i = 0; i < config.layers; ++i) {
        const int64_t out = config.base_width << i;
        convs_.emplace_back(in, out, 4, 2, 1, i == 0, kConvInitStd, rng);
        norms_.emplace_back(out);
        in = out;
    }
    head_ = Conv2d<T>(in, 1, 3, 1, 1, true, kConvInitStd, rng);
    for (size_t i = 0; i < convs_.size(); ++i) {
        convs_[i].register_params(params_, "conv" + std::to_string(i));
        if (i > 0) norms_[i].register_params(params_, "norm" + std::to_string(i));
    }
    head_.register_params(params_, "head");
}

template <typename T>
BasicTensor<T> PatchDiscriminator<T>::operator()(const BasicTensor<T>& condition, const BasicTensor<T>& candidate) const {
    if (condition.shape() != candidate.shape()) {
        throw ShapeError("discriminator: condition " + shape_str(condition.shape()) + " vs candidate " +
                         shape_str(candidate.shape()));
    }
    require_image(condition.shape(), 1, image_size_, "discriminator");
    BasicTensor<T> h = concat<T>({condition, candidate}, 1);
    for (size_t i = 0; i < convs_.size(); ++i) {
        h = convs_[i](h);
        if (i > 0) h = norms_[i](h);
        h = leaky_relu(h, T(0.2));
    }
    return head_(h);
}

template <typename T>
VitEncoder<T>::VitEncoder(const VitConfig& config, int64_t image_size, Rng& rng)
    : config_(config), image_size_(image_size) {
    if (config.patch < 1 || image_size % config.patch != 0) {
        throw std::invalid_argument("vit: image size " + std::to_string(image_size) + " not divisible by patch " +
                                    std::to_string(config.patch));
    }
    const int64_t grid = image_size / config.patch;
    if (grid * grid != kVitTokens) {
        throw std::invalid_argument("vit: " + std::to_string(image_size) + "px with " + std::to_string(config.patch) +
                                    "px patches gives " + std::to_string(grid * grid) + " tokens, need " +
                                    std::to_string(kVitTokens));
    }
    if (config.dim % config.heads != 0) throw std::invalid_argument("vit: dim must be divisible by heads");
    const int64_t D = config.dim;
    patch_embed_ = Conv2d<T>(config.in_channels, D, config.patch, config.patch, 0, true,
                             std::sqrt(1.0 / static_cast<double>(config.in_channels * config.patch * config.patch)), rng);
    if (config.position_init == "sincos") {
        position_ = sincos_positions<T>(grid, D);
    } else if (config.position_init == "normal") {
        position_ = init::normal<T>({kVitTokens, D}, 0.02, rng);
    } else {
        throw std::invalid_argument("vit: unknown position init '" + config.position_init + "'");
    }
    for (int64_t i = 0; i < config.depth; ++i) {
        blocks_.push_back(Block{LayerNorm<T>(D), LayerNorm<T>(D), Linear<T>(D, 3 * D, rng),
                                Linear<T>(D, D, rng), Linear<T>(D, config.mlp_ratio * D, rng),
                                Linear<T>(config.mlp_ratio * D, D, rng)});
    }
    final_norm_ = LayerNorm<T>(D);

    patch_embed_.register_params(params_, "patch_embed");
    params_.add("position", position_);
    for (size_t i = 0; i < blocks_.size(); ++i) {
        const std::string p = "block" + std::to_string(i);
        blocks_[i].norm1.register_params(params_, p + ".norm1");
        blocks_[i].qkv.register_params(params_, p + ".qkv");
        blocks_[i].proj.register_params(params_, p + ".proj");
        blocks_[i].norm2.register_params(params_, p + ".norm2");
        blocks_[i].fc1.register_params(params_, p + ".fc1");
        blocks_[i].fc2.register_params(params_, p + ".fc2");
    }
    final_norm_.register_params(params_, "final_norm");
}

template <typename T>
BasicTensor<T> VitEncoder<T>::operator()(const BasicTensor<T>& x, std::vector<BasicTensor<T>>* attention) const {
    require_image(x.shape(), config_.in_channels, image_size_, "vit");
    const int64_t N = x.size(0), D = config_.dim, H = config_.heads, dh = D / H, L = kVitTokens;
    auto tokens = transpose(reshape(patch_embed_(x), {N, D, L}), 1, 2);  // N x L x D
    tokens = add(tokens, position_);
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    auto heads = [&](const BasicTensor<T>& t) {  // N x L x D -> (N * H) x L x dh
        return reshape(transpose(reshape(t, {N, L, H, dh}), 1, 2), {N * H, L, dh});
    };
    for (const auto& block : blocks_) {
        auto qkv = block.qkv(block.norm1(tokens));
        auto q = heads(slice(qkv, 2, 0, D));
        auto k = heads(slice(qkv, 2, D, 2 * D));
        auto v = heads(slice(qkv, 2, 2 * D, 3 * D));
        auto attn = softmax(mul_scalar(matmul(q, transpose(k, 1, 2)), scale));
        if (attention) attention->push_back(attn);
        auto ctx = reshape(transpose(reshape(matmul(attn, v), {N, H, L, dh}), 1, 2), {N, L, D});
        tokens = add(tokens, block.proj(ctx));
        tokens = add(tokens, block.fc2(gelu(block.fc1(block.norm2(tokens)))));
    }
    return mean(final_norm_(tokens), 1);
}

template <typename T>
MlpRegressor<T>::MlpRegressor(const RegressorConfig& config, Rng& rng) {
    if (config.hidden.empty()) throw std::invalid_argument("regressor: needs at least one hidden block");
    int64_t in = config.in_features;
    for (auto width : config.hidden) {
        blocks_.emplace_back(in, width, rng);
        in = width;
    }
    out_ = Linear<T>(in, 6, rng, 0.0);
    out_.bias = BasicTensor<T>::from_vector({6}, {T(1), T(0), T(0), T(0), T(1), T(0)});
    for (size_t i = 0; i < blocks_.size(); ++i) blocks_[i].register_params(params_, "block" + std::to_string(i));
    out_.register_params(params_, "out");
}

template <typename T>
BasicTensor<T> MlpRegressor<T>::operator()(const BasicTensor<T>& embedding) const {
    if (embedding.dim() != 2 || embedding.size(1) != blocks_.front().in_features()) {
        throw ShapeError("regressor: embedding " + shape_str(embedding.shape()) + " but first block takes " +
                         std::to_string(blocks_.front().in_features()) + " features");
    }
    BasicTensor<T> h = embedding;
    for (const auto& block : blocks_) h = relu(block(h));
    return out_(h);
}

template class UNetGenerator<float>;
template class UNetGenerator<double>;
template class PatchDiscriminator<float>;
template class PatchDiscriminator<double>;
template class VitEncoder<float>;
template class VitEncoder<double>;
template class MlpRegressor<float>;
template class MlpRegressor<double>;

}  // namespace vtmorph
