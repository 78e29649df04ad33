#pragma once

// The four trainable networks: a U-Net translator (used for both V2T and
// T2V), a conditional patch discriminator, a ViT encoder over 64 patch
// tokens, and the five-block MLP that regresses the affine parameters.

#include <string>
#include <vector>

#include "vtmorph/nn.hpp"

namespace vtmorph {

struct GeneratorConfig {
    int64_t stages = 4;
    int64_t base_width = 32;
    // Zero weights in the output conv, so a fresh generator emits 0 everywhere.
    bool zero_final = true;
};

// Encoder stage: 4x4 stride-2 conv, instance norm, LeakyReLU(0.2).
// Decoder stage: 4x4 stride-2 transposed conv, instance norm, ReLU, then
// concatenation with the matching encoder activation (the input image for
// the last stage). A 3x3 conv and tanh produce the single output channel.
template <typename T>
class UNetGenerator {
public:
    // Rejects sizes that are not powers of two >= 32 or not divisible by 2^stages.
    UNetGenerator(const GeneratorConfig& config, int64_t image_size, Rng& rng);

    // N x 1 x S x S in, N x 1 x S x S out with values in [-1, 1].
    BasicTensor<T> operator()(const BasicTensor<T>& x) const;

    const ParamList<T>& params() const { return params_; }
    int64_t image_size() const { return image_size_; }

private:
    GeneratorConfig config_;
    int64_t image_size_;
    std::vector<Conv2d<T>> down_;
    std::vector<InstanceNorm2d<T>> down_norm_;
    std::vector<ConvTranspose2d<T>> up_;
    std::vector<InstanceNorm2d<T>> up_norm_;
    Conv2d<T> out_;
    ParamList<T> params_;
};

struct DiscriminatorConfig {
    int64_t layers = 3;
    int64_t base_width = 32;
};

// Stacked stride-2 4x4 convs on the channel-stacked (condition, candidate)
// pair, then a 3x3 conv to a one-channel logit map of S / 2^layers.
template <typename T>
class PatchDiscriminator {
public:
    PatchDiscriminator(const DiscriminatorConfig& config, int64_t image_size, Rng& rng);

    BasicTensor<T> operator()(const BasicTensor<T>& condition, const BasicTensor<T>& candidate) const;

    const ParamList<T>& params() const { return params_; }
    int64_t output_size() const { return image_size_ >> config_.layers; }

private:
    DiscriminatorConfig config_;
    int64_t image_size_;
    std::vector<Conv2d<T>> convs_;
    std::vector<InstanceNorm2d<T>> norms_;
    Conv2d<T> head_;
    ParamList<T> params_;
};

struct VitConfig {
    int64_t in_channels = 2;
    int64_t patch = 8;
    int64_t dim = 128;
    int64_t depth = 4;
    int64_t heads = 4;
    int64_t mlp_ratio = 2;
    // "sincos": 2-D sine/cosine table over the patch grid (still trained).
    // "normal": N(0, 0.02).
    std::string position_init = "sincos";
};

inline constexpr int64_t kVitTokens = 64;

template <typename T>
class VitEncoder {
public:
    // The patch grid must hold exactly kVitTokens patches.
    VitEncoder(const VitConfig& config, int64_t image_size, Rng& rng);

    // x: N x in_channels x S x S -> N x dim. When `attention` is given it
    // receives one (N * heads) x 64 x 64 row-stochastic map per block.
    BasicTensor<T> operator()(const BasicTensor<T>& x, std::vector<BasicTensor<T>>* attention = nullptr) const;

    const ParamList<T>& params() const { return params_; }
    const VitConfig& config() const { return config_; }

private:
    struct Block {
        LayerNorm<T> norm1, norm2;
        Linear<T> qkv, proj, fc1, fc2;
    };

    VitConfig config_;
    int64_t image_size_;
    Conv2d<T> patch_embed_;
    BasicTensor<T> position_;
    std::vector<Block> blocks_;
    LayerNorm<T> final_norm_;
    ParamList<T> params_;
};

struct RegressorConfig {
    int64_t in_features = 128;
    // One Linear-ReLU block per entry.
    std::vector<int64_t> hidden = {128, 64, 64, 32, 32};
};

// Linear-ReLU blocks followed by a linear layer to the six affine values
// [a, b, tx, c, d, ty]. The output layer starts at zero weights and an
// identity bias, so a fresh regressor predicts the identity transform.
template <typename T>
class MlpRegressor {
public:
    MlpRegressor(const RegressorConfig& config, Rng& rng);

    BasicTensor<T> operator()(const BasicTensor<T>& embedding) const;

    const ParamList<T>& params() const { return params_; }
    size_t block_count() const { return blocks_.size(); }

private:
    std::vector<Linear<T>> blocks_;
    Linear<T> out_;
    ParamList<T> params_;
};

}  // namespace vtmorph
