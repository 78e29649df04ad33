#pragma once

// Four-flow end-to-end training and batch registration.
//
// Flow 1  B̂  = G_v2t(A)                 fake thermal
// Flow 2  Â₁ = G_t2v(B)                 fake visible
// Flow 3  θ  = MLP(ViT([A, Â₁])),  B_R = warp(B, θ)
// Flow 4  Â₂ = G_t2v(B_R)               cycle output, same weights as Flow 2
//
// Images live in [0, 1] outside the networks and in [-1, 1] inside them
// (v -> 2v - 1). Only B is ever resampled, in [0, 1] so zero padding is black.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtmorph/checkpoint.hpp"
#include "vtmorph/config.hpp"
#include "vtmorph/data.hpp"
#include "vtmorph/networks.hpp"
#include "vtmorph/optim.hpp"
#include "vtmorph/spatial.hpp"

namespace vtmorph {

struct TrainConfig {
    int64_t image_size = 64;
    int64_t batch_size = 8;
    int64_t steps = 2000;
    // When positive, overrides steps with epochs * ceil(pairs / batch_size).
    int64_t epochs = 0;
    double lr_gen = 2e-4;
    double lr_disc = 2e-4;
    double lr_stn = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double lambda_adv = 1.0;
    double lambda_l1 = 100.0;
    // Per-direction overrides of lambda_l1.
    std::optional<double> lambda_l1_v2t;
    std::optional<double> lambda_l1_t2v;
    double lambda_cyc = 10.0;
    double lambda_theta = 0.01;
    // "visible": cycle loss L1(Â₂, A). "fake_visible": L1(Â₂, Â₁).
    std::string cycle_target = "visible";
    // Weight of L1(B_R, B̂) with B̂ detached: pulls θ toward the fake thermal,
    // which shares A's geometry, without letting the generator chase B_R.
    double lambda_reg = 0.0;
    // The lambda_reg term is off before this step, while the fake thermal is
    // still meaningless. (Adam is invariant to loss scale, so a ramp would
    // not slow the STN down.)
    int64_t reg_start = 0;
    // Gaussian sigma (pixels) applied to both sides of the lambda_reg term so
    // a sharp B_R is not rewarded for blurring itself toward B̂; 0 disables.
    double reg_blur = 0.0;
    // Per-pair probability of re-warping the thermal by a random affine
    // (uniform within the augment_* bounds) before the step.
    double augment_prob = 0.0;
    double augment_translation = 0.1;
    double augment_rotation_deg = 8.0;
    double augment_scale = 0.05;
    // "constant", or "cosine" to decay every learning rate to 0 over the run.
    std::string lr_schedule = "constant";
    uint64_t seed = 0;
    int64_t checkpoint_every = 500;
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    VitConfig vit;
    RegressorConfig regressor;

    double l1_v2t() const { return lambda_l1_v2t.value_or(lambda_l1); }
    double l1_t2v() const { return lambda_l1_t2v.value_or(lambda_l1); }
    // Throws std::invalid_argument naming the first bad field.
    void validate() const;
};

class TrainingAbort : public std::runtime_error {
public:
    TrainingAbort(int64_t step, std::string loss, const std::string& detail);
    int64_t step;
    std::string loss;
};

struct LossReport {
    int64_t step = 0;
    double adv_v2t = 0, l1_v2t = 0, adv_t2v = 0, l1_t2v = 0, cycle = 0, theta_reg = 0, reg_v2t = 0;
    double disc_v2t = 0, disc_t2v = 0;
    double total = 0;

    static std::string csv_header();
    std::string csv_row() const;
    bool operator==(const LossReport&) const = default;
};

struct FlowTensors {
    Tensor A, B;              // N x 1 x S x S in [0, 1]
    Tensor fake_thermal;      // B̂, [-1, 1]
    Tensor fake_visible;      // Â₁, [-1, 1]
    Tensor theta;             // N x 6
    Tensor registered;        // B_R, [0, 1]
    Tensor cycle;             // Â₂, [-1, 1]
};

class RegistrationModel {
public:
    explicit RegistrationModel(const TrainConfig& config);

    const TrainConfig& config() const { return config_; }

    Tensor flow1_v2t(const Tensor& A) const;
    Tensor flow2_t2v(const Tensor& B) const;
    // Returns (θ, B_R).
    std::pair<Tensor, Tensor> flow3_register(const Tensor& A, const Tensor& fake_visible, const Tensor& B) const;
    Tensor flow4_cycle(const Tensor& registered) const;
    FlowTensors forward(const Tensor& A, const Tensor& B) const;

    // Parameter groups, each with its own optimizer state.
    std::vector<Tensor> generator_params() const;
    std::vector<Tensor> stn_params() const;
    std::vector<Tensor> disc_v2t_params() const;
    std::vector<Tensor> disc_t2v_params() const;
    // Every parameter under a unique dotted name.
    std::vector<std::pair<std::string, Tensor>> named_params() const;

    const UNetGenerator<float>& v2t() const { return g_v2t_; }
    const UNetGenerator<float>& t2v() const { return g_t2v_; }
    const PatchDiscriminator<float>& disc_v2t() const { return d_v2t_; }
    const PatchDiscriminator<float>& disc_t2v() const { return d_t2v_; }
    const VitEncoder<float>& vit() const { return vit_; }
    const MlpRegressor<float>& regressor() const { return regressor_; }

private:
    TrainConfig config_;
    Rng rng_;
    UNetGenerator<float> g_v2t_, g_t2v_;
    PatchDiscriminator<float> d_v2t_, d_t2v_;
    VitEncoder<float> vit_;
    MlpRegressor<float> regressor_;
};

class Trainer {
public:
    // The training set must be non-empty and share config.image_size.
    Trainer(const TrainConfig& config, std::vector<PairImages> train_set);

    // One discriminator update per GAN, then one joint generator + STN update.
    LossReport step();
    int64_t steps_done() const { return step_; }
    int64_t total_steps() const;

    RegistrationModel& model() { return model_; }
    const RegistrationModel& model() const { return model_; }

    Checkpoint checkpoint() const;
    // Restores parameters, optimizer moments and the step counter.
    void restore(const Checkpoint& ckpt);

    // Pair indices for a given step; a pure function of seed and step.
    std::vector<size_t> batch_indices(int64_t step) const;
    // Augmentation warps applied to the batch thermals at a step (identity
    // where a pair is not augmented); a pure function of seed and step.
    std::vector<AffineParams> augment_warps(int64_t step) const;
    // Multiplier on every base learning rate at a step.
    double lr_factor(int64_t step) const;

private:
    TrainConfig config_;
    std::vector<PairImages> data_;
    RegistrationModel model_;
    std::vector<Tensor> gen_params_, stn_params_, d1_params_, d2_params_;
    OptimState<float> gen_state_, stn_state_, d1_state_, d2_state_;
    int64_t step_ = 0;
};

const std::vector<ConfigField<TrainConfig>>& train_config_fields();
std::map<std::string, std::string> config_to_map(const TrainConfig& config);
// Starts from the defaults; unknown keys raise ConfigError.
TrainConfig config_from_map(const std::map<std::string, std::string>& values);

// Rebuilds a model from a checkpoint's stored config and parameters.
RegistrationModel load_model(const Checkpoint& ckpt);

struct TrainOptions {
    std::filesystem::path out_dir;
    // Resume from this checkpoint when set.
    std::optional<std::filesystem::path> resume;
    std::function<void(const LossReport&)> on_step;
};

struct TrainResult {
    std::filesystem::path checkpoint;
    std::vector<LossReport> losses;
};

// Writes loss.csv (one row per step) plus checkpoint_<step>.ckpt at the
// cadence and final.ckpt at the end. Only train-split pairs are used.
TrainResult train(const Manifest& manifest, const TrainConfig& config, const TrainOptions& options);

struct Registration {
    std::string pair_id;
    AffineParams theta;
    Image registered;      // B_R in [0, 1]
    Image fake_thermal;    // B̂ in [0, 1]
};

// Runs flows 1-3 without gradient tracking, in batches of `batch_size`.
std::vector<Registration> register_pairs(const RegistrationModel& model, const std::vector<PairImages>& pairs,
                                         int64_t batch_size = 8);

}  // namespace vtmorph
