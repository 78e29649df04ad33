#include "vtmorph/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "vtmorph/ops.hpp"

namespace vtmorph {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("invalid training config: ") + what);
    };
    require(image_size >= 32, "image_size must be at least 32");
    require(batch_size >= 1, "batch_size must be at least 1");
    require(steps >= 1 || epochs >= 1, "steps or epochs must be positive");
    require(epochs >= 0, "epochs must be non-negative");
    require(lr_gen > 0 && lr_disc > 0 && lr_stn > 0, "learning rates must be positive");
    require(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1, "betas must lie in (0, 1)");
    require(lambda_adv >= 0 && lambda_l1 >= 0 && lambda_cyc >= 0 && lambda_theta >= 0, "loss weights must be non-negative");
    require(l1_v2t() >= 0 && l1_t2v() >= 0, "loss weights must be non-negative");
    require(cycle_target == "visible" || cycle_target == "fake_visible", "cycle_target must be visible or fake_visible");
    require(lambda_reg >= 0.0, "lambda_reg must be non-negative");
    require(reg_start >= 0, "reg_start must be non-negative");
    require(reg_blur >= 0.0 && reg_blur <= 8.0, "reg_blur must lie in [0, 8]");
    require(augment_prob >= 0.0 && augment_prob <= 1.0, "augment_prob must lie in [0, 1]");
    require(augment_translation >= 0.0 && augment_rotation_deg >= 0.0 && augment_scale >= 0.0 && augment_scale < 0.5,
            "augment bounds must be non-negative and augment_scale below 0.5");
    require(lr_schedule == "constant" || lr_schedule == "cosine", "lr_schedule must be constant or cosine");
    require(vit.position_init == "sincos" || vit.position_init == "normal", "vit_position_init must be sincos or normal");
    require(checkpoint_every >= 0, "checkpoint_every must be non-negative");
    require(image_size % 8 == 0, "image_size must be divisible by 8 (64 ViT patches)");
}

namespace {

template <typename Get, typename Set>
ConfigField<TrainConfig> field(std::string name, std::string description, Get get, Set set) {
    return {std::move(name), std::move(description), get, set};
}

ConfigField<TrainConfig> int_field(std::string name, std::string description, int64_t TrainConfig::*member) {
    return field(std::move(name), std::move(description),
                 [member](const TrainConfig& c) { return std::to_string(c.*member); },
                 [member, name](TrainConfig& c, const std::string& v) { c.*member = cfg::to_int(name, v); });
}

ConfigField<TrainConfig> double_field(std::string name, std::string description, double TrainConfig::*member) {
    return field(std::move(name), std::move(description),
                 [member](const TrainConfig& c) { return cfg::format_double(c.*member); },
                 [member, name](TrainConfig& c, const std::string& v) { c.*member = cfg::to_double(name, v); });
}

ConfigField<TrainConfig> optional_field(std::string name, std::string description,
                                        std::optional<double> TrainConfig::*member) {
    return field(std::move(name), std::move(description),
                 [member](const TrainConfig& c) { return (c.*member) ? cfg::format_double(*(c.*member)) : std::string(); },
                 [member, name](TrainConfig& c, const std::string& v) {
                     if (v.empty()) c.*member = std::nullopt;
                     else c.*member = cfg::to_double(name, v);
                 });
}

std::vector<ConfigField<TrainConfig>> build_fields() {
    std::vector<ConfigField<TrainConfig>> f;
    f.push_back(int_field("image_size", "square image extent in pixels", &TrainConfig::image_size));
    f.push_back(int_field("batch_size", "pairs per training step", &TrainConfig::batch_size));
    f.push_back(int_field("steps", "training steps", &TrainConfig::steps));
    f.push_back(int_field("epochs", "when positive, train this many passes over the data instead of `steps`", &TrainConfig::epochs));
    f.push_back(double_field("lr_gen", "Adam learning rate of both translators", &TrainConfig::lr_gen));
    f.push_back(double_field("lr_disc", "Adam learning rate of both discriminators", &TrainConfig::lr_disc));
    f.push_back(double_field("lr_stn", "Adam learning rate of the ViT encoder and regressor", &TrainConfig::lr_stn));
    f.push_back(double_field("beta1", "Adam first-moment decay", &TrainConfig::beta1));
    f.push_back(double_field("beta2", "Adam second-moment decay", &TrainConfig::beta2));
    f.push_back(double_field("lambda_adv", "weight of the least-squares adversarial terms", &TrainConfig::lambda_adv));
    f.push_back(double_field("lambda_l1", "weight of both translation L1 terms", &TrainConfig::lambda_l1));
    f.push_back(optional_field("lambda_l1_v2t", "override of lambda_l1 for L1(fake thermal, B); empty inherits", &TrainConfig::lambda_l1_v2t));
    f.push_back(optional_field("lambda_l1_t2v", "override of lambda_l1 for L1(fake visible, A); empty inherits", &TrainConfig::lambda_l1_t2v));
    f.push_back(double_field("lambda_cyc", "weight of the cycle term L1(cycle output, target)", &TrainConfig::lambda_cyc));
    f.push_back(double_field("lambda_theta", "weight of the squared distance of theta from identity", &TrainConfig::lambda_theta));
    f.push_back(field("cycle_target", "cycle loss target: visible (A) or fake_visible", [](const TrainConfig& c) { return c.cycle_target; },
                      [](TrainConfig& c, const std::string& v) { c.cycle_target = v; }));
    f.push_back(field("seed", "seed for initialization and batch order", [](const TrainConfig& c) { return std::to_string(c.seed); },
                      [](TrainConfig& c, const std::string& v) { c.seed = cfg::to_u64("seed", v); }));
    f.push_back(int_field("checkpoint_every", "steps between checkpoints; 0 writes only the final one", &TrainConfig::checkpoint_every));
    f.push_back(field("gen_stages", "U-Net encoder/decoder stages", [](const TrainConfig& c) { return std::to_string(c.generator.stages); },
                      [](TrainConfig& c, const std::string& v) { c.generator.stages = cfg::to_int("gen_stages", v); }));
    f.push_back(field("gen_width", "U-Net channels after the first stage", [](const TrainConfig& c) { return std::to_string(c.generator.base_width); },
                      [](TrainConfig& c, const std::string& v) { c.generator.base_width = cfg::to_int("gen_width", v); }));
    f.push_back(field("gen_zero_final", "start translators with a zero output layer",
                      [](const TrainConfig& c) { return std::string(c.generator.zero_final ? "true" : "false"); },
                      [](TrainConfig& c, const std::string& v) { c.generator.zero_final = cfg::to_bool("gen_zero_final", v); }));
    f.push_back(field("disc_layers", "stride-2 layers in each patch discriminator",
                      [](const TrainConfig& c) { return std::to_string(c.discriminator.layers); },
                      [](TrainConfig& c, const std::string& v) { c.discriminator.layers = cfg::to_int("disc_layers", v); }));
    f.push_back(field("disc_width", "discriminator channels after the first layer",
                      [](const TrainConfig& c) { return std::to_string(c.discriminator.base_width); },
                      [](TrainConfig& c, const std::string& v) { c.discriminator.base_width = cfg::to_int("disc_width", v); }));
    f.push_back(double_field("lambda_reg", "weight of L1(registered thermal, detached fake thermal); 0 disables",
                             &TrainConfig::lambda_reg));
    f.push_back(double_field("reg_blur", "Gaussian sigma in pixels applied to both sides of the lambda_reg term",
                             &TrainConfig::reg_blur));
    f.push_back(int_field("reg_start", "first step at which the lambda_reg term is active", &TrainConfig::reg_start));
    f.push_back(double_field("augment_prob", "per-pair probability of a random extra warp of the thermal", &TrainConfig::augment_prob));
    f.push_back(double_field("augment_translation", "max |tx|, |ty| of augmentation warps", &TrainConfig::augment_translation));
    f.push_back(double_field("augment_rotation_deg", "max |rotation| of augmentation warps in degrees",
                     &TrainConfig::augment_rotation_deg));
    f.push_back(double_field("augment_scale", "max |scale - 1| of augmentation warps", &TrainConfig::augment_scale));
    f.push_back(field("lr_schedule", "constant, or cosine decay of every learning rate to 0",
                      [](const TrainConfig& c) { return c.lr_schedule; },
                      [](TrainConfig& c, const std::string& v) { c.lr_schedule = v; }));
    f.push_back(field("vit_dim", "ViT embedding width", [](const TrainConfig& c) { return std::to_string(c.vit.dim); },
                      [](TrainConfig& c, const std::string& v) { c.vit.dim = cfg::to_int("vit_dim", v); }));
    f.push_back(field("vit_depth", "ViT transformer blocks", [](const TrainConfig& c) { return std::to_string(c.vit.depth); },
                      [](TrainConfig& c, const std::string& v) { c.vit.depth = cfg::to_int("vit_depth", v); }));
    f.push_back(field("vit_heads", "attention heads per block", [](const TrainConfig& c) { return std::to_string(c.vit.heads); },
                      [](TrainConfig& c, const std::string& v) { c.vit.heads = cfg::to_int("vit_heads", v); }));
    f.push_back(field("vit_mlp_ratio", "ViT MLP hidden width as a multiple of vit_dim",
                      [](const TrainConfig& c) { return std::to_string(c.vit.mlp_ratio); },
                      [](TrainConfig& c, const std::string& v) { c.vit.mlp_ratio = cfg::to_int("vit_mlp_ratio", v); }));
    f.push_back(field("vit_position_init", "ViT position embedding init: sincos or normal",
                      [](const TrainConfig& c) { return c.vit.position_init; },
                      [](TrainConfig& c, const std::string& v) { c.vit.position_init = v; }));
    f.push_back(field("mlp_hidden", "regressor Linear-ReLU block widths, comma separated",
                      [](const TrainConfig& c) { return cfg::format_int_list(c.regressor.hidden); },
                      [](TrainConfig& c, const std::string& v) { c.regressor.hidden = cfg::to_int_list("mlp_hidden", v); }));
    return f;
}

}  // namespace

const std::vector<ConfigField<TrainConfig>>& train_config_fields() {
    static const auto fields = build_fields();
    return fields;
}

std::map<std::string, std::string> config_to_map(const TrainConfig& config) {
    std::map<std::string, std::string> out;
    for (const auto& f : train_config_fields()) out[f.name] = f.get(config);
    return out;
}

TrainConfig config_from_map(const std::map<std::string, std::string>& values) {
    TrainConfig c;
    for (const auto& [key, value] : values) {
        const auto& fields = train_config_fields();
        const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.name == key; });
        if (it == fields.end()) throw ConfigError("unknown config key '" + key + "'");
        it->set(c, value);
    }
    return c;
}

TrainingAbort::TrainingAbort(int64_t s, std::string l, const std::string& detail)
    : std::runtime_error("training aborted at step " + std::to_string(s) + ": loss '" + l + "' is not finite (" + detail + ")"),
      step(s),
      loss(std::move(l)) {}

std::string LossReport::csv_header() { return "step,adv_v2t,l1_v2t,adv_t2v,l1_t2v,cycle,theta_reg,reg_v2t,disc_v2t,disc_t2v,total"; }

std::string LossReport::csv_row() const {
    std::string out = std::to_string(step);
    for (double v : {adv_v2t, l1_v2t, adv_t2v, l1_t2v, cycle, theta_reg, reg_v2t, disc_v2t, disc_t2v, total}) {
        out += ',';
        out += cfg::format_double(v);
    }
    return out;
}

// ---------------------------------------------------------------- model

namespace {

TrainConfig checked(TrainConfig c) {
    c.validate();
    c.vit.in_channels = 2;
    c.vit.patch = c.image_size / 8;
    return c;
}

Tensor to_signed(const Tensor& unit) { return add_scalar(mul_scalar(unit, 2.0f), -1.0f); }

void append(std::vector<Tensor>& out, const ParamList<float>& params) {
    for (const auto& [name, t] : params.items()) out.push_back(t);
}

}  // namespace

RegistrationModel::RegistrationModel(const TrainConfig& config)
    : config_(checked(config)),
      rng_(config_.seed),
      g_v2t_(config_.generator, config_.image_size, rng_),
      g_t2v_(config_.generator, config_.image_size, rng_),
      d_v2t_(config_.discriminator, config_.image_size, rng_),
      d_t2v_(config_.discriminator, config_.image_size, rng_),
      vit_(config_.vit, config_.image_size, rng_),
      regressor_([&] {
          RegressorConfig r = config_.regressor;
          r.in_features = config_.vit.dim;
          return r;
      }(), rng_) {}

Tensor RegistrationModel::flow1_v2t(const Tensor& A) const { return g_v2t_(to_signed(A)); }

Tensor RegistrationModel::flow2_t2v(const Tensor& B) const { return g_t2v_(to_signed(B)); }

std::pair<Tensor, Tensor> RegistrationModel::flow3_register(const Tensor& A, const Tensor& fake_visible,
                                                            const Tensor& B) const {
    if (A.shape() != fake_visible.shape() || A.shape() != B.shape()) {
        throw ShapeError("flow3: A " + shape_str(A.shape()) + ", fake visible " + shape_str(fake_visible.shape()) +
                         ", B " + shape_str(B.shape()) + " must match");
    }
    auto theta = regressor_(vit_(concat<float>({to_signed(A), fake_visible}, 1)));
    return {theta, warp(B, theta)};
}

Tensor RegistrationModel::flow4_cycle(const Tensor& registered) const { return g_t2v_(to_signed(registered)); }

FlowTensors RegistrationModel::forward(const Tensor& A, const Tensor& B) const {
    if (A.shape() != B.shape()) throw ShapeError("flows: A " + shape_str(A.shape()) + " vs B " + shape_str(B.shape()));
    FlowTensors f;
    f.A = A;
    f.B = B;
    f.fake_thermal = flow1_v2t(A);
    f.fake_visible = flow2_t2v(B);
    std::tie(f.theta, f.registered) = flow3_register(A, f.fake_visible, B);
    f.cycle = flow4_cycle(f.registered);
    return f;
}

std::vector<Tensor> RegistrationModel::generator_params() const {
    std::vector<Tensor> out;
    append(out, g_v2t_.params());
    append(out, g_t2v_.params());
    return out;
}

std::vector<Tensor> RegistrationModel::stn_params() const {
    std::vector<Tensor> out;
    append(out, vit_.params());
    append(out, regressor_.params());
    return out;
}

std::vector<Tensor> RegistrationModel::disc_v2t_params() const {
    std::vector<Tensor> out;
    append(out, d_v2t_.params());
    return out;
}

std::vector<Tensor> RegistrationModel::disc_t2v_params() const {
    std::vector<Tensor> out;
    append(out, d_t2v_.params());
    return out;
}

std::vector<std::pair<std::string, Tensor>> RegistrationModel::named_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto add = [&](const std::string& prefix, const ParamList<float>& params) {
        for (const auto& [name, t] : params.items()) out.emplace_back(prefix + "." + name, t);
    };
    add("g_v2t", g_v2t_.params());
    add("g_t2v", g_t2v_.params());
    add("d_v2t", d_v2t_.params());
    add("d_t2v", d_t2v_.params());
    add("vit", vit_.params());
    add("regressor", regressor_.params());
    return out;
}

// ---------------------------------------------------------------- trainer

namespace {

Tensor lsgan(const Tensor& logits, float target) { return mean(square(add_scalar(logits, -target))); }

double value_of(const Tensor& t) { return static_cast<double>(t.item()); }

void copy_into(Tensor& dst, const Tensor& src, const std::string& name) {
    if (dst.shape() != src.shape()) {
        throw CheckpointError("checkpoint tensor " + name + " has shape " + shape_str(src.shape()) + ", model expects " +
                              shape_str(dst.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, std::vector<PairImages> train_set)
    : config_(checked(config)), data_(std::move(train_set)), model_(config_) {
    if (data_.empty()) throw std::invalid_argument("training set is empty");
    for (const auto& p : data_) {
        if (p.visible.height != config_.image_size || p.visible.width != config_.image_size ||
            !p.visible.same_size(p.thermal)) {
            throw std::invalid_argument("pair " + p.pair_id + " is " + std::to_string(p.visible.width) + "x" +
                                        std::to_string(p.visible.height) + ", training expects " +
                                        std::to_string(config_.image_size) + "x" + std::to_string(config_.image_size));
        }
    }
    gen_params_ = model_.generator_params();
    stn_params_ = model_.stn_params();
    d1_params_ = model_.disc_v2t_params();
    d2_params_ = model_.disc_t2v_params();
    const AdamConfig base{config_.lr_gen, config_.beta1, config_.beta2, 1e-8};
    gen_state_ = OptimState<float>(gen_params_, base);
    stn_state_ = OptimState<float>(stn_params_, {config_.lr_stn, config_.beta1, config_.beta2, 1e-8});
    d1_state_ = OptimState<float>(d1_params_, {config_.lr_disc, config_.beta1, config_.beta2, 1e-8});
    d2_state_ = OptimState<float>(d2_params_, {config_.lr_disc, config_.beta1, config_.beta2, 1e-8});
}

int64_t Trainer::total_steps() const {
    if (config_.epochs > 0) {
        const auto n = static_cast<int64_t>(data_.size());
        return config_.epochs * ((n + config_.batch_size - 1) / config_.batch_size);
    }
    return config_.steps;
}

std::vector<size_t> Trainer::batch_indices(int64_t step) const {
    const auto n = static_cast<int64_t>(data_.size());
    std::vector<size_t> out;
    int64_t cached_epoch = -1;
    std::vector<size_t> order;
    for (int64_t k = 0; k < config_.batch_size; ++k) {
        const int64_t pos = step * config_.batch_size + k;
        const int64_t epoch = pos / n;
        if (epoch != cached_epoch) {
            order.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = static_cast<size_t>(i);
            Rng rng(config_.seed ^ (0x9E3779B97F4A7C15ull * static_cast<uint64_t>(epoch + 1)));
            rng.shuffle(order.begin(), order.end());
            cached_epoch = epoch;
        }
        out.push_back(order[static_cast<size_t>(pos % n)]);
    }
    return out;
}

std::vector<AffineParams> Trainer::augment_warps(int64_t step) const {
    std::vector<AffineParams> out(static_cast<size_t>(config_.batch_size), AffineParams::identity());
    if (config_.augment_prob <= 0.0) return out;
    Rng rng(config_.seed ^ (0xD1B54A32D192ED03ull * static_cast<uint64_t>(step + 1)));
    constexpr double kDegree = 3.14159265358979323846 / 180.0;
    for (auto& w : out) {
        const double u = rng.uniform();
        const double rot = rng.uniform(-config_.augment_rotation_deg, config_.augment_rotation_deg) * kDegree;
        const double scale = rng.uniform(1.0 - config_.augment_scale, 1.0 + config_.augment_scale);
        const double tx = rng.uniform(-config_.augment_translation, config_.augment_translation);
        const double ty = rng.uniform(-config_.augment_translation, config_.augment_translation);
        if (u < config_.augment_prob) w = AffineParams::from_components(scale, rot, 0.0, tx, ty);
    }
    return out;
}

double Trainer::lr_factor(int64_t step) const {
    if (config_.lr_schedule != "cosine") return 1.0;
    const auto total = static_cast<double>(std::max<int64_t>(total_steps(), 1));
    return 0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step) / total));
}

namespace {

// Zero-padded separable-free Gaussian blur as one fixed convolution.
Tensor blurred(const Tensor& x, double sigma) {
    if (sigma <= 0.0) return x;
    const auto r = static_cast<int64_t>(std::ceil(2.0 * sigma));
    const int64_t k = 2 * r + 1;
    std::vector<float> w(static_cast<size_t>(k * k));
    double total = 0.0;
    for (int64_t i = 0; i < k; ++i) {
        for (int64_t j = 0; j < k; ++j) {
            const double d2 = static_cast<double>((i - r) * (i - r) + (j - r) * (j - r));
            total += (w[static_cast<size_t>(i * k + j)] = static_cast<float>(std::exp(-0.5 * d2 / (sigma * sigma))));
        }
    }
    for (auto& v : w) v = static_cast<float>(v / total);
    return conv2d(x, Tensor::from_vector({1, 1, k, k}, std::move(w)), Tensor(), 1, r);
}

}  // namespace

LossReport Trainer::step() {
    const int64_t index = step_;
    std::vector<Image> visible, thermal;
    for (auto i : batch_indices(index)) {
        visible.push_back(data_[i].visible);
        thermal.push_back(data_[i].thermal);
    }
    const Tensor A = unit_tensor(visible);
    Tensor B = unit_tensor(thermal);
    if (config_.augment_prob > 0.0) B = warp(B, theta_tensor<float>(augment_warps(index))).detach();
    const Tensor a = to_signed(A), b = to_signed(B);

    std::string stage = "flows";
    auto guarded = [&](const std::string& name, auto&& fn) {
        stage = name;
        auto t = fn();
        if (!std::isfinite(t.item())) throw TrainingAbort(index, name, "value " + std::to_string(t.item()));
        return t;
    };
    LossReport r;
    r.step = index;
    try {
        const FlowTensors f = model_.forward(A, B);

        // Discriminators first, on detached fakes.
        auto d1 = guarded("disc_v2t", [&] {
            return mul_scalar(add(lsgan(model_.disc_v2t()(a, b), 1.0f),
                                  lsgan(model_.disc_v2t()(a, f.fake_thermal.detach()), 0.0f)),
                              0.5f);
        });
        auto d2 = guarded("disc_t2v", [&] {
            return mul_scalar(add(lsgan(model_.disc_t2v()(b, a), 1.0f),
                                  lsgan(model_.disc_t2v()(b, f.fake_visible.detach()), 0.0f)),
                              0.5f);
        });
        const double lr_scale = lr_factor(index);
        d1_state_.config.lr = config_.lr_disc * lr_scale;
        d2_state_.config.lr = config_.lr_disc * lr_scale;
        gen_state_.config.lr = config_.lr_gen * lr_scale;
        stn_state_.config.lr = config_.lr_stn * lr_scale;
        zero_grads(d1_params_);
        zero_grads(d2_params_);
        stage = "disc_v2t";
        backward(d1);
        stage = "disc_t2v";
        backward(d2);
        adam_step(d1_params_, d1_state_);
        adam_step(d2_params_, d2_state_);

        // Joint generator + STN update against the refreshed discriminators.
        auto adv1 = guarded("adv_v2t", [&] { return lsgan(model_.disc_v2t()(a, f.fake_thermal), 1.0f); });
        auto adv2 = guarded("adv_t2v", [&] { return lsgan(model_.disc_t2v()(b, f.fake_visible), 1.0f); });
        auto l1_1 = guarded("l1_v2t", [&] { return l1_loss(f.fake_thermal, b); });
        auto reg = guarded("reg_v2t", [&] {
            return l1_loss(blurred(to_signed(f.registered), config_.reg_blur),
                           blurred(f.fake_thermal.detach(), config_.reg_blur));
        });
        auto l1_2 = guarded("l1_t2v", [&] { return l1_loss(f.fake_visible, a); });
        auto cyc = guarded("cycle", [&] {
            return l1_loss(f.cycle, config_.cycle_target == "visible" ? a : f.fake_visible);
        });
        auto treg = guarded("theta_reg", [&] {
            const auto identity = theta_tensor<float>({AffineParams::identity()});
            return mul_scalar(sum(square(sub(f.theta, identity))), 1.0f / static_cast<float>(f.theta.size(0)));
        });
        auto total = guarded("total", [&] {
            auto t = mul_scalar(add(adv1, adv2), static_cast<float>(config_.lambda_adv));
            t = add(t, mul_scalar(l1_1, static_cast<float>(config_.l1_v2t())));
            t = add(t, mul_scalar(l1_2, static_cast<float>(config_.l1_t2v())));
            t = add(t, mul_scalar(cyc, static_cast<float>(config_.lambda_cyc)));
            t = add(t, mul_scalar(treg, static_cast<float>(config_.lambda_theta)));
            const double on = index >= config_.reg_start ? 1.0 : 0.0;
            return add(t, mul_scalar(reg, static_cast<float>(config_.lambda_reg * on)));
        });
        zero_grads(gen_params_);
        zero_grads(stn_params_);
        stage = "total";
        backward(total);
        adam_step(gen_params_, gen_state_);
        adam_step(stn_params_, stn_state_);

        r.adv_v2t = value_of(adv1);
        r.l1_v2t = value_of(l1_1);
        r.adv_t2v = value_of(adv2);
        r.l1_t2v = value_of(l1_2);
        r.cycle = value_of(cyc);
        r.theta_reg = value_of(treg);
        r.reg_v2t = value_of(reg);
        r.disc_v2t = value_of(d1);
        r.disc_t2v = value_of(d2);
        r.total = value_of(total);
    } catch (const NonFiniteError& e) {
        throw TrainingAbort(index, stage, e.what());
    }
    // Optimizer updates bypass the graph checks; a blown-up parameter would
    // otherwise only surface on the next step.
    for (const auto* group : {&gen_params_, &stn_params_, &d1_params_, &d2_params_}) {
        for (const auto& p : *group) {
            for (float v : p.data()) {
                if (!std::isfinite(v)) throw TrainingAbort(index, "total", "parameter update produced a non-finite value");
            }
        }
    }
    ++step_;
    return r;
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c;
    c.config = config_to_map(config_);
    c.step = step_;
    c.tensors = model_.named_params();
    auto moments = [&](const std::string& group, const std::vector<Tensor>& params, const OptimState<float>& st) {
        for (size_t i = 0; i < params.size(); ++i) {
            const std::string idx = std::to_string(i);
            c.tensors.emplace_back("adam." + group + ".m." + idx, Tensor::from_vector(params[i].shape(), st.first_moment[i]));
            c.tensors.emplace_back("adam." + group + ".v." + idx, Tensor::from_vector(params[i].shape(), st.second_moment[i]));
        }
    };
    moments("gen", gen_params_, gen_state_);
    moments("stn", stn_params_, stn_state_);
    moments("disc_v2t", d1_params_, d1_state_);
    moments("disc_t2v", d2_params_, d2_state_);
    return c;
}

void Trainer::restore(const Checkpoint& ckpt) {
    const auto stored = config_from_map(ckpt.config);
    for (const char* key : {"image_size", "gen_stages", "gen_width", "disc_layers", "disc_width", "vit_dim", "vit_depth",
                            "vit_heads", "vit_mlp_ratio", "mlp_hidden"}) {
        if (config_to_map(stored).at(key) != config_to_map(config_).at(key)) {
            throw CheckpointError(std::string("checkpoint architecture differs in '") + key + "'");
        }
    }
    for (auto& [name, t] : model_.named_params()) {
        const Tensor* src = ckpt.find(name);
        if (!src) throw CheckpointError("checkpoint lacks parameter " + name);
        copy_into(t, *src, name);
    }
    auto moments = [&](const std::string& group, const std::vector<Tensor>& params, OptimState<float>& st) {
        for (size_t i = 0; i < params.size(); ++i) {
            const std::string idx = std::to_string(i);
            const Tensor* m = ckpt.find("adam." + group + ".m." + idx);
            const Tensor* v = ckpt.find("adam." + group + ".v." + idx);
            if (!m || !v) throw CheckpointError("checkpoint lacks optimizer state for " + group);
            if (m->numel() != params[i].numel() || v->numel() != params[i].numel()) {
                throw CheckpointError("optimizer state size mismatch in " + group);
            }
            st.first_moment[i].assign(m->data().begin(), m->data().end());
            st.second_moment[i].assign(v->data().begin(), v->data().end());
        }
        st.step = ckpt.step;
    };
    moments("gen", gen_params_, gen_state_);
    moments("stn", stn_params_, stn_state_);
    moments("disc_v2t", d1_params_, d1_state_);
    moments("disc_t2v", d2_params_, d2_state_);
    step_ = ckpt.step;
}

RegistrationModel load_model(const Checkpoint& ckpt) {
    RegistrationModel model(config_from_map(ckpt.config));
    for (auto& [name, t] : model.named_params()) {
        const Tensor* src = ckpt.find(name);
        if (!src) throw CheckpointError("checkpoint lacks parameter " + name);
        copy_into(t, *src, name);
    }
    return model;
}

TrainResult train(const Manifest& manifest, const TrainConfig& config, const TrainOptions& options) {
    config.validate();
    const auto train_pairs = manifest.split_pairs("train");
    if (train_pairs.empty()) throw ManifestError("manifest has no train pairs", {});
    check_subject_disjoint(manifest.pairs);
    Trainer trainer(config, load_pair_images(manifest, train_pairs));

    TrainResult result;
    fs::create_directories(options.out_dir);
    const fs::path log_path = options.out_dir / "loss.csv";
    std::vector<std::string> previous_rows;
    if (options.resume) {
        trainer.restore(load_checkpoint(*options.resume));
        // Keep the rows logged before the checkpoint so the log stays one
        // continuous, monotone record.
        std::ifstream in(log_path);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (std::stoll(line.substr(0, line.find(','))) < trainer.steps_done()) previous_rows.push_back(line);
        }
    }
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + log_path.string());
    log << LossReport::csv_header() << '\n';
    for (const auto& row : previous_rows) log << row << '\n';

    const int64_t total = trainer.total_steps();
    while (trainer.steps_done() < total) {
        const LossReport r = trainer.step();
        log << r.csv_row() << '\n';
        log.flush();
        result.losses.push_back(r);
        if (options.on_step) options.on_step(r);
        if (config.checkpoint_every > 0 && trainer.steps_done() % config.checkpoint_every == 0 &&
            trainer.steps_done() < total) {
            save_checkpoint(options.out_dir / ("checkpoint_" + std::to_string(trainer.steps_done()) + ".ckpt"),
                            trainer.checkpoint());
        }
    }
    result.checkpoint = options.out_dir / "final.ckpt";
    save_checkpoint(result.checkpoint, trainer.checkpoint());
    return result;
}

std::vector<Registration> register_pairs(const RegistrationModel& model, const std::vector<PairImages>& pairs,
                                         int64_t batch_size) {
    if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
    NoGradGuard no_grad;
    std::vector<Registration> out;
    const auto S = model.config().image_size;
    for (size_t start = 0; start < pairs.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(pairs.size(), start + static_cast<size_t>(batch_size));
        std::vector<Image> visible, thermal;
        for (size_t i = start; i < end; ++i) {
            const auto& p = pairs[i];
            if (p.visible.height != S || p.visible.width != S || !p.visible.same_size(p.thermal)) {
                throw ShapeError("pair " + p.pair_id + " does not match the model's " + std::to_string(S) + "x" +
                                 std::to_string(S) + " input size");
            }
            visible.push_back(p.visible);
            thermal.push_back(p.thermal);
        }
        const Tensor A = unit_tensor(visible), B = unit_tensor(thermal);
        const Tensor fake_thermal = model.flow1_v2t(A);
        const Tensor fake_visible = model.flow2_t2v(B);
        const auto [theta, registered] = model.flow3_register(A, fake_visible, B);
        const auto thetas = thetas_from_tensor(theta);
        for (size_t i = start; i < end; ++i) {
            const auto k = static_cast<int64_t>(i - start);
            out.push_back({pairs[i].pair_id, thetas[static_cast<size_t>(k)], unit_image(registered, k),
                           tensor_to_image(fake_thermal, k)});
        }
    }
    return out;
}

}  // namespace vtmorph
