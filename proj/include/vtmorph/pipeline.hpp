#pragma once

// File-level workflows shared by the command line and the acceptance run:
// registering a whole manifest to disk and the synthesis settings.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vtmorph/config.hpp"
#include "vtmorph/data.hpp"
#include "vtmorph/metrics.hpp"
#include "vtmorph/trainer.hpp"

namespace vtmorph {

struct SynthConfig {
    WarpRange range;
    double test_fraction = 0.2;

    void validate() const;
};

const std::vector<ConfigField<SynthConfig>>& synth_config_fields();
std::map<std::string, std::string> synth_config_to_map(const SynthConfig& config);
SynthConfig synth_config_from_map(const std::map<std::string, std::string>& values);

// "translation,rotation_deg,scale_min,scale_max,shear", or "0" for no warp.
WarpRange parse_warp_range(const std::string& text);

struct RegisteredRow {
    std::string pair_id;
    std::string split;
    AffineParams theta;
    // Against invert(theta_true), which undoes the synthetic warp.
    std::optional<double> corner_error_px;
    // Visible vs thermal before registration and vs B_R after.
    PairScores before, after;
};

struct RegisterOutput {
    std::vector<RegisteredRow> rows;
    // "<pair id>: <reason>" for pairs that could not be registered.
    std::vector<std::string> skipped;
};

inline constexpr const char* kRegistrationFile = "registration.csv";

struct RegisterOptions {
    int64_t batch_size = 8;
    // Skip and list pairs whose size differs from the model's instead of
    // rejecting the whole run.
    bool continue_on_error = false;
    MetricConfig metrics;
};

// For each pair writes <id>_vis.png, <id>_thr.png (the input thermal),
// <id>_thr_reg.png and <id>_gen.png into out_dir, plus registration.csv with
// theta and before/after scores per pair.
RegisterOutput register_manifest(const RegistrationModel& model, const Manifest& manifest,
                                 const std::filesystem::path& out_dir, const RegisterOptions& options = {});

std::string registration_csv(const std::vector<RegisteredRow>& rows);

}  // namespace vtmorph
