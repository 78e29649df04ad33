#pragma once

// Registration and translation quality scores.
//
// Registration: SSIM and NCC of morphological-gradient edge maps, plus mutual
// information of the raw intensities. Translation: Fréchet distance between
// feature sets and a perceptual distance, both over a pluggable feature
// extractor. All functions are pure.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vtmorph/config.hpp"
#include "vtmorph/image.hpp"

namespace vtmorph {

// dilation - erosion over a (2r+1)^2 square; the window is clipped at the border.
Image edge_map(const Image& img, int64_t radius = 1);

struct SsimParams {
    int64_t window = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

// Mean SSIM over every fully contained window position.
double ssim(const Image& x, const Image& y, const SsimParams& params = {});

struct NccResult {
    double value = 0.0;
    // Set when either input is constant; value is then 0.
    bool zero_variance = false;
};

NccResult ncc(const Image& x, const Image& y);

// Joint histogram over [0, 1] with `bins` bins per axis; natural log.
double mutual_information(const Image& x, const Image& y, int64_t bins = 32);
// Entropy of the marginal histogram used by mutual_information.
double histogram_entropy(const Image& x, int64_t bins = 32);

// Rows are samples. Covariances are unbiased with `jitter` on the diagonal.
double frechet_distance(const std::vector<std::vector<double>>& feats_a, const std::vector<std::vector<double>>& feats_b,
                        double jitter = 1e-6);

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    // One C x H x W map per layer, flattened channel-major.
    struct Layer {
        int64_t channels = 0, height = 0, width = 0;
        std::vector<float> values;
    };
    virtual std::vector<Layer> layers(const Image& img) const = 0;
    // Fixed-length embedding for Fréchet statistics.
    virtual std::vector<double> embed(const Image& img) const = 0;
    virtual std::string describe() const = 0;
};

// Four seeded random 3x3 stride-2 conv + ReLU layers (24, 48, 96, 192
// channels); the embedding is the global average of the last one.
class RandomConvExtractor final : public FeatureExtractor {
public:
    explicit RandomConvExtractor(uint64_t seed = 0);
    std::vector<Layer> layers(const Image& img) const override;
    std::vector<double> embed(const Image& img) const override;
    std::string describe() const override;
    uint64_t seed() const { return seed_; }

    static constexpr int64_t kEmbedDim = 192;

private:
    uint64_t seed_;
    std::vector<std::vector<float>> weights_;
    std::vector<std::vector<float>> biases_;
    std::vector<int64_t> channels_;
};

// Per layer: unit-normalize each position's channel vector, average the
// squared differences over positions; then average over layers.
double perceptual_distance(const Image& x, const Image& y, const FeatureExtractor& f);

struct MetricConfig {
    int64_t edge_radius = 1;
    SsimParams ssim;
    int64_t mi_bins = 32;
    uint64_t feature_seed = 0;

    void validate() const;
};

const std::vector<ConfigField<MetricConfig>>& metric_config_fields();
std::map<std::string, std::string> metric_config_to_map(const MetricConfig& config);
MetricConfig metric_config_from_map(const std::map<std::string, std::string>& values);

struct PairScores {
    std::string pair_id;
    double ssim_edges = 0, ncc_edges = 0, mutual_info = 0;
    std::optional<double> lpips_proxy;
    bool ncc_zero_variance = false;
};

struct StageScores {
    double ssim_edges = 0, ncc_edges = 0, mutual_info = 0;
    std::optional<double> fid, lpips_proxy;
};

struct MetricReport {
    std::vector<PairScores> before, after;
    StageScores mean_before, mean_after;
    // Percent for SSIM, MI, FID and LPIPS; a multiplicative factor for NCC.
    StageScores delta;
    std::string extractor;
    // Pair ids (or files) present on one side only, or missing a component.
    std::vector<std::string> unmatched;

    std::string csv() const;
    std::string table() const;
};

// Percent change relative to `before`, as reported for scores that should rise.
double percent_rise(double before, double after);
// Percent change relative to `after`, as reported for distances that should fall.
double percent_fall(double before, double after);
double factor(double before, double after);

// Scores for one (visible, thermal) pair; lpips_proxy is filled when a
// generated thermal is given.
PairScores score_pair(const std::string& pair_id, const Image& visible, const Image& thermal, const Image* generated,
                      const MetricConfig& config, const FeatureExtractor& extractor);

// before_dir holds <id>_vis.png and <id>_thr.png. after_dir holds <id>_vis.png
// and <id>_thr_reg.png (falling back to <id>_thr.png). An <id>_gen.png in
// either directory (after_dir first) enables FID and the perceptual distance,
// both measured between the thermal of each stage and the generated thermal.
MetricReport evaluate_pairs(const std::filesystem::path& before_dir, const std::filesystem::path& after_dir,
                            const MetricConfig& config);
// Same, with caller-chosen feature extractor.
MetricReport evaluate_pairs(const std::filesystem::path& before_dir, const std::filesystem::path& after_dir,
                            const MetricConfig& config, const FeatureExtractor& extractor);

}  // namespace vtmorph
