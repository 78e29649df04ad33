#pragma once

// Dataset ingestion: manifests, subject-disjoint splits, thermal cropping and
// the synthetic paired-warp corpus that stands in for real VT data.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtmorph/image.hpp"
#include "vtmorph/spatial.hpp"

namespace vtmorph {

struct ImagePair {
    std::string pair_id;
    std::string subject_id;
    std::filesystem::path visible_path;  // relative paths resolve against Manifest::base_dir
    std::filesystem::path thermal_path;
    std::string split;  // "train" or "test"
    std::optional<int> pain_class;
    // Registration ground truth for synthetic pairs: the thermal image was
    // produced by warping with this theta.
    std::optional<AffineParams> theta_true;
};

struct Manifest {
    int version = 1;
    std::filesystem::path base_dir;
    std::vector<ImagePair> pairs;

    std::vector<ImagePair> split_pairs(const std::string& split) const;
    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

// Carries every individual problem found, not just the first.
class ManifestError : public std::runtime_error {
public:
    ManifestError(const std::string& summary, std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

enum class FileCheck {
    // Files must exist, decode as 8-bit gray PNG and match in size per pair.
    full,
    // Rows and invariants only; nothing is read from disk beyond the CSV.
    structure_only,
};

inline constexpr const char* kManifestHeader =
    "pair_id,subject_id,visible_path,thermal_path,split,pain_class,theta_a,theta_b,theta_tx,theta_c,theta_d,theta_ty";

Manifest load_manifest(const std::filesystem::path& path, FileCheck check = FileCheck::full);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
std::string format_manifest(const Manifest& manifest);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Throws ManifestError naming each subject that appears in both splits.
void check_subject_disjoint(const std::vector<ImagePair>& pairs);

// Assigns whole subjects to the test split: round(fraction * subjects),
// clamped to [1, subjects - 1], chosen by a seeded shuffle of the sorted ids.
Manifest split_subjects(const std::vector<ImagePair>& pairs, double test_fraction, uint64_t seed);

class EmptyForegroundError : public std::runtime_error {
public:
    EmptyForegroundError(double threshold, double otsu);
    double threshold;
    double suggested;
};

double otsu_threshold(const Image& img);

// Binarizes at v > threshold, keeps the largest 4-connected component (which
// must have at least min_component pixels), zeroes everything else, crops to
// the component's bounding box and resizes to out_size x out_size with
// nearest-neighbour sampling. Repeats until the component fills its frame, so
// the result is a fixed point: cropping it again returns it unchanged.
Image threshold_crop(const Image& thermal, double threshold, int64_t min_component, int64_t out_size);

struct WarpRange {
    double translation = 0.25;  // |tx|, |ty| in normalized units
    double rotation_deg = 15.0;
    double scale_min = 0.85;
    double scale_max = 1.15;
    double shear = 0.1;

    static WarpRange none() { return {0.0, 0.0, 1.0, 1.0, 0.0}; }
    // Throws std::invalid_argument when outside the supported bounds.
    void validate() const;
};

Image gaussian_blur(const Image& img, double sigma);

// Intensity inversion, Gaussian blur (sigma 1.5) and a seeded mild contrast
// remap.
Image pseudo_thermal(const Image& visible, uint64_t style_seed);

struct SynthPair {
    Image visible;
    Image thermal;
    AffineParams theta_true;
};

// visible = base, thermal = warp(pseudo_thermal(base), theta_true), both
// quantized to 8 bits so the in-memory pair equals its PNG files. Draws that
// push more than 40% of the thermal mass out of frame are redrawn.
SynthPair synth_pair(const Image& base, const WarpRange& range, uint64_t style_seed);

// Fraction of the image's intensity mass that leaves the frame when warped by theta.
double out_of_frame_fraction(const Image& img, const AffineParams& theta);

// Seeded cartoon face: bright background, shaded head, hair, eyes, brows,
// nose and mouth with per-seed geometry.
Image procedural_face(int64_t size, uint64_t seed);

struct SynthCorpusSpec {
    std::vector<std::filesystem::path> bases;  // visible base images; one subject each
    int64_t pairs = 10;
    WarpRange range;
    uint64_t seed = 0;
    double test_fraction = 0.2;
};

// Writes <id>_vis.png / <id>_thr.png and manifest.csv under out_dir. Pairs
// cycle through the bases; the split is by base (subject).
Manifest write_synth_corpus(const SynthCorpusSpec& spec, const std::filesystem::path& out_dir);

// Loaded pixels for a manifest subset.
struct PairImages {
    std::string pair_id;
    Image visible;
    Image thermal;
    std::optional<AffineParams> theta_true;
};

std::vector<PairImages> load_pair_images(const Manifest& manifest, const std::vector<ImagePair>& pairs);

}  // namespace vtmorph
