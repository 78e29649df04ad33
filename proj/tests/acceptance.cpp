// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 1
// if any criterion fails.
//
//   vtmorph_acceptance [only=1,3] [work=DIR] [train_key=value ...]
//
// Keys other than `only` and `work` override the training config used by the
// synthetic-warp recovery run (criteria 3 and 4).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vtmorph/checkpoint.hpp"
#include "vtmorph/data.hpp"
#include "vtmorph/gradcheck.hpp"
#include "vtmorph/image.hpp"
#include "vtmorph/metrics.hpp"
#include "vtmorph/pipeline.hpp"
#include "vtmorph/rng.hpp"
#include "vtmorph/spatial.hpp"
#include "vtmorph/trainer.hpp"

using namespace vtmorph;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool passed = true;
    std::string detail;
};

// Collects the failed sub-checks of one criterion.
struct Checks {
    std::vector<std::string> failures;
    std::ostringstream info;

    void require(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    Outcome outcome() const {
        Outcome o{failures.empty(), info.str()};
        for (const auto& f : failures) o.detail += (o.detail.empty() ? "" : "; ") + std::string("FAILED ") + f;
        return o;
    }
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Every regular file under dir, keyed by relative path.
std::map<std::string, std::string> tree_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

fs::path fresh(const fs::path& p) {
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<fs::path> write_faces(const fs::path& dir, int64_t n, int64_t size, uint64_t seed) {
    fresh(dir);
    std::vector<fs::path> paths;
    for (int64_t i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "face_%04lld.png", static_cast<long long>(i));
        write_png(dir / name, procedural_face(size, seed + static_cast<uint64_t>(i)));
        paths.push_back(dir / name);
    }
    return paths;
}

Manifest subset(const Manifest& m, const std::string& split) {
    Manifest out = m;
    out.pairs = m.split_pairs(split);
    return out;
}

Image random_image(Rng& rng, int64_t h, int64_t w) {
    Image img(h, w);
    for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
    return img;
}

// Smooth image in [0, 1] so bilinear resampling loses little.
Image smooth_image(int64_t size) {
    Image img(size, size);
    for (int64_t i = 0; i < size; ++i)
        for (int64_t j = 0; j < size; ++j) {
            const double y = (2.0 * i + 1.0) / size - 1.0, x = (2.0 * j + 1.0) / size - 1.0;
            img.at(i, j) =
                static_cast<float>(0.5 + 0.3 * std::sin(3.0 * x) * std::cos(2.0 * y) + 0.15 * std::exp(-4.0 * (x * x + y * y)));
        }
    return img;
}

Image warp_image(const Image& img, const AffineParams& theta) {
    return unit_image(warp(unit_tensor({img}), theta_tensor<float>({theta})), 0);
}

// Bright blobs of varying size on a dark, noisy background.
Image blob_scene(uint64_t seed) {
    Rng rng(seed);
    Image img(64, 64);
    for (auto& v : img.pixels) v = static_cast<float>(0.2 * rng.uniform());
    const int blobs = 1 + static_cast<int>(rng.below(3));
    for (int b = 0; b < blobs; ++b) {
        const double cy = rng.uniform(10, 54), cx = rng.uniform(10, 54);
        const double ry = rng.uniform(4, 14), rx = rng.uniform(4, 14);
        for (int64_t i = 0; i < 64; ++i)
            for (int64_t j = 0; j < 64; ++j) {
                const double d = std::pow((i - cy) / ry, 2) + std::pow((j - cx) / rx, 2);
                if (d < 1.0) img.at(i, j) = static_cast<float>(0.6 + 0.4 * rng.uniform());
            }
    }
    return img;
}

// 1. Finite-difference gradient suite.
Outcome gradient_suite_criterion() {
    Checks c;
    const auto t0 = Clock::now();
    const auto report = run_gradient_suite(100, 1e-4);
    const double elapsed = seconds_since(t0);
    const auto* worst = report.worst();
    c.info << report.rows.size() << " ops x 100 seeds, worst " << (worst ? worst->op : "-") << " "
           << fmt(worst ? worst->worst_error : 0.0) << ", " << fmt(elapsed, 3) << " s";
    for (const auto& row : report.rows)
        c.require(row.passed, row.op + " rel err " + fmt(row.worst_error) + " (seed " + std::to_string(row.worst_seed) +
                                  ")" + (row.failure.empty() ? "" : ": " + row.failure));
    c.require(report.rows.size() >= 1, "suite is empty");
    c.require(elapsed < 120.0, "runtime " + fmt(elapsed, 3) + " s >= 120 s");
    return c.outcome();
}

// 2. Identity-initialized regressor leaves every thermal unchanged.
Outcome identity_criterion(const fs::path& work) {
    Checks c;
    const auto t0 = Clock::now();
    SynthCorpusSpec spec;
    spec.bases = write_faces(work / "id_faces", 12, 64, 500);
    spec.pairs = 24;
    spec.range = {0.15, 10.0, 0.9, 1.1, 0.0};
    spec.seed = 5;
    const auto manifest = write_synth_corpus(spec, work / "id_corpus");
    const RegistrationModel model{TrainConfig{}};
    const auto pairs = load_pair_images(manifest, manifest.pairs);
    const auto regs = register_pairs(model, pairs, 8);
    int identical = 0;
    for (size_t i = 0; i < regs.size(); ++i) {
        const bool same = quantized(regs[i].registered) == pairs[i].thermal;
        identical += same;
        c.require(same, pairs[i].pair_id + " B_R differs from B");
        c.require(regs[i].theta == AffineParams::identity(), pairs[i].pair_id + " theta is not the identity");
    }
    c.require(!regs.empty(), "no pairs registered");
    c.info << identical << "/" << regs.size() << " pairs bit-identical, " << fmt(seconds_since(t0), 3) << " s";
    return c.outcome();
}

struct RecoveryResult {
    Outcome recovery;
    Outcome metrics;
};

double mean_of(const std::vector<RegisteredRow>& rows, const std::function<double(const RegisteredRow&)>& f) {
    double s = 0;
    for (const auto& r : rows) s += f(r);
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

// 3 and 4. Train on 200 synthetic pairs, register the 200 train and 50
// held-out pairs and score them.
RecoveryResult recovery_criteria(const fs::path& work, const std::map<std::string, std::string>& overrides) {
    const auto t0 = Clock::now();
    SynthCorpusSpec spec;
    spec.bases = write_faces(work / "faces", 250, 64, 0);
    spec.pairs = 250;
    spec.range = {0.15, 10.0, 0.9, 1.1, 0.0};
    spec.seed = 0;
    spec.test_fraction = 0.2;
    const auto manifest = write_synth_corpus(spec, work / "corpus");
    const auto train_set = subset(manifest, "train"), test_set = subset(manifest, "test");

    std::map<std::string, std::string> values{{"gen_width", "16"}, {"disc_width", "16"}};
    for (const auto& [k, v] : overrides) values[k] = v;
    const TrainConfig config = config_from_map(values);
    TrainOptions options;
    options.out_dir = fresh(work / "run");
    options.on_step = [&](const LossReport& r) {
        if (r.step % 250 == 0) std::cerr << "  step " << r.step << "  total " << fmt(r.total) << "  " << fmt(seconds_since(t0), 4) << " s\n";
    };
    std::cerr << "  training " << config.steps << " steps on " << train_set.pairs.size() << " pairs\n";
    const auto result = train(manifest, config, options);
    const auto model = load_model(load_checkpoint(result.checkpoint));
    const auto train_out = register_manifest(model, train_set, work / "reg_train");
    const auto test_out = register_manifest(model, test_set, work / "reg_test");
    const double elapsed = seconds_since(t0);

    auto corner = [](const RegisteredRow& r) { return r.corner_error_px.value_or(NAN); };
    const double train_err = mean_of(train_out.rows, corner), test_err = mean_of(test_out.rows, corner);
    const double steps = static_cast<double>(result.losses.size());

    RecoveryResult out;
    {
        Checks c;
        c.info << train_out.rows.size() << " train / " << test_out.rows.size() << " test pairs, " << steps
               << " steps, corner error train " << fmt(train_err) << " px, test " << fmt(test_err) << " px, "
               << fmt(elapsed / 60.0, 3) << " min";
        c.require(train_out.rows.size() == 200 && test_out.rows.size() == 50, "split is not 200/50");
        c.require(steps <= 2000, "more than 2000 steps");
        c.require(test_err < 2.0, "held-out corner error " + fmt(test_err) + " px >= 2.0");
        c.require(train_err < 1.0, "training corner error " + fmt(train_err) + " px >= 1.0");
        c.require(elapsed < 1800.0, "runtime " + fmt(elapsed / 60.0, 3) + " min >= 30");
        out.recovery = c.outcome();
    }
    {
        Checks c;
        const auto& rows = test_out.rows;
        const double ssim_b = mean_of(rows, [](auto& r) { return r.before.ssim_edges; });
        const double ssim_a = mean_of(rows, [](auto& r) { return r.after.ssim_edges; });
        const double ncc_b = mean_of(rows, [](auto& r) { return r.before.ncc_edges; });
        const double ncc_a = mean_of(rows, [](auto& r) { return r.after.ncc_edges; });
        const double mi_b = mean_of(rows, [](auto& r) { return r.before.mutual_info; });
        const double mi_a = mean_of(rows, [](auto& r) { return r.after.mutual_info; });
        c.info << "held-out SSIM " << fmt(ssim_b) << " -> " << fmt(ssim_a) << ", NCC " << fmt(ncc_b) << " -> "
               << fmt(ncc_a) << " (x" << fmt(factor(ncc_b, ncc_a), 3) << "), MI " << fmt(mi_b) << " -> " << fmt(mi_a);
        c.require(ssim_a > ssim_b, "SSIM did not rise");
        c.require(ncc_a > ncc_b, "NCC did not rise");
        c.require(mi_a > mi_b, "MI did not rise");
        c.require(ncc_b > 0 && ncc_a >= 2.0 * ncc_b, "NCC factor below 2");
        out.metrics = c.outcome();
    }
    return out;
}

std::vector<std::vector<double>> gaussian_rows(int64_t n, double mean, double sigma, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows(static_cast<size_t>(n));
    for (auto& r : rows) r = {mean + sigma * rng.normal()};
    return rows;
}

// 5. Metric identities.
Outcome metric_identities_criterion() {
    Checks c;
    Rng rng(11);
    double worst_ssim = 0, worst_ncc = 0, worst_mi = 0, worst_fid = 0, worst_lpips = 0;
    const RandomConvExtractor extractor(0);
    for (int trial = 0; trial < 20; ++trial) {
        const Image x = trial % 2 ? random_image(rng, 64, 64) : procedural_face(64, static_cast<uint64_t>(trial));
        worst_ssim = std::max(worst_ssim, std::abs(ssim(x, x) - 1.0));
        worst_ncc = std::max(worst_ncc, std::abs(ncc(x, x).value - 1.0));
        worst_mi = std::max(worst_mi, std::abs(mutual_information(x, x) - histogram_entropy(x)));
        worst_lpips = std::max(worst_lpips, std::abs(perceptual_distance(x, x, extractor)));
        std::vector<std::vector<double>> feats(50, std::vector<double>(4));
        for (auto& row : feats)
            for (auto& v : row) v = rng.normal();
        worst_fid = std::max(worst_fid, std::abs(frechet_distance(feats, feats)));
    }
    const double gauss = frechet_distance(gaussian_rows(10000, 0.0, 1.0, 21), gaussian_rows(10000, 3.0, 1.0, 22));
    c.info << "max |ssim-1| " << fmt(worst_ssim) << ", |ncc-1| " << fmt(worst_ncc) << ", |MI-H| " << fmt(worst_mi)
           << ", frechet(F,F) " << fmt(worst_fid) << ", lpips(x,x) " << fmt(worst_lpips) << ", 1-D Gaussians "
           << fmt(gauss) << " (closed form 9)";
    c.require(worst_ssim <= 1e-9, "ssim(x,x) != 1");
    c.require(worst_ncc <= 1e-9, "ncc(x,x) != 1");
    c.require(worst_mi <= 1e-9, "MI(x,x) != H(x)");
    c.require(worst_fid < 1e-6, "frechet(F,F) >= 1e-6");
    c.require(worst_lpips == 0.0, "perceptual_distance(x,x) != 0");
    c.require(std::abs(gauss - 9.0) <= 0.5, "1-D Gaussian frechet off by more than 0.5");
    return c.outcome();
}

// 6. Warp algebra.
Outcome warp_algebra_criterion() {
    Checks c;
    Rng rng(17);
    auto mild = [&] {
        return AffineParams::from_components(rng.uniform(0.9, 1.1), rng.uniform(-0.17, 0.17), rng.uniform(-0.05, 0.05),
                                             rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15));
    };
    auto distance = [](const AffineParams& a, const AffineParams& b) {
        double d = 0;
        for (size_t i = 0; i < 6; ++i) d = std::max(d, std::abs(a.v[i] - b.v[i]));
        return d;
    };
    double worst_algebra = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto t = mild(), u = mild();
        worst_algebra = std::max(worst_algebra, distance(compose(invert(t), t), AffineParams::identity()));
        worst_algebra = std::max(worst_algebra, distance(compose(t, invert(t)), AffineParams::identity()));
        worst_algebra = std::max(worst_algebra, distance(invert(invert(t)), t));
        worst_algebra = std::max(worst_algebra, distance(invert(compose(t, u)), compose(invert(u), invert(t))));
    }
    std::vector<double> pixel_errors;
    for (int64_t w : {32, 64, 128}) {
        const auto shifted = AffineParams::translation(2.0 / static_cast<double>(w), 0.0);
        pixel_errors.push_back(corner_error(shifted, AffineParams::identity(), 64, w));
        const auto down = AffineParams::translation(0.0, 2.0 / static_cast<double>(w));
        pixel_errors.push_back(corner_error(down, AffineParams::identity(), w, 64));
    }
    double worst_roundtrip = 0;
    const Image img = smooth_image(64);
    for (int trial = 0; trial < 20; ++trial) {
        const auto theta = mild();
        const Image back = warp_image(warp_image(img, theta), invert(theta));
        double err = 0;
        int count = 0;
        for (int64_t i = 16; i < 48; ++i)
            for (int64_t j = 16; j < 48; ++j, ++count) err += std::abs(back.at(i, j) - img.at(i, j));
        worst_roundtrip = std::max(worst_roundtrip, err / count);
    }
    c.info << "max algebra residual " << fmt(worst_algebra) << ", one-pixel errors";
    for (double e : pixel_errors) c.info << " " << fmt(e, 17);
    c.info << ", worst round-trip interior error " << fmt(worst_roundtrip);
    c.require(worst_algebra <= 1e-6, "compose/invert residual above 1e-6");
    for (double e : pixel_errors) c.require(e == 1.0, "one-pixel corner error " + fmt(e, 17) + " != 1.0");
    c.require(worst_roundtrip < 0.02, "round-trip interior error >= 0.02");
    return c.outcome();
}

// 7. Splits, threshold_crop and file round trips.
Outcome pipeline_criterion(const fs::path& work) {
    Checks c;
    Rng rng(2024);
    int split_failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int subjects = 2 + static_cast<int>(rng.below(30));
        std::vector<ImagePair> pairs;
        std::multiset<std::string> ids;
        for (int s = 0; s < subjects; ++s) {
            const int count = 1 + static_cast<int>(rng.below(5));
            for (int k = 0; k < count; ++k) {
                ImagePair p;
                p.pair_id = "p" + std::to_string(pairs.size());
                p.subject_id = "S" + std::to_string(s);
                p.visible_path = p.pair_id + "_vis.png";
                p.thermal_path = p.pair_id + "_thr.png";
                p.split = "train";
                ids.insert(p.pair_id);
                pairs.push_back(std::move(p));
            }
        }
        std::shuffle(pairs.begin(), pairs.end(), std::mt19937_64(rng.next_u64()));
        const auto m = split_subjects(pairs, rng.uniform(0.01, 0.99), rng.next_u64());
        std::set<std::string> train, test;
        std::multiset<std::string> out_ids;
        for (const auto& p : m.pairs) {
            (p.split == "train" ? train : test).insert(p.subject_id);
            out_ids.insert(p.pair_id);
        }
        bool disjoint = true;
        for (const auto& s : test) disjoint = disjoint && !train.count(s);
        if (!disjoint || out_ids != ids || train.empty() || test.empty()) ++split_failures;
    }
    c.require(split_failures == 0, std::to_string(split_failures) + " split cases not subject-disjoint");

    int crop_failures = 0, crops = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        const Image scene = blob_scene(seed);
        for (int64_t size : {32, 48, 64}) {
            const Image once = threshold_crop(scene, 0.5, 5, size);
            crop_failures += !(threshold_crop(once, 0.5, 5, size) == once);
            ++crops;
        }
    }
    c.require(crop_failures == 0, std::to_string(crop_failures) + " threshold_crop results not idempotent");

    SynthCorpusSpec spec;
    spec.bases = write_faces(work / "rt_faces", 6, 64, 900);
    spec.pairs = 12;
    spec.seed = 3;
    const auto written = write_synth_corpus(spec, work / "rt_corpus");
    const auto reread = load_manifest(work / "rt_corpus" / "manifest.csv");
    c.require(format_manifest(reread) == format_manifest(written), "manifest text changed on reload");
    bool thetas_equal = reread.pairs.size() == written.pairs.size();
    for (size_t i = 0; thetas_equal && i < reread.pairs.size(); ++i)
        thetas_equal = reread.pairs[i].theta_true == written.pairs[i].theta_true &&
                       reread.pairs[i].split == written.pairs[i].split &&
                       reread.pairs[i].subject_id == written.pairs[i].subject_id;
    c.require(thetas_equal, "manifest fields changed on reload");

    float worst_png = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const Image img = random_image(rng, 17 + trial, 64 - trial);
        const auto path = work / ("rt_" + std::to_string(trial) + ".png");
        write_png(path, img);
        const Image back = read_png(path);
        c.require(back.same_size(img), "png size changed");
        if (!back.same_size(img)) continue;
        for (size_t i = 0; i < img.pixels.size(); ++i) worst_png = std::max(worst_png, std::abs(back.pixels[i] - img.pixels[i]));
        write_png(path, back);
        c.require(read_png(path) == back, "quantized png is not a fixed point");
    }
    c.require(worst_png <= 0.5f / 255.0f + 1e-6f, "png error " + fmt(worst_png) + " above half a gray level");
    c.info << "1000 split cases, " << crops << " crops, manifest of " << reread.pairs.size()
           << " pairs, png max error " << fmt(worst_png * 255.0f, 3) << "/255";
    return c.outcome();
}

// 8. Same seeds, same bytes.
Outcome determinism_criterion(const fs::path& work) {
    Checks c;
    SynthCorpusSpec spec;
    spec.bases = write_faces(work / "det_faces", 8, 64, 300);
    spec.pairs = 16;
    spec.range = {0.15, 10.0, 0.9, 1.1, 0.0};
    spec.seed = 9;
    const auto manifest = write_synth_corpus(spec, work / "det_corpus_a");
    write_synth_corpus(spec, work / "det_corpus_b");
    const auto corpus_a = tree_contents(work / "det_corpus_a"), corpus_b = tree_contents(work / "det_corpus_b");
    c.require(corpus_a == corpus_b, "synthetic corpora differ");

    std::map<std::string, std::string> values{{"steps", "12"},         {"batch_size", "4"}, {"gen_width", "8"},
                                              {"disc_width", "8"},     {"vit_dim", "32"},   {"vit_depth", "1"},
                                              {"checkpoint_every", "0"}};
    const TrainConfig config = config_from_map(values);
    std::vector<std::string> logs, registrations;
    for (const char* run : {"det_run_a", "det_run_b"}) {
        TrainOptions options;
        options.out_dir = fresh(work / run);
        const auto result = train(manifest, config, options);
        logs.push_back(slurp(options.out_dir / "loss.csv"));
        const auto model = load_model(load_checkpoint(result.checkpoint));
        register_manifest(model, manifest, options.out_dir / "reg");
        registrations.push_back(slurp(options.out_dir / "reg" / kRegistrationFile));
    }
    const auto log_rows = std::count(logs[0].begin(), logs[0].end(), '\n') - 1;
    c.require(log_rows >= 10, "loss log has fewer than 10 steps");
    c.require(logs[0] == logs[1], "loss logs differ");
    c.require(registrations[0] == registrations[1], "registration results differ");
    c.require(!registrations[0].empty(), "registration results missing");
    c.info << corpus_a.size() << " corpus files, " << log_rows << "-step loss logs, "
           << std::count(registrations[0].begin(), registrations[0].end(), '\n') - 1 << " registration rows";
    return c.outcome();
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    fs::path work = fs::temp_directory_path() / "vtmorph_acceptance";
    std::map<std::string, std::string> overrides;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        const auto eq = arg.find('=');
        if (eq == std::string::npos) {
            std::cerr << "expected key=value, got '" << arg << "'\n";
            return 2;
        }
        const auto key = arg.substr(0, eq), value = arg.substr(eq + 1);
        if (key == "only") {
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
        } else if (key == "work") {
            work = value;
        } else {
            overrides[key] = value;
        }
    }
    try {
        config_from_map(overrides).validate();
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    fresh(work);

    auto wanted = [&](int n) { return only.empty() || only.count(n); };
    bool all_passed = true;
    auto report = [&](int n, const std::string& name, const Outcome& o) {
        std::cout << (o.passed ? "PASS" : "FAIL") << "  " << n << ". " << name << ": " << o.detail << std::endl;
        all_passed = all_passed && o.passed;
    };
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            return Outcome{false, std::string("exception: ") + e.what()};
        }
    };

    if (wanted(1)) report(1, "gradient suite", guarded(gradient_suite_criterion));
    if (wanted(2)) report(2, "STN identity invariant", guarded([&] { return identity_criterion(work); }));
    if (wanted(3) || wanted(4)) {
        RecoveryResult r;
        try {
            r = recovery_criteria(work, overrides);
        } catch (const std::exception& e) {
            r.recovery = r.metrics = Outcome{false, std::string("exception: ") + e.what()};
        }
        if (wanted(3)) report(3, "synthetic-warp recovery", r.recovery);
        if (wanted(4)) report(4, "directional metric improvement", r.metrics);
    }
    if (wanted(5)) report(5, "metric identities", guarded(metric_identities_criterion));
    if (wanted(6)) report(6, "warp algebra", guarded(warp_algebra_criterion));
    if (wanted(7)) report(7, "pipeline invariants", guarded([&] { return pipeline_criterion(work); }));
    if (wanted(8)) report(8, "determinism", guarded([&] { return determinism_criterion(work); }));
    return all_passed ? 0 : 1;
}
