#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "vtmorph/data.hpp"
#include "vtmorph/image.hpp"
#include "vtmorph/metrics.hpp"
#include "vtmorph/rng.hpp"
#include "vtmorph/spatial.hpp"

using namespace vtmorph;
namespace fs = std::filesystem;

namespace {

Image noise_image(int64_t h, int64_t w, uint64_t seed) {
    Rng rng(seed);
    Image img(h, w);
    for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
    return img;
}

Image smooth_image(int64_t size, double phase) {
    Image img(size, size);
    for (int64_t r = 0; r < size; ++r)
        for (int64_t c = 0; c < size; ++c)
            img.at(r, c) = static_cast<float>(0.5 + 0.4 * std::sin(0.3 * c + phase) * std::cos(0.2 * r));
    return img;
}

// Pearson correlation from raw sums, a different route from the centered one.
double pearson_oracle(const Image& x, const Image& y) {
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    const auto n = static_cast<long double>(x.pixels.size());
    for (size_t i = 0; i < x.pixels.size(); ++i) {
        const long double a = x.pixels[i], b = y.pixels[i];
        sx += a, sy += b, sxx += a * a, syy += b * b, sxy += a * b;
    }
    return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

double entropy_oracle(const Image& x, int bins) {
    std::map<int, int> counts;
    for (auto v : x.pixels) counts[std::min(bins - 1, static_cast<int>(v * bins))]++;
    double h = 0;
    for (auto [bin, c] : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(x.pixels.size());
        h -= p * std::log(p);
    }
    return h;
}

std::vector<std::vector<double>> gaussian_rows(size_t n, std::vector<double> mean, std::vector<double> sd, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows(n, std::vector<double>(mean.size()));
    for (auto& r : rows)
        for (size_t j = 0; j < mean.size(); ++j) r[j] = mean[j] + sd[j] * rng.normal();
    return rows;
}

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / ("vtmorph_metrics_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("edge_map: constant is flat, single pixel dilates to a 3x3 block") {
    const Image flat(9, 9, 0.4f);
    for (auto v : edge_map(flat).pixels) CHECK(v == 0.0f);

    Image dot(7, 7, 0.0f);
    dot.at(3, 3) = 1.0f;
    const Image e = edge_map(dot, 1);
    for (int64_t r = 0; r < 7; ++r)
        for (int64_t c = 0; c < 7; ++c) {
            const bool inside = std::abs(r - 3) <= 1 && std::abs(c - 3) <= 1;
            CHECK(e.at(r, c) == (inside ? 1.0f : 0.0f));
        }
    CHECK_THROWS_AS(edge_map(dot, 0), std::invalid_argument);
}

TEST_CASE("edge_map: nonnegative and matches a brute-force max-min") {
    const Image x = noise_image(13, 11, 5);
    for (int64_t radius : {1, 2}) {
        const Image e = edge_map(x, radius);
        for (int64_t r = 0; r < x.height; ++r)
            for (int64_t c = 0; c < x.width; ++c) {
                float hi = 0, lo = 1;
                for (int64_t i = r - radius; i <= r + radius; ++i)
                    for (int64_t j = c - radius; j <= c + radius; ++j) {
                        if (i < 0 || j < 0 || i >= x.height || j >= x.width) continue;
                        hi = std::max(hi, x.at(i, j));
                        lo = std::min(lo, x.at(i, j));
                    }
                CHECK(e.at(r, c) == hi - lo);
                CHECK(e.at(r, c) >= 0.0f);
            }
    }
}

TEST_CASE("ssim: identity, symmetry, inversion and shape errors") {
    const Image x = smooth_image(32, 0.0), y = smooth_image(32, 0.7);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(x, y) == ssim(y, x));
    CHECK(ssim(x, y) < 1.0);

    Image half(32, 32, 0.0f), inverted(32, 32, 1.0f);
    for (int64_t r = 0; r < 32; ++r)
        for (int64_t c = 16; c < 32; ++c) {
            half.at(r, c) = 1.0f;
            inverted.at(r, c) = 0.0f;
        }
    CHECK(ssim(half, inverted) < 0.2);
    CHECK_THROWS_AS(ssim(x, Image(31, 32)), std::invalid_argument);
    CHECK_THROWS_AS(ssim(Image(8, 8), Image(8, 8)), std::invalid_argument);
}

TEST_CASE("ssim: constant images reduce to the luminance term") {
    // Zero variance leaves (2 mx my + c1) / (mx^2 + my^2 + c1).
    const double a = 0.3, b = 0.6, c1 = 0.01 * 0.01;
    const double expected = (2 * a * b + c1) / (a * a + b * b + c1);
    CHECK(ssim(Image(16, 16, static_cast<float>(a)), Image(16, 16, static_cast<float>(b))) ==
          doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("ncc: self, anti-correlation, oracle agreement and flat inputs") {
    const Image x = noise_image(20, 20, 1), y = noise_image(20, 20, 2);
    CHECK(ncc(x, x).value == doctest::Approx(1.0).epsilon(1e-12));
    Image neg = x;
    for (auto& v : neg.pixels) v = 1.0f - v;
    CHECK(ncc(x, neg).value == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(ncc(x, y).value == doctest::Approx(pearson_oracle(x, y)).epsilon(1e-9));
    CHECK(ncc(x, y).value == ncc(y, x).value);

    const auto flat = ncc(x, Image(20, 20, 0.5f));
    CHECK(flat.value == 0.0);
    CHECK(flat.zero_variance);
    CHECK_FALSE(ncc(x, y).zero_variance);
}

TEST_CASE("mutual information equals entropy on identical images") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const Image x = noise_image(24, 24, seed);
        CHECK(std::abs(mutual_information(x, x, 32) - entropy_oracle(x, 32)) < 1e-9);
        CHECK(std::abs(histogram_entropy(x, 32) - entropy_oracle(x, 32)) < 1e-12);
    }
    const Image a = noise_image(16, 16, 7), b = noise_image(16, 16, 8);
    CHECK(mutual_information(a, b) == mutual_information(b, a));
    CHECK(mutual_information(a, b) >= -1e-12);
    CHECK_THROWS_AS(mutual_information(a, b, 1), std::invalid_argument);
}

TEST_CASE("mutual information of independent noise stays near the estimator bias") {
    // The plug-in estimate on independent data is positive by roughly
    // (bins - 1)^2 / (2 N); with 32 bins and 4096 pixels that is about 0.117.
    const Image a = noise_image(64, 64, 11), b = noise_image(64, 64, 12);
    const double mi = mutual_information(a, b, 32);
    const double bias = 31.0 * 31.0 / (2.0 * 4096.0);
    CHECK(mi > 0.0);
    CHECK(std::abs(mi - bias) < 0.05);
    // With 8 bins the bias is 0.006 and the estimate is close to zero.
    CHECK(mutual_information(a, b, 8) < 0.05);
}

TEST_CASE("frechet distance: identity, 1-D closed form, symmetry") {
    const auto f = gaussian_rows(400, {0.0, 1.0, -2.0}, {1.0, 0.5, 2.0}, 3);
    CHECK(frechet_distance(f, f) < 1e-6);

    const auto a = gaussian_rows(10000, {0.0}, {1.0}, 21), b = gaussian_rows(10000, {3.0}, {1.0}, 22);
    CHECK(std::abs(frechet_distance(a, b) - 9.0) < 0.5);

    const auto g = gaussian_rows(300, {0.5, 1.0, -1.0}, {2.0, 0.3, 1.0}, 4);
    CHECK(std::abs(frechet_distance(f, g) - frechet_distance(g, f)) < 1e-6);
    CHECK_THROWS_AS(frechet_distance(f, gaussian_rows(10, {0.0}, {1.0}, 1)), std::invalid_argument);
}

TEST_CASE("frechet distance matches the 2-D closed form from sample moments") {
    // In 2-D, Tr((Ca Cb)^1/2) = sqrt(tr(Ca Cb) + 2 sqrt(det Ca det Cb)).
    auto stats = [](const std::vector<std::vector<double>>& rows) {
        double m0 = 0, m1 = 0;
        for (auto& r : rows) m0 += r[0], m1 += r[1];
        m0 /= rows.size(), m1 /= rows.size();
        double c00 = 0, c01 = 0, c11 = 0;
        for (auto& r : rows) {
            c00 += (r[0] - m0) * (r[0] - m0);
            c01 += (r[0] - m0) * (r[1] - m1);
            c11 += (r[1] - m1) * (r[1] - m1);
        }
        const double k = static_cast<double>(rows.size() - 1);
        return std::array<double, 5>{m0, m1, c00 / k, c01 / k, c11 / k};
    };
    Rng rng(9);
    std::vector<std::vector<double>> a(500), b(700);
    for (auto& r : a) {
        const double u = rng.normal(), v = rng.normal();
        r = {1.0 + u, 0.5 * u + 0.8 * v};
    }
    for (auto& r : b) {
        const double u = rng.normal(), v = rng.normal();
        r = {-0.5 + 2.0 * u, 1.0 - 0.3 * u + 0.4 * v};
    }
    const auto sa = stats(a), sb = stats(b);
    const double p00 = sa[2] * sb[2] + sa[3] * sb[3], p11 = sa[3] * sb[3] + sa[4] * sb[4];
    const double det_a = sa[2] * sa[4] - sa[3] * sa[3], det_b = sb[2] * sb[4] - sb[3] * sb[3];
    const double tr_sqrt = std::sqrt(p00 + p11 + 2 * std::sqrt(det_a * det_b));
    const double expected = (sa[0] - sb[0]) * (sa[0] - sb[0]) + (sa[1] - sb[1]) * (sa[1] - sb[1]) + sa[2] + sa[4] + sb[2] +
                            sb[4] - 2 * tr_sqrt;
    CHECK(frechet_distance(a, b, 0.0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("random conv extractor is deterministic and seed dependent") {
    const Image x = smooth_image(64, 0.2);
    const RandomConvExtractor f0(0), f0b(0), f1(1);
    const auto e0 = f0.embed(x);
    CHECK(e0.size() == static_cast<size_t>(RandomConvExtractor::kEmbedDim));
    CHECK(e0 == f0b.embed(x));
    CHECK(e0 != f1.embed(x));
    const auto layers = f0.layers(x);
    REQUIRE(layers.size() == 4);
    CHECK(layers[0].height == 32);
    CHECK(layers[3].height == 4);
    CHECK(layers[3].channels == 192);
    CHECK(f0.describe().find("seed=0") != std::string::npos);
}

TEST_CASE("perceptual distance: zero on self, symmetric, monotone in noise") {
    const RandomConvExtractor f(3);
    const Image x = smooth_image(64, 0.0);
    CHECK(perceptual_distance(x, x, f) == 0.0);
    const Image y = smooth_image(64, 1.0);
    CHECK(perceptual_distance(x, y, f) == doctest::Approx(perceptual_distance(y, x, f)).epsilon(1e-12));

    const Image n = noise_image(64, 64, 4);
    double previous = 0.0;
    for (float amp : {0.05f, 0.15f, 0.4f}) {
        Image noisy = x;
        for (size_t i = 0; i < noisy.pixels.size(); ++i) noisy.pixels[i] = std::clamp(x.pixels[i] + amp * (n.pixels[i] - 0.5f), 0.0f, 1.0f);
        const double d = perceptual_distance(x, noisy, f);
        CHECK(d > previous);
        previous = d;
    }
}

TEST_CASE("delta conventions") {
    CHECK(percent_rise(0.5, 0.6) == doctest::Approx(20.0));
    CHECK(percent_fall(120.0, 80.0) == doctest::Approx(-50.0));
    CHECK(factor(0.01, 0.5) == doctest::Approx(50.0));
    CHECK(percent_rise(0.3, 0.3) == 0.0);
    CHECK(percent_fall(0.0, 0.0) == 0.0);
    CHECK(factor(0.0, 0.0) == 1.0);
}

TEST_CASE("metric config registry round trips and rejects unknown keys") {
    MetricConfig c;
    c.mi_bins = 16;
    c.ssim.sigma = 2.0;
    const auto back = metric_config_from_map(metric_config_to_map(c));
    CHECK(back.mi_bins == 16);
    CHECK(back.ssim.sigma == 2.0);
    CHECK_THROWS_AS(metric_config_from_map({{"bogus", "1"}}), ConfigError);
    MetricConfig bad;
    bad.mi_bins = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("evaluate_pairs: same directory gives zero deltas, warp correction improves scores") {
    const auto before = fresh_dir("before"), after = fresh_dir("after");
    const WarpRange range{0.12, 8.0, 0.95, 1.05, 0.0};
    for (int i = 0; i < 4; ++i) {
        const Image base = procedural_face(64, 100 + static_cast<uint64_t>(i));
        const auto pair = synth_pair(base, range, 50 + static_cast<uint64_t>(i));
        const std::string id = "p" + std::to_string(i);
        write_png(before / (id + "_vis.png"), pair.visible);
        write_png(before / (id + "_thr.png"), pair.thermal);
        write_png(before / (id + "_gen.png"), pseudo_thermal(pair.visible, 50 + static_cast<uint64_t>(i)));
        write_png(after / (id + "_vis.png"), pair.visible);
        const Tensor t = unit_tensor({pair.thermal});
        write_png(after / (id + "_thr_reg.png"), unit_image(warp(t, theta_tensor<float>({invert(pair.theta_true)})), 0));
    }
    const MetricConfig config;
    const auto same = evaluate_pairs(before, before, config);
    CHECK(same.unmatched.empty());
    CHECK(same.delta.ssim_edges == 0.0);
    CHECK(same.delta.ncc_edges == 1.0);
    CHECK(same.delta.mutual_info == 0.0);
    REQUIRE(same.delta.fid);
    CHECK(*same.delta.fid == 0.0);
    CHECK(*same.delta.lpips_proxy == 0.0);

    const auto report = evaluate_pairs(before, after, config);
    CHECK(report.before.size() == 4);
    CHECK(report.mean_after.ssim_edges > report.mean_before.ssim_edges);
    CHECK(report.mean_after.ncc_edges > report.mean_before.ncc_edges);
    CHECK(report.mean_after.mutual_info > report.mean_before.mutual_info);
    // Aggregates are plain means of the per-pair rows.
    double s = 0;
    for (const auto& p : report.after) s += p.ssim_edges;
    CHECK(report.mean_after.ssim_edges == doctest::Approx(s / 4).epsilon(1e-12));

    std::istringstream csv(report.csv());
    std::string line;
    std::getline(csv, line);
    CHECK(line.rfind("# feature_extractor=", 0) == 0);
    std::getline(csv, line);
    CHECK(line == "pair_id,stage,ssim_edges,ncc_edges,mutual_info,fid,lpips_proxy");
    int rows = 0, aggregate = 0;
    while (std::getline(csv, line)) {
        ++rows;
        if (line.rfind("AGGREGATE,", 0) == 0) ++aggregate;
    }
    CHECK(rows == 4 * 2 + 3);
    CHECK(aggregate == 3);
    CHECK(report.table().find("Registration scores") != std::string::npos);
}

TEST_CASE("evaluate_pairs lists unmatched files") {
    const auto before = fresh_dir("um_before"), after = fresh_dir("um_after");
    const Image a = smooth_image(64, 0.0), b = smooth_image(64, 0.5);
    for (const auto& id : {"x", "y"}) {
        write_png(before / (std::string(id) + "_vis.png"), a);
        write_png(before / (std::string(id) + "_thr.png"), b);
    }
    write_png(after / "x_vis.png", a);
    write_png(after / "x_thr_reg.png", b);
    write_png(after / "z_vis.png", a);
    const auto report = evaluate_pairs(before, after, MetricConfig{});
    CHECK(report.before.size() == 1);
    CHECK(report.unmatched.size() == 2);
    CHECK_FALSE(report.mean_after.fid.has_value());
    CHECK_THROWS_AS(evaluate_pairs(before, fresh_dir("um_empty"), MetricConfig{}), ImageIoError);
}
