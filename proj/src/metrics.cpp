#include "vtmorph/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "vtmorph/rng.hpp"

namespace vtmorph {

namespace fs = std::filesystem;

namespace {

void require_same(const Image& x, const Image& y, const char* what) {
    if (!x.same_size(y)) {
        throw std::invalid_argument(std::string(what) + ": image sizes differ (" + std::to_string(x.width) + "x" +
                                    std::to_string(x.height) + " vs " + std::to_string(y.width) + "x" +
                                    std::to_string(y.height) + ")");
    }
    if (x.pixels.empty()) throw std::invalid_argument(std::string(what) + ": empty image");
}

}  // namespace

Image edge_map(const Image& img, int64_t radius) {
    if (radius < 1) throw std::invalid_argument("edge_map: radius must be at least 1, got " + std::to_string(radius));
    const int64_t H = img.height, W = img.width;
    // The square element is separable: row pass, then column pass.
    Image rmax(H, W), rmin(H, W), out(H, W);
    for (int64_t r = 0; r < H; ++r) {
        for (int64_t c = 0; c < W; ++c) {
            float hi = img.at(r, c), lo = hi;
            for (int64_t k = std::max<int64_t>(0, c - radius); k <= std::min(W - 1, c + radius); ++k) {
                hi = std::max(hi, img.at(r, k));
                lo = std::min(lo, img.at(r, k));
            }
            rmax.at(r, c) = hi;
            rmin.at(r, c) = lo;
        }
    }
    for (int64_t r = 0; r < H; ++r) {
        for (int64_t c = 0; c < W; ++c) {
            float hi = rmax.at(r, c), lo = rmin.at(r, c);
            for (int64_t k = std::max<int64_t>(0, r - radius); k <= std::min(H - 1, r + radius); ++k) {
                hi = std::max(hi, rmax.at(k, c));
                lo = std::min(lo, rmin.at(k, c));
            }
            out.at(r, c) = hi - lo;
        }
    }
    return out;
}

double ssim(const Image& x, const Image& y, const SsimParams& p) {
    require_same(x, y, "ssim");
    if (p.window < 1 || p.window % 2 == 0) throw std::invalid_argument("ssim: window must be odd and positive");
    if (!(p.sigma > 0) || !(p.c1 > 0) || !(p.c2 > 0)) throw std::invalid_argument("ssim: sigma, c1 and c2 must be positive");
    const int64_t H = x.height, W = x.width, k = p.window;
    if (H < k || W < k) {
        throw std::invalid_argument("ssim: image " + std::to_string(W) + "x" + std::to_string(H) + " is smaller than the " +
                                    std::to_string(k) + "px window");
    }
    std::vector<double> g(static_cast<size_t>(k));
    double gsum = 0;
    for (int64_t i = 0; i < k; ++i) {
        const double d = static_cast<double>(i - k / 2);
        g[static_cast<size_t>(i)] = std::exp(-d * d / (2 * p.sigma * p.sigma));
        gsum += g[static_cast<size_t>(i)];
    }
    for (auto& v : g) v /= gsum;

    const int64_t oh = H - k + 1, ow = W - k + 1;
    // Valid separable filtering of one field.
    auto filter = [&](auto value) {
        std::vector<double> rows(static_cast<size_t>(H * ow)), out(static_cast<size_t>(oh * ow));
        for (int64_t r = 0; r < H; ++r) {
            for (int64_t c = 0; c < ow; ++c) {
                double s = 0;
                for (int64_t i = 0; i < k; ++i) s += g[static_cast<size_t>(i)] * value(r, c + i);
                rows[static_cast<size_t>(r * ow + c)] = s;
            }
        }
        for (int64_t r = 0; r < oh; ++r) {
            for (int64_t c = 0; c < ow; ++c) {
                double s = 0;
                for (int64_t i = 0; i < k; ++i) s += g[static_cast<size_t>(i)] * rows[static_cast<size_t>((r + i) * ow + c)];
                out[static_cast<size_t>(r * ow + c)] = s;
            }
        }
        return out;
    };
    auto X = [&](int64_t r, int64_t c) { return static_cast<double>(x.at(r, c)); };
    auto Y = [&](int64_t r, int64_t c) { return static_cast<double>(y.at(r, c)); };
    const auto mx = filter(X), my = filter(Y);
    const auto sxx = filter([&](int64_t r, int64_t c) { return X(r, c) * X(r, c); });
    const auto syy = filter([&](int64_t r, int64_t c) { return Y(r, c) * Y(r, c); });
    const auto sxy = filter([&](int64_t r, int64_t c) { return X(r, c) * Y(r, c); });
    double total = 0;
    for (size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
        // Canonical order keeps the result bit-symmetric under FMA contraction.
        const double qx = mx[i] * mx[i], qy = my[i] * my[i];
        total += ((2 * (mx[i] * my[i]) + p.c1) * (2 * cxy + p.c2)) /
                 ((std::min(qx, qy) + std::max(qx, qy) + p.c1) * (vx + vy + p.c2));
    }
    return total / static_cast<double>(mx.size());
}

NccResult ncc(const Image& x, const Image& y) {
    require_same(x, y, "ncc");
    const auto n = static_cast<double>(x.pixels.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.pixels.size(); ++i) {
        mx += x.pixels[i];
        my += y.pixels[i];
    }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0, cxy = 0;
    for (size_t i = 0; i < x.pixels.size(); ++i) {
        const double dx = x.pixels[i] - mx, dy = y.pixels[i] - my;
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    // Rounding residue of a constant image stays far below this.
    constexpr double kFlat = 1e-18;
    if (vx / n <= kFlat || vy / n <= kFlat) return {0.0, true};
    return {std::clamp(cxy / std::sqrt(vx * vy), -1.0, 1.0), false};
}

namespace {

int64_t bin_of(float v, int64_t bins) {
    const auto b = static_cast<int64_t>(std::floor(static_cast<double>(std::clamp(v, 0.0f, 1.0f)) * static_cast<double>(bins)));
    return std::min(b, bins - 1);
}

void require_bins(int64_t bins) {
    if (bins < 2) throw std::invalid_argument("mutual_information: bins must be at least 2, got " + std::to_string(bins));
}

}  // namespace

double mutual_information(const Image& x, const Image& y, int64_t bins) {
    require_same(x, y, "mutual_information");
    require_bins(bins);
    const auto B = static_cast<size_t>(bins);
    std::vector<double> joint(B * B, 0.0), px(B, 0.0), py(B, 0.0);
    for (size_t i = 0; i < x.pixels.size(); ++i) {
        const auto a = static_cast<size_t>(bin_of(x.pixels[i], bins)), b = static_cast<size_t>(bin_of(y.pixels[i], bins));
        joint[a * B + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    const auto n = static_cast<double>(x.pixels.size());
    // Terms are summed in sorted order so swapping x and y gives the same bits.
    std::vector<double> terms;
    for (size_t a = 0; a < B; ++a) {
        for (size_t b = 0; b < B; ++b) {
            const double c = joint[a * B + b];
            if (c == 0) continue;
            terms.push_back((c / n) * std::log(c * n / (px[a] * py[b])));
        }
    }
    std::sort(terms.begin(), terms.end());
    double mi = 0;
    for (double t : terms) mi += t;
    return mi;
}

double histogram_entropy(const Image& x, int64_t bins) {
    require_bins(bins);
    if (x.pixels.empty()) throw std::invalid_argument("histogram_entropy: empty image");
    std::vector<double> h(static_cast<size_t>(bins), 0.0);
    for (auto v : x.pixels) h[static_cast<size_t>(bin_of(v, bins))] += 1;
    const auto n = static_cast<double>(x.pixels.size());
    double e = 0;
    for (auto c : h) {
        if (c > 0) e -= (c / n) * std::log(c / n);
    }
    return e;
}

namespace {

struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

Moments moments(const std::vector<std::vector<double>>& feats, size_t dim, double jitter, const char* side) {
    if (feats.size() < 2) throw std::invalid_argument(std::string("frechet_distance: feature set ") + side + " needs at least 2 rows");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(feats.size()), static_cast<Eigen::Index>(dim));
    for (size_t i = 0; i < feats.size(); ++i) {
        if (feats[i].size() != dim) {
            throw std::invalid_argument("frechet_distance: row " + std::to_string(i) + " of set " + side + " has " +
                                        std::to_string(feats[i].size()) + " features, expected " + std::to_string(dim));
        }
        for (size_t j = 0; j < dim; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feats[i][j];
    }
    Moments m;
    m.mean = X.colwise().mean().transpose();
    const Eigen::MatrixXd centered = X.rowwise() - m.mean.transpose();
    m.cov = centered.transpose() * centered / static_cast<double>(feats.size() - 1);
    m.cov.diagonal().array() += jitter;
    return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& c, const char* side) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    const auto& ev = eig.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (ev.minCoeff() < -1e-9 * scale) {
        std::ostringstream os;
        os << "frechet_distance: covariance of set " << side << " is not positive semi-definite after jitter (eigenvalues "
           << ev.minCoeff() << " .. " << ev.maxCoeff() << ")";
        throw std::domain_error(os.str());
    }
    return eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const std::vector<std::vector<double>>& feats_a, const std::vector<std::vector<double>>& feats_b,
                        double jitter) {
    if (feats_a.empty() || feats_b.empty()) throw std::invalid_argument("frechet_distance: empty feature set");
    const size_t dim = feats_a.front().size();
    if (dim == 0) throw std::invalid_argument("frechet_distance: zero-length features");
    if (feats_b.front().size() != dim) {
        throw std::invalid_argument("frechet_distance: feature dimension " + std::to_string(dim) + " vs " +
                                    std::to_string(feats_b.front().size()));
    }
    const auto a = moments(feats_a, dim, jitter, "a"), b = moments(feats_b, dim, jitter, "b");
    // Tr((Ca Cb)^1/2) = Tr((Ca^1/2 Cb Ca^1/2)^1/2); the right side is symmetric.
    const Eigen::MatrixXd sa = psd_sqrt(a.cov, "a");
    psd_sqrt(b.cov, "b");
    const Eigen::MatrixXd inner = sa * b.cov * sa;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
    const double tr_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2 * tr_sqrt;
    return std::max(0.0, d);
}

RandomConvExtractor::RandomConvExtractor(uint64_t seed) : seed_(seed), channels_{1, 24, 48, 96, kEmbedDim} {
    Rng rng(seed);
    for (size_t l = 0; l + 1 < channels_.size(); ++l) {
        const int64_t fan_in = channels_[l] * 9;
        std::vector<float> w(static_cast<size_t>(channels_[l + 1] * fan_in));
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (auto& v : w) v = static_cast<float>(rng.normal() * std_dev);
        std::vector<float> b(static_cast<size_t>(channels_[l + 1]));
        for (auto& v : b) v = static_cast<float>(rng.normal() * 0.1);
        weights_.push_back(std::move(w));
        biases_.push_back(std::move(b));
    }
}

std::vector<FeatureExtractor::Layer> RandomConvExtractor::layers(const Image& img) const {
    Layer cur{1, img.height, img.width, {}};
    cur.values.resize(img.pixels.size());
    for (size_t i = 0; i < img.pixels.size(); ++i) cur.values[i] = 2.0f * img.pixels[i] - 1.0f;
    std::vector<Layer> out;
    for (size_t l = 0; l < weights_.size(); ++l) {
        const int64_t C = cur.channels, O = channels_[l + 1], H = cur.height, W = cur.width;
        const int64_t oh = (H + 1) / 2, ow = (W + 1) / 2;
        Layer next{O, oh, ow, std::vector<float>(static_cast<size_t>(O * oh * ow))};
        const auto& w = weights_[l];
        for (int64_t o = 0; o < O; ++o) {
            for (int64_t r = 0; r < oh; ++r) {
                for (int64_t c = 0; c < ow; ++c) {
                    float s = biases_[l][static_cast<size_t>(o)];
                    for (int64_t ci = 0; ci < C; ++ci) {
                        for (int64_t kr = 0; kr < 3; ++kr) {
                            const int64_t ir = 2 * r + kr - 1;
                            if (ir < 0 || ir >= H) continue;
                            for (int64_t kc = 0; kc < 3; ++kc) {
                                const int64_t ic = 2 * c + kc - 1;
                                if (ic < 0 || ic >= W) continue;
                                s += w[static_cast<size_t>(((o * C + ci) * 3 + kr) * 3 + kc)] *
                                     cur.values[static_cast<size_t>((ci * H + ir) * W + ic)];
                            }
                        }
                    }
                    next.values[static_cast<size_t>((o * oh + r) * ow + c)] = std::max(0.0f, s);
                }
            }
        }
        out.push_back(next);
        cur = std::move(next);
    }
    return out;
}

std::vector<double> RandomConvExtractor::embed(const Image& img) const {
    const auto all = layers(img);
    const auto& last = all.back();
    std::vector<double> e(static_cast<size_t>(last.channels), 0.0);
    const int64_t plane = last.height * last.width;
    for (int64_t c = 0; c < last.channels; ++c) {
        double s = 0;
        for (int64_t i = 0; i < plane; ++i) s += last.values[static_cast<size_t>(c * plane + i)];
        e[static_cast<size_t>(c)] = s / static_cast<double>(plane);
    }
    return e;
}

std::string RandomConvExtractor::describe() const { return "random-conv4 seed=" + std::to_string(seed_); }

double perceptual_distance(const Image& x, const Image& y, const FeatureExtractor& f) {
    require_same(x, y, "perceptual_distance");
    const auto lx = f.layers(x), ly = f.layers(y);
    if (lx.size() != ly.size() || lx.empty()) throw std::logic_error("perceptual_distance: extractor layer count mismatch");
    double total = 0;
    for (size_t l = 0; l < lx.size(); ++l) {
        const auto& a = lx[l];
        const auto& b = ly[l];
        const int64_t plane = a.height * a.width;
        double layer = 0;
        for (int64_t i = 0; i < plane; ++i) {
            double na = 0, nb = 0;
            for (int64_t c = 0; c < a.channels; ++c) {
                const double va = a.values[static_cast<size_t>(c * plane + i)], vb = b.values[static_cast<size_t>(c * plane + i)];
                na += va * va;
                nb += vb * vb;
            }
            // Small floor so an all-zero response normalizes to zero, not NaN.
            na = std::sqrt(na) + 1e-10;
            nb = std::sqrt(nb) + 1e-10;
            double d = 0;
            for (int64_t c = 0; c < a.channels; ++c) {
                const double diff = a.values[static_cast<size_t>(c * plane + i)] / na - b.values[static_cast<size_t>(c * plane + i)] / nb;
                d += diff * diff;
            }
            layer += d;
        }
        total += layer / static_cast<double>(plane);
    }
    return total / static_cast<double>(lx.size());
}

// ---------------------------------------------------------------- config

void MetricConfig::validate() const {
    if (edge_radius < 1) throw ConfigError("edge_radius must be at least 1");
    if (ssim.window < 1 || ssim.window % 2 == 0) throw ConfigError("ssim_window must be odd and positive");
    if (!(ssim.sigma > 0) || !(ssim.c1 > 0) || !(ssim.c2 > 0)) throw ConfigError("ssim_sigma, ssim_c1 and ssim_c2 must be positive");
    if (mi_bins < 2) throw ConfigError("mi_bins must be at least 2");
}

namespace {

std::vector<ConfigField<MetricConfig>> build_metric_fields() {
    using M = MetricConfig;
    return {
        {"edge_radius", "structuring-element radius r of the (2r+1)^2 morphological gradient",
         [](const M& c) { return std::to_string(c.edge_radius); },
         [](M& c, const std::string& v) { c.edge_radius = cfg::to_int("edge_radius", v); }},
        {"ssim_window", "SSIM Gaussian window size (odd)", [](const M& c) { return std::to_string(c.ssim.window); },
         [](M& c, const std::string& v) { c.ssim.window = cfg::to_int("ssim_window", v); }},
        {"ssim_sigma", "SSIM Gaussian window sigma", [](const M& c) { return cfg::format_double(c.ssim.sigma); },
         [](M& c, const std::string& v) { c.ssim.sigma = cfg::to_double("ssim_sigma", v); }},
        {"ssim_c1", "SSIM luminance stabilizer", [](const M& c) { return cfg::format_double(c.ssim.c1); },
         [](M& c, const std::string& v) { c.ssim.c1 = cfg::to_double("ssim_c1", v); }},
        {"ssim_c2", "SSIM contrast stabilizer", [](const M& c) { return cfg::format_double(c.ssim.c2); },
         [](M& c, const std::string& v) { c.ssim.c2 = cfg::to_double("ssim_c2", v); }},
        {"mi_bins", "histogram bins per axis for mutual information", [](const M& c) { return std::to_string(c.mi_bins); },
         [](M& c, const std::string& v) { c.mi_bins = cfg::to_int("mi_bins", v); }},
        {"feature_seed", "seed of the random conv feature extractor", [](const M& c) { return std::to_string(c.feature_seed); },
         [](M& c, const std::string& v) { c.feature_seed = cfg::to_u64("feature_seed", v); }},
    };
}

}  // namespace

const std::vector<ConfigField<MetricConfig>>& metric_config_fields() {
    static const auto fields = build_metric_fields();
    return fields;
}

std::map<std::string, std::string> metric_config_to_map(const MetricConfig& config) {
    std::map<std::string, std::string> out;
    for (const auto& f : metric_config_fields()) out[f.name] = f.get(config);
    return out;
}

MetricConfig metric_config_from_map(const std::map<std::string, std::string>& values) {
    MetricConfig c;
    const auto& fields = metric_config_fields();
    for (const auto& [key, value] : values) {
        const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.name == key; });
        if (it == fields.end()) throw ConfigError("unknown config key '" + key + "'");
        it->set(c, value);
    }
    return c;
}

// ---------------------------------------------------------------- report

double percent_rise(double before, double after) {
    if (after == before) return 0.0;
    return 100.0 * (after - before) / std::abs(before);
}

double percent_fall(double before, double after) {
    if (after == before) return 0.0;
    return 100.0 * (after - before) / std::abs(after);
}

double factor(double before, double after) {
    if (after == before) return 1.0;
    return after / before;
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return cfg::format_double(v);
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string fixed(double v, int digits) {
    if (!std::isfinite(v)) return num(v);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string MetricReport::csv() const {
    std::ostringstream os;
    os << "# feature_extractor=" << extractor << '\n';
    os << "pair_id,stage,ssim_edges,ncc_edges,mutual_info,fid,lpips_proxy\n";
    auto row = [&](const std::string& id, const char* stage, double s, double n, double m, const std::optional<double>& fid,
                   const std::optional<double>& lp) {
        os << csv::field(id) << ',' << stage << ',' << num(s) << ',' << num(n) << ',' << num(m) << ',' << opt(fid) << ','
           << opt(lp) << '\n';
    };
    for (size_t i = 0; i < before.size(); ++i) {
        row(before[i].pair_id, "before", before[i].ssim_edges, before[i].ncc_edges, before[i].mutual_info, std::nullopt,
            before[i].lpips_proxy);
        row(after[i].pair_id, "after", after[i].ssim_edges, after[i].ncc_edges, after[i].mutual_info, std::nullopt,
            after[i].lpips_proxy);
    }
    for (const auto& [stage, s] : {std::pair{"before", &mean_before}, {"after", &mean_after}, {"delta", &delta}}) {
        row("AGGREGATE", stage, s->ssim_edges, s->ncc_edges, s->mutual_info, s->fid, s->lpips_proxy);
    }
    return os.str();
}

std::string MetricReport::table() const {
    std::ostringstream os;
    auto line = [&](const std::string& name, double b, double a, const std::string& d) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "  %-12s %12s %12s %14s\n", name.c_str(), fixed(b, 3).c_str(), fixed(a, 3).c_str(),
                      d.c_str());
        os << buf;
    };
    char head[128];
    std::snprintf(head, sizeof(head), "  %-12s %12s %12s %14s\n", "", "before", "after", "change");
    os << "Registration scores (" << before.size() << " pairs)\n" << head;
    line("SSIM (edges)", mean_before.ssim_edges, mean_after.ssim_edges, fixed(delta.ssim_edges, 1) + "%");
    line("NCC (edges)", mean_before.ncc_edges, mean_after.ncc_edges, fixed(delta.ncc_edges, 1) + "x");
    line("MI", mean_before.mutual_info, mean_after.mutual_info, fixed(delta.mutual_info, 1) + "%");
    os << "V2T translation scores (" << extractor << ")\n" << head;
    if (mean_before.fid) {
        line("FID", *mean_before.fid, *mean_after.fid, fixed(*delta.fid, 1) + "%");
        line("LPIPS proxy", *mean_before.lpips_proxy, *mean_after.lpips_proxy, fixed(*delta.lpips_proxy, 1) + "%");
    } else {
        os << "  (no generated thermal images found)\n";
    }
    if (!unmatched.empty()) {
        os << "Skipped " << unmatched.size() << " unmatched entr" << (unmatched.size() == 1 ? "y" : "ies") << ":\n";
        for (const auto& u : unmatched) os << "  " << u << '\n';
    }
    return os.str();
}

PairScores score_pair(const std::string& pair_id, const Image& visible, const Image& thermal, const Image* generated,
                      const MetricConfig& config, const FeatureExtractor& extractor) {
    require_same(visible, thermal, "score_pair");
    PairScores s;
    s.pair_id = pair_id;
    const Image ev = edge_map(visible, config.edge_radius), et = edge_map(thermal, config.edge_radius);
    s.ssim_edges = ssim(ev, et, config.ssim);
    const auto n = ncc(ev, et);
    s.ncc_edges = n.value;
    s.ncc_zero_variance = n.zero_variance;
    s.mutual_info = mutual_information(visible, thermal, config.mi_bins);
    if (generated) s.lpips_proxy = perceptual_distance(thermal, *generated, extractor);
    return s;
}

namespace {

std::set<std::string> ids_with_suffix(const fs::path& dir, const std::string& suffix) {
    std::set<std::string> ids;
    if (!fs::is_directory(dir)) throw ImageIoError("not a directory: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            ids.insert(name.substr(0, name.size() - suffix.size()));
        }
    }
    return ids;
}

StageScores mean_of(const std::vector<PairScores>& scores) {
    StageScores m;
    double lp = 0;
    bool all_lp = !scores.empty();
    for (const auto& s : scores) {
        m.ssim_edges += s.ssim_edges;
        m.ncc_edges += s.ncc_edges;
        m.mutual_info += s.mutual_info;
        if (s.lpips_proxy) lp += *s.lpips_proxy;
        else all_lp = false;
    }
    const auto n = static_cast<double>(std::max<size_t>(1, scores.size()));
    m.ssim_edges /= n;
    m.ncc_edges /= n;
    m.mutual_info /= n;
    if (all_lp) m.lpips_proxy = lp / n;
    return m;
}

}  // namespace

MetricReport evaluate_pairs(const fs::path& before_dir, const fs::path& after_dir, const MetricConfig& config) {
    return evaluate_pairs(before_dir, after_dir, config, RandomConvExtractor(config.feature_seed));
}

MetricReport evaluate_pairs(const fs::path& before_dir, const fs::path& after_dir, const MetricConfig& config,
                            const FeatureExtractor& extractor) {
    config.validate();
    MetricReport report;
    report.extractor = extractor.describe();
    const auto before_ids = ids_with_suffix(before_dir, "_vis.png");
    const auto after_ids = ids_with_suffix(after_dir, "_vis.png");

    struct Item {
        std::string id;
        fs::path before_thr, after_vis, after_thr;
        std::optional<fs::path> generated;
    };
    std::vector<Item> items;
    for (const auto& id : before_ids) {
        if (!after_ids.count(id)) {
            report.unmatched.push_back(id + ": no " + id + "_vis.png in " + after_dir.string());
            continue;
        }
        Item it{id, before_dir / (id + "_thr.png"), after_dir / (id + "_vis.png"), after_dir / (id + "_thr_reg.png"), {}};
        if (!fs::exists(it.after_thr)) it.after_thr = after_dir / (id + "_thr.png");
        if (!fs::exists(it.before_thr)) {
            report.unmatched.push_back(id + ": missing " + it.before_thr.string());
            continue;
        }
        if (!fs::exists(it.after_thr)) {
            report.unmatched.push_back(id + ": no registered or plain thermal in " + after_dir.string());
            continue;
        }
        for (const auto& dir : {after_dir, before_dir}) {
            if (!it.generated && fs::exists(dir / (id + "_gen.png"))) it.generated = dir / (id + "_gen.png");
        }
        items.push_back(std::move(it));
    }
    for (const auto& id : after_ids) {
        if (!before_ids.count(id)) report.unmatched.push_back(id + ": no " + id + "_vis.png in " + before_dir.string());
    }
    if (items.empty()) throw ImageIoError("no matched pairs between " + before_dir.string() + " and " + after_dir.string());
    const bool with_generated =
        std::all_of(items.begin(), items.end(), [](const Item& it) { return it.generated.has_value(); });

    std::vector<std::vector<double>> feat_before, feat_after, feat_gen;
    for (const auto& it : items) {
        const Image vis_b = read_png(before_dir / (it.id + "_vis.png"));
        const Image thr_b = read_png(it.before_thr);
        const Image vis_a = read_png(it.after_vis);
        const Image thr_a = read_png(it.after_thr);
        std::optional<Image> gen;
        if (with_generated) gen = read_png(*it.generated);
        const Image* g = gen ? &*gen : nullptr;
        report.before.push_back(score_pair(it.id, vis_b, thr_b, g, config, extractor));
        report.after.push_back(score_pair(it.id, vis_a, thr_a, g, config, extractor));
        if (g) {
            feat_before.push_back(extractor.embed(thr_b));
            feat_after.push_back(extractor.embed(thr_a));
            feat_gen.push_back(extractor.embed(*g));
        }
    }
    report.mean_before = mean_of(report.before);
    report.mean_after = mean_of(report.after);
    if (with_generated && items.size() >= 2) {
        report.mean_before.fid = frechet_distance(feat_before, feat_gen);
        report.mean_after.fid = frechet_distance(feat_after, feat_gen);
    } else {
        report.mean_before.lpips_proxy.reset();
        report.mean_after.lpips_proxy.reset();
    }
    auto& d = report.delta;
    d.ssim_edges = percent_rise(report.mean_before.ssim_edges, report.mean_after.ssim_edges);
    d.ncc_edges = factor(report.mean_before.ncc_edges, report.mean_after.ncc_edges);
    d.mutual_info = percent_rise(report.mean_before.mutual_info, report.mean_after.mutual_info);
    if (report.mean_before.fid) {
        d.fid = percent_fall(*report.mean_before.fid, *report.mean_after.fid);
        d.lpips_proxy = percent_fall(*report.mean_before.lpips_proxy, *report.mean_after.lpips_proxy);
    }
    return report;
}

}  // namespace vtmorph
