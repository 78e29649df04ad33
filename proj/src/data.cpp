#include "vtmorph/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "vtmorph/rng.hpp"

namespace vtmorph {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- manifest

ManifestError::ManifestError(const std::string& summary, std::vector<std::string> problems)
    : std::runtime_error([&] {
          std::string msg = summary;
          for (const auto& p : problems) msg += "\n  " + p;
          return msg;
      }()),
      problems_(std::move(problems)) {}

std::vector<ImagePair> Manifest::split_pairs(const std::string& split) const {
    std::vector<ImagePair> out;
    for (const auto& p : pairs)
        if (p.split == split) out.push_back(p);
    return out;
}

fs::path Manifest::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

void check_subject_disjoint(const std::vector<ImagePair>& pairs) {
    std::set<std::string> train, test;
    for (const auto& p : pairs) (p.split == "train" ? train : test).insert(p.subject_id);
    std::vector<std::string> shared;
    std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(shared));
    if (!shared.empty()) {
        std::vector<std::string> problems;
        for (const auto& s : shared) problems.push_back("subject " + s + " appears in both train and test");
        throw ManifestError("train and test subjects overlap", std::move(problems));
    }
}

namespace {

const std::vector<std::string> kColumns = csv::split_line(kManifestHeader);

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return {};
    return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

bool parse_double(const std::string& s, double& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

Manifest parse_manifest(const std::string& text, const fs::path& base_dir) {
    Manifest m;
    m.base_dir = base_dir;
    std::istringstream is(text);
    std::string line;
    std::vector<std::string> problems;
    size_t columns = 0;
    int64_t line_no = 0;
    bool have_header = false;
    std::set<std::string> ids;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (line.front() == '#') {
            int v = 0;
            if (std::sscanf(line.c_str(), "# vtmorph manifest v%d", &v) == 1) {
                if (v != 1) throw ManifestError("unsupported manifest version " + std::to_string(v), {});
                m.version = v;
            }
            continue;
        }
        auto fields = csv::split_line(line);
        for (auto& f : fields) f = trim(f);
        if (!have_header) {
            const bool short_form = fields.size() == 6 && std::equal(fields.begin(), fields.end(), kColumns.begin());
            if (!short_form && fields != kColumns) {
                throw ManifestError("bad manifest header", {"expected: " + std::string(kManifestHeader), "got: " + line});
            }
            columns = fields.size();
            have_header = true;
            continue;
        }
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (fields.size() != columns) {
            problems.push_back(where + "expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
            continue;
        }
        ImagePair p;
        p.pair_id = fields[0];
        p.subject_id = fields[1];
        p.visible_path = fields[2];
        p.thermal_path = fields[3];
        p.split = fields[4];
        if (p.pair_id.empty()) problems.push_back(where + "empty pair_id");
        if (!p.pair_id.empty() && !ids.insert(p.pair_id).second) problems.push_back(where + "duplicate pair_id " + p.pair_id);
        if (p.subject_id.empty()) problems.push_back(where + "empty subject_id");
        if (fields[2].empty() || fields[3].empty()) problems.push_back(where + "empty image path");
        if (p.split != "train" && p.split != "test") problems.push_back(where + "split must be train or test, got '" + p.split + "'");
        if (!fields[5].empty()) {
            int pc = 0;
            const auto res = std::from_chars(fields[5].data(), fields[5].data() + fields[5].size(), pc);
            if (res.ec != std::errc() || res.ptr != fields[5].data() + fields[5].size() || pc < 1 || pc > 4) {
                problems.push_back(where + "pain_class must be an integer in 1..4, got '" + fields[5] + "'");
            } else {
                p.pain_class = pc;
            }
        }
        if (columns == 12) {
            const auto empty = std::count_if(fields.begin() + 6, fields.end(), [](const std::string& f) { return f.empty(); });
            if (empty == 0) {
                AffineParams t;
                bool ok = true;
                for (size_t k = 0; k < 6; ++k) ok = ok && parse_double(fields[6 + k], t.v[k]);
                if (ok) p.theta_true = t;
                else problems.push_back(where + "theta fields must be decimal numbers");
            } else if (empty != 6) {
                problems.push_back(where + "theta needs all six fields or none");
            }
        }
        m.pairs.push_back(std::move(p));
    }
    if (!have_header) throw ManifestError("manifest has no header line", {});
    if (!problems.empty()) throw ManifestError("invalid manifest rows", std::move(problems));
    if (m.pairs.empty()) throw ManifestError("manifest lists no pairs", {});
    check_subject_disjoint(m.pairs);
    return m;
}

Manifest load_manifest(const fs::path& path, FileCheck check) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ManifestError("cannot read manifest " + path.string(), {});
    std::stringstream ss;
    ss << in.rdbuf();
    Manifest m = parse_manifest(ss.str(), path.parent_path());
    if (check == FileCheck::structure_only) return m;

    std::vector<std::string> missing, bad;
    for (const auto& p : m.pairs) {
        std::pair<int64_t, int64_t> dims[2];
        bool ok = true;
        const fs::path files[2] = {m.resolve(p.visible_path), m.resolve(p.thermal_path)};
        for (int k = 0; k < 2; ++k) {
            if (!fs::exists(files[k])) {
                missing.push_back(files[k].string());
                ok = false;
                continue;
            }
            try {
                dims[k] = png_dimensions(files[k]);
            } catch (const ImageIoError& e) {
                bad.push_back(e.what());
                ok = false;
            }
        }
        if (ok && dims[0] != dims[1]) {
            bad.push_back(p.pair_id + ": visible " + std::to_string(dims[0].second) + "x" + std::to_string(dims[0].first) +
                          " vs thermal " + std::to_string(dims[1].second) + "x" + std::to_string(dims[1].first));
        }
    }
    if (!missing.empty()) throw ManifestError("missing image files", std::move(missing));
    if (!bad.empty()) throw ManifestError("unusable image files", std::move(bad));
    return m;
}

std::string format_manifest(const Manifest& manifest) {
    std::string out = "# vtmorph manifest v1\n";
    out += kManifestHeader;
    out += '\n';
    for (const auto& p : manifest.pairs) {
        out += csv::field(p.pair_id) + ',' + csv::field(p.subject_id) + ',' + csv::field(p.visible_path.generic_string()) +
               ',' + csv::field(p.thermal_path.generic_string()) + ',' + p.split + ',';
        if (p.pain_class) out += std::to_string(*p.pain_class);
        out += ',';
        out += p.theta_true ? format_theta(*p.theta_true) : std::string(",,,,,");
        out += '\n';
    }
    return out;
}

void save_manifest(const fs::path& path, const Manifest& manifest) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ManifestError("cannot write manifest " + path.string(), {});
        out << format_manifest(manifest);
        if (!out) throw ManifestError("failed writing manifest " + path.string(), {});
    }
    fs::rename(tmp, path);
}

Manifest split_subjects(const std::vector<ImagePair>& pairs, double test_fraction, uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("test fraction must lie strictly between 0 and 1");
    }
    std::set<std::string> unique;
    for (const auto& p : pairs) unique.insert(p.subject_id);
    if (unique.size() < 2) throw std::invalid_argument("splitting needs at least two subjects, got " + std::to_string(unique.size()));
    std::vector<std::string> subjects(unique.begin(), unique.end());
    const auto n = static_cast<int64_t>(subjects.size());
    const int64_t n_test = std::clamp<int64_t>(std::llround(test_fraction * static_cast<double>(n)), 1, n - 1);
    Rng rng(seed);
    rng.shuffle(subjects.begin(), subjects.end());
    const std::set<std::string> test(subjects.begin(), subjects.begin() + n_test);
    Manifest m;
    m.pairs = pairs;
    for (auto& p : m.pairs) p.split = test.count(p.subject_id) ? "test" : "train";
    return m;
}

std::vector<PairImages> load_pair_images(const Manifest& manifest, const std::vector<ImagePair>& pairs) {
    std::vector<PairImages> out;
    std::vector<std::string> problems;
    for (const auto& p : pairs) {
        try {
            PairImages pi{p.pair_id, read_png(manifest.resolve(p.visible_path)), read_png(manifest.resolve(p.thermal_path)),
                          p.theta_true};
            if (!pi.visible.same_size(pi.thermal)) {
                problems.push_back(p.pair_id + ": visible and thermal sizes differ");
                continue;
            }
            out.push_back(std::move(pi));
        } catch (const ImageIoError& e) {
            problems.push_back(e.what());
        }
    }
    if (!problems.empty()) throw ManifestError("cannot load pair images", std::move(problems));
    return out;
}

// ---------------------------------------------------------------- cropping

EmptyForegroundError::EmptyForegroundError(double t, double otsu)
    : std::runtime_error([&] {
          std::ostringstream os;
          os << "no foreground component above threshold " << t << "; Otsu suggests " << otsu;
          return os.str();
      }()),
      threshold(t),
      suggested(otsu) {}

double otsu_threshold(const Image& img) {
    std::array<double, 256> hist{};
    for (float v : img.pixels) hist[quantize(v)] += 1.0;
    const double total = static_cast<double>(img.pixels.size());
    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += i * hist[static_cast<size_t>(i)];
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    int best_t = 0;
    for (int t = 0; t < 256; ++t) {
        w0 += hist[static_cast<size_t>(t)];
        sum0 += t * hist[static_cast<size_t>(t)];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_t = t;
        }
    }
    // Foreground is v > threshold, so class 0 ends at level best_t.
    return (best_t + 0.5) / 255.0;
}

namespace {

// Nearest-neighbour index with both end samples pinned to the end pixels.
int64_t nn_index(int64_t i, int64_t in, int64_t out) {
    if (out == 1 || in == 1) return 0;
    return (2 * i * (in - 1) + (out - 1)) / (2 * (out - 1));
}

Image crop_pass(const Image& img, double threshold, int64_t min_component, int64_t out_size) {
    const int64_t H = img.height, W = img.width;
    std::vector<int32_t> label(static_cast<size_t>(H * W), -1);
    std::vector<int64_t> stack;
    int32_t best = -1;
    int64_t best_size = 0;
    int32_t next = 0;
    for (int64_t start = 0; start < H * W; ++start) {
        if (label[static_cast<size_t>(start)] >= 0 || !(img.pixels[static_cast<size_t>(start)] > threshold)) continue;
        int64_t size = 0;
        stack.push_back(start);
        label[static_cast<size_t>(start)] = next;
        while (!stack.empty()) {
            const int64_t k = stack.back();
            stack.pop_back();
            ++size;
            const int64_t r = k / W, c = k % W;
            const int64_t nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (const auto& q : nbr) {
                if (q[0] < 0 || q[0] >= H || q[1] < 0 || q[1] >= W) continue;
                const int64_t kk = q[0] * W + q[1];
                if (label[static_cast<size_t>(kk)] < 0 && img.pixels[static_cast<size_t>(kk)] > threshold) {
                    label[static_cast<size_t>(kk)] = next;
                    stack.push_back(kk);
                }
            }
        }
        if (size > best_size) {
            best_size = size;
            best = next;
        }
        ++next;
    }
    if (best < 0 || best_size < min_component) throw EmptyForegroundError(threshold, otsu_threshold(img));

    int64_t r0 = H, r1 = -1, c0 = W, c1 = -1;
    for (int64_t r = 0; r < H; ++r)
        for (int64_t c = 0; c < W; ++c)
            if (label[static_cast<size_t>(r * W + c)] == best) {
                r0 = std::min(r0, r);
                r1 = std::max(r1, r);
                c0 = std::min(c0, c);
                c1 = std::max(c1, c);
            }
    const int64_t bh = r1 - r0 + 1, bw = c1 - c0 + 1;
    Image out(out_size, out_size);
    for (int64_t i = 0; i < out_size; ++i)
        for (int64_t j = 0; j < out_size; ++j) {
            const int64_t r = r0 + nn_index(i, bh, out_size), c = c0 + nn_index(j, bw, out_size);
            const size_t k = static_cast<size_t>(r * W + c);
            out.at(i, j) = label[k] == best ? img.pixels[k] : 0.0f;
        }
    return out;
}

}  // namespace

Image threshold_crop(const Image& thermal, double threshold, int64_t min_component, int64_t out_size) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must lie in [0, 1]");
    if (min_component < 1) throw std::invalid_argument("min_component must be at least 1");
    if (out_size < 1) throw std::invalid_argument("output size must be positive");
    Image current = crop_pass(thermal, threshold, min_component, out_size);
    // A downsampling pass can split the component; once the crop only
    // upsamples (at most two more passes) the result no longer changes.
    for (int iter = 0; iter < 16; ++iter) {
        Image next = crop_pass(current, threshold, min_component, out_size);
        if (next == current) return current;
        current = std::move(next);
    }
    throw std::logic_error("threshold_crop did not reach a fixed point");
}

// ---------------------------------------------------------------- synthesis

void WarpRange::validate() const {
    if (!(translation >= 0.0 && translation <= 0.25)) throw std::invalid_argument("warp translation must lie in [0, 0.25]");
    if (!(rotation_deg >= 0.0 && rotation_deg <= 15.0)) throw std::invalid_argument("warp rotation must lie in [0, 15] degrees");
    if (!(scale_min >= 0.85 && scale_max <= 1.15 && scale_min <= scale_max)) {
        throw std::invalid_argument("warp scale range must lie within [0.85, 1.15]");
    }
    if (!(shear >= 0.0 && shear <= 0.1)) throw std::invalid_argument("warp shear must lie in [0, 0.1]");
}

Image gaussian_blur(const Image& img, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("blur sigma must be positive");
    const auto radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double total = 0.0;
    for (int64_t i = -radius; i <= radius; ++i) {
        k[static_cast<size_t>(i + radius)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        total += k[static_cast<size_t>(i + radius)];
    }
    for (auto& v : k) v /= total;
    const int64_t H = img.height, W = img.width;
    std::vector<double> tmp(static_cast<size_t>(H * W));
    for (int64_t r = 0; r < H; ++r)
        for (int64_t c = 0; c < W; ++c) {
            double acc = 0.0;
            for (int64_t d = -radius; d <= radius; ++d) {
                acc += k[static_cast<size_t>(d + radius)] * img.at(r, std::clamp<int64_t>(c + d, 0, W - 1));
            }
            tmp[static_cast<size_t>(r * W + c)] = acc;
        }
    Image out(H, W);
    for (int64_t r = 0; r < H; ++r)
        for (int64_t c = 0; c < W; ++c) {
            double acc = 0.0;
            for (int64_t d = -radius; d <= radius; ++d) {
                acc += k[static_cast<size_t>(d + radius)] * tmp[static_cast<size_t>(std::clamp<int64_t>(r + d, 0, H - 1) * W + c)];
            }
            out.at(r, c) = static_cast<float>(acc);
        }
    return out;
}

Image pseudo_thermal(const Image& visible, uint64_t style_seed) {
    Rng rng(style_seed);
    const double gamma = std::exp(rng.uniform(std::log(0.8), std::log(1.25)));
    const double gain = rng.uniform(0.9, 1.1);
    const double bias = rng.uniform(-0.05, 0.05);
    Image inv = visible;
    for (auto& v : inv.pixels) v = 1.0f - std::clamp(v, 0.0f, 1.0f);
    Image out = gaussian_blur(inv, 1.5);
    for (auto& v : out.pixels) {
        const double remapped = gain * std::pow(std::clamp(static_cast<double>(v), 0.0, 1.0), gamma) + bias;
        v = static_cast<float>(std::clamp(remapped, 0.0, 1.0));
    }
    return out;
}

double out_of_frame_fraction(const Image& img, const AffineParams& theta) {
    AffineParams inv;
    try {
        inv = invert(theta);
    } catch (const SingularTransformError&) {
        return 1.0;
    }
    double total = 0.0, lost = 0.0;
    for (int64_t i = 0; i < img.height; ++i)
        for (int64_t j = 0; j < img.width; ++j) {
            const double v = img.at(i, j);
            if (v <= 0.0) continue;
            // A source pixel shows up at the output location inv(p).
            const double x = (2.0 * j + 1.0) / img.width - 1.0, y = (2.0 * i + 1.0) / img.height - 1.0;
            const auto [ox, oy] = inv.apply(x, y);
            total += v;
            if (std::abs(ox) > 1.0 || std::abs(oy) > 1.0) lost += v;
        }
    return total > 0.0 ? lost / total : 0.0;
}

SynthPair synth_pair(const Image& base, const WarpRange& range, uint64_t style_seed) {
    range.validate();
    const Image thermal_src = pseudo_thermal(base, style_seed);
    // The warp draws use their own stream so the style alone fixes T(base).
    Rng rng(style_seed ^ 0xA5A5A5A55A5A5A5Aull);
    constexpr int kMaxDraws = 64;
    for (int draw = 0; draw < kMaxDraws; ++draw) {
        const double scale = rng.uniform(range.scale_min, range.scale_max);
        const double rot = rng.uniform(-range.rotation_deg, range.rotation_deg) * std::numbers::pi / 180.0;
        const double shear = rng.uniform(-range.shear, range.shear);
        const double tx = rng.uniform(-range.translation, range.translation);
        const double ty = rng.uniform(-range.translation, range.translation);
        const auto theta = AffineParams::from_components(scale, rot, shear, tx, ty);
        if (out_of_frame_fraction(thermal_src, theta) > 0.4) continue;
        auto warped = warp(unit_tensor({thermal_src}), theta_tensor<float>({theta}));
        return {quantized(base), quantized(unit_image(warped, 0)), theta};
    }
    throw std::runtime_error("synth_pair: no warp within range keeps 60% of the face in frame");
}

namespace {

double smoothstep_edge(double signed_dist) { return std::clamp(0.5 - signed_dist, 0.0, 1.0); }

// Approximate signed distance in pixels to an ellipse boundary (negative inside).
double ellipse_dist(double x, double y, double cx, double cy, double rx, double ry, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    const double dx = x - cx, dy = y - cy;
    const double u = c * dx + s * dy, v = -s * dx + c * dy;
    const double r = std::sqrt((u * u) / (rx * rx) + (v * v) / (ry * ry));
    return (r - 1.0) * std::min(rx, ry);
}

}  // namespace

Image procedural_face(int64_t size, uint64_t seed) {
    if (size < 16) throw std::invalid_argument("procedural_face: size must be at least 16");
    Rng rng(seed);
    const double S = static_cast<double>(size);
    const double bg = rng.uniform(0.72, 0.92);
    const double bg_tilt = rng.uniform(-0.08, 0.08);
    const double cx = S * (0.5 + rng.uniform(-0.04, 0.04)), cy = S * (0.52 + rng.uniform(-0.03, 0.03));
    const double rx = S * rng.uniform(0.27, 0.33), ry = S * rng.uniform(0.35, 0.41);
    const double tilt = rng.uniform(-0.08, 0.08);
    const double skin = rng.uniform(0.45, 0.65);
    const double light = rng.uniform(-0.2, 0.2);
    const double hair = rng.uniform(0.08, 0.25);
    const double hairline = rng.uniform(0.35, 0.6);
    const double eye_y = cy - ry * rng.uniform(0.12, 0.22);
    const double eye_dx = rx * rng.uniform(0.36, 0.46);
    const double eye_r = S * rng.uniform(0.035, 0.05);
    const double brow_lift = S * rng.uniform(0.05, 0.08);
    const double brow_tilt = rng.uniform(-0.25, 0.25);
    const double nose_len = ry * rng.uniform(0.25, 0.35);
    const double mouth_y = cy + ry * rng.uniform(0.42, 0.55);
    const double mouth_w = rx * rng.uniform(0.35, 0.55);
    const double mouth_tone = rng.uniform(0.2, 0.35);
    const double mark_x = cx + rx * rng.uniform(-0.5, 0.5), mark_y = cy + ry * rng.uniform(0.1, 0.35);
    const double mark_r = S * rng.uniform(0.012, 0.022);
    const double ear_r = S * rng.uniform(0.04, 0.06);

    Image img(size, size);
    for (int64_t i = 0; i < size; ++i)
        for (int64_t j = 0; j < size; ++j) {
            const double x = j + 0.5, y = i + 0.5;
            double v = bg + bg_tilt * (x / S - 0.5);
            auto paint = [&](double dist, double tone) { v += smoothstep_edge(dist) * (tone - v); };
            for (double side : {-1.0, 1.0}) paint(ellipse_dist(x, y, cx + side * rx * 0.98, cy, ear_r, ear_r * 1.6, 0.0), skin * 0.92);
            // Head with a horizontal lighting ramp.
            const double shade = skin * (1.0 + light * (x - cx) / rx);
            paint(ellipse_dist(x, y, cx, cy, rx, ry, tilt), shade);
            // Hair: the head ellipse slightly enlarged, above the hairline.
            const double hd = ellipse_dist(x, y, cx, cy - ry * 0.05, rx * 1.06, ry * 1.04, tilt);
            paint(std::max(hd, (y - (cy - ry * hairline)) * 1.0), hair);
            for (double side : {-1.0, 1.0}) {
                const double ex = cx + side * eye_dx;
                paint(ellipse_dist(x, y, ex, eye_y, eye_r * 1.7, eye_r, 0.0), 0.9);
                paint(ellipse_dist(x, y, ex, eye_y, eye_r * 0.8, eye_r * 0.8, 0.0), 0.08);
                paint(ellipse_dist(x, y, ex, eye_y - brow_lift, eye_r * 2.0, S * 0.012 + 0.5, side * brow_tilt), hair * 1.2);
            }
            paint(ellipse_dist(x, y, cx, eye_y + nose_len * 0.5, S * 0.018, nose_len * 0.5, 0.0), shade * 0.8);
            for (double side : {-1.0, 1.0}) {
                paint(ellipse_dist(x, y, cx + side * S * 0.025, eye_y + nose_len, S * 0.014, S * 0.01, 0.0), 0.15);
            }
            paint(ellipse_dist(x, y, cx, mouth_y, mouth_w, S * 0.028, 0.0), mouth_tone);
            paint(ellipse_dist(x, y, mark_x, mark_y, mark_r, mark_r, 0.0), shade * 0.6);
            img.at(i, j) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    return img;
}

Manifest write_synth_corpus(const SynthCorpusSpec& spec, const fs::path& out_dir) {
    if (spec.bases.empty()) throw std::invalid_argument("no base images");
    if (spec.pairs < 1) throw std::invalid_argument("pair count must be positive");
    spec.range.validate();
    std::vector<Image> bases;
    for (const auto& b : spec.bases) bases.push_back(read_png(b));
    fs::create_directories(out_dir);
    Rng rng(spec.seed);
    std::vector<ImagePair> pairs;
    for (int64_t i = 0; i < spec.pairs; ++i) {
        const size_t b = static_cast<size_t>(i) % bases.size();
        const auto sp = synth_pair(bases[b], spec.range, rng.next_u64());
        char id[32];
        std::snprintf(id, sizeof(id), "p%05lld", static_cast<long long>(i));
        ImagePair p;
        p.pair_id = id;
        p.subject_id = spec.bases[b].stem().string();
        p.visible_path = std::string(id) + "_vis.png";
        p.thermal_path = std::string(id) + "_thr.png";
        p.theta_true = sp.theta_true;
        write_png(out_dir / p.visible_path, sp.visible);
        write_png(out_dir / p.thermal_path, sp.thermal);
        pairs.push_back(std::move(p));
    }
    Manifest m = split_subjects(pairs, spec.test_fraction, spec.seed);
    m.base_dir = out_dir;
    save_manifest(out_dir / "manifest.csv", m);
    return m;
}

}  // namespace vtmorph
