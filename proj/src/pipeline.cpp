#include "vtmorph/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "csv.hpp"

namespace vtmorph {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
    try {
        range.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
}

namespace {

std::vector<ConfigField<SynthConfig>> build_synth_fields() {
    using S = SynthConfig;
    auto real = [](std::string name, std::string description, double S::*member) {
        return ConfigField<S>{name, std::move(description), [member](const S& c) { return cfg::format_double(c.*member); },
                              [member, name](S& c, const std::string& v) { c.*member = cfg::to_double(name, v); }};
    };
    auto warp = [](std::string name, std::string description, double WarpRange::*member) {
        return ConfigField<S>{name, std::move(description),
                              [member](const S& c) { return cfg::format_double(c.range.*member); },
                              [member, name](S& c, const std::string& v) { c.range.*member = cfg::to_double(name, v); }};
    };
    return {
        warp("warp_translation", "max |tx|, |ty| of synthetic warps, normalized units (<= 0.25)", &WarpRange::translation),
        warp("warp_rotation_deg", "max |rotation| of synthetic warps in degrees (<= 15)", &WarpRange::rotation_deg),
        warp("warp_scale_min", "lower bound of the synthetic warp scale (>= 0.85)", &WarpRange::scale_min),
        warp("warp_scale_max", "upper bound of the synthetic warp scale (<= 1.15)", &WarpRange::scale_max),
        warp("warp_shear", "max |shear| of synthetic warps (<= 0.1)", &WarpRange::shear),
        real("test_fraction", "fraction of subjects held out for the test split", &S::test_fraction),
    };
}

std::string pair_file(const std::string& id, const char* suffix) { return id + suffix; }

}  // namespace

const std::vector<ConfigField<SynthConfig>>& synth_config_fields() {
    static const auto fields = build_synth_fields();
    return fields;
}

std::map<std::string, std::string> synth_config_to_map(const SynthConfig& config) {
    std::map<std::string, std::string> out;
    for (const auto& f : synth_config_fields()) out[f.name] = f.get(config);
    return out;
}

SynthConfig synth_config_from_map(const std::map<std::string, std::string>& values) {
    SynthConfig c;
    const auto& fields = synth_config_fields();
    for (const auto& [key, value] : values) {
        const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.name == key; });
        if (it == fields.end()) throw ConfigError("unknown config key '" + key + "'");
        it->set(c, value);
    }
    return c;
}

WarpRange parse_warp_range(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(cfg::to_double("warp-range", item));
    WarpRange r;
    if (v.size() == 1 && v[0] == 0.0) {
        r = WarpRange::none();
    } else if (v.size() == 5) {
        r = {v[0], v[1], v[2], v[3], v[4]};
    } else {
        throw ConfigError("warp-range needs 'translation,rotation_deg,scale_min,scale_max,shear' or '0', got '" + text +
                          "'");
    }
    try {
        r.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return r;
}

std::string registration_csv(const std::vector<RegisteredRow>& rows) {
    std::ostringstream out;
    out << "pair_id,split,theta_a,theta_b,theta_tx,theta_c,theta_d,theta_ty,corner_error_px,"
           "ssim_edges_before,ssim_edges_after,ncc_edges_before,ncc_edges_after,mutual_info_before,mutual_info_after\n";
    auto num = [](double v) { return cfg::format_double(v); };
    for (const auto& r : rows) {
        out << csv::field(r.pair_id) << ',' << r.split << ',' << format_theta(r.theta) << ','
            << (r.corner_error_px ? num(*r.corner_error_px) : std::string()) << ',' << num(r.before.ssim_edges) << ','
            << num(r.after.ssim_edges) << ',' << num(r.before.ncc_edges) << ',' << num(r.after.ncc_edges) << ','
            << num(r.before.mutual_info) << ',' << num(r.after.mutual_info) << '\n';
    }
    return out.str();
}

RegisterOutput register_manifest(const RegistrationModel& model, const Manifest& manifest, const fs::path& out_dir,
                                 const RegisterOptions& options) {
    options.metrics.validate();
    const auto S = model.config().image_size;
    const auto loaded = load_pair_images(manifest, manifest.pairs);
    RegisterOutput out;
    std::vector<PairImages> usable;
    std::vector<const ImagePair*> meta;
    for (size_t i = 0; i < loaded.size(); ++i) {
        const auto& p = loaded[i];
        if (p.visible.height != S || p.visible.width != S) {
            const auto reason = p.pair_id + ": " + std::to_string(p.visible.height) + "x" +
                                std::to_string(p.visible.width) + " images, model expects " + std::to_string(S) + "x" +
                                std::to_string(S);
            if (!options.continue_on_error) throw ShapeError("pair " + reason);
            out.skipped.push_back(reason);
            continue;
        }
        usable.push_back(p);
        meta.push_back(&manifest.pairs[i]);
    }

    fs::create_directories(out_dir);
    const auto regs = register_pairs(model, usable, options.batch_size);
    const RandomConvExtractor extractor(options.metrics.feature_seed);
    for (size_t i = 0; i < regs.size(); ++i) {
        const auto& r = regs[i];
        write_png(out_dir / pair_file(r.pair_id, "_vis.png"), usable[i].visible);
        write_png(out_dir / pair_file(r.pair_id, "_thr.png"), usable[i].thermal);
        write_png(out_dir / pair_file(r.pair_id, "_thr_reg.png"), r.registered);
        write_png(out_dir / pair_file(r.pair_id, "_gen.png"), r.fake_thermal);
        RegisteredRow row{r.pair_id, meta[i]->split, r.theta, std::nullopt, {}, {}};
        row.before = score_pair(r.pair_id, usable[i].visible, usable[i].thermal, nullptr, options.metrics, extractor);
        row.after = score_pair(r.pair_id, usable[i].visible, quantized(r.registered), nullptr, options.metrics, extractor);
        if (meta[i]->theta_true) row.corner_error_px = corner_error(r.theta, invert(*meta[i]->theta_true), S, S);
        out.rows.push_back(std::move(row));
    }
    std::ofstream f(out_dir / kRegistrationFile, std::ios::binary);
    f << registration_csv(out.rows);
    if (!f) throw ImageIoError("cannot write " + (out_dir / kRegistrationFile).string());
    return out;
}

}  // namespace vtmorph
