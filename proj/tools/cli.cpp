#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "vtmorph/checkpoint.hpp"
#include "vtmorph/data.hpp"
#include "vtmorph/gradcheck.hpp"
#include "vtmorph/metrics.hpp"
#include "vtmorph/pipeline.hpp"
#include "vtmorph/trainer.hpp"

namespace vtmorph::cli {

namespace fs = std::filesystem;

namespace {

// Thrown for bad user input that is not already a library error type.
struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using KeyMap = std::map<std::string, std::string>;

template <typename S>
std::vector<std::string> field_names(const std::vector<ConfigField<S>>& fields) {
    std::vector<std::string> out;
    for (const auto& f : fields) out.push_back(f.name);
    return out;
}

bool has_key(const std::vector<std::string>& names, const std::string& key) {
    return std::find(names.begin(), names.end(), key) != names.end();
}

// One config file may hold keys of every group; each command takes its own.
struct ConfigSource {
    KeyMap file;
    KeyMap flags;

    void load(const std::string& path) {
        if (path.empty()) return;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InvalidInput("cannot read config file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        file = parse_config_text(ss.str());
        const auto train = field_names(train_config_fields()), metric = field_names(metric_config_fields()),
                   synth = field_names(synth_config_fields());
        for (const auto& [key, value] : file)
            if (!has_key(train, key) && !has_key(metric, key) && !has_key(synth, key))
                throw ConfigError("unknown config key '" + key + "' in " + path);
    }

    KeyMap resolve(const std::vector<std::string>& names) const {
        KeyMap out;
        for (const auto& [k, v] : file)
            if (has_key(names, k)) out[k] = v;
        for (const auto& [k, v] : flags) out[k] = v;
        return out;
    }
};

// Registers --<key> for every field; values land in `flags` only when given.
template <typename S>
void add_field_flags(CLI::App* cmd, const std::vector<ConfigField<S>>& fields, KeyMap& flags,
                     std::map<std::string, std::string>& storage) {
    for (const auto& f : fields) {
        auto& slot = storage[f.name];
        cmd->add_option("--" + f.name, slot, f.description)
            ->group("Config keys")
            ->each([&flags, name = f.name](const std::string& v) { flags[name] = v; });
    }
}

void log_config(std::ostream& err, const std::string& title, const KeyMap& resolved) {
    err << "# resolved " << title << " config\n";
    for (const auto& [k, v] : resolved) err << k << '=' << v << '\n';
}

void write_config_file(const fs::path& path, const std::vector<std::pair<std::string, KeyMap>>& groups) {
    std::ofstream f(path, std::ios::binary);
    for (const auto& [title, map] : groups) {
        f << "# " << title << '\n';
        for (const auto& [k, v] : map) f << k << '=' << v << '\n';
    }
}

std::vector<fs::path> png_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InvalidInput("base directory " + dir.string() + " does not exist");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw InvalidInput("no .png files in " + dir.string());
    return out;
}

template <typename S>
void reference_section(std::ostringstream& out, const std::string& title, const std::string& used_by,
                       const std::vector<ConfigField<S>>& fields, const S& defaults) {
    out << "## " << title << "\n\nUsed by `" << used_by << "`.\n\n| key | default | meaning |\n|---|---|---|\n";
    for (const auto& f : fields) {
        const auto value = f.get(defaults);
        out << "| `" << f.name << "` | " << (value.empty() ? "(unset)" : "`" + value + "`") << " | " << f.description
            << " |\n";
    }
    out << '\n';
}

}  // namespace

std::string config_reference() {
    std::ostringstream out;
    out << "# Configuration keys\n\n"
        << "Config files hold one `key=value` per line; `#` starts a comment. Every key can also be given as a\n"
        << "`--key value` flag on the commands that use it, and flags win over the file. Unknown keys are rejected.\n\n";
    reference_section(out, "Training", "train", train_config_fields(), TrainConfig{});
    reference_section(out, "Metrics", "evaluate", metric_config_fields(), MetricConfig{});
    reference_section(out, "Synthesis", "synth", synth_config_fields(), SynthConfig{});
    return out.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Visible-to-thermal generative image registration"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand every subcommand's help");

    ConfigSource source;
    std::map<std::string, std::string> storage;
    std::string config_path;

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the generators, discriminators and registration network");
    std::string manifest_path, out_dir, resume_path;
    train_cmd->add_option("--manifest", manifest_path, "Manifest CSV")->required();
    train_cmd->add_option("--out", out_dir, "Output directory for checkpoints and loss.csv")->required();
    train_cmd->add_option("--config", config_path, "key=value config file");
    train_cmd->add_option("--resume", resume_path, "Checkpoint to resume from");
    add_field_flags(train_cmd, train_config_fields(), source.flags, storage);

    // register
    auto* register_cmd = app.add_subcommand("register", "Register every pair of a manifest with a trained model");
    std::string checkpoint_path;
    int64_t register_batch = 8;
    register_cmd->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
    register_cmd->add_option("--manifest", manifest_path, "Manifest CSV")->required();
    register_cmd->add_option("--out", out_dir, "Output directory")->required();
    register_cmd->add_option("--batch", register_batch, "Pairs per forward pass")->check(CLI::PositiveNumber);
    bool continue_on_error = false;
    register_cmd->add_flag("--continue-on-error", continue_on_error, "Skip pairs that do not fit the model");
    register_cmd->add_option("--config", config_path, "key=value config file");
    add_field_flags(register_cmd, metric_config_fields(), source.flags, storage);

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score alignment before and after registration");
    std::string before_dir, after_dir, report_path;
    evaluate_cmd->add_option("--before", before_dir, "Directory with <id>_vis.png and <id>_thr.png")->required();
    evaluate_cmd->add_option("--after", after_dir, "Directory with <id>_vis.png and <id>_thr_reg.png")->required();
    evaluate_cmd->add_option("--out", report_path, "Report CSV path")->required();
    evaluate_cmd->add_option("--config", config_path, "key=value config file");
    add_field_flags(evaluate_cmd, metric_config_fields(), source.flags, storage);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic misaligned corpus with known warps");
    std::string base_dir, warp_range;
    int64_t synth_n = 10;
    uint64_t synth_seed = 0;
    synth_cmd->add_option("--base-dir", base_dir, "Directory of visible base PNGs, one subject each")->required();
    synth_cmd->add_option("--n", synth_n, "Number of pairs")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--warp-range", warp_range,
                          "translation,rotation_deg,scale_min,scale_max,shear or 0 for no warp");
    synth_cmd->add_option("--seed", synth_seed, "Corpus seed");
    synth_cmd->add_option("--out", out_dir, "Output directory")->required();
    synth_cmd->add_option("--config", config_path, "key=value config file");
    add_field_flags(synth_cmd, synth_config_fields(), source.flags, storage);

    // faces
    auto* faces_cmd = app.add_subcommand("faces", "Write procedural face images to use as synthesis bases");
    int64_t faces_n = 10, faces_size = 64;
    uint64_t faces_seed = 0;
    faces_cmd->add_option("--n", faces_n, "Number of faces")->check(CLI::PositiveNumber);
    faces_cmd->add_option("--size", faces_size, "Side length in pixels")->check(CLI::Range(16, 1024));
    faces_cmd->add_option("--seed", faces_seed, "First face seed");
    faces_cmd->add_option("--out", out_dir, "Output directory")->required();

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
    int grad_seeds = 100;
    double grad_threshold = 1e-4;
    std::string corrupt_op;
    grad_cmd->add_option("--seeds", grad_seeds, "Random seeds per op")->check(CLI::PositiveNumber);
    grad_cmd->add_option("--threshold", grad_threshold, "Maximum relative error");
    grad_cmd->add_option("--corrupt", corrupt_op, "Testing hook: scale this op's gradient by 1.5")
        ->group("Testing");

    auto* reference_cmd = app.add_subcommand("config-reference", "Print every config key with its default");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalidInput;
    }

    try {
        source.load(config_path);

        if (*train_cmd) {
            const auto resolved = source.resolve(field_names(train_config_fields()));
            const TrainConfig config = config_from_map(resolved);
            config.validate();
            const auto full = config_to_map(config);
            log_config(err, "train", full);
            const auto manifest = load_manifest(manifest_path);
            fs::create_directories(out_dir);
            write_config_file(fs::path(out_dir) / "config.txt", {{"train", full}});
            TrainOptions options;
            options.out_dir = out_dir;
            if (!resume_path.empty()) options.resume = resume_path;
            options.on_step = [&err](const LossReport& r) {
                if (r.step % 50 == 0) {
                    err << "step " << r.step << " total " << r.total << " l1_v2t " << r.l1_v2t << " l1_t2v " << r.l1_t2v
                        << " cycle " << r.cycle << '\n';
                }
            };
            const auto result = train(manifest, config, options);
            out << "trained " << result.losses.size() << " steps; checkpoint " << result.checkpoint.string() << '\n';
            return kOk;
        }

        if (*register_cmd) {
            Checkpoint ckpt;
            std::optional<RegistrationModel> model;
            try {
                ckpt = load_checkpoint(checkpoint_path);
                model.emplace(load_model(ckpt));
            } catch (const std::exception& e) {
                err << "error: bad checkpoint " << checkpoint_path << ": " << e.what() << '\n';
                return kInvalidInput;
            }
            log_config(err, "model", ckpt.config);
            RegisterOptions options;
            options.batch_size = register_batch;
            options.continue_on_error = continue_on_error;
            options.metrics = metric_config_from_map(source.resolve(field_names(metric_config_fields())));
            log_config(err, "metric", metric_config_to_map(options.metrics));
            const auto manifest = load_manifest(manifest_path);
            const auto result = register_manifest(*model, manifest, out_dir, options);
            out << "registered " << result.rows.size() << " of " << manifest.pairs.size() << " pairs into " << out_dir
                << '\n';
            for (const std::string split : {"train", "test"}) {
                double sum = 0;
                int n = 0;
                for (const auto& r : result.rows)
                    if (r.split == split && r.corner_error_px) sum += *r.corner_error_px, ++n;
                if (n > 0) out << "mean corner error (" << split << ", " << n << " pairs): " << sum / n << " px\n";
            }
            if (!result.skipped.empty()) {
                err << "warning: " << result.skipped.size() << " pairs skipped\n";
                for (const auto& s : result.skipped) err << "  " << s << '\n';
            }
            return kOk;
        }

        if (*evaluate_cmd) {
            const auto resolved = source.resolve(field_names(metric_config_fields()));
            const auto config = metric_config_from_map(resolved);
            config.validate();
            log_config(err, "metric", metric_config_to_map(config));
            const auto report = evaluate_pairs(before_dir, after_dir, config);
            if (const auto parent = fs::path(report_path).parent_path(); !parent.empty()) fs::create_directories(parent);
            std::ofstream f(report_path, std::ios::binary);
            f << report.csv();
            if (!f) throw ImageIoError("cannot write " + report_path);
            out << report.table();
            if (!report.unmatched.empty()) {
                err << "error: " << report.unmatched.size() << " unmatched entries\n";
                for (const auto& u : report.unmatched) err << "  " << u << '\n';
                return kInvalidInput;
            }
            return kOk;
        }

        if (*synth_cmd) {
            auto resolved = source.resolve(field_names(synth_config_fields()));
            SynthConfig config = synth_config_from_map(resolved);
            if (!warp_range.empty()) config.range = parse_warp_range(warp_range);
            config.validate();
            const auto full = synth_config_to_map(config);
            log_config(err, "synth", full);
            SynthCorpusSpec spec;
            spec.bases = png_files(base_dir);
            spec.pairs = synth_n;
            spec.range = config.range;
            spec.seed = synth_seed;
            spec.test_fraction = config.test_fraction;
            const auto manifest = write_synth_corpus(spec, out_dir);
            out << "wrote " << manifest.pairs.size() << " pairs (" << manifest.split_pairs("train").size() << " train, "
                << manifest.split_pairs("test").size() << " test) to " << out_dir << '\n';
            return kOk;
        }

        if (*faces_cmd) {
            fs::create_directories(out_dir);
            for (int64_t i = 0; i < faces_n; ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "face_%04lld.png", static_cast<long long>(i));
                write_png(fs::path(out_dir) / name, procedural_face(faces_size, faces_seed + static_cast<uint64_t>(i)));
            }
            out << "wrote " << faces_n << " faces to " << out_dir << '\n';
            return kOk;
        }

        if (*grad_cmd) {
            if (!corrupt_op.empty()) {
                const auto& suite = gradient_suite();
                if (std::none_of(suite.begin(), suite.end(), [&](const GradCase& c) { return c.op == corrupt_op; }))
                    throw InvalidInput("unknown op '" + corrupt_op + "'");
                testing_hooks::corrupt_gradient(corrupt_op);
            }
            const auto report = run_gradient_suite(grad_seeds, grad_threshold);
            testing_hooks::clear_corruption();
            for (const auto& row : report.rows) {
                char line[256];
                std::snprintf(line, sizeof(line), "%-24s %s  max rel err %.3e (seed %llu)", row.op.c_str(),
                              row.passed ? "ok  " : "FAIL", row.worst_error,
                              static_cast<unsigned long long>(row.worst_seed));
                out << line;
                if (!row.failure.empty()) out << "  " << row.failure;
                out << '\n';
            }
            if (const auto* worst = report.worst())
                out << "worst op: " << worst->op << " max rel err " << worst->worst_error << '\n';
            out << (report.passed() ? "all ops pass" : "gradient check FAILED") << " at threshold " << grad_threshold
                << " over " << grad_seeds << " seeds\n";
            return report.passed() ? kOk : kVerificationFailure;
        }

        if (*reference_cmd) {
            out << config_reference();
            return kOk;
        }
    } catch (const TrainingAbort& e) {
        err << "error: training aborted: " << e.what() << '\n';
        return kRuntimeAbort;
    } catch (const ManifestError& e) {
        err << "error: " << e.what() << '\n';
        for (const auto& p : e.problems()) err << "  " << p << '\n';
        return kInvalidInput;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const ImageIoError& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const CheckpointError& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeAbort;
    }
    return kInvalidInput;
}

}  // namespace vtmorph::cli
