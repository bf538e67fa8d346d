#include "cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "tdir/checkpoint.hpp"
#include "tdir/dataio.hpp"
#include "tdir/degrade.hpp"
#include "tdir/denoiser.hpp"
#include "tdir/errors.hpp"
#include "tdir/metrics.hpp"
#include "tdir/parallel.hpp"
#include "tdir/sampler.hpp"
#include "tdir/schedule.hpp"
#include "tdir/trainer.hpp"

#ifndef TDIR_VERSION
#define TDIR_VERSION "0.0.0"
#endif

namespace tdir::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

int default_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

Image as_rgb(Image img) {
    if (img.channels() == 3) return img;
    if (img.channels() != 1) throw InvalidArgument("expected a 1- or 3-channel image");
    Tensor rgb(Shape{3, img.height(), img.width()});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) rgb.at(c, y, x) = img.pixels.at(0, y, x);
    return {std::move(rgb), img.domain};
}

std::vector<fs::path> collect_inputs(const fs::path& input) {
    if (fs::is_regular_file(input)) return {input};
    if (!fs::exists(input)) throw IoError("input not found: " + input.string());
    auto files = list_png_files(input);
    if (files.empty()) throw IoError("no PNG files in " + input.string());
    return files;
}

void create_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    if (path.has_parent_path()) create_dir(path.parent_path());
    write_file_atomic(path, text);
}

// ---------------------------------------------------------------- schedule

struct ScheduleArgs {
    int steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::string out;
};

void add_schedule(CLI::App& app, ScheduleArgs& a, std::function<void()> action) {
    auto* cmd = app.add_subcommand("schedule", "Print the linear noise schedule as CSV");
    auto attach = [&a](CLI::App* c) {
        c->add_option("--T,--steps", a.steps, "Number of diffusion steps")->capture_default_str();
        c->add_option("--beta-start", a.beta_start, "First beta")->capture_default_str();
        c->add_option("--beta-end", a.beta_end, "Last beta")->capture_default_str();
        c->add_option("--out", a.out, "Output CSV (default stdout)");
    };
    attach(cmd);
    auto* inspect = cmd->add_subcommand("inspect", "Same as `schedule`");
    attach(inspect);
    cmd->callback(action);
}

std::string schedule_csv(const NoiseSchedule& s) {
    std::ostringstream os;
    os << "t,beta,alpha,alpha_bar,sqrt_alpha_bar,sqrt_one_minus_alpha_bar\n";
    for (int t = 1; t <= s.steps(); ++t) {
        os << t << ',' << fmt(s.beta(t)) << ',' << fmt(s.alpha(t)) << ',' << fmt(s.alpha_bar(t)) << ','
           << fmt(s.sqrt_alpha_bar(t)) << ',' << fmt(s.sqrt_one_minus_alpha_bar(t)) << '\n';
    }
    return os.str();
}

// ----------------------------------------------------------------- degrade

struct DegradeArgs {
    std::string task;
    std::string input;
    std::string out;
    std::uint64_t seed = 0;
    int threads = default_threads();
    double sigma = 25.0;
    RainParams rain;
    UnderwaterParams underwater;
};

void add_degrade(CLI::App& app, DegradeArgs& a) {
    auto* cmd = app.add_subcommand("degrade", "Synthesize degraded/clean training pairs");
    cmd->add_option("--task", a.task, "noise | rain | underwater")
        ->required()
        ->check(CLI::IsMember({"noise", "rain", "underwater"}));
    cmd->add_option("--input", a.input, "Clean PNG file or directory")->required();
    cmd->add_option("--out", a.out, "Output root; writes <out>/clean and <out>/degraded")->required();
    cmd->add_option("--seed", a.seed, "Base seed")->capture_default_str();
    cmd->add_option("--threads", a.threads, "Worker cap")->check(CLI::PositiveNumber);
    cmd->add_option("--sigma", a.sigma, "Gaussian noise std in 8-bit units (presets 15, 25, 50)")
        ->capture_default_str();
    cmd->add_option("--rain-count", a.rain.streak_count, "Number of streaks")->capture_default_str();
    cmd->add_option("--rain-angle", a.rain.angle_deg, "Streak angle in degrees")->capture_default_str();
    cmd->add_option("--rain-length", a.rain.length_px, "Streak length in pixels")->capture_default_str();
    cmd->add_option("--rain-intensity", a.rain.intensity, "Streak intensity in (0, 1]")->capture_default_str();
    cmd->add_option("--attenuation", a.underwater.attenuation, "Per-channel transmission r,g,b")->delimiter(',');
    cmd->add_option("--veil-color", a.underwater.veil_color, "Veiling light r,g,b")->delimiter(',');
    cmd->add_option("--veil-strength", a.underwater.veil_strength, "Veil mix in [0, 1)")->capture_default_str();
}

int run_degrade(const DegradeArgs& a) {
    const auto files = collect_inputs(a.input);
    const fs::path root(a.out);
    create_dir(root / "clean");
    create_dir(root / "degraded");
    parallel_for(files.size(), a.threads, [&](std::size_t i) {
        const fs::path& file = files[i];
        const std::string name = file.filename().string();
        const Image clean = load_image(file);
        Rng rng = derive_rng(a.seed, {fnv1a64(name)});
        Image degraded;
        if (a.task == "noise") {
            degraded = add_gaussian_noise(clean, a.sigma, rng);
        } else if (a.task == "rain") {
            degraded = synth_rain(clean, a.rain, rng);
        } else {
            degraded = synth_underwater(as_rgb(clean), a.underwater);
            save_image(as_rgb(clean), root / "clean" / name);
            save_image(degraded, root / "degraded" / name);
            return;
        }
        save_image(clean, root / "clean" / name);
        save_image(degraded, root / "degraded" / name);
    });
    return kExitOk;
}

// ------------------------------------------------------------------- train

struct ModelArgs {
    std::string preset = "default";
    std::optional<int> levels, base_channels, prompt_blocks, prompt_components, embed_dim;
    std::vector<int> multipliers, heads, blocks, prompt_size;
    std::optional<double> ffn_expansion;

    DenoiserConfig resolve() const {
        DenoiserConfig c = preset == "tiny" ? DenoiserConfig::tiny() : DenoiserConfig{};
        if (levels) c.levels = *levels;
        if (base_channels) c.base_channels = *base_channels;
        if (prompt_blocks) c.prompt_blocks = *prompt_blocks;
        if (prompt_components) c.prompt_components = *prompt_components;
        if (embed_dim) c.timestep_embed_dim = *embed_dim;
        if (ffn_expansion) c.ffn_expansion = *ffn_expansion;
        if (!multipliers.empty()) c.channel_multipliers = multipliers;
        if (!heads.empty()) c.heads = heads;
        if (!blocks.empty()) c.blocks = blocks;
        if (!prompt_size.empty()) c.prompt_size = prompt_size;
        c.validate();
        return c;
    }
};

struct TrainArgs {
    ModelArgs model;
    std::string pairs, clean, degraded, out, resume, encoder_from, split = "train", lr_schedule = "constant";
    std::optional<int> steps, batch, patch, diffusion_steps, checkpoint_every;
    std::optional<double> lr, beta1, beta2, adam_eps, beta_start, beta_end;
    std::optional<std::uint64_t> seed;
    bool freeze_encoder = false;
    int threads = default_threads();
};

void add_model_options(CLI::App* cmd, ModelArgs& m) {
    cmd->add_option("--preset", m.preset, "Architecture preset: default | tiny")
        ->check(CLI::IsMember({"default", "tiny"}))
        ->capture_default_str();
    cmd->add_option("--levels", m.levels, "U-Net levels");
    cmd->add_option("--base-channels", m.base_channels, "Channels at level 0");
    cmd->add_option("--multipliers", m.multipliers, "Per-level channel multipliers")->delimiter(',');
    cmd->add_option("--heads", m.heads, "Per-level attention heads")->delimiter(',');
    cmd->add_option("--blocks", m.blocks, "Per-level transformer blocks")->delimiter(',');
    cmd->add_option("--prompt-blocks", m.prompt_blocks, "Decoder prompt blocks");
    cmd->add_option("--prompt-components", m.prompt_components, "Prompt components per block");
    cmd->add_option("--prompt-size", m.prompt_size, "Prompt spatial size per decoder stage")->delimiter(',');
    cmd->add_option("--embed-dim", m.embed_dim, "Timestep embedding width");
    cmd->add_option("--ffn-expansion", m.ffn_expansion, "Feed-forward expansion factor");
}

void add_train(CLI::App& app, TrainArgs& a) {
    auto* cmd = app.add_subcommand("train", "Train the conditional denoiser");
    add_model_options(cmd, a.model);
    cmd->add_option("--pairs", a.pairs, "Dataset root containing clean/ and degraded/");
    cmd->add_option("--clean", a.clean, "Clean image directory");
    cmd->add_option("--degraded", a.degraded, "Degraded image directory");
    cmd->add_option("--split", a.split, "Which split to train on: train | val | test | all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
    cmd->add_option("--out", a.out, "Output directory for checkpoints and the training log")->required();
    cmd->add_option("--resume", a.resume, "Checkpoint to resume from");
    cmd->add_option("--steps", a.steps, "Total optimizer steps (absolute, counting resumed ones)");
    cmd->add_option("--batch", a.batch, "Batch size");
    cmd->add_option("--patch", a.patch, "Training patch size");
    cmd->add_option("--lr", a.lr, "Learning rate");
    cmd->add_option("--lr-schedule", a.lr_schedule, "constant | cosine")
        ->check(CLI::IsMember({"constant", "cosine"}))
        ->capture_default_str();
    cmd->add_option("--beta1", a.beta1, "Adam beta1");
    cmd->add_option("--beta2", a.beta2, "Adam beta2");
    cmd->add_option("--adam-eps", a.adam_eps, "Adam epsilon");
    cmd->add_option("--T,--diffusion-steps", a.diffusion_steps, "Diffusion steps");
    cmd->add_option("--beta-start", a.beta_start, "First beta");
    cmd->add_option("--beta-end", a.beta_end, "Last beta");
    cmd->add_option("--checkpoint-every", a.checkpoint_every, "Also write checkpoint_<step>.tdir every N steps");
    cmd->add_flag("--freeze-encoder", a.freeze_encoder, "Hold encoder parameters fixed");
    cmd->add_option("--encoder-from", a.encoder_from, "Initialize encoder weights from another checkpoint")
        ->excludes("--resume");
    cmd->add_option("--seed", a.seed, "Seed for initialization and sampling");
    cmd->add_option("--threads", a.threads, "Worker cap")->check(CLI::PositiveNumber);
}

TrainConfig resolve_train(const TrainArgs& a, TrainConfig c) {
    if (a.steps) c.total_steps = *a.steps;
    if (a.batch) c.batch_size = *a.batch;
    if (a.patch) c.patch_size = *a.patch;
    if (a.lr) c.learning_rate = *a.lr;
    if (a.beta1) c.beta1 = *a.beta1;
    if (a.beta2) c.beta2 = *a.beta2;
    if (a.adam_eps) c.adam_eps = *a.adam_eps;
    if (a.diffusion_steps) c.diffusion_steps = *a.diffusion_steps;
    if (a.beta_start) c.beta_start = *a.beta_start;
    if (a.beta_end) c.beta_end = *a.beta_end;
    if (a.checkpoint_every) c.checkpoint_every = *a.checkpoint_every;
    if (a.seed) c.seed = *a.seed;
    if (a.freeze_encoder) c.freeze_encoder = true;
    c.lr_schedule = a.lr_schedule == "cosine" ? LrSchedule::Cosine : LrSchedule::Constant;
    return c;
}

std::vector<ImagePair> load_dataset(const TrainArgs& a) {
    fs::path clean = a.clean, degraded = a.degraded;
    if (!a.pairs.empty()) {
        if (clean.empty()) clean = fs::path(a.pairs) / "clean";
        if (degraded.empty()) degraded = fs::path(a.pairs) / "degraded";
    }
    if (clean.empty() || degraded.empty()) throw InvalidArgument("train needs --pairs or both --clean and --degraded");
    const PairManifest manifest = build_manifest(clean, degraded);
    std::optional<Split> only;
    if (a.split == "train") only = Split::Train;
    if (a.split == "val") only = Split::Val;
    if (a.split == "test") only = Split::Test;
    auto pairs = load_pairs(manifest, only);
    if (pairs.empty()) throw IoError("no image pairs in split '" + a.split + "'");
    for (auto& p : pairs) {
        p.clean = as_rgb(std::move(p.clean));
        p.degraded = as_rgb(std::move(p.degraded));
    }
    std::ostringstream csv;
    write_manifest_csv(manifest, csv);
    write_file_atomic(fs::path(a.out) / "manifest.csv", csv.str());
    return pairs;
}

int run_train(const TrainArgs& a, std::ostream& err) {
    const fs::path out(a.out);
    create_dir(out);

    TrainingSession session = [&] {
        if (!a.resume.empty()) {
            Checkpoint ckpt = load_checkpoint(a.resume);
            TrainConfig train = ckpt.train;
            if (a.steps) train.total_steps = *a.steps;
            if (a.checkpoint_every) train.checkpoint_every = *a.checkpoint_every;
            ckpt.train = train;
            return restore_session(ckpt);
        }
        const DenoiserConfig model = a.model.resolve();
        const TrainConfig train = resolve_train(a, TrainConfig{});
        train.validate(model);
        TrainingSession s = TrainingSession::create(model, train);
        if (!a.encoder_from.empty()) s.params.load_encoder(load_checkpoint(a.encoder_from).params);
        return s;
    }();

    const fs::path final_ckpt = out / ("checkpoint" + std::string(kCheckpointExtension));
    const auto total = static_cast<std::uint64_t>(session.train.total_steps);
    if (session.step >= total) {
        save_checkpoint(make_checkpoint(session), final_ckpt);
        return kExitOk;
    }

    const auto dataset = load_dataset(a);
    const fs::path log_path = out / "train_log.csv";
    const bool append = !a.resume.empty() && fs::exists(log_path);
    std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());
    if (!append) log << "step,loss,lr,wall_ms\n";

    const int every = session.train.checkpoint_every;
    run_training(session, dataset, static_cast<int>(total - session.step), a.threads, [&](const StepRecord& r) {
        log << r.step << ',' << fmt(r.loss) << ',' << fmt(r.lr) << ',' << fmt(r.wall_ms) << '\n';
        if (every > 0 && r.step % static_cast<std::uint64_t>(every) == 0) {
            log.flush();
            save_checkpoint(make_checkpoint(session),
                            out / ("checkpoint_" + std::to_string(r.step) + std::string(kCheckpointExtension)));
        }
    });
    log.close();
    save_checkpoint(make_checkpoint(session), final_ckpt);
    err << "trained to step " << session.step << "; checkpoint " << final_ckpt.string() << '\n';
    return kExitOk;
}

// ----------------------------------------------------------------- restore

struct RestoreArgs {
    std::string checkpoint, input, out;
    RestoreOptions options;
};

void add_restore(CLI::App& app, RestoreArgs& a) {
    auto* cmd = app.add_subcommand("restore", "Restore degraded images with a trained checkpoint");
    cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint file")->required();
    cmd->add_option("--input", a.input, "Degraded PNG file or directory")->required();
    cmd->add_option("--out", a.out, "Output directory")->required();
    cmd->add_option("--seed", a.options.seed, "Sampling seed")->capture_default_str();
    cmd->add_option("--tile", a.options.tile, "Tile size")->capture_default_str();
    cmd->add_option("--overlap", a.options.overlap, "Tile overlap")->capture_default_str();
    cmd->add_option("--stride", a.options.stride, "Visit every k-th timestep")->capture_default_str();
    a.options.threads = default_threads();
    cmd->add_option("--threads", a.options.threads, "Worker cap")->check(CLI::PositiveNumber);
}

int run_restore(const RestoreArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const Denoiser model(ckpt.model);
    const NoiseSchedule sched = ckpt.train.schedule();
    const auto files = collect_inputs(a.input);
    create_dir(a.out);
    for (const auto& file : files) {
        const std::string name = file.filename().string();
        const Image degraded = load_image(file);
        RestoreOptions opt = a.options;
        opt.seed = derive_rng(a.options.seed, {fnv1a64(name)})();
        Image restored = restore(as_rgb(degraded), model, ckpt.params, sched, opt);
        save_image(restored, fs::path(a.out) / name);
    }
    return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    std::string pairs, reference, test, out;
    int threads = default_threads();
};

void add_eval(CLI::App& app, EvalArgs& a) {
    auto* cmd = app.add_subcommand("eval", "Score images against references (PSNR, SSIM, UIQM, UCIQE)");
    cmd->add_option("--pairs", a.pairs, "Root containing clean/ (reference) and degraded/ (test)");
    cmd->add_option("--reference", a.reference, "Reference image directory");
    cmd->add_option("--test", a.test, "Test image directory");
    cmd->add_option("--out", a.out, "Output CSV (default stdout)");
    cmd->add_option("--threads", a.threads, "Worker cap")->check(CLI::PositiveNumber);
}

int run_eval(const EvalArgs& a, std::ostream& out) {
    fs::path ref = a.reference, test = a.test;
    if (!a.pairs.empty()) {
        if (ref.empty()) ref = fs::path(a.pairs) / "clean";
        if (test.empty()) test = fs::path(a.pairs) / "degraded";
    }
    if (ref.empty() || test.empty()) throw InvalidArgument("eval needs --pairs or both --reference and --test");
    const PairManifest manifest = build_manifest(ref, test);
    const auto& entries = manifest.entries;

    std::vector<MetricReport> reports(entries.size());
    parallel_for(entries.size(), a.threads, [&](std::size_t i) {
        reports[i] = evaluate(load_image(entries[i].clean), load_image(entries[i].degraded));
    });

    std::ostringstream os;
    os << "filename,psnr,ssim,uicm,uism,uiconm,uiqm,sigma_chroma,contrast_l,mean_saturation,uciqe\n";
    auto row = [&os](const std::string& name, const std::array<double, 10>& v) {
        os << name;
        for (double x : v) os << ',' << fmt(x);
        os << '\n';
    };
    auto values = [](const MetricReport& r) {
        return std::array<double, 10>{r.psnr,         r.ssim,          r.uiqm.uicm,
                                      r.uiqm.uism,    r.uiqm.uiconm,   r.uiqm.uiqm,
                                      r.uciqe.sigma_chroma, r.uciqe.contrast_l, r.uciqe.mean_saturation,
                                      r.uciqe.uciqe};
    };
    std::array<double, 10> mean{};
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto v = values(reports[i]);
        row(entries[i].name, v);
        for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k];
    }
    for (double& m : mean) m /= static_cast<double>(entries.size());
    row("mean", mean);
    write_text(a.out, os.str(), out);
    return kExitOk;
}

int fail(std::ostream& err, const char* kind, const std::string& what, int code) {
    std::string line = what;
    for (char& ch : line)
        if (ch == '\n' || ch == '\r') ch = ' ';
    err << "error: " << kind << ": " << line << '\n';
    return code;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"tdir: diffusion-based all-in-one image restoration toolkit", "tdir"};
    app.set_version_flag("--version", TDIR_VERSION);
    app.set_config("--config", "", "INI file with one [section] per subcommand");
    app.require_subcommand(1);

    ScheduleArgs schedule_args;
    DegradeArgs degrade_args;
    TrainArgs train_args;
    RestoreArgs restore_args;
    EvalArgs eval_args;
    add_schedule(app, schedule_args, [] {});
    add_degrade(app, degrade_args);
    add_train(app, train_args);
    add_restore(app, restore_args);
    add_eval(app, eval_args);
    // Unknown keys in a config file are errors, not silently ignored.
    std::function<void(CLI::App*)> strict = [&](CLI::App* a) {
        a->allow_config_extras(CLI::config_extras_mode::error);
        for (auto* sub : a->get_subcommands({})) strict(sub);
    };
    strict(&app);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion& e) {
        out << e.what() << '\n';
        return kExitOk;
    } catch (const CLI::FileError& e) {
        return fail(err, "io", e.what(), kExitIo);
    } catch (const CLI::ParseError& e) {
        return fail(err, "usage", e.what(), kExitUsage);
    }

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "schedule") {
            const auto s = NoiseSchedule::linear(schedule_args.steps, schedule_args.beta_start, schedule_args.beta_end);
            write_text(schedule_args.out, schedule_csv(s), out);
            return kExitOk;
        }
        if (name == "degrade") return run_degrade(degrade_args);
        if (name == "train") return run_train(train_args, err);
        if (name == "restore") return run_restore(restore_args);
        if (name == "eval") return run_eval(eval_args, out);
        return fail(err, "usage", "unknown subcommand " + name, kExitUsage);
    } catch (const InvalidArgument& e) {
        return fail(err, "usage", e.what(), kExitUsage);
    } catch (const IoError& e) {
        return fail(err, "io", e.what(), kExitIo);
    } catch (const NumericError& e) {
        return fail(err, "numeric", e.what(), kExitNumeric);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(err, "io", e.what(), kExitIo);
    } catch (const std::exception& e) {
        return fail(err, "internal", e.what(), 1);
    }
}

} // namespace tdir::cli
