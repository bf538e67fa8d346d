// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are the
// constants at the top of each check. Pass criterion ids as arguments to run
// a subset, e.g. `tdir_acceptance 1 4 7`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "tdir/checkpoint.hpp"
#include "tdir/dataio.hpp"
#include "tdir/degrade.hpp"
#include "tdir/denoiser.hpp"
#include "tdir/metrics.hpp"
#include "tdir/sampler.hpp"
#include "tdir/schedule.hpp"
#include "tdir/trainer.hpp"

using namespace tdir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Report {
public:
    void require(bool ok, const std::string& what) {
        if (!ok && failures_++ < 5) notes_ += (notes_.empty() ? "" : "; ") + what;
    }
    void note(const std::string& s) { info_ += (info_.empty() ? "" : ", ") + s; }
    Outcome done() const {
        std::string d = info_;
        if (failures_ > 0) d += (d.empty() ? "" : " | ") + std::to_string(failures_) + " violation(s): " + notes_;
        return {failures_ == 0, d};
    }

private:
    int failures_ = 0;
    std::string notes_, info_;
};

std::string num(double v, int prec = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

int hw_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------- 1

Outcome schedule_exactness() {
    constexpr double kTol = 1e-12;
    Report r;
    Rng rng = derive_rng(101);
    double worst_prod = 0, worst_var = 0;
    for (int k = 0; k < 20; ++k) {
        const int T = uniform_int(rng, 1, 5000);
        const double b0 = std::exp(uniform_real(rng, std::log(1e-5), std::log(0.05)));
        const double b1 = std::min(0.999, b0 * std::exp(uniform_real(rng, 0.0, std::log(50.0))));
        const auto s = NoiseSchedule::linear(T, b0, b1);
        for (int t = 1; t <= T; ++t) {
            long double direct = 1.0L;
            if (t == T || t % 97 == 1) {
                for (int u = 1; u <= t; ++u) direct *= 1.0L - static_cast<long double>(s.beta(u));
                const double rel = std::abs(static_cast<double>((s.alpha_bar(t) - direct) / direct));
                worst_prod = std::max(worst_prod, rel);
            }
            const double a = s.sqrt_alpha_bar(t), b = s.sqrt_one_minus_alpha_bar(t);
            worst_var = std::max(worst_var, std::abs(a * a + b * b - 1.0));
        }
    }
    r.require(worst_prod <= kTol, "alpha_bar relative error " + num(worst_prod));
    r.require(worst_var <= kTol, "variance identity error " + num(worst_var));
    r.note("max rel err " + num(worst_prod) + ", max identity err " + num(worst_var));
    return r.done();
}

// ---------------------------------------------------------------- 2

Outcome forward_equivalence() {
    constexpr int kSamples = 400000;
    constexpr double kMaxSe = 3.0, kMaxRel = 0.02;
    Report r;
    const auto s = NoiseSchedule::linear(50, 1e-4, 0.02);
    const int checkpoints[] = {5, 25, 50};

    // Signal with magnitude well away from zero so relative errors are meaningful.
    Tensor y0(Shape{3, 2, 2});
    for (std::size_t i = 0; i < y0.size(); ++i) y0[i] = (i % 2 ? -1.0 : 1.0) * (0.5 + 0.04 * static_cast<double>(i));
    const std::size_t n = y0.size();

    struct Moments {
        std::vector<double> sum, sq;
        explicit Moments(std::size_t n) : sum(n), sq(n) {}
        void add(const Tensor& t) {
            for (std::size_t i = 0; i < t.size(); ++i) {
                sum[i] += t[i];
                sq[i] += t[i] * t[i];
            }
        }
    };
    std::vector<Moments> iter(3, Moments(n)), closed(3, Moments(n));
    Rng a = derive_rng(203), b = derive_rng(204);
    for (int k = 0; k < kSamples; ++k) {
        Tensor y = y0;
        int c = 0;
        for (int t = 1; t <= 50; ++t) {
            y = forward_step(y, t, s, a);
            if (t == checkpoints[c]) iter[static_cast<std::size_t>(c++)].add(y);
        }
        for (int j = 0; j < 3; ++j) closed[static_cast<std::size_t>(j)].add(forward_marginal(y0, checkpoints[j], s, b).y_t);
    }
    double worst_z = 0, worst_rel_mean = 0, worst_rel_var = 0;
    const double N = kSamples;
    for (int j = 0; j < 3; ++j) {
        const auto& I = iter[static_cast<std::size_t>(j)];
        const auto& C = closed[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < n; ++i) {
            const double mi = I.sum[i] / N, mc = C.sum[i] / N;
            const double vi = I.sq[i] / N - mi * mi, vc = C.sq[i] / N - mc * mc;
            // Standard errors of the difference: means, and variances under normality.
            const double se_mean = std::sqrt(vi / N + vc / N);
            const double se_var = std::sqrt(2.0 * vi * vi / (N - 1) + 2.0 * vc * vc / (N - 1));
            worst_z = std::max({worst_z, std::abs(mi - mc) / se_mean, std::abs(vi - vc) / se_var});
            worst_rel_mean = std::max(worst_rel_mean, std::abs(mi - mc) / std::abs(mc));
            worst_rel_var = std::max(worst_rel_var, std::abs(vi - vc) / vc);
            // Closed-form values as a sanity anchor.
            const int t = checkpoints[j];
            r.require(std::abs(mc - s.sqrt_alpha_bar(t) * y0[i]) <= 5 * std::sqrt(vc / N),
                      "closed-form mean off at t=" + std::to_string(t));
        }
    }
    r.require(worst_z <= kMaxSe, "max |z| " + num(worst_z));
    r.require(worst_rel_mean <= kMaxRel, "mean rel diff " + num(worst_rel_mean));
    r.require(worst_rel_var <= kMaxRel, "variance rel diff " + num(worst_rel_var));
    r.note(std::to_string(kSamples) + " samples, t in {5,25,50}, max |z| " + num(worst_z) + ", max rel diff mean " +
           num(worst_rel_mean) + " var " + num(worst_rel_var));
    return r.done();
}

// ---------------------------------------------------------------- 3

Outcome gradient_correctness() {
    constexpr int kSamples = 256;
    constexpr double kH = 1e-5, kTol = 1e-4;
    // Denominator floor: derivatives smaller than this are compared absolutely.
    constexpr double kFloor = 1e-3;
    Report r;
    const DenoiserConfig cfg = DenoiserConfig::tiny(2);
    const Denoiser model(cfg);
    ParameterSet params = model.init_params(303);
    // Zero-initialised projections are randomised so every path carries gradient.
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& v = params[i].value;
        if (std::all_of(v.values().begin(), v.values().end(), [](double x) { return x == 0.0; }))
            v = testing::random_tensor(v.shape(), 3030 + i, -0.2, 0.2);
    }
    const Tensor y = testing::random_tensor({3, 16, 16}, 304, -1, 1);
    const Tensor c = testing::random_tensor({3, 16, 16}, 305, -1, 1);
    const int t = 17;

    auto vars = params.bind_parameters();
    const Var loss = autograd::sum_abs(model.predict(vars, Var::constant(y), Var::constant(c), t));
    autograd::backward(loss);

    auto constants = params.bind_constants();
    auto eval = [&](std::size_t k, std::size_t i, double delta) {
        Tensor v = params[k].value;
        v[i] += delta;
        const Var saved = constants[k];
        constants[k] = Var::constant(std::move(v));
        const double out = autograd::sum_abs(model.predict(constants, Var::constant(y), Var::constant(c), t)).value()[0];
        constants[k] = saved;
        return out;
    };

    Rng pick = derive_rng(306);
    double worst = 0;
    std::string worst_name;
    for (int s = 0; s < kSamples; ++s) {
        const auto k = static_cast<std::size_t>(uniform_int(pick, 0, static_cast<int>(params.size()) - 1));
        const auto i = static_cast<std::size_t>(uniform_int(pick, 0, static_cast<int>(params[k].value.size()) - 1));
        const double fd = (eval(k, i, kH) - eval(k, i, -kH)) / (2 * kH);
        const double bp = vars[k].grad()[i];
        const double err = std::abs(fd - bp) / std::max({std::abs(fd), std::abs(bp), kFloor});
        if (err > worst) {
            worst = err;
            worst_name = params[k].name + "[" + std::to_string(i) + "] fd=" + num(fd, 8) + " bp=" + num(bp, 8);
        }
        r.require(err < kTol, params[k].name + " rel err " + num(err));
    }
    r.note(std::to_string(kSamples) + " parameters, worst rel err " + num(worst) + " at " + worst_name);
    return r.done();
}

// ---------------------------------------------------------------- 4

Outcome residual_identity() {
    Report r;
    int blocks = 0;
    for (const DenoiserConfig& cfg : {DenoiserConfig::tiny(2), DenoiserConfig{}}) {
        const Denoiser model(cfg);
        const auto params = model.init_params(404).bind_constants();
        std::uint64_t seed = 405;
        auto check = [&](const std::string& what, int channels, auto&& fn) {
            const Tensor x = testing::random_tensor({channels, 8, 8}, seed++, -2, 2);
            const Tensor out = fn(Var::constant(x)).value();
            r.require(bit_identical(out, x), what + " is not an exact identity");
            ++blocks;
        };
        for (int l = 0; l < cfg.levels; ++l)
            for (const auto& b : model.encoder_blocks(l))
                check("encoder block", b.channels, [&](const Var& x) { return transformer_block_forward(x, params, b); });
        for (int s = 0; s < cfg.levels - 1; ++s) {
            const auto& p = model.prompt_block(s);
            check("prompt block", p.channels, [&](const Var& x) { return prompt_block_forward(x, params, p); });
            for (const auto& b : model.decoder_blocks(s))
                check("decoder block", b.channels, [&](const Var& x) { return transformer_block_forward(x, params, b); });
        }
    }
    r.note(std::to_string(blocks) + " blocks checked bit-for-bit (tiny and default configs)");
    return r.done();
}

// ---------------------------------------------------------------- 5

Outcome oracle_inversion() {
    constexpr double kTol = 1e-4;
    Report r;
    const auto s = NoiseSchedule::linear(50, 0.002, 0.4);
    const Tensor y0 = convert(testing::smooth_pattern(32, 32, 505), ValueDomain::SignedUnit).pixels;
    Rng rng = derive_rng(506);
    const auto m = forward_marginal(y0, 50, s, rng);
    Tensor y = m.y_t;
    for (int t = 50; t >= 1; --t) {
        // The true noise of the current iterate; at t = T it is exactly m.eps.
        Tensor eps = t == 50 ? m.eps : y;
        if (t != 50)
            for (std::size_t i = 0; i < y.size(); ++i)
                eps[i] = (y[i] - s.sqrt_alpha_bar(t) * y0[i]) / s.sqrt_one_minus_alpha_bar(t);
        y = reverse_step(y, eps, t, s, rng, ReverseNoise::None);
    }
    const double err = max_abs_diff(y, y0);
    r.require(err < kTol, "max abs error " + num(err));
    r.note("T=50, max abs error " + num(err));
    return r.done();
}

// ---------------------------------------------------------------- 6

Outcome overfit_and_restore() {
    constexpr int kSteps = 2000, kWindow = 100;
    constexpr double kLossRatio = 0.2, kGainDb = 5.0;
    Report r;
    std::vector<ImagePair> data;
    Rng noise = derive_rng(606);
    for (std::uint64_t k = 0; k < 2; ++k) {
        const Image clean = testing::smooth_pattern(32, 32, 600 + k);
        data.push_back({clean, testing::quantized(add_gaussian_noise(clean, 25.0, noise))});
    }
    TrainConfig train;
    train.batch_size = 2;
    train.patch_size = 32;
    train.diffusion_steps = 50;
    train.beta_start = 0.002;
    train.beta_end = 0.4;
    train.learning_rate = 1e-3;
    train.total_steps = kSteps;
    train.seed = 607;
    auto session = TrainingSession::create(DenoiserConfig::tiny(), train);
    std::vector<double> losses;
    run_training(session, data, kSteps, hw_threads(), [&](const StepRecord& s) { losses.push_back(s.loss); });
    double first = 0, last = 0;
    for (int i = 0; i < kWindow; ++i) {
        first += losses[static_cast<std::size_t>(i)] / kWindow;
        last += losses[losses.size() - 1 - static_cast<std::size_t>(i)] / kWindow;
    }
    r.require(last < kLossRatio * first, "loss ratio " + num(last / first));
    r.note("loss " + num(first, 4) + " -> " + num(last, 4) + " (ratio " + num(last / first) + ")");

    const Denoiser model(session.model);
    RestoreOptions opt;
    opt.seed = 608;
    opt.tile = 32;
    opt.overlap = 0;
    opt.threads = hw_threads();
    for (std::size_t k = 0; k < data.size(); ++k) {
        const Image restored = restore(data[k].degraded, model, session.params, train.schedule(), opt);
        const double before = psnr(data[k].clean, data[k].degraded);
        const double after = psnr(data[k].clean, testing::quantized(restored));
        r.require(after - before >= kGainDb, "image " + std::to_string(k) + " gain " + num(after - before) + " dB");
        r.note("image " + std::to_string(k) + " PSNR " + num(before, 4) + " -> " + num(after, 4) + " dB");
    }
    return r.done();
}

// ---------------------------------------------------------------- 7

Outcome metric_oracles() {
    constexpr double kExact = 1e-9, kOracle = 1e-6;
    Report r;
    const Image zero(3, 16, 16, ValueDomain::Byte, 0.0), full(3, 16, 16, ValueDomain::Byte, 255.0);
    const Image a(3, 16, 16, ValueDomain::Byte, 90.0), b(3, 16, 16, ValueDomain::Byte, 91.0);
    r.require(std::abs(psnr(zero, full)) <= kExact, "psnr 0 dB case");
    r.require(std::abs(psnr(a, b) - 10.0 * std::log10(65025.0)) <= kExact, "psnr 48.13 dB case");
    r.require(psnr(a, a) == kInfinitePsnr, "psnr identical case");

    const Image img = testing::smooth_pattern(48, 48, 707);
    r.require(std::abs(ssim(img, img) - 1.0) <= kExact, "ssim self");
    double prev = 2.0;
    std::string trail;
    for (double sigma : {5.0, 15.0, 25.0, 50.0}) {
        Rng rng = derive_rng(708);
        const double s = ssim(img, add_gaussian_noise(img, sigma, rng));
        r.require(s < prev, "ssim not decreasing at sigma " + num(sigma));
        trail += (trail.empty() ? "" : " > ") + num(s, 4);
        prev = s;
    }
    r.note("ssim over sigma {5,15,25,50}: " + trail);

    double worst = 0;
    for (const Image& im : testing::metric_test_images()) {
        const Image byte = convert(im, ValueDomain::Byte);
        oracle::Rgb8 o{im.height(), im.width(), {}};
        for (int y = 0; y < im.height(); ++y)
            for (int x = 0; x < im.width(); ++x)
                for (int c = 0; c < 3; ++c) o.px.push_back(byte.pixels.at(c, y, x));
        const auto m = uiqm(im);
        const auto q = uciqe(im);
        const auto om = oracle::uiqm(o);
        const auto oq = oracle::uciqe(o);
        for (double d : {m.uiqm - om.total, m.uicm - om.uicm, m.uism - om.uism, m.uiconm - om.uiconm, q.uciqe - oq.total,
                         q.sigma_chroma - oq.sigma_chroma, q.contrast_l - oq.contrast_l,
                         q.mean_saturation - oq.mean_saturation})
            worst = std::max(worst, std::abs(d));
    }
    r.require(worst <= kOracle, "oracle mismatch " + num(worst));
    r.note("max oracle diff " + num(worst));

    const Image gray(3, 32, 32, ValueDomain::Byte, 117.0);
    r.require(uiqm(gray).uiqm == 0.0, "gray uiqm not exactly 0");
    r.require(uciqe(gray).uciqe == 0.0, "gray uciqe not exactly 0");
    return r.done();
}

// ---------------------------------------------------------------- 8

struct Cli {
    int code;
    std::string err;
};

Cli run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, err.str()};
}

// Every file under `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = testing::read_file(e.path());
    return files;
}

std::string drop_last_column(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
    return out;
}

Outcome determinism() {
    Report r;
    testing::TempDir tmp("accept-det");
    fs::create_directories(tmp / "src");
    save_image(testing::smooth_pattern(32, 32, 801), tmp / "src" / "a.png");
    save_image(testing::smooth_pattern(32, 48, 802), tmp / "src" / "b.png");
    const std::string src = (tmp / "src").string();

    for (const char* task : {"noise", "rain", "underwater"}) {
        std::map<std::string, std::string> runs[2];
        for (int k = 0; k < 2; ++k) {
            const auto out = tmp / ("deg-" + std::string(task) + std::to_string(k));
            const auto res = run_cli({"degrade", "--task", task, "--input", src, "--out", out.string(), "--seed", "9",
                                      "--threads", k == 0 ? "1" : "3"});
            r.require(res.code == 0, std::string("degrade ") + task + ": " + res.err);
            runs[k] = snapshot(out);
        }
        r.require(!runs[0].empty() && runs[0] == runs[1], std::string("degrade ") + task + " outputs differ");
    }

    const std::string pairs = (tmp / "deg-noise0").string();
    std::string ckpt[2], log[2];
    for (int k = 0; k < 2; ++k) {
        const auto out = tmp / ("train" + std::to_string(k));
        const auto res = run_cli({"train", "--pairs", pairs, "--split", "all", "--preset", "tiny", "--batch", "2", "--patch",
                                  "16", "--T", "50", "--beta-start", "0.002", "--beta-end", "0.4", "--steps", "50", "--seed",
                                  "11", "--threads", k == 0 ? "1" : "2", "--out", out.string()});
        r.require(res.code == 0, "train: " + res.err);
        ckpt[k] = testing::read_file(out / "checkpoint.tdir");
        log[k] = drop_last_column(testing::read_file(out / "train_log.csv"));
    }
    r.require(!ckpt[0].empty() && ckpt[0] == ckpt[1], "train checkpoints differ");
    r.require(std::count(log[0].begin(), log[0].end(), '\n') == 51 && log[0] == log[1], "train logs differ");

    std::map<std::string, std::string> restored[2];
    for (int k = 0; k < 2; ++k) {
        const auto out = tmp / ("restore" + std::to_string(k));
        const auto res = run_cli({"restore", "--checkpoint", (tmp / "train0" / "checkpoint.tdir").string(), "--input",
                                  (tmp / "deg-noise0" / "degraded").string(), "--out", out.string(), "--tile", "16",
                                  "--overlap", "4", "--seed", "12", "--threads", k == 0 ? "1" : "3"});
        r.require(res.code == 0, "restore: " + res.err);
        restored[k] = snapshot(out);
    }
    r.require(restored[0].size() == 2 && restored[0] == restored[1], "restored images differ");

    std::string evals[2];
    for (int k = 0; k < 2; ++k) {
        const auto out = tmp / ("eval" + std::to_string(k) + ".csv");
        const auto res = run_cli({"eval", "--reference", (tmp / "deg-noise0" / "clean").string(), "--test",
                                  (tmp / ("restore" + std::to_string(k))).string(), "--out", out.string(), "--threads",
                                  k == 0 ? "1" : "3"});
        r.require(res.code == 0, "eval: " + res.err);
        evals[k] = testing::read_file(out);
    }
    r.require(!evals[0].empty() && evals[0] == evals[1], "eval outputs differ");
    r.note("degrade x3 tasks, train 50 steps, restore, eval: two runs each with different --threads compared byte-for-byte");
    return r.done();
}

// ---------------------------------------------------------------- 9

std::vector<ImagePair> small_dataset(std::uint64_t seed) {
    std::vector<ImagePair> data;
    Rng rng = derive_rng(seed);
    for (std::uint64_t k = 0; k < 3; ++k) {
        const Image clean = testing::smooth_pattern(24, 24, seed + k);
        data.push_back({clean, testing::quantized(add_gaussian_noise(clean, 25.0, rng))});
    }
    return data;
}

TrainConfig small_train(std::uint64_t seed) {
    TrainConfig t;
    t.batch_size = 2;
    t.patch_size = 16;
    t.diffusion_steps = 50;
    t.beta_start = 0.002;
    t.beta_end = 0.4;
    t.learning_rate = 1e-3;
    t.total_steps = 50;
    t.seed = seed;
    return t;
}

Outcome persistence() {
    constexpr int kSteps = 50, kSplit = 20;
    Report r;
    testing::TempDir tmp("accept-ckpt");
    const auto data = small_dataset(901);

    auto straight = TrainingSession::create(DenoiserConfig::tiny(), small_train(902));
    std::vector<double> ref;
    run_training(straight, data, kSteps, 1, [&](const StepRecord& s) { ref.push_back(s.loss); });

    auto first = TrainingSession::create(DenoiserConfig::tiny(), small_train(902));
    std::vector<double> got;
    run_training(first, data, kSplit, 1, [&](const StepRecord& s) { got.push_back(s.loss); });
    const Checkpoint mid = make_checkpoint(first);
    save_checkpoint(mid, tmp / "mid.tdir");
    const Checkpoint loaded = load_checkpoint(tmp / "mid.tdir");

    bool tensors_equal = loaded.params.size() == mid.params.size() && loaded.adam.step == mid.adam.step &&
                         loaded.rng_state == mid.rng_state && loaded.step == mid.step && loaded.model == mid.model &&
                         loaded.train == mid.train;
    for (std::size_t i = 0; tensors_equal && i < mid.params.size(); ++i)
        tensors_equal = bit_identical(loaded.params[i].value, mid.params[i].value) &&
                        bit_identical(loaded.adam.m[i], mid.adam.m[i]) && bit_identical(loaded.adam.v[i], mid.adam.v[i]);
    r.require(tensors_equal, "checkpoint round trip not bit-exact");
    r.require(serialize_checkpoint(loaded) == testing::read_file(tmp / "mid.tdir"), "re-serialised bytes differ");

    auto resumed = restore_session(loaded);
    run_training(resumed, data, kSteps - kSplit, 1, [&](const StepRecord& s) { got.push_back(s.loss); });
    r.require(got == ref, "loss trajectories differ");
    r.require(serialize_checkpoint(make_checkpoint(resumed)) == serialize_checkpoint(make_checkpoint(straight)),
              "final states differ");
    r.note(std::to_string(mid.params.size()) + " tensors round-tripped; resume at step " + std::to_string(kSplit) +
           " matches " + std::to_string(kSteps) + "-step run exactly");
    return r.done();
}

// ---------------------------------------------------------------- 10

Outcome freeze_contract() {
    constexpr int kSteps = 100;
    Report r;
    auto train = small_train(1001);
    train.freeze_encoder = true;
    train.total_steps = kSteps;
    auto session = TrainingSession::create(DenoiserConfig::tiny(), train);
    const ParameterSet before = session.params;
    run_training(session, small_dataset(1002), kSteps, hw_threads());
    int encoder = 0, encoder_changed = 0, decoder = 0, decoder_changed = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const bool same = bit_identical(before[i].value, session.params[i].value);
        if (before[i].encoder) {
            ++encoder;
            encoder_changed += !same;
        } else {
            ++decoder;
            decoder_changed += !same;
        }
    }
    r.require(encoder > 0 && encoder_changed == 0, std::to_string(encoder_changed) + " encoder tensors changed");
    r.require(decoder_changed > 0, "no decoder tensor changed");
    r.note(std::to_string(encoder) + " encoder tensors unchanged, " + std::to_string(decoder_changed) + "/" +
           std::to_string(decoder) + " decoder tensors updated after " + std::to_string(kSteps) + " steps");
    return r.done();
}

struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
    double max_seconds; // 0: no budget
};

const Criterion kCriteria[] = {
    {1, "schedule exactness", schedule_exactness, 1},
    {2, "forward-process equivalence", forward_equivalence, 60},
    {3, "gradient correctness", gradient_correctness, 300},
    {4, "residual identity", residual_identity, 0},
    {5, "oracle inversion", oracle_inversion, 10},
    {6, "overfit and restore", overfit_and_restore, 1800},
    {7, "metric oracles", metric_oracles, 10},
    {8, "determinism", determinism, 0},
    {9, "persistence", persistence, 0},
    {10, "freeze contract", freeze_contract, 0},
};

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& c : kCriteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.max_seconds > 0 && secs > c.max_seconds) {
            o.pass = false;
            o.detail += " | over time budget of " + num(c.max_seconds) + " s";
        }
        failed += !o.pass;
        std::printf("%s criterion %2d  %-28s %7.1fs  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
