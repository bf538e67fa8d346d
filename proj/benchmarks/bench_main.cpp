#include <benchmark/benchmark.h>

#include <cmath>

#include "tdir/degrade.hpp"
#include "tdir/denoiser.hpp"
#include "tdir/metrics.hpp"
#include "tdir/sampler.hpp"
#include "tdir/schedule.hpp"
#include "tdir/trainer.hpp"

using namespace tdir;

namespace {

Image pattern(int h, int w) {
    Image img(3, h, w, ValueDomain::Unit, 0.0);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.pixels.at(c, y, x) = 0.5 + 0.4 * std::sin(0.3 * x + 0.2 * y + c);
    return img;
}

Image noisy(const Image& clean, std::uint64_t seed) {
    Rng rng = derive_rng(seed);
    return add_gaussian_noise(clean, 25.0, rng);
}

void BM_Schedule(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(NoiseSchedule::linear(T, 1e-4, 0.02));
}
BENCHMARK(BM_Schedule)->Arg(50)->Arg(1000);

void BM_Predict(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const Denoiser model(DenoiserConfig::tiny());
    const auto params = model.init_params(1).bind_constants();
    const Image img = pattern(size, size);
    const Var y = Var::constant(convert(img, ValueDomain::SignedUnit).pixels);
    for (auto _ : state) benchmark::DoNotOptimize(model.predict(params, y, y, 10).value());
}
BENCHMARK(BM_Predict)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    const Image clean = pattern(32, 32);
    const std::vector<ImagePair> data{{clean, noisy(clean, 2)}};
    TrainConfig train;
    train.batch_size = 2;
    train.patch_size = 32;
    train.diffusion_steps = 50;
    auto session = TrainingSession::create(DenoiserConfig::tiny(), train);
    for (auto _ : state) run_training(session, data, 1, 1);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Restore(benchmark::State& state) {
    const Denoiser model(DenoiserConfig::tiny());
    const auto params = model.init_params(3);
    const auto sched = NoiseSchedule::linear(20, 1e-3, 0.2);
    const Image input = noisy(pattern(48, 48), 4);
    RestoreOptions opt;
    opt.tile = 32;
    opt.overlap = 8;
    opt.threads = 1;
    for (auto _ : state) benchmark::DoNotOptimize(restore(input, model, params, sched, opt));
}
BENCHMARK(BM_Restore)->Unit(benchmark::kMillisecond);

void BM_Psnr(benchmark::State& state) {
    const Image a = pattern(256, 256), b = noisy(a, 5);
    for (auto _ : state) benchmark::DoNotOptimize(psnr(a, b));
}
BENCHMARK(BM_Psnr);

void BM_Ssim(benchmark::State& state) {
    const Image a = pattern(256, 256), b = noisy(a, 6);
    for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

void BM_Uiqm(benchmark::State& state) {
    const Image a = noisy(pattern(256, 256), 7);
    for (auto _ : state) benchmark::DoNotOptimize(uiqm(a));
}
BENCHMARK(BM_Uiqm)->Unit(benchmark::kMillisecond);

void BM_Uciqe(benchmark::State& state) {
    const Image a = noisy(pattern(256, 256), 8);
    for (auto _ : state) benchmark::DoNotOptimize(uciqe(a));
}
BENCHMARK(BM_Uciqe)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
