#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "tdir/errors.hpp"
#include "tdir/sampler.hpp"

using namespace tdir;

TEST_CASE("final reverse step is deterministic") {
    const auto s = NoiseSchedule::linear(10, 0.01, 0.2);
    const Tensor y = testing::random_tensor({3, 4, 4}, 1), e = testing::random_tensor({3, 4, 4}, 2);
    Rng a = derive_rng(1), b = derive_rng(2);
    const Tensor ya = reverse_step(y, e, 1, s, a), yb = reverse_step(y, e, 1, s, b);
    CHECK(bit_identical(ya, yb));
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double mean = (y[i] - s.beta(1) / s.sqrt_one_minus_alpha_bar(1) * e[i]) / std::sqrt(s.alpha(1));
        CHECK(ya[i] == doctest::Approx(mean).epsilon(1e-14));
    }
}

TEST_CASE("reverse step injects posterior noise before the last step") {
    const auto s = NoiseSchedule::linear(10, 0.01, 0.2);
    const Tensor y = testing::random_tensor({1, 200, 200}, 3);
    const Tensor zero(y.shape());
    Rng rng = derive_rng(4);
    const Tensor noisy = reverse_step(y, zero, 5, s, rng);
    const Tensor mean = reverse_step(y, zero, 5, s, rng, ReverseNoise::None);
    double sq = 0;
    for (std::size_t i = 0; i < y.size(); ++i) sq += (noisy[i] - mean[i]) * (noisy[i] - mean[i]);
    CHECK(sq / static_cast<double>(y.size()) == doctest::Approx(s.posterior_variance(5)).epsilon(0.02));
}

TEST_CASE("zero beta with zero noise estimate is an identity step") {
    const auto s = NoiseSchedule::from_betas({0.1, 0.0, 0.2});
    const Tensor y = testing::random_tensor({3, 4, 4}, 5);
    Rng rng = derive_rng(5);
    CHECK(bit_identical(reverse_step(y, Tensor(y.shape()), 2, s, rng), y));
    CHECK_THROWS_AS(reverse_step(y, Tensor(y.shape()), 4, s, rng), InvalidArgument);
    CHECK_THROWS_AS(reverse_step(y, Tensor(Shape{3, 4, 5}), 1, s, rng), InvalidArgument);
}

TEST_CASE("inversion with the true noise recovers the clean signal") {
    const auto s = NoiseSchedule::linear(50, 1e-3, 0.2);
    const Tensor y0 = testing::random_tensor({3, 8, 8}, 6);
    Rng rng = derive_rng(6);
    Tensor y = forward_marginal(y0, 50, s, rng).y_t;
    for (int t = 50; t >= 1; --t) {
        Tensor eps = y;
        for (std::size_t i = 0; i < y.size(); ++i)
            eps[i] = (y[i] - s.sqrt_alpha_bar(t) * y0[i]) / s.sqrt_one_minus_alpha_bar(t);
        y = reverse_step(y, eps, t, s, rng, ReverseNoise::None);
    }
    CHECK(max_abs_diff(y, y0) < 1e-4);
}

TEST_CASE("tile planning covers the image") {
    CHECK(tile_starts(128, 128, 16) == std::vector<int>{0});
    CHECK(tile_starts(200, 128, 16) == std::vector<int>{0, 72});
    const auto starts = tile_starts(300, 64, 8);
    CHECK(starts.front() == 0);
    CHECK(starts.back() == 300 - 64);
    for (std::size_t i = 1; i < starts.size(); ++i) CHECK(starts[i] - starts[i - 1] <= 64 - 8);
    CHECK(plan_tiles(64, 64, 64, 0).size() == 1);
}

TEST_CASE("blend weights form a partition of unity") {
    for (auto [h, w, tile, overlap] : {std::array{64, 64, 64, 0}, std::array{100, 150, 32, 8},
                                       std::array{200, 72, 64, 16}, std::array{96, 96, 32, 15}}) {
        for (double v : blend_weight_sum(h, w, tile, overlap).values()) CHECK(std::abs(v - 1.0) <= 1e-9);
        // Raw ramps must cover every pixel with positive weight.
        Tensor raw(Shape{1, h, w});
        for (const auto& r : plan_tiles(h, w, tile, overlap)) {
            const Tensor ramp = tile_ramp(r, h, w, overlap);
            for (int y = 0; y < r.height; ++y)
                for (int x = 0; x < r.width; ++x) raw.at(0, r.y + y, r.x + x) += ramp.at(0, y, x);
        }
        for (double v : raw.values()) CHECK(v > 0.0);
    }
}

TEST_CASE("strided timesteps") {
    CHECK(strided_timesteps(10, 1) == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    CHECK(strided_timesteps(10, 4) == std::vector<int>{1, 2, 6, 10});
    const auto s = NoiseSchedule::linear(10, 0.01, 0.2);
    const auto r = respace(s, strided_timesteps(10, 4));
    CHECK(r.steps() == 4);
    CHECK(r.alpha_bar(4) == doctest::Approx(s.alpha_bar(10)).epsilon(1e-14));
    CHECK(r.alpha_bar(3) == doctest::Approx(s.alpha_bar(6)).epsilon(1e-14));
}

TEST_CASE("restore contracts") {
    const auto cfg = DenoiserConfig::tiny();
    const Denoiser model(cfg);
    const auto params = model.init_params(1);
    const auto sched = NoiseSchedule::linear(4, 0.01, 0.3);
    const Image input = testing::smooth_pattern(24, 40, 2);

    RestoreOptions opt;
    opt.seed = 3;
    opt.tile = 16;
    opt.overlap = 4;
    const Image a = restore(input, model, params, sched, opt);
    opt.threads = 3;
    const Image b = restore(input, model, params, sched, opt);
    CHECK(a.pixels.shape() == input.pixels.shape());
    CHECK(a.domain == ValueDomain::Unit);
    CHECK(bit_identical(a.pixels, b.pixels));
    for (double v : a.pixels.values()) CHECK((v >= 0.0 && v <= 1.0));

    opt.seed = 4;
    CHECK_FALSE(bit_identical(restore(input, model, params, sched, opt).pixels, a.pixels));

    // Smaller than one tile: reflect-padded then cropped back.
    opt.tile = 32;
    opt.overlap = 0;
    const Image small = restore(testing::smooth_pattern(10, 12, 3), model, params, sched, opt);
    CHECK(small.pixels.shape() == Shape{3, 10, 12});

    opt.tile = 20;
    CHECK_THROWS_AS(restore(input, model, params, sched, opt), InvalidArgument);
    opt.tile = 16;
    opt.overlap = 8;
    CHECK_THROWS_AS(restore(input, model, params, sched, opt), InvalidArgument);
}

TEST_CASE("restore reports non-finite activations with context") {
    const auto cfg = DenoiserConfig::tiny();
    const Denoiser model(cfg);
    auto params = model.init_params(1);
    const std::size_t out = params.index_of("decoder.output.weight");
    for (double& v : params[out].value.values()) v = 1e300;
    RestoreOptions opt;
    opt.tile = 16;
    opt.overlap = 0;
    const auto sched = NoiseSchedule::linear(4, 0.01, 0.3);
    try {
        (void)restore(testing::smooth_pattern(16, 16, 1), model, params, sched, opt);
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("tile 0") != std::string::npos);
    }
}
