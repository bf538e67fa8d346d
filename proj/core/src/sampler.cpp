#include "tdir/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdir/errors.hpp"
#include "tdir/parallel.hpp"

namespace tdir {

Tensor reverse_step(const Tensor& y_t, const Tensor& eps_hat, int t, const NoiseSchedule& sched, Rng& rng,
                    ReverseNoise noise) {
    sched.check_step(t);
    require_same_shape(y_t, eps_hat, "reverse_step");
    const double beta = sched.beta(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(t));
    const double eps_coeff = beta == 0.0 ? 0.0 : beta / sched.sqrt_one_minus_alpha_bar(t);
    const double sigma = (noise == ReverseNoise::None || t == 1) ? 0.0 : std::sqrt(sched.posterior_variance(t));

    Tensor out(y_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = inv_sqrt_alpha * (y_t[i] - eps_coeff * eps_hat[i]);
    if (sigma > 0.0) {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (double& v : out.values()) v += sigma * dist(rng);
    }
    return out;
}

std::vector<int> tile_starts(int extent, int tile, int overlap) {
    if (extent <= tile) return {0};
    const int step = tile - overlap;
    std::vector<int> starts;
    for (int s = 0; s + tile < extent; s += step) starts.push_back(s);
    starts.push_back(extent - tile);
    return starts;
}

std::vector<TileRect> plan_tiles(int height, int width, int tile, int overlap) {
    std::vector<TileRect> rects;
    for (int y : tile_starts(height, tile, overlap))
        for (int x : tile_starts(width, tile, overlap)) rects.push_back({y, x, tile, tile});
    return rects;
}

namespace {

// Weight along one axis of a window [start, start + len) in [0, extent).
double axis_ramp(int i, int start, int len, int extent, int overlap) {
    if (overlap == 0) return 1.0;
    double w = 1.0;
    if (start > 0) w = std::min(w, (i + 1.0) / (overlap + 1.0));
    if (start + len < extent) w = std::min(w, (len - i) / (overlap + 1.0));
    return w;
}

void check_tiling(int tile, int overlap, int multiple) {
    if (tile < 1 || tile % multiple != 0) {
        throw InvalidArgument("tile size " + std::to_string(tile) + " must be a positive multiple of " +
                              std::to_string(multiple));
    }
    if (overlap < 0 || 2 * overlap >= tile) throw InvalidArgument("overlap must satisfy 0 <= overlap < tile / 2");
}

} // namespace

Tensor tile_ramp(const TileRect& rect, int height, int width, int overlap) {
    Tensor w(Shape{1, rect.height, rect.width});
    for (int y = 0; y < rect.height; ++y) {
        const double wy = axis_ramp(y, rect.y, rect.height, height, overlap);
        for (int x = 0; x < rect.width; ++x) w.at(0, y, x) = wy * axis_ramp(x, rect.x, rect.width, width, overlap);
    }
    return w;
}

Tensor blend_weight_sum(int height, int width, int tile, int overlap) {
    const int ph = std::max(height, tile);
    const int pw = std::max(width, tile);
    const auto rects = plan_tiles(ph, pw, tile, overlap);
    Tensor total(Shape{1, ph, pw});
    std::vector<Tensor> ramps;
    for (const auto& r : rects) {
        ramps.push_back(tile_ramp(r, ph, pw, overlap));
        for (int y = 0; y < r.height; ++y)
            for (int x = 0; x < r.width; ++x) total.at(0, r.y + y, r.x + x) += ramps.back().at(0, y, x);
    }
    Tensor normalised(Shape{1, ph, pw});
    for (std::size_t k = 0; k < rects.size(); ++k) {
        const auto& r = rects[k];
        for (int y = 0; y < r.height; ++y)
            for (int x = 0; x < r.width; ++x)
                normalised.at(0, r.y + y, r.x + x) += ramps[k].at(0, y, x) / total.at(0, r.y + y, r.x + x);
    }
    return crop(normalised, 0, 0, height, width);
}

std::vector<int> strided_timesteps(int steps, int stride) {
    if (stride < 1) throw InvalidArgument("sampling stride must be >= 1");
    std::vector<int> ts;
    for (int t = steps; t >= 1; t -= stride) ts.push_back(t);
    if (ts.back() != 1) ts.push_back(1);
    std::reverse(ts.begin(), ts.end());
    return ts;
}

NoiseSchedule respace(const NoiseSchedule& sched, const std::vector<int>& timesteps) {
    std::vector<double> betas;
    double prev = 1.0;
    for (int t : timesteps) {
        const double ab = sched.alpha_bar(t);
        betas.push_back(std::clamp(1.0 - ab / prev, 0.0, 1.0));
        prev = ab;
    }
    return NoiseSchedule::from_betas(std::move(betas));
}

Image restore(const Image& degraded, const Denoiser& model, const ParameterSet& params, const NoiseSchedule& sched,
              const RestoreOptions& options) {
    check_tiling(options.tile, options.overlap, model.config().spatial_multiple());
    model.check_params(params);
    const int h = degraded.height();
    const int w = degraded.width();
    const int tile = options.tile;

    // Small images are reflect-padded up to one tile and cropped afterwards.
    const int ph = std::max(h, tile);
    const int pw = std::max(w, tile);
    Tensor condition = convert(degraded, ValueDomain::SignedUnit).pixels;
    if (ph != h || pw != w) condition = reflect_pad(condition, ph, pw);

    const auto timesteps = strided_timesteps(sched.steps(), options.stride);
    const NoiseSchedule walk = options.stride == 1 ? sched : respace(sched, timesteps);
    const auto rects = plan_tiles(ph, pw, tile, options.overlap);
    const auto constants = params.bind_constants();

    std::vector<Tensor> results(rects.size());
    parallel_for(rects.size(), options.threads, [&](std::size_t k) {
        const TileRect& r = rects[k];
        const Tensor cond_tile = crop(condition, r.y, r.x, r.height, r.width);
        Rng rng = derive_rng(options.seed, {0x5a301e, static_cast<std::uint64_t>(k)});
        Tensor y = normal_like(cond_tile.shape(), rng);
        for (int i = walk.steps(); i >= 1; --i) {
            const int t = timesteps[static_cast<std::size_t>(i - 1)];
            Tensor eps_hat;
            try {
                eps_hat = model.forward_bound(constants, y, cond_tile, t);
            } catch (const NumericError& e) {
                throw NumericError("tile " + std::to_string(k) + ", t=" + std::to_string(t) + ": " + e.what());
            }
            y = reverse_step(y, eps_hat, i, walk, rng);
            if (!y.all_finite()) {
                throw NumericError("tile " + std::to_string(k) + ", t=" + std::to_string(t) +
                                   ": non-finite sample");
            }
        }
        results[k] = std::move(y);
    });

    Tensor accum(Shape{degraded.channels(), ph, pw});
    Tensor weight(Shape{1, ph, pw});
    for (std::size_t k = 0; k < rects.size(); ++k) {
        const TileRect& r = rects[k];
        const Tensor ramp = tile_ramp(r, ph, pw, options.overlap);
        for (int c = 0; c < accum.channels(); ++c)
            for (int y = 0; y < r.height; ++y)
                for (int x = 0; x < r.width; ++x)
                    accum.at(c, r.y + y, r.x + x) += ramp.at(0, y, x) * results[k].at(c, y, x);
        for (int y = 0; y < r.height; ++y)
            for (int x = 0; x < r.width; ++x) weight.at(0, r.y + y, r.x + x) += ramp.at(0, y, x);
    }
    for (int c = 0; c < accum.channels(); ++c)
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x) accum.at(c, y, x) /= weight.at(0, y, x);

    Image out(crop(accum, 0, 0, h, w), ValueDomain::SignedUnit);
    return convert(clamp_to_domain(std::move(out)), ValueDomain::Unit);
}

} // namespace tdir
