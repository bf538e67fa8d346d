#pragma once

#include <cstdint>
#include <vector>

#include "tdir/denoiser.hpp"
#include "tdir/image.hpp"
#include "tdir/parameters.hpp"
#include "tdir/rng.hpp"
#include "tdir/schedule.hpp"

namespace tdir {

enum class ReverseNoise {
    Posterior, ///< sigma_t^2 = posterior variance beta~_t
    None,      ///< deterministic posterior mean at every step
};

/// y_{t-1} = (y_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t) + sigma_t z.
/// No noise is injected at t = 1.
Tensor reverse_step(const Tensor& y_t, const Tensor& eps_hat, int t, const NoiseSchedule& sched, Rng& rng,
                    ReverseNoise noise = ReverseNoise::Posterior);

struct RestoreOptions {
    std::uint64_t seed = 0;
    int tile = 128;
    int overlap = 16;
    /// Visit every stride-th timestep (1 = all T steps).
    int stride = 1;
    int threads = 1;
};

struct TileRect {
    int y = 0, x = 0, height = 0, width = 0;
};

/// Tile origins covering [0, extent) with windows of `tile` samples that
/// overlap by at least `overlap`; the last window is aligned to the end.
std::vector<int> tile_starts(int extent, int tile, int overlap);
std::vector<TileRect> plan_tiles(int height, int width, int tile, int overlap);

/// Per-pixel blend weight of a tile placed at `rect` inside an image of the
/// given size: a linear ramp over the overlap on interior edges, flat on
/// image borders. Returned as a 1 x tile x tile tensor.
Tensor tile_ramp(const TileRect& rect, int height, int width, int overlap);

/// Sum of normalised blend weights per pixel; equals 1 everywhere.
Tensor blend_weight_sum(int height, int width, int tile, int overlap);

/// Sub-sampled schedule visiting `timesteps` (ascending original indices)
/// with betas re-derived from the original alpha_bar values.
NoiseSchedule respace(const NoiseSchedule& sched, const std::vector<int>& timesteps);
std::vector<int> strided_timesteps(int steps, int stride);

/// Conditional ancestral sampling from Gaussian noise to a restored image.
/// Returns a unit-range image; deterministic for a fixed seed regardless of
/// the worker count.
Image restore(const Image& degraded, const Denoiser& model, const ParameterSet& params, const NoiseSchedule& sched,
              const RestoreOptions& options);

} // namespace tdir
