#pragma once

#include <array>

#include "tdir/image.hpp"
#include "tdir/rng.hpp"

namespace tdir {

/// Standard deviations (8-bit scale) of the denoising benchmark presets.
inline constexpr std::array<double, 3> kNoiseSigmaPresets{15.0, 25.0, 50.0};

/// out = clamp(img + sigma * z, 0, 255) on the 8-bit scale. The result is
/// returned in the input's domain; sigma is always in 8-bit units.
Image add_gaussian_noise(const Image& img, double sigma, Rng& rng);

struct RainParams {
    int streak_count = 200;
    double angle_deg = 75.0; ///< streak direction, degrees from the +x axis
    int length_px = 12;
    double intensity = 0.6;  ///< in (0, 1]
};

/// Screen-blends a layer of oriented, motion-blurred white streaks.
Image synth_rain(const Image& img, const RainParams& params, Rng& rng);

struct UnderwaterParams {
    std::array<double, 3> attenuation{0.35, 0.8, 0.9}; ///< per channel, in (0, 1]
    std::array<double, 3> veil_color{0.05, 0.35, 0.45}; ///< RGB in [0, 1]
    double veil_strength = 0.3;                          ///< in [0, 1)
};

/// out_c = attenuation_c * img_c + veil_strength * veil_color_c, clamped.
/// Requires a 3-channel image.
Image synth_underwater(const Image& img, const UnderwaterParams& params);

} // namespace tdir
