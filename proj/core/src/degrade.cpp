#include "tdir/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tdir/errors.hpp"

namespace tdir {

Image add_gaussian_noise(const Image& img, double sigma, Rng& rng) {
    if (!(sigma > 0.0)) throw InvalidArgument("noise sigma must be > 0");
    Image out = convert(img, ValueDomain::Byte);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : out.pixels.values()) v = std::clamp(v + sigma * dist(rng), 0.0, 255.0);
    return convert(out, img.domain);
}

Image synth_rain(const Image& img, const RainParams& p, Rng& rng) {
    if (p.length_px < 1) throw InvalidArgument("rain streak length must be >= 1");
    if (p.streak_count < 0) throw InvalidArgument("rain streak count must be >= 0");
    if (!(p.intensity > 0.0 && p.intensity <= 1.0)) throw InvalidArgument("rain intensity must lie in (0, 1]");
    if (!std::isfinite(p.angle_deg)) throw InvalidArgument("rain angle must be finite");
    if (p.streak_count == 0) return img;

    const int h = img.height();
    const int w = img.width();
    const double theta = p.angle_deg * std::numbers::pi / 180.0;
    const double dx = std::cos(theta);
    const double dy = -std::sin(theta); // image rows grow downwards
    // DDA: one sample per pixel along the dominant axis so consecutive
    // samples land on distinct pixels.
    const double dominant = std::max(std::abs(dx), std::abs(dy));
    const double sx = dx / dominant;
    const double sy = dy / dominant;
    const double ext_x = sx * (p.length_px - 1);
    const double ext_y = sy * (p.length_px - 1);

    Tensor core(Shape{1, h, w});
    for (int s = 0; s < p.streak_count; ++s) {
        // Start so that the whole streak fits when the image allows it.
        const double lo_x = std::max(0.0, -ext_x), hi_x = std::max(lo_x, (w - 1) - std::max(0.0, ext_x));
        const double lo_y = std::max(0.0, -ext_y), hi_y = std::max(lo_y, (h - 1) - std::max(0.0, ext_y));
        const double x0 = uniform_real(rng, lo_x, std::nextafter(hi_x, hi_x + 1.0));
        const double y0 = uniform_real(rng, lo_y, std::nextafter(hi_y, hi_y + 1.0));
        for (int i = 0; i < p.length_px; ++i) {
            const int px = static_cast<int>(std::lround(x0 + sx * i));
            const int py = static_cast<int>(std::lround(y0 + sy * i));
            if (px < 0 || py < 0 || px >= w || py >= h) continue;
            core.at(0, py, px) = std::max(core.at(0, py, px), p.intensity);
        }
    }

    // Motion blur: 3-tap average along the streak direction.
    Tensor layer(Shape{1, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = core.at(0, y, x);
            int n = 1;
            for (int dir : {-1, 1}) {
                const int qx = static_cast<int>(std::lround(x + dir * sx));
                const int qy = static_cast<int>(std::lround(y + dir * sy));
                if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
                acc += core.at(0, qy, qx);
                ++n;
            }
            layer.at(0, y, x) = std::min(1.0, acc / n);
        }

    Image out = convert(img, ValueDomain::Unit);
    for (int c = 0; c < out.channels(); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double base = std::clamp(out.pixels.at(c, y, x), 0.0, 1.0);
                out.pixels.at(c, y, x) = 1.0 - (1.0 - base) * (1.0 - layer.at(0, y, x));
            }
    return convert(clamp_to_domain(std::move(out)), img.domain);
}

Image synth_underwater(const Image& img, const UnderwaterParams& p) {
    if (img.channels() != 3) throw InvalidArgument("underwater synthesis needs a 3-channel image");
    for (int c = 0; c < 3; ++c) {
        if (!(p.attenuation[c] > 0.0 && p.attenuation[c] <= 1.0)) {
            throw InvalidArgument("underwater attenuation must lie in (0, 1]");
        }
        if (!(p.veil_color[c] >= 0.0 && p.veil_color[c] <= 1.0)) {
            throw InvalidArgument("underwater veil colour must lie in [0, 1]");
        }
    }
    if (!(p.veil_strength >= 0.0 && p.veil_strength < 1.0)) {
        throw InvalidArgument("underwater veil strength must lie in [0, 1)");
    }
    Image out = convert(img, ValueDomain::Unit);
    const std::size_t plane = static_cast<std::size_t>(img.height()) * img.width();
    for (int c = 0; c < 3; ++c) {
        const double veil = p.veil_strength * p.veil_color[c];
        double* d = out.pixels.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) d[i] = std::clamp(p.attenuation[c] * d[i] + veil, 0.0, 1.0);
    }
    return convert(out, img.domain);
}

} // namespace tdir
