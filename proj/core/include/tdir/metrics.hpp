#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "tdir/image.hpp"

namespace tdir {

/// PSNR returned for identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(255^2 / MSE) on the 8-bit scale; kInfinitePsnr when MSE == 0.
double psnr(const Image& a, const Image& b);

/// Mean SSIM of the BT.601 luma planes (8-bit scale) using an 11x11
/// Gaussian window (sigma 1.5) over valid positions, C1 = (0.01 * 255)^2,
/// C2 = (0.03 * 255)^2. Requires min(H, W) >= 11.
double ssim(const Image& a, const Image& b);

/// sRGB (unit range) -> CIELab under D65; L in [0, 100]. Out-of-range input
/// samples are clamped and counted in `clamped` when given. Achromatic
/// inputs (R == G == B) map to a == b == 0 exactly.
Tensor rgb_to_lab(const Image& img, std::size_t* clamped = nullptr);

struct UciqeScore {
    double uciqe = 0.0;
    double sigma_chroma = 0.0;
    double contrast_l = 0.0;
    double mean_saturation = 0.0;
};

struct UiqmScore {
    double uiqm = 0.0;
    double uicm = 0.0;
    double uism = 0.0;
    double uiconm = 0.0;
};

/// 0.4680 sigma_c + 0.2745 con_l + 0.2576 mu_s on Lab scaled by 1/100.
UciqeScore uciqe(const Image& img);

/// 0.0282 UICM + 0.2953 UISM + 3.5753 UIConM on the 8-bit scale over 8x8
/// blocks. Requires a 3-channel image with H, W >= 8.
UiqmScore uiqm(const Image& img);

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    UiqmScore uiqm;
    UciqeScore uciqe;
};

/// Full-reference scores of `test` against `reference`, no-reference scores
/// of `test`.
MetricReport evaluate(const Image& reference, const Image& test);

namespace metric_detail {

/// Linear-interpolated empirical quantile (q in [0, 1]).
double quantile(std::vector<double> values, double q);
/// Mean after discarding floor(alpha * n) samples from each tail.
double trimmed_mean(std::vector<double> values, double alpha);
/// Sobel gradient magnitude with mirrored (reflect-101) borders.
Tensor sobel_magnitude(const Tensor& plane);
/// (2/K) * sum ln(max/min) over full 8x8 blocks; degenerate blocks add 0.
double eme(const Tensor& plane, int block = 8);
/// BT.601 luma of an 8-bit-scale image (single channel passes through).
Tensor luma(const Image& img);

} // namespace metric_detail

} // namespace tdir
