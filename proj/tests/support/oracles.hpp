#pragma once

#include <vector>

// Straight-line reference implementations of the no-reference underwater
// metrics, written directly from the formulas over interleaved 8-bit RGB
// (row-major, values in [0, 255]). They share no code with the library.
namespace tdir::oracle {

struct Rgb8 {
    int height = 0, width = 0;
    std::vector<double> px; // (y * width + x) * 3 + c
    double at(int y, int x, int c) const { return px[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

struct Uciqe {
    double sigma_chroma, contrast_l, mean_saturation, total;
};
struct Uiqm {
    double uicm, uism, uiconm, total;
};

Uciqe uciqe(const Rgb8& img);
Uiqm uiqm(const Rgb8& img);
/// CIE L*, a*, b* of one sRGB triple in [0, 1].
void srgb_to_lab(double r, double g, double b, double& L, double& A, double& B);

} // namespace tdir::oracle
