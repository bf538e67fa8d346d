#pragma once

#include "tdir/tensor.hpp"

namespace tdir {

/// Value range an image's samples are expressed in.
enum class ValueDomain {
    Unit,       ///< [0, 1]
    SignedUnit, ///< [-1, 1], used by the diffusion process
    Byte,       ///< [0, 255], 8-bit sample scale (stored as reals)
};

const char* to_string(ValueDomain d);

/// A C x H x W image tagged with its value domain.
struct Image {
    Tensor pixels;
    ValueDomain domain = ValueDomain::Unit;

    Image() = default;
    Image(Tensor p, ValueDomain d) : pixels(std::move(p)), domain(d) {}
    Image(int channels, int height, int width, ValueDomain d, double fill = 0.0)
        : pixels(Shape{channels, height, width}, fill), domain(d) {}

    int channels() const { return pixels.channels(); }
    int height() const { return pixels.height(); }
    int width() const { return pixels.width(); }
};

/// Spatially aligned (clean, degraded) images of the same shape.
struct ImagePair {
    Image clean;
    Image degraded;
};

double domain_min(ValueDomain d);
double domain_max(ValueDomain d);

/// Affine re-mapping between domains (no clamping).
Image convert(const Image& img, ValueDomain to);

/// Clamps every sample into the image's own domain.
Image clamp_to_domain(Image img);

} // namespace tdir
