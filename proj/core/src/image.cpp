#include "tdir/image.hpp"

#include <algorithm>

namespace tdir {

const char* to_string(ValueDomain d) {
    switch (d) {
    case ValueDomain::Unit: return "unit";
    case ValueDomain::SignedUnit: return "signed-unit";
    case ValueDomain::Byte: return "byte";
    }
    return "?";
}

double domain_min(ValueDomain d) { return d == ValueDomain::SignedUnit ? -1.0 : 0.0; }

double domain_max(ValueDomain d) { return d == ValueDomain::Byte ? 255.0 : 1.0; }

Image convert(const Image& img, ValueDomain to) {
    if (img.domain == to) return img;
    const double from_lo = domain_min(img.domain);
    const double from_span = domain_max(img.domain) - from_lo;
    const double to_lo = domain_min(to);
    const double to_span = domain_max(to) - to_lo;
    Image out(img.pixels, to);
    for (double& v : out.pixels.values()) v = (v - from_lo) / from_span * to_span + to_lo;
    return out;
}

Image clamp_to_domain(Image img) {
    const double lo = domain_min(img.domain);
    const double hi = domain_max(img.domain);
    for (double& v : img.pixels.values()) v = std::clamp(v, lo, hi);
    return img;
}

} // namespace tdir
