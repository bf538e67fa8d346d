#include "tdir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdir/errors.hpp"

namespace tdir {

namespace {

Tensor to_byte(const Image& img) { return convert(img, ValueDomain::Byte).pixels; }

void require_same_dims(const Image& a, const Image& b, const char* what) {
    if (a.pixels.shape() != b.pixels.shape()) {
        throw InvalidArgument(std::string(what) + ": shape mismatch " + shape_string(a.pixels.shape()) + " vs " +
                              shape_string(b.pixels.shape()));
    }
}

Tensor gaussian_window(int size, double sigma) {
    std::vector<double> g(static_cast<std::size_t>(size));
    const int r = size / 2;
    double total = 0.0;
    for (int i = 0; i < size; ++i) total += (g[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma)));
    Tensor w(Shape{size, size});
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) w[static_cast<std::size_t>(y) * size + x] = g[y] * g[x] / (total * total);
    return w;
}

// Valid-region 2-D correlation of a 1 x H x W plane with a k x k window.
Tensor filter_valid(const Tensor& plane, const Tensor& win) {
    const int k = win.dim(0);
    const int oh = plane.height() - k + 1;
    const int ow = plane.width() - k + 1;
    Tensor out(Shape{1, oh, ow});
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) acc += win[static_cast<std::size_t>(i) * k + j] * plane.at(0, y + i, x + j);
            out.at(0, y, x) = acc;
        }
    return out;
}

Image as_rgb(const Image& img) {
    if (img.channels() == 3) return img;
    if (img.channels() != 1) throw InvalidArgument("expected a 1- or 3-channel image");
    const Tensor planes[3] = {img.pixels, img.pixels, img.pixels};
    return Image(concat_channels(planes), img.domain);
}

} // namespace

double psnr(const Image& a, const Image& b) {
    require_same_dims(a, b, "psnr");
    const Tensor x = to_byte(a);
    const Tensor y = to_byte(b);
    double se = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(x.size());
    if (mse == 0.0) return kInfinitePsnr;
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Image& a, const Image& b) {
    require_same_dims(a, b, "ssim");
    constexpr int kWindow = 11;
    if (std::min(a.height(), a.width()) < kWindow) {
        throw InvalidArgument("ssim: image smaller than the 11x11 window");
    }
    const Tensor la = metric_detail::luma(a);
    const Tensor lb = metric_detail::luma(b);
    const Tensor win = gaussian_window(kWindow, 1.5);
    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);

    Tensor aa = la, bb = lb, ab = la;
    for (std::size_t i = 0; i < la.size(); ++i) {
        aa[i] = la[i] * la[i];
        bb[i] = lb[i] * lb[i];
        ab[i] = la[i] * lb[i];
    }
    const Tensor mu_a = filter_valid(la, win);
    const Tensor mu_b = filter_valid(lb, win);
    const Tensor e_aa = filter_valid(aa, win);
    const Tensor e_bb = filter_valid(bb, win);
    const Tensor e_ab = filter_valid(ab, win);

    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = e_aa[i] - ma * ma;
        const double vb = e_bb[i] - mb * mb;
        const double cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return std::clamp(total / static_cast<double>(mu_a.size()), -1.0, 1.0);
}

Tensor rgb_to_lab(const Image& img, std::size_t* clamped) {
    if (img.channels() != 3) throw InvalidArgument("rgb_to_lab: expected 3 channels");
    const Tensor rgb = convert(img, ValueDomain::Unit).pixels;
    // sRGB -> XYZ (D65), each row divided by its sum so reference white maps
    // to (1, 1, 1); the G-anchored form below keeps grays exactly achromatic.
    static constexpr double kM[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                        {0.2126729, 0.7151522, 0.0721750},
                                        {0.0193339, 0.1191920, 0.9503041}};
    double coef_r[3], coef_b[3];
    for (int i = 0; i < 3; ++i) {
        const double row = kM[i][0] + kM[i][1] + kM[i][2];
        coef_r[i] = kM[i][0] / row;
        coef_b[i] = kM[i][2] / row;
    }
    auto decode = [](double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); };
    constexpr double delta = 6.0 / 29.0;
    auto f = [&](double t) { return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0; };

    const int h = img.height(), w = img.width();
    Tensor lab(Shape{3, h, w});
    std::size_t n_clamped = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double c[3];
            for (int ch = 0; ch < 3; ++ch) {
                double v = rgb.at(ch, y, x);
                if (v < 0.0 || v > 1.0) {
                    ++n_clamped;
                    v = std::clamp(v, 0.0, 1.0);
                }
                c[ch] = decode(v);
            }
            double fxyz[3];
            for (int i = 0; i < 3; ++i) fxyz[i] = f(c[1] + coef_r[i] * (c[0] - c[1]) + coef_b[i] * (c[2] - c[1]));
            lab.at(0, y, x) = 116.0 * fxyz[1] - 16.0;
            lab.at(1, y, x) = 500.0 * (fxyz[0] - fxyz[1]);
            lab.at(2, y, x) = 200.0 * (fxyz[1] - fxyz[2]);
        }
    if (clamped != nullptr) *clamped = n_clamped;
    return lab;
}

UciqeScore uciqe(const Image& img) {
    if (img.channels() != 3) throw InvalidArgument("uciqe: expected a 3-channel image");
    const Tensor lab = rgb_to_lab(img);
    const std::size_t n = static_cast<std::size_t>(img.height()) * img.width();
    std::vector<double> lum(n), chroma(n);
    const double* l = lab.data();
    const double* a = l + n;
    const double* b = a + n;
    double chroma_sum = 0.0, sat_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lum[i] = l[i] / 100.0;
        const double as = a[i] / 100.0, bs = b[i] / 100.0;
        chroma[i] = std::sqrt(as * as + bs * bs);
        chroma_sum += chroma[i];
        sat_sum += chroma[i] / (lum[i] + 1e-6);
    }
    const double chroma_mean = chroma_sum / static_cast<double>(n);
    double var = 0.0;
    for (double c : chroma) var += (c - chroma_mean) * (c - chroma_mean);
    UciqeScore s;
    s.sigma_chroma = std::sqrt(var / static_cast<double>(n));
    s.contrast_l = metric_detail::quantile(lum, 0.99) - metric_detail::quantile(lum, 0.01);
    s.mean_saturation = sat_sum / static_cast<double>(n);
    s.uciqe = 0.4680 * s.sigma_chroma + 0.2745 * s.contrast_l + 0.2576 * s.mean_saturation;
    return s;
}

UiqmScore uiqm(const Image& img) {
    if (img.channels() != 3) throw InvalidArgument("uiqm: expected a 3-channel image");
    if (img.height() < 8 || img.width() < 8) throw InvalidArgument("uiqm: image smaller than one 8x8 block");
    const Tensor rgb = to_byte(img);
    const int h = img.height(), w = img.width();
    const std::size_t n = static_cast<std::size_t>(h) * w;
    const double* r = rgb.data();
    const double* g = r + n;
    const double* bl = g + n;

    UiqmScore s;
    {
        std::vector<double> rg(n), yb(n);
        for (std::size_t i = 0; i < n; ++i) {
            rg[i] = r[i] - g[i];
            yb[i] = (r[i] + g[i]) / 2.0 - bl[i];
        }
        const double mu_rg = metric_detail::trimmed_mean(rg, 0.1);
        const double mu_yb = metric_detail::trimmed_mean(yb, 0.1);
        double var_rg = 0.0, var_yb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            var_rg += (rg[i] - mu_rg) * (rg[i] - mu_rg);
            var_yb += (yb[i] - mu_yb) * (yb[i] - mu_yb);
        }
        var_rg /= static_cast<double>(n);
        var_yb /= static_cast<double>(n);
        s.uicm = -0.0268 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb) + 0.1586 * std::sqrt(var_rg + var_yb);
    }
    {
        static constexpr double kLambda[3] = {0.299, 0.587, 0.114};
        for (int c = 0; c < 3; ++c) {
            Tensor plane(Shape{1, h, w}, std::vector<double>(rgb.data() + c * n, rgb.data() + (c + 1) * n));
            Tensor edges = metric_detail::sobel_magnitude(plane);
            for (std::size_t i = 0; i < n; ++i) edges[i] *= plane[i];
            s.uism += kLambda[c] * metric_detail::eme(edges);
        }
    }
    {
        const Tensor inten = metric_detail::luma(img);
        const int by = h / 8, bx = w / 8;
        double acc = 0.0;
        for (int i = 0; i < by; ++i)
            for (int j = 0; j < bx; ++j) {
                double mx = -1.0, mn = 1e300;
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x) {
                        const double v = inten.at(0, i * 8 + y, j * 8 + x);
                        mx = std::max(mx, v);
                        mn = std::min(mn, v);
                    }
                if (mx + mn <= 0.0 || mx == mn) continue;
                const double wgt = (mx - mn) / (mx + mn);
                acc += wgt * std::log(wgt);
            }
        s.uiconm = acc / static_cast<double>(by * bx);
    }
    s.uiqm = 0.0282 * s.uicm + 0.2953 * s.uism + 3.5753 * s.uiconm;
    return s;
}

MetricReport evaluate(const Image& reference, const Image& test) {
    MetricReport r;
    r.psnr = psnr(reference, test);
    r.ssim = ssim(reference, test);
    const Image rgb = as_rgb(test);
    r.uiqm = uiqm(rgb);
    r.uciqe = uciqe(rgb);
    return r;
}

namespace metric_detail {

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidArgument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double trimmed_mean(std::vector<double> values, double alpha) {
    if (values.empty()) throw InvalidArgument("trimmed mean of an empty sample");
    std::sort(values.begin(), values.end());
    const auto cut = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(values.size())));
    double acc = 0.0;
    for (std::size_t i = cut; i < values.size() - cut; ++i) acc += values[i];
    return acc / static_cast<double>(values.size() - 2 * cut);
}

Tensor sobel_magnitude(const Tensor& plane) {
    const int h = plane.height(), w = plane.width();
    auto mirror = [](int i, int n) {
        if (n == 1) return 0;
        if (i < 0) return -i;
        if (i >= n) return 2 * n - 2 - i;
        return i;
    };
    Tensor out(Shape{1, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto p = [&](int dy, int dx) { return plane.at(0, mirror(y + dy, h), mirror(x + dx, w)); };
            const double gx = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
            const double gy = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
            out.at(0, y, x) = std::sqrt(gx * gx + gy * gy);
        }
    return out;
}

double eme(const Tensor& plane, int block) {
    const int by = plane.height() / block, bx = plane.width() / block;
    if (by == 0 || bx == 0) throw InvalidArgument("eme: image smaller than one block");
    double acc = 0.0;
    for (int i = 0; i < by; ++i)
        for (int j = 0; j < bx; ++j) {
            double mx = -1e300, mn = 1e300;
            for (int y = 0; y < block; ++y)
                for (int x = 0; x < block; ++x) {
                    const double v = plane.at(0, i * block + y, j * block + x);
                    mx = std::max(mx, v);
                    mn = std::min(mn, v);
                }
            if (mn <= 0.0 || mx == mn) continue;
            acc += std::log(mx / mn);
        }
    return 2.0 / static_cast<double>(by * bx) * acc;
}

Tensor luma(const Image& img) {
    const Tensor px = to_byte(img);
    if (img.channels() == 1) return px;
    if (img.channels() != 3) throw InvalidArgument("luma: expected 1 or 3 channels");
    const int h = img.height(), w = img.width();
    Tensor out(Shape{1, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(0, y, x) = 0.299 * px.at(0, y, x) + 0.587 * px.at(1, y, x) + 0.114 * px.at(2, y, x);
    return out;
}

} // namespace metric_detail

} // namespace tdir
