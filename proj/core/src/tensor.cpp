#include "tdir/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "tdir/errors.hpp"

namespace tdir {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw InvalidArgument("negative tensor dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_size(shape_)) {
        throw InvalidArgument("tensor data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_string(shape_));
    }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        throw InvalidArgument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

Tensor& Tensor::operator+=(const Tensor& rhs) {
    require_same_shape(*this, rhs, "tensor +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& rhs) {
    require_same_shape(*this, rhs, "tensor -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw InvalidArgument(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                              shape_string(b.shape()));
    }
}

bool bit_identical(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    }
    return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw InvalidArgument("concat_channels: no inputs");
    const int h = parts[0].height();
    const int w = parts[0].width();
    int c = 0;
    for (const auto& p : parts) {
        if (p.rank() != 3 || p.height() != h || p.width() != w) {
            throw InvalidArgument("concat_channels: spatial mismatch");
        }
        c += p.channels();
    }
    Tensor out(Shape{c, h, w});
    auto dst = out.values().begin();
    for (const auto& p : parts) dst = std::copy(p.values().begin(), p.values().end(), dst);
    return out;
}

Tensor crop(const Tensor& t, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > t.height() || x0 + w > t.width()) {
        throw InvalidArgument("crop window outside tensor");
    }
    Tensor out(Shape{t.channels(), h, w});
    for (int c = 0; c < t.channels(); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, y0 + y, x0 + x);
    return out;
}

namespace {

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

} // namespace

Tensor reflect_pad(const Tensor& t, int h, int w) {
    if (h < t.height() || w < t.width()) throw InvalidArgument("reflect_pad: target smaller than source");
    Tensor out(Shape{t.channels(), h, w});
    for (int c = 0; c < t.channels(); ++c)
        for (int y = 0; y < h; ++y) {
            const int sy = reflect_index(y, t.height());
            for (int x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, sy, reflect_index(x, t.width()));
        }
    return out;
}

} // namespace tdir
