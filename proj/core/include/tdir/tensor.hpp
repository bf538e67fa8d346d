#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tdir {

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Images and feature maps use the
/// channel-first layout C x H x W.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const noexcept { return shape_; }
    int rank() const noexcept { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Channel-first accessors; valid only for rank-3 tensors.
    int channels() const { return dim(0); }
    int height() const { return dim(1); }
    int width() const { return dim(2); }
    double& at(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    void fill(double v);
    bool all_finite() const noexcept;
    Tensor reshaped(Shape shape) const;

    Tensor& operator+=(const Tensor& rhs);
    Tensor& operator-=(const Tensor& rhs);
    Tensor& operator*=(double s);

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);

/// Throws InvalidArgument if the shapes differ; `what` names the call site.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Bit-level equality (distinguishes -0.0 from 0.0 and compares NaN payloads).
bool bit_identical(const Tensor& a, const Tensor& b);

double max_abs_diff(const Tensor& a, const Tensor& b);

/// Concatenates rank-3 tensors along the channel axis.
Tensor concat_channels(std::span<const Tensor> parts);

/// Copies the H x W window starting at (y0, x0) from every channel.
Tensor crop(const Tensor& t, int y0, int x0, int h, int w);

/// Pads (or tiles) a rank-3 tensor to h x w by mirror reflection without
/// repeating the edge sample. Works for any target size.
Tensor reflect_pad(const Tensor& t, int h, int w);

} // namespace tdir
