#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tdir/image.hpp"
#include "tdir/rng.hpp"
#include "tdir/tensor.hpp"

namespace tdir::testing {

/// Smooth deterministic RGB test pattern in the unit domain.
Image smooth_pattern(int height, int width, std::uint64_t seed);

/// Uniformly random samples in [lo, hi).
Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

/// Unit-domain image whose values are exact multiples of 1/255.
Image quantized(const Image& img);

/// Fresh empty directory under the system temp dir; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

} // namespace tdir::testing

namespace tdir::testing {

/// Five structurally different RGB images on the 8-bit grid (smooth, random,
/// stripes, underwater-tinted, noisy), used for metric cross-checks.
std::vector<Image> metric_test_images();

} // namespace tdir::testing
