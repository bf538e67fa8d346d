#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <unistd.h>

#include "tdir/degrade.hpp"

namespace tdir::testing {

Image smooth_pattern(int height, int width, std::uint64_t seed) {
    Rng rng = derive_rng(seed, {0xfeed});
    Image img(3, height, width, ValueDomain::Unit);
    for (int c = 0; c < 3; ++c) {
        const double fx = uniform_real(rng, 0.5, 2.0), fy = uniform_real(rng, 0.5, 2.0);
        const double phase = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
        const double base = uniform_real(rng, 0.3, 0.7);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double u = 2.0 * std::numbers::pi * (fx * x / width + fy * y / height) + phase;
                img.pixels.at(c, y, x) = base + 0.25 * std::sin(u);
            }
    }
    return quantized(img);
}

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo, double hi) {
    Rng rng = derive_rng(seed, {0x7e57});
    Tensor t(shape);
    for (double& v : t.values()) v = uniform_real(rng, lo, hi);
    return t;
}

Image quantized(const Image& img) {
    Image out = img;
    for (double& v : out.pixels.values()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    return out;
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tdir-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::vector<Image> metric_test_images() {
    std::vector<Image> set;
    set.push_back(smooth_pattern(40, 48, 1));
    set.push_back(quantized(Image(random_tensor({3, 32, 32}, 2, 0, 1), ValueDomain::Unit)));
    Image stripes(3, 24, 40, ValueDomain::Unit);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 40; ++x) stripes.pixels.at(c, y, x) = ((x / 3 + c) % 2) ? 0.9 : 0.1 * (c + 1);
    set.push_back(quantized(stripes));
    set.push_back(quantized(synth_underwater(smooth_pattern(33, 35, 4), UnderwaterParams{})));
    Rng rng = derive_rng(5);
    set.push_back(quantized(add_gaussian_noise(smooth_pattern(30, 30, 5), 25.0, rng)));
    return set;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace tdir::testing
