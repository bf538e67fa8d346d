#include "tdir/rng.hpp"

#include <sstream>

#include "tdir/errors.hpp"

namespace tdir {

Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * (keys.size() + 1));
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto k : keys) push(k);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

Tensor normal_like(const Shape& shape, Rng& rng) {
    Tensor t(shape);
    fill_normal(t, rng);
    return t;
}

void fill_normal(Tensor& t, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : t.values()) v = dist(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::string save_rng_state(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng load_rng_state(const std::string& state) {
    std::istringstream is(state);
    Rng rng;
    is >> rng;
    if (!is) throw IoError("corrupt RNG state");
    return rng;
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace tdir
