#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

#include "tdir/tensor.hpp"

namespace tdir {

/// Seeded noise source. The engine state fully determines every draw; a
/// fresh distribution object is created per call so no hidden cache
/// survives between calls.
using Rng = std::mt19937_64;

/// Independent stream for (seed, key...), e.g. one per tile or per image.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {});

double standard_normal(Rng& rng);
Tensor normal_like(const Shape& shape, Rng& rng);
void fill_normal(Tensor& t, Rng& rng);

/// Uniform integer in [lo, hi].
int uniform_int(Rng& rng, int lo, int hi);
double uniform_real(Rng& rng, double lo, double hi);

std::string save_rng_state(const Rng& rng);
Rng load_rng_state(const std::string& state);

/// Stable 64-bit FNV-1a hash used for filename-derived seeds and splits.
std::uint64_t fnv1a64(std::string_view s);

} // namespace tdir
