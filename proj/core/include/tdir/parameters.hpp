#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tdir/autograd.hpp"
#include "tdir/rng.hpp"
#include "tdir/tensor.hpp"

namespace tdir {

enum class Init {
    Zero,
    One,
    FanIn,      ///< truncated normal (|z| <= 2), std = 1/sqrt(fan_in)
    Uniform01,  ///< uniform in [0, 1)
};

struct ParamSpec {
    std::string name;
    Shape shape;
    Init init = Init::FanIn;
    bool encoder = false;
};

struct ParameterTensor {
    std::string name;
    Tensor value;
    bool encoder = false;
    bool trainable = true;
};

/// Ordered, named collection of learnable tensors plus a trainability mask.
/// Stored values are always exactly representable as 32-bit floats so the
/// checkpoint format round-trips them bit-exactly.
class ParameterSet {
public:
    std::size_t add(std::string name, Tensor value, bool encoder = false);

    std::size_t size() const noexcept { return tensors_.size(); }
    ParameterTensor& operator[](std::size_t i) { return tensors_[i]; }
    const ParameterTensor& operator[](std::size_t i) const { return tensors_[i]; }
    auto begin() { return tensors_.begin(); }
    auto end() { return tensors_.end(); }
    auto begin() const { return tensors_.begin(); }
    auto end() const { return tensors_.end(); }

    /// Throws InvalidArgument when absent.
    std::size_t index_of(std::string_view name) const;
    const Tensor& value(std::string_view name) const { return tensors_[index_of(name)].value; }

    /// Marks encoder tensors frozen (or all tensors trainable again).
    void set_encoder_frozen(bool frozen);

    /// Copies every encoder tensor of `src` into the tensor of the same name.
    /// Names and shapes must match; returns the number of tensors copied.
    std::size_t load_encoder(const ParameterSet& src);

    std::size_t scalar_count() const;
    bool all_finite() const;

    /// Leaf variables that accumulate gradients (copies of the values).
    std::vector<autograd::Var> bind_parameters() const;
    /// Constant variables for inference.
    std::vector<autograd::Var> bind_constants() const;

private:
    std::vector<ParameterTensor> tensors_;
};

/// Rounds every element to the nearest 32-bit float.
void round_to_float(Tensor& t);

/// Collects parameter specs while a network layout is declared; turns them
/// into a concrete ParameterSet on demand.
class ParamLayout {
public:
    std::size_t add(std::string name, Shape shape, Init init, bool encoder);
    const std::vector<ParamSpec>& specs() const noexcept { return specs_; }
    ParameterSet materialize(Rng& rng) const;

private:
    std::vector<ParamSpec> specs_;
};

} // namespace tdir
