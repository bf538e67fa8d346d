#include "tdir/parameters.hpp"

#include <algorithm>
#include <cmath>

#include "tdir/errors.hpp"

namespace tdir {

void round_to_float(Tensor& t) {
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

std::size_t ParameterSet::add(std::string name, Tensor value, bool encoder) {
    if (std::any_of(tensors_.begin(), tensors_.end(), [&](const auto& p) { return p.name == name; })) {
        throw InvalidArgument("duplicate parameter name: " + name);
    }
    round_to_float(value);
    tensors_.push_back({std::move(name), std::move(value), encoder, true});
    return tensors_.size() - 1;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        if (tensors_[i].name == name) return i;
    }
    throw InvalidArgument("unknown parameter: " + std::string(name));
}

void ParameterSet::set_encoder_frozen(bool frozen) {
    for (auto& p : tensors_) p.trainable = !(frozen && p.encoder);
}

std::size_t ParameterSet::load_encoder(const ParameterSet& src) {
    std::size_t n = 0;
    for (auto& p : tensors_) {
        if (!p.encoder) continue;
        const Tensor& v = src.value(p.name);
        if (v.shape() != p.value.shape())
            throw InvalidArgument("encoder tensor " + p.name + ": shape " + shape_string(v.shape()) + " does not match " +
                                  shape_string(p.value.shape()));
        p.value = v;
        ++n;
    }
    if (n == 0) throw InvalidArgument("no encoder tensors to load");
    return n;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : tensors_) n += p.value.size();
    return n;
}

bool ParameterSet::all_finite() const {
    return std::all_of(tensors_.begin(), tensors_.end(), [](const auto& p) { return p.value.all_finite(); });
}

std::vector<autograd::Var> ParameterSet::bind_parameters() const {
    std::vector<autograd::Var> out;
    out.reserve(tensors_.size());
    for (const auto& p : tensors_) out.push_back(autograd::Var::parameter(p.value));
    return out;
}

std::vector<autograd::Var> ParameterSet::bind_constants() const {
    std::vector<autograd::Var> out;
    out.reserve(tensors_.size());
    for (const auto& p : tensors_) out.push_back(autograd::Var::constant(p.value));
    return out;
}

std::size_t ParamLayout::add(std::string name, Shape shape, Init init, bool encoder) {
    for (int d : shape) {
        if (d <= 0) throw InvalidArgument("parameter " + name + " has non-positive dimension");
    }
    specs_.push_back({std::move(name), std::move(shape), init, encoder});
    return specs_.size() - 1;
}

ParameterSet ParamLayout::materialize(Rng& rng) const {
    ParameterSet set;
    for (const auto& spec : specs_) {
        Tensor t(spec.shape);
        switch (spec.init) {
        case Init::Zero: break;
        case Init::One: t.fill(1.0); break;
        case Init::Uniform01: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (double& v : t.values()) v = u(rng);
            break;
        }
        case Init::FanIn: {
            // Fan-in is every axis but the leading (output) one.
            std::size_t fan_in = 1;
            for (std::size_t i = 1; i < spec.shape.size(); ++i) fan_in *= static_cast<std::size_t>(spec.shape[i]);
            const double std_dev = 1.0 / std::sqrt(static_cast<double>(fan_in));
            std::normal_distribution<double> n(0.0, 1.0);
            for (double& v : t.values()) {
                double z = n(rng);
                while (std::abs(z) > 2.0) z = n(rng);
                v = z * std_dev;
            }
            break;
        }
        }
        set.add(spec.name, std::move(t), spec.encoder);
    }
    return set;
}

} // namespace tdir
