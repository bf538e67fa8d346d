#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tdir/autograd.hpp"
#include "tdir/layers.hpp"
#include "tdir/parameters.hpp"
#include "tdir/tensor.hpp"

namespace tdir {

/// Architecture hyper-parameters of the prompt-conditioned transformer U-Net.
struct DenoiserConfig {
    int levels = 4;
    int base_channels = 48;
    std::vector<int> channel_multipliers{1, 2, 4, 8};
    std::vector<int> heads{1, 2, 4, 8};
    std::vector<int> blocks{4, 6, 6, 8};
    int prompt_blocks = 3;
    int prompt_components = 5;
    /// Per decoder stage, deepest first; 0 means "same as the stage width".
    std::vector<int> prompt_channels{0, 0, 0};
    std::vector<int> prompt_size{16, 16, 16};
    int timestep_embed_dim = 64;
    double ffn_expansion = 2.66;
    int in_channels = 6;
    int out_channels = 3;

    /// Small configuration for tests and desk-scale runs.
    static DenoiserConfig tiny(int blocks_per_level = 1);

    int level_channels(int level) const { return base_channels * channel_multipliers.at(level); }
    int prompt_channels_at(int stage) const;
    /// H and W must be multiples of this.
    int spatial_multiple() const { return 1 << (levels - 1); }

    /// Throws InvalidArgument describing the first violated invariant.
    void validate() const;

    friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

/// Anything that predicts the injected noise from (y_t, condition, t) given
/// a bound parameter list. The trainer is written against this interface.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual Var predict(std::span<const Var> params, const Var& y_t, const Var& condition, int t) const = 0;
};

/// Sinusoidal timestep features: [sin(t w_0), cos(t w_0), sin(t w_1), ...]
/// with w_i = 10000^(-2i/dim). `dim` must be even.
Tensor sinusoidal_embedding(int t, int dim);

class Denoiser final : public NoisePredictor {
public:
    explicit Denoiser(DenoiserConfig cfg);

    const DenoiserConfig& config() const noexcept { return cfg_; }
    const ParamLayout& layout() const noexcept { return layout_; }

    /// Fresh parameters; block output projections start at zero so every
    /// transformer and prompt block is initially the identity.
    ParameterSet init_params(std::uint64_t seed) const;

    /// Shapes and names must match the layout and every value be finite.
    void check_params(const ParameterSet& params) const;

    /// Learned timestep embedding (sinusoid followed by a 2-layer MLP).
    Var embed_timestep(std::span<const Var> params, int t) const;

    Var predict(std::span<const Var> params, const Var& y_t, const Var& condition, int t) const override;

    /// Inference entry point; validates inputs and parameters.
    Tensor forward(const ParameterSet& params, const Tensor& y_t, const Tensor& condition, int t) const;
    /// Inference with pre-bound constants (skips the parameter scan).
    Tensor forward_bound(std::span<const Var> constants, const Tensor& y_t, const Tensor& condition, int t) const;

    const std::vector<TransformerBlockSlots>& encoder_blocks(int level) const { return enc_blocks_.at(level); }
    const std::vector<TransformerBlockSlots>& decoder_blocks(int stage) const { return dec_blocks_.at(stage); }
    const PromptBlockSlots& prompt_block(int stage) const { return prompts_.at(stage); }

private:
    void check_inputs(const Tensor& y_t, const Tensor& condition) const;

    DenoiserConfig cfg_;
    ParamLayout layout_;
    std::size_t patch_embed_ = 0;
    std::vector<std::vector<TransformerBlockSlots>> enc_blocks_; // per level, incl. latent
    std::vector<std::size_t> down_;                              // levels - 1
    std::size_t time_fc1_w_ = 0, time_fc1_b_ = 0, time_fc2_w_ = 0, time_fc2_b_ = 0;
    // Decoder stages, deepest first: stage s rebuilds level (levels - 2 - s).
    std::vector<std::size_t> up_, time_proj_w_, time_proj_b_, reduce_;
    std::vector<PromptBlockSlots> prompts_;
    std::vector<std::vector<TransformerBlockSlots>> dec_blocks_;
    std::size_t output_ = 0;
};

/// Convenience wrapper: predicted noise for (y_t, x_cond) at step t.
Tensor denoiser_forward(const Tensor& y_t, const Tensor& x_cond, int t, const ParameterSet& params,
                        const DenoiserConfig& cfg);

} // namespace tdir
