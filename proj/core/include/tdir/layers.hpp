#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "tdir/autograd.hpp"
#include "tdir/parameters.hpp"

namespace tdir {

using autograd::Var;

/// Indices into a bound parameter list for one transformer block:
/// channel-attention sub-layer followed by a gated depthwise feed-forward,
/// both pre-normalised and residual.
struct TransformerBlockSlots {
    std::size_t norm1, temperature, qkv, qkv_dw, attn_out;
    std::size_t norm2, ffn_in, ffn_dw, ffn_out;
    int channels = 0;
    int heads = 1;
    int hidden = 0;
};

TransformerBlockSlots declare_transformer_block(ParamLayout& layout, const std::string& prefix, int channels, int heads,
                                                double ffn_expansion, bool encoder);

Var transformer_block_forward(const Var& x, std::span<const Var> params, const TransformerBlockSlots& s);

/// Prompt block: input-conditioned softmax mixture of N learned prompt
/// components, resized to the feature map, fused through a transformer block
/// and a 3x3 convolution added back onto the input.
struct PromptBlockSlots {
    std::size_t components, select_weight, select_bias, fuse;
    TransformerBlockSlots block;
    int channels = 0;
    int prompt_channels = 0;
    int count = 0;
};

PromptBlockSlots declare_prompt_block(ParamLayout& layout, const std::string& prefix, int channels, int prompt_channels,
                                      int components, int prompt_size, int heads, double ffn_expansion, bool encoder);

/// softmax(Linear(GlobalAveragePool(x))) over the prompt components.
Var prompt_weights(const Var& x, std::span<const Var> params, const PromptBlockSlots& s);

Var prompt_block_forward(const Var& x, std::span<const Var> params, const PromptBlockSlots& s);

} // namespace tdir
