#include "tdir/layers.hpp"

#include <array>

#include "tdir/errors.hpp"

namespace tdir {

namespace ag = autograd;

TransformerBlockSlots declare_transformer_block(ParamLayout& layout, const std::string& prefix, int channels, int heads,
                                                double ffn_expansion, bool encoder) {
    if (heads < 1 || channels % heads != 0) {
        throw InvalidArgument(prefix + ": channels (" + std::to_string(channels) + ") not divisible by heads (" +
                              std::to_string(heads) + ")");
    }
    TransformerBlockSlots s;
    s.channels = channels;
    s.heads = heads;
    s.hidden = static_cast<int>(channels * ffn_expansion);
    if (s.hidden < 1) throw InvalidArgument(prefix + ": feed-forward width must be positive");
    const int c = channels;
    const int h2 = 2 * s.hidden;
    s.norm1 = layout.add(prefix + ".norm1.weight", {c}, Init::One, encoder);
    s.temperature = layout.add(prefix + ".attn.temperature", {heads}, Init::One, encoder);
    s.qkv = layout.add(prefix + ".attn.qkv.weight", {3 * c, c, 1, 1}, Init::FanIn, encoder);
    s.qkv_dw = layout.add(prefix + ".attn.qkv_dw.weight", {3 * c, 1, 3, 3}, Init::FanIn, encoder);
    s.attn_out = layout.add(prefix + ".attn.project_out.weight", {c, c, 1, 1}, Init::Zero, encoder);
    s.norm2 = layout.add(prefix + ".norm2.weight", {c}, Init::One, encoder);
    s.ffn_in = layout.add(prefix + ".ffn.project_in.weight", {h2, c, 1, 1}, Init::FanIn, encoder);
    s.ffn_dw = layout.add(prefix + ".ffn.dwconv.weight", {h2, 1, 3, 3}, Init::FanIn, encoder);
    s.ffn_out = layout.add(prefix + ".ffn.project_out.weight", {c, s.hidden, 1, 1}, Init::Zero, encoder);
    return s;
}

Var transformer_block_forward(const Var& x, std::span<const Var> p, const TransformerBlockSlots& s) {
    if (x.value().rank() != 3 || x.value().channels() != s.channels) {
        throw InvalidArgument("transformer block expects " + std::to_string(s.channels) + " channels, got " +
                              shape_string(x.shape()));
    }
    const int c = s.channels;

    Var n1 = ag::layer_norm_channels(x, p[s.norm1]);
    Var qkv = ag::conv2d(ag::conv2d(n1, p[s.qkv]), p[s.qkv_dw], 3 * c);
    Var attn = ag::channel_attention(ag::slice_channels(qkv, 0, c), ag::slice_channels(qkv, c, c),
                                     ag::slice_channels(qkv, 2 * c, c), p[s.temperature], s.heads);
    Var x1 = ag::add(x, ag::conv2d(attn, p[s.attn_out]));

    Var n2 = ag::layer_norm_channels(x1, p[s.norm2]);
    Var h = ag::conv2d(ag::conv2d(n2, p[s.ffn_in]), p[s.ffn_dw], 2 * s.hidden);
    Var gated = ag::mul(ag::gelu(ag::slice_channels(h, 0, s.hidden)), ag::slice_channels(h, s.hidden, s.hidden));
    return ag::add(x1, ag::conv2d(gated, p[s.ffn_out]));
}

PromptBlockSlots declare_prompt_block(ParamLayout& layout, const std::string& prefix, int channels, int prompt_channels,
                                      int components, int prompt_size, int heads, double ffn_expansion, bool encoder) {
    if (components < 1) throw InvalidArgument(prefix + ": prompt component count must be at least 1");
    if (prompt_channels < 1 || prompt_size < 1) throw InvalidArgument(prefix + ": prompt dims must be positive");
    PromptBlockSlots s;
    s.channels = channels;
    s.prompt_channels = prompt_channels;
    s.count = components;
    s.components = layout.add(prefix + ".components", {components, prompt_channels, prompt_size, prompt_size},
                              Init::Uniform01, encoder);
    s.select_weight = layout.add(prefix + ".select.weight", {components, channels}, Init::FanIn, encoder);
    s.select_bias = layout.add(prefix + ".select.bias", {components}, Init::Zero, encoder);
    s.block = declare_transformer_block(layout, prefix + ".block", channels + prompt_channels, heads, ffn_expansion,
                                        encoder);
    s.fuse = layout.add(prefix + ".fuse.weight", {channels, channels + prompt_channels, 3, 3}, Init::Zero, encoder);
    return s;
}

Var prompt_weights(const Var& x, std::span<const Var> p, const PromptBlockSlots& s) {
    return ag::softmax(ag::linear(ag::global_avg_pool(x), p[s.select_weight], p[s.select_bias]));
}

Var prompt_block_forward(const Var& x, std::span<const Var> p, const PromptBlockSlots& s) {
    if (x.value().rank() != 3 || x.value().channels() != s.channels) {
        throw InvalidArgument("prompt block expects " + std::to_string(s.channels) + " channels, got " +
                              shape_string(x.shape()));
    }
    Var w = prompt_weights(x, p, s);
    Var prompt = ag::resize_bilinear(ag::weighted_sum(w, p[s.components]), x.value().height(), x.value().width());
    std::array<Var, 2> parts{x, prompt};
    Var fused = transformer_block_forward(ag::concat_channels(parts), p, s.block);
    return ag::add(x, ag::conv2d(fused, p[s.fuse]));
}

} // namespace tdir
