#include "tdir/denoiser.hpp"

#include <array>
#include <cmath>
#include <string>

#include "tdir/errors.hpp"

namespace tdir {

namespace ag = autograd;

DenoiserConfig DenoiserConfig::tiny(int blocks_per_level) {
    DenoiserConfig cfg;
    cfg.base_channels = 8;
    cfg.heads = {1, 2, 4, 8};
    cfg.blocks.assign(4, blocks_per_level);
    cfg.prompt_components = 5;
    cfg.prompt_size = {4, 4, 4};
    cfg.timestep_embed_dim = 16;
    return cfg;
}

int DenoiserConfig::prompt_channels_at(int stage) const {
    const int requested = prompt_channels.at(stage);
    return requested > 0 ? requested : level_channels(levels - 2 - stage);
}

void DenoiserConfig::validate() const {
    auto fail = [](const std::string& msg) { throw InvalidArgument("denoiser config: " + msg); };
    if (levels < 2) fail("levels must be >= 2");
    if (prompt_blocks != levels - 1) fail("prompt_blocks must equal levels - 1");
    const auto n = static_cast<std::size_t>(levels);
    if (channel_multipliers.size() != n || heads.size() != n || blocks.size() != n) {
        fail("channel_multipliers, heads and blocks need one entry per level");
    }
    const auto stages = static_cast<std::size_t>(levels - 1);
    if (prompt_channels.size() != stages || prompt_size.size() != stages) {
        fail("prompt_channels and prompt_size need one entry per decoder stage");
    }
    if (base_channels < 1) fail("base_channels must be positive");
    if (prompt_components < 1) fail("prompt_components must be positive");
    if (timestep_embed_dim < 2 || timestep_embed_dim % 2 != 0) fail("timestep_embed_dim must be even and positive");
    if (!(ffn_expansion > 0.0)) fail("ffn_expansion must be positive");
    if (in_channels < 1 || out_channels < 1) fail("channel counts must be positive");
    for (int l = 0; l < levels; ++l) {
        if (channel_multipliers[l] < 1 || heads[l] < 1 || blocks[l] < 0) fail("per-level values must be positive");
        if (level_channels(l) % heads[l] != 0) {
            fail("level " + std::to_string(l + 1) + " channels not divisible by heads");
        }
        if (l > 0 && level_channels(l) % 4 != 0) {
            fail("level " + std::to_string(l + 1) + " channels must be divisible by 4 for space-to-channel");
        }
    }
    for (int s = 0; s < levels - 1; ++s) {
        const int l = levels - 2 - s;
        if (prompt_size[s] < 1 || prompt_channels[s] < 0) fail("prompt dims must be positive");
        if ((level_channels(l) + prompt_channels_at(s)) % heads[l] != 0) {
            fail("prompt stage " + std::to_string(s) + " fused channels not divisible by heads");
        }
    }
}

Tensor sinusoidal_embedding(int t, int dim) {
    if (dim < 2 || dim % 2 != 0) throw InvalidArgument("timestep embedding dimension must be even, got " + std::to_string(dim));
    if (t < 0) throw InvalidArgument("timestep must be non-negative");
    Tensor e(Shape{dim});
    for (int i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / dim);
        e[2 * i] = std::sin(t * freq);
        e[2 * i + 1] = std::cos(t * freq);
    }
    return e;
}

Denoiser::Denoiser(DenoiserConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int levels = cfg_.levels;
    const double exp = cfg_.ffn_expansion;

    patch_embed_ = layout_.add("encoder.patch_embed.weight", {cfg_.level_channels(0), cfg_.in_channels, 3, 3},
                               Init::FanIn, true);
    enc_blocks_.resize(levels);
    for (int l = 0; l < levels; ++l) {
        const int c = cfg_.level_channels(l);
        if (l > 0) {
            down_.push_back(layout_.add("encoder.down" + std::to_string(l) + ".weight",
                                        {c / 4, cfg_.level_channels(l - 1), 3, 3}, Init::FanIn, true));
        }
        const std::string prefix = l == levels - 1 ? "encoder.latent" : "encoder.level" + std::to_string(l + 1);
        for (int b = 0; b < cfg_.blocks[l]; ++b) {
            enc_blocks_[l].push_back(
                declare_transformer_block(layout_, prefix + ".block" + std::to_string(b), c, cfg_.heads[l], exp, true));
        }
    }

    const int e = cfg_.timestep_embed_dim;
    time_fc1_w_ = layout_.add("decoder.time_mlp.fc1.weight", {e, e}, Init::FanIn, false);
    time_fc1_b_ = layout_.add("decoder.time_mlp.fc1.bias", {e}, Init::Zero, false);
    time_fc2_w_ = layout_.add("decoder.time_mlp.fc2.weight", {e, e}, Init::FanIn, false);
    time_fc2_b_ = layout_.add("decoder.time_mlp.fc2.bias", {e}, Init::Zero, false);

    dec_blocks_.resize(levels - 1);
    for (int s = 0; s < levels - 1; ++s) {
        const int l = levels - 2 - s;
        const int c = cfg_.level_channels(l);
        const int c_below = cfg_.level_channels(l + 1);
        const std::string prefix = "decoder.stage" + std::to_string(s);
        up_.push_back(layout_.add(prefix + ".up.weight", {4 * c, c_below, 3, 3}, Init::FanIn, false));
        time_proj_w_.push_back(layout_.add(prefix + ".time_proj.weight", {c, e}, Init::FanIn, false));
        time_proj_b_.push_back(layout_.add(prefix + ".time_proj.bias", {c}, Init::Zero, false));
        reduce_.push_back(layout_.add(prefix + ".reduce.weight", {c, 3 * c, 1, 1}, Init::FanIn, false));
        prompts_.push_back(declare_prompt_block(layout_, prefix + ".prompt", c, cfg_.prompt_channels_at(s),
                                                cfg_.prompt_components, cfg_.prompt_size[s], cfg_.heads[l], exp,
                                                false));
        for (int b = 0; b < cfg_.blocks[l]; ++b) {
            dec_blocks_[s].push_back(declare_transformer_block(layout_, prefix + ".block" + std::to_string(b), c,
                                                               cfg_.heads[l], exp, false));
        }
    }
    output_ = layout_.add("decoder.output.weight", {cfg_.out_channels, cfg_.level_channels(0), 3, 3}, Init::FanIn,
                          false);
}

ParameterSet Denoiser::init_params(std::uint64_t seed) const {
    Rng rng = derive_rng(seed, {0x1417});
    return layout_.materialize(rng);
}

void Denoiser::check_params(const ParameterSet& params) const {
    const auto& specs = layout_.specs();
    if (params.size() != specs.size()) {
        throw InvalidArgument("parameter set has " + std::to_string(params.size()) + " tensors, layout expects " +
                              std::to_string(specs.size()));
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (params[i].name != specs[i].name || params[i].value.shape() != specs[i].shape) {
            throw InvalidArgument("parameter " + params[i].name + " " + shape_string(params[i].value.shape()) +
                                  " does not match layout entry " + specs[i].name + " " +
                                  shape_string(specs[i].shape));
        }
        if (!params[i].value.all_finite()) throw NumericError("non-finite value in parameter " + params[i].name);
    }
}

Var Denoiser::embed_timestep(std::span<const Var> p, int t) const {
    Var s = Var::constant(sinusoidal_embedding(t, cfg_.timestep_embed_dim));
    Var h = ag::silu(ag::linear(s, p[time_fc1_w_], p[time_fc1_b_]));
    return ag::linear(h, p[time_fc2_w_], p[time_fc2_b_]);
}

Var Denoiser::predict(std::span<const Var> p, const Var& y_t, const Var& condition, int t) const {
    const int levels = cfg_.levels;
    std::array<Var, 2> inputs{y_t, condition};
    Var h = ag::conv2d(ag::concat_channels(inputs), p[patch_embed_]);

    std::vector<Var> skips(static_cast<std::size_t>(levels - 1));
    for (int l = 0; l < levels; ++l) {
        if (l > 0) h = ag::pixel_unshuffle(ag::conv2d(h, p[down_[l - 1]]));
        for (const auto& blk : enc_blocks_[l]) h = transformer_block_forward(h, p, blk);
        if (l < levels - 1) skips[l] = h;
    }

    Var temb = embed_timestep(p, t);
    for (int s = 0; s < levels - 1; ++s) {
        const int l = levels - 2 - s;
        Var up = ag::pixel_shuffle(ag::conv2d(h, p[up_[s]]));
        const int hh = up.value().height();
        const int ww = up.value().width();
        Var tch = ag::broadcast_channels(ag::linear(temb, p[time_proj_w_[s]], p[time_proj_b_[s]]), hh, ww);
        std::array<Var, 3> parts{up, skips[l], tch};
        h = ag::conv2d(ag::concat_channels(parts), p[reduce_[s]]);
        h = prompt_block_forward(h, p, prompts_[s]);
        for (const auto& blk : dec_blocks_[s]) h = transformer_block_forward(h, p, blk);
    }
    return ag::conv2d(h, p[output_]);
}

void Denoiser::check_inputs(const Tensor& y_t, const Tensor& condition) const {
    if (y_t.rank() != 3) throw InvalidArgument("denoiser input must be C x H x W");
    require_same_shape(y_t, condition, "denoiser inputs");
    if (y_t.channels() + condition.channels() != cfg_.in_channels) {
        throw InvalidArgument("denoiser expects " + std::to_string(cfg_.in_channels) + " input channels in total");
    }
    const int m = cfg_.spatial_multiple();
    if (y_t.height() % m != 0 || y_t.width() % m != 0) {
        throw InvalidArgument("spatial size " + std::to_string(y_t.height()) + "x" + std::to_string(y_t.width()) +
                              " not divisible by " + std::to_string(m));
    }
}

Tensor Denoiser::forward(const ParameterSet& params, const Tensor& y_t, const Tensor& condition, int t) const {
    check_params(params);
    auto bound = params.bind_constants();
    return forward_bound(bound, y_t, condition, t);
}

Tensor Denoiser::forward_bound(std::span<const Var> constants, const Tensor& y_t, const Tensor& condition,
                               int t) const {
    check_inputs(y_t, condition);
    Var out = predict(constants, Var::constant(y_t), Var::constant(condition), t);
    if (!out.value().all_finite()) throw NumericError("denoiser produced non-finite output at t=" + std::to_string(t));
    return out.value();
}

Tensor denoiser_forward(const Tensor& y_t, const Tensor& x_cond, int t, const ParameterSet& params,
                        const DenoiserConfig& cfg) {
    return Denoiser(cfg).forward(params, y_t, x_cond, t);
}

} // namespace tdir
