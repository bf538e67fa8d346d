#include "tdir/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "tdir/dataio.hpp"
#include "tdir/errors.hpp"

namespace tdir {

namespace {

using nlohmann::json;

json model_to_json(const DenoiserConfig& c) {
    return {{"levels", c.levels},
            {"base_channels", c.base_channels},
            {"channel_multipliers", c.channel_multipliers},
            {"heads", c.heads},
            {"blocks", c.blocks},
            {"prompt_blocks", c.prompt_blocks},
            {"prompt_components", c.prompt_components},
            {"prompt_channels", c.prompt_channels},
            {"prompt_size", c.prompt_size},
            {"timestep_embed_dim", c.timestep_embed_dim},
            {"ffn_expansion", c.ffn_expansion},
            {"in_channels", c.in_channels},
            {"out_channels", c.out_channels}};
}

DenoiserConfig model_from_json(const json& j) {
    DenoiserConfig c;
    j.at("levels").get_to(c.levels);
    j.at("base_channels").get_to(c.base_channels);
    j.at("channel_multipliers").get_to(c.channel_multipliers);
    j.at("heads").get_to(c.heads);
    j.at("blocks").get_to(c.blocks);
    j.at("prompt_blocks").get_to(c.prompt_blocks);
    j.at("prompt_components").get_to(c.prompt_components);
    j.at("prompt_channels").get_to(c.prompt_channels);
    j.at("prompt_size").get_to(c.prompt_size);
    j.at("timestep_embed_dim").get_to(c.timestep_embed_dim);
    j.at("ffn_expansion").get_to(c.ffn_expansion);
    j.at("in_channels").get_to(c.in_channels);
    j.at("out_channels").get_to(c.out_channels);
    return c;
}

json train_to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_eps", c.adam_eps},
            {"total_steps", c.total_steps},
            {"patch_size", c.patch_size},
            {"freeze_encoder", c.freeze_encoder},
            {"seed", c.seed},
            {"checkpoint_every", c.checkpoint_every},
            {"lr_schedule", c.lr_schedule == LrSchedule::Cosine ? "cosine" : "constant"},
            {"diffusion_steps", c.diffusion_steps},
            {"beta_start", c.beta_start},
            {"beta_end", c.beta_end}};
}

TrainConfig train_from_json(const json& j) {
    TrainConfig c;
    j.at("batch_size").get_to(c.batch_size);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("beta1").get_to(c.beta1);
    j.at("beta2").get_to(c.beta2);
    j.at("adam_eps").get_to(c.adam_eps);
    j.at("total_steps").get_to(c.total_steps);
    j.at("patch_size").get_to(c.patch_size);
    j.at("freeze_encoder").get_to(c.freeze_encoder);
    j.at("seed").get_to(c.seed);
    j.at("checkpoint_every").get_to(c.checkpoint_every);
    c.lr_schedule = j.at("lr_schedule").get<std::string>() == "cosine" ? LrSchedule::Cosine : LrSchedule::Constant;
    j.at("diffusion_steps").get_to(c.diffusion_steps);
    j.at("beta_start").get_to(c.beta_start);
    j.at("beta_end").get_to(c.beta_end);
    return c;
}

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void f32s(const Tensor& t) {
        for (double v : t.values()) u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(bytes_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    void f32s(Tensor& t) {
        need(4 * t.size());
        for (double& v : t.values()) v = static_cast<double>(std::bit_cast<float>(u32()));
    }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw IoError("checkpoint truncated");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

Checkpoint make_checkpoint(const TrainingSession& s) {
    return {s.model, s.train, s.params, s.adam, save_rng_state(s.rng), s.step};
}

TrainingSession restore_session(const Checkpoint& c) {
    return {c.model, c.train, c.params, c.adam, load_rng_state(c.rng_state), c.step};
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    Writer p;
    p.str(json{{"model", model_to_json(ckpt.model)}, {"train", train_to_json(ckpt.train)}}.dump());
    p.u64(ckpt.step);
    p.str(ckpt.rng_state);
    p.u32(static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& t : ckpt.params) {
        p.str(t.name);
        p.u8(static_cast<std::uint8_t>((t.encoder ? 1 : 0) | (t.trainable ? 2 : 0)));
        p.u32(static_cast<std::uint32_t>(t.value.rank()));
        for (int d : t.value.shape()) p.u32(static_cast<std::uint32_t>(d));
        p.f32s(t.value);
    }
    p.u64(ckpt.adam.step);
    if (ckpt.adam.m.size() != ckpt.params.size() || ckpt.adam.v.size() != ckpt.params.size()) {
        throw InvalidArgument("checkpoint: optimizer state does not match parameters");
    }
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        require_same_shape(ckpt.params[i].value, ckpt.adam.m[i], "checkpoint first moment");
        require_same_shape(ckpt.params[i].value, ckpt.adam.v[i], "checkpoint second moment");
        p.f32s(ckpt.adam.m[i]);
        p.f32s(ckpt.adam.v[i]);
    }
    const std::string payload = p.take();

    Writer head;
    std::string out(kCheckpointMagic);
    head.u32(kCheckpointVersion);
    head.u64(payload.size());
    out += head.take();
    out += payload;
    return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (bytes.size() < kCheckpointMagic.size() || r.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
        throw IoError("not a checkpoint (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint64_t payload_bytes = r.u64();
    if (r.remaining() != payload_bytes) {
        throw IoError("checkpoint length mismatch: header declares " + std::to_string(payload_bytes) +
                      " payload bytes, file has " + std::to_string(r.remaining()));
    }

    Checkpoint c;
    try {
        const json cfg = json::parse(r.str());
        c.model = model_from_json(cfg.at("model"));
        c.train = train_from_json(cfg.at("train"));
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint config unreadable: ") + e.what());
    }
    c.step = r.u64();
    c.rng_state = r.str();
    const std::uint32_t count = r.u32();
    std::vector<bool> trainable;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const std::uint8_t flags = r.u8();
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw IoError("checkpoint tensor " + name + " has implausible rank");
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<int>(r.u32());
        Tensor t(shape);
        r.f32s(t);
        c.params.add(std::move(name), std::move(t), (flags & 1) != 0);
        trainable.push_back((flags & 2) != 0);
    }
    for (std::uint32_t i = 0; i < count; ++i) c.params[i].trainable = trainable[i];
    c.adam.step = r.u64();
    for (std::uint32_t i = 0; i < count; ++i) {
        Tensor m = Tensor::zeros_like(c.params[i].value);
        Tensor v = Tensor::zeros_like(c.params[i].value);
        r.f32s(m);
        r.f32s(v);
        c.adam.m.push_back(std::move(m));
        c.adam.v.push_back(std::move(v));
    }
    if (r.remaining() != 0) throw IoError("checkpoint has trailing bytes");

    Denoiser(c.model).check_params(c.params);
    (void)load_rng_state(c.rng_state);
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

} // namespace tdir
