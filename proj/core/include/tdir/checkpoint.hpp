#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tdir/denoiser.hpp"
#include "tdir/parameters.hpp"
#include "tdir/trainer.hpp"

namespace tdir {

inline constexpr std::string_view kCheckpointMagic = "TDIRCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointExtension = ".tdir";

/// Self-describing training snapshot.
///
/// Binary layout (all integers little-endian):
///   magic[8] "TDIRCKPT" | u32 version | u64 payload_bytes | payload
/// payload:
///   str config_json | u64 step | str rng_state | u32 tensor_count
///   tensor_count x { str name | u8 flags | u32 rank | u32 dims[rank] | f32 data[] }
///   u64 adam_step | tensor_count x { f32 m[] | f32 v[] }
/// where str is u32 length + bytes and flags bit 0 = encoder, bit 1 = trainable.
struct Checkpoint {
    DenoiserConfig model;
    TrainConfig train;
    ParameterSet params;
    AdamState adam;
    std::string rng_state;
    std::uint64_t step = 0;
};

Checkpoint make_checkpoint(const TrainingSession& session);
TrainingSession restore_session(const Checkpoint& ckpt);

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws IoError on bad magic, version mismatch or truncation, and
/// InvalidArgument when tensors do not match the embedded model config.
Checkpoint parse_checkpoint(std::string_view bytes);

/// Atomic write (temporary file + rename).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace tdir
