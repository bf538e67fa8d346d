#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tdir/denoiser.hpp"
#include "tdir/image.hpp"
#include "tdir/parameters.hpp"
#include "tdir/rng.hpp"
#include "tdir/schedule.hpp"

namespace tdir {

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
    int batch_size = 32;
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int total_steps = 1000;
    int patch_size = 128;
    bool freeze_encoder = false;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;
    LrSchedule lr_schedule = LrSchedule::Constant;
    // Diffusion schedule the model is trained against.
    int diffusion_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    void validate(const DenoiserConfig& model) const;
    NoiseSchedule schedule() const { return NoiseSchedule::linear(diffusion_steps, beta_start, beta_end); }
    /// Learning rate for the update that produces step `step` (1-based).
    double lr_at(std::uint64_t step) const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t step = 0;

    static AdamState for_params(const ParameterSet& params);
};

/// Mean absolute difference over all elements.
double l1_loss(const Tensor& eps_hat, const Tensor& eps);

/// One bias-corrected Adam update with learning rate `lr`. Frozen tensors
/// (and their moments) are left untouched. Parameters and moments are
/// stored at 32-bit float precision. Throws NumericError before mutating
/// anything if a gradient is non-finite.
void adam_update(ParameterSet& params, std::span<const Tensor> grads, AdamState& state, const TrainConfig& cfg,
                 double lr);

/// Noise-prediction step over a batch of (clean, degraded) pairs. Each pair
/// gets its own t ~ U{1..T} and eps; the reported loss is the batch mean of
/// the per-pair L1 losses, evaluated before the update. Per-pair passes may
/// run on `threads` workers; gradients are summed in batch order.
double training_step(std::span<const ImagePair> batch, const NoisePredictor& model, ParameterSet& params,
                     AdamState& opt, const NoiseSchedule& sched, const TrainConfig& cfg, Rng& rng, int threads = 1);

struct StepRecord {
    std::uint64_t step;
    double loss;
    double lr;
    double wall_ms;
};

/// Complete, resumable training state.
struct TrainingSession {
    DenoiserConfig model;
    TrainConfig train;
    ParameterSet params;
    AdamState adam;
    Rng rng;
    std::uint64_t step = 0;

    static TrainingSession create(const DenoiserConfig& model, const TrainConfig& train);
};

/// Runs `steps` updates, drawing batch_size random pairs (with replacement)
/// and a random patch from each. `on_step` sees every completed step.
void run_training(TrainingSession& session, std::span<const ImagePair> dataset, int steps, int threads,
                  const std::function<void(const StepRecord&)>& on_step = {});

} // namespace tdir
