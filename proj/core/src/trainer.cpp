#include "tdir/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include "tdir/dataio.hpp"
#include "tdir/errors.hpp"
#include "tdir/parallel.hpp"

namespace tdir {

namespace ag = autograd;

void TrainConfig::validate(const DenoiserConfig& model) const {
    auto fail = [](const std::string& msg) { throw InvalidArgument("train config: " + msg); };
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) fail("adam epsilon must be > 0");
    if (total_steps < 0 || checkpoint_every < 0) fail("step counts must be non-negative");
    if (patch_size < 1 || patch_size % model.spatial_multiple() != 0) {
        fail("patch_size " + std::to_string(patch_size) + " must be a positive multiple of " +
             std::to_string(model.spatial_multiple()));
    }
    (void)schedule();
}

double TrainConfig::lr_at(std::uint64_t step) const {
    if (lr_schedule == LrSchedule::Constant || total_steps == 0) return learning_rate;
    const double progress = std::min(1.0, static_cast<double>(step) / total_steps);
    return learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamState AdamState::for_params(const ParameterSet& params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.push_back(Tensor::zeros_like(p.value));
        s.v.push_back(Tensor::zeros_like(p.value));
    }
    return s;
}

double l1_loss(const Tensor& eps_hat, const Tensor& eps) {
    require_same_shape(eps_hat, eps, "l1_loss");
    if (eps.empty()) throw InvalidArgument("l1_loss: empty tensors");
    double acc = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) acc += std::abs(eps_hat[i] - eps[i]);
    return acc / static_cast<double>(eps.size());
}

void adam_update(ParameterSet& params, std::span<const Tensor> grads, AdamState& state, const TrainConfig& cfg,
                 double lr) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw InvalidArgument("adam_update: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(params[i].value, grads[i], "adam_update gradient");
        require_same_shape(params[i].value, state.m[i], "adam_update first moment");
        require_same_shape(params[i].value, state.v[i], "adam_update second moment");
        if (!grads[i].all_finite()) throw NumericError("non-finite gradient for parameter " + params[i].name);
    }
    state.step += 1;
    const double k = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, k);
    const double bc2 = 1.0 - std::pow(cfg.beta2, k);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].trainable) continue;
        Tensor& theta = params[i].value;
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        const Tensor& g = grads[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double mj = static_cast<float>(cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j]);
            const double vj = static_cast<float>(cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j]);
            m[j] = mj;
            v[j] = vj;
            const double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.adam_eps);
            theta[j] = static_cast<float>(theta[j] - update);
        }
    }
}

double training_step(std::span<const ImagePair> batch, const NoisePredictor& model, ParameterSet& params,
                     AdamState& opt, const NoiseSchedule& sched, const TrainConfig& cfg, Rng& rng, int threads) {
    if (batch.empty()) throw InvalidArgument("training_step: empty batch");

    struct Example {
        Tensor clean, condition, eps;
        int t = 0;
    };
    // All randomness is drawn up front in batch order.
    std::vector<Example> examples;
    examples.reserve(batch.size());
    for (const auto& pair : batch) {
        Example ex;
        ex.clean = convert(pair.clean, ValueDomain::SignedUnit).pixels;
        ex.condition = convert(pair.degraded, ValueDomain::SignedUnit).pixels;
        require_same_shape(ex.clean, ex.condition, "training pair");
        ex.t = uniform_int(rng, 1, sched.steps());
        ex.eps = normal_like(ex.clean.shape(), rng);
        examples.push_back(std::move(ex));
    }

    std::vector<double> losses(batch.size());
    std::vector<std::vector<Tensor>> grads(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        const Example& ex = examples[i];
        auto vars = params.bind_parameters();
        Tensor y_t = forward_marginal_with(ex.clean, ex.eps, ex.t, sched);
        ag::Var eps_hat = model.predict(vars, ag::Var::constant(std::move(y_t)), ag::Var::constant(ex.condition), ex.t);
        ag::Var loss = ag::mean_abs_diff(eps_hat, ag::Var::constant(ex.eps));
        ag::backward(loss);
        losses[i] = loss.value()[0];
        grads[i].reserve(vars.size());
        for (const auto& v : vars) grads[i].push_back(v.grad());
    });

    double loss = 0.0;
    for (double l : losses) loss += l;
    loss /= static_cast<double>(batch.size());
    if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at step " + std::to_string(opt.step + 1));
    }

    std::vector<Tensor> total = std::move(grads[0]);
    for (std::size_t i = 1; i < grads.size(); ++i)
        for (std::size_t j = 0; j < total.size(); ++j) total[j] += grads[i][j];
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (auto& g : total) g *= inv_b;

    adam_update(params, total, opt, cfg, cfg.lr_at(opt.step + 1));
    return loss;
}

TrainingSession TrainingSession::create(const DenoiserConfig& model, const TrainConfig& train) {
    train.validate(model);
    TrainingSession s{model, train, Denoiser(model).init_params(train.seed), {}, derive_rng(train.seed, {0x7a11}), 0};
    s.params.set_encoder_frozen(train.freeze_encoder);
    s.adam = AdamState::for_params(s.params);
    return s;
}

void run_training(TrainingSession& session, std::span<const ImagePair> dataset, int steps, int threads,
                  const std::function<void(const StepRecord&)>& on_step) {
    if (steps <= 0) return;
    if (dataset.empty()) throw InvalidArgument("run_training: empty dataset");
    session.train.validate(session.model);
    const Denoiser model(session.model);
    const NoiseSchedule sched = session.train.schedule();
    session.params.set_encoder_frozen(session.train.freeze_encoder);

    std::vector<ImagePair> batch(static_cast<std::size_t>(session.train.batch_size));
    for (int s = 0; s < steps; ++s) {
        const auto start = std::chrono::steady_clock::now();
        for (auto& slot : batch) {
            const int idx = uniform_int(session.rng, 0, static_cast<int>(dataset.size()) - 1);
            slot = sample_patch(dataset[idx], session.train.patch_size, session.rng);
        }
        const double lr = session.train.lr_at(session.adam.step + 1);
        const double loss = training_step(batch, model, session.params, session.adam, sched, session.train,
                                          session.rng, threads);
        session.step += 1;
        const auto stop = std::chrono::steady_clock::now();
        if (on_step) {
            on_step({session.step, loss, lr, std::chrono::duration<double, std::milli>(stop - start).count()});
        }
    }
}

} // namespace tdir
