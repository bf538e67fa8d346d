#include "tdir/schedule.hpp"

#include <cmath>
#include <string>

#include "tdir/errors.hpp"

namespace tdir {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
    const std::size_t n = betas_.size();
    alphas_.resize(n);
    alpha_bars_.resize(n);
    sqrt_alpha_bars_.resize(n);
    sqrt_one_minus_alpha_bars_.resize(n);
    double running = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        alphas_[i] = 1.0 - betas_[i];
        running *= alphas_[i];
        alpha_bars_[i] = running;
        sqrt_alpha_bars_[i] = std::sqrt(running);
        sqrt_one_minus_alpha_bars_[i] = std::sqrt(1.0 - running);
    }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw InvalidArgument("schedule: T must be >= 1, got " + std::to_string(steps));
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw InvalidArgument("schedule: require 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> betas(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
        betas[i] = beta_start + (beta_end - beta_start) * frac;
    }
    return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
    if (betas.empty()) throw InvalidArgument("schedule: empty beta sequence");
    for (double b : betas) {
        if (!(b >= 0.0 && b <= 1.0)) throw InvalidArgument("schedule: beta outside [0, 1]");
    }
    return NoiseSchedule(std::move(betas));
}

void NoiseSchedule::check_step(int t) const {
    if (t < 1 || t > steps()) {
        throw InvalidArgument("step index " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
    }
}

double NoiseSchedule::posterior_variance(int t) const {
    const double denom = 1.0 - alpha_bar(t);
    if (denom <= 0.0) return 0.0;
    return (1.0 - alpha_bar(t - 1)) / denom * beta(t);
}

Tensor forward_step(const Tensor& y_prev, int t, const NoiseSchedule& sched, Rng& rng) {
    sched.check_step(t);
    const double b = sched.beta(t);
    Tensor out = y_prev;
    if (b == 0.0) return out;
    const double keep = std::sqrt(1.0 - b);
    const double noise = std::sqrt(b);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : out.values()) v = keep * v + noise * dist(rng);
    return out;
}

Tensor forward_marginal_with(const Tensor& y0, const Tensor& eps, int t, const NoiseSchedule& sched) {
    sched.check_step(t);
    require_same_shape(y0, eps, "forward_marginal");
    const double a = sched.sqrt_alpha_bar(t);
    const double s = sched.sqrt_one_minus_alpha_bar(t);
    if (s == 0.0) return y0;
    if (a == 0.0) return eps;
    Tensor out(y0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * y0[i] + s * eps[i];
    return out;
}

MarginalSample forward_marginal(const Tensor& y0, int t, const NoiseSchedule& sched, Rng& rng) {
    sched.check_step(t);
    Tensor eps = normal_like(y0.shape(), rng);
    Tensor y = forward_marginal_with(y0, eps, t, sched);
    return {std::move(y), std::move(eps)};
}

} // namespace tdir
