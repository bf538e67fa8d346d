#pragma once

#include <vector>

#include "tdir/rng.hpp"
#include "tdir/tensor.hpp"

namespace tdir {

/// Variance schedule of the forward diffusion process.
///
/// Steps are numbered 1..T at the interface; alpha_bar(0) == 1 denotes the
/// clean boundary. All coefficients are kept in double precision.
class NoiseSchedule {
public:
    /// Linear ramp from beta_start (t = 1) to beta_end (t = T).
    /// Requires T >= 1 and 0 < beta_start <= beta_end < 1.
    static NoiseSchedule linear(int steps, double beta_start, double beta_end);

    /// Arbitrary schedule; each beta must lie in [0, 1]. The closed ends are
    /// accepted so degenerate identity / pure-noise steps can be expressed.
    static NoiseSchedule from_betas(std::vector<double> betas);

    int steps() const noexcept { return static_cast<int>(betas_.size()); }

    double beta(int t) const { return betas_[index(t)]; }
    double alpha(int t) const { return alphas_[index(t)]; }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_[index(t)]; }
    double sqrt_alpha_bar(int t) const { return t == 0 ? 1.0 : sqrt_alpha_bars_[index(t)]; }
    double sqrt_one_minus_alpha_bar(int t) const { return t == 0 ? 0.0 : sqrt_one_minus_alpha_bars_[index(t)]; }
    /// beta~_t = (1 - alpha_bar(t-1)) / (1 - alpha_bar(t)) * beta_t, with 0
    /// for the degenerate case alpha_bar(t) == 1.
    double posterior_variance(int t) const;

    const std::vector<double>& betas() const noexcept { return betas_; }
    const std::vector<double>& alphas() const noexcept { return alphas_; }
    const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }

    /// Throws InvalidArgument unless 1 <= t <= T.
    void check_step(int t) const;

private:
    explicit NoiseSchedule(std::vector<double> betas);
    std::size_t index(int t) const {
        check_step(t);
        return static_cast<std::size_t>(t - 1);
    }

    std::vector<double> betas_;
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;
    std::vector<double> sqrt_alpha_bars_;
    std::vector<double> sqrt_one_minus_alpha_bars_;
};

/// One Markov step: sqrt(1 - beta_t) * y_prev + sqrt(beta_t) * z.
Tensor forward_step(const Tensor& y_prev, int t, const NoiseSchedule& sched, Rng& rng);

struct MarginalSample {
    Tensor y_t;
    Tensor eps;
};

/// Closed-form jump from the clean signal to step t:
/// y_t = sqrt(alpha_bar_t) * y0 + sqrt(1 - alpha_bar_t) * eps.
MarginalSample forward_marginal(const Tensor& y0, int t, const NoiseSchedule& sched, Rng& rng);

/// Same as forward_marginal with caller-supplied eps.
Tensor forward_marginal_with(const Tensor& y0, const Tensor& eps, int t, const NoiseSchedule& sched);

} // namespace tdir
