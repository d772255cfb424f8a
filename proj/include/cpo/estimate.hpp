#pragma once

#include <cmath>
#include <cstddef>

#include "cpo/env.hpp"
#include "cpo/policy.hpp"
#include "cpo/random.hpp"
#include "cpo/rollout.hpp"

namespace cpo {

/// Monte-Carlo mean with its standard error.
struct Estimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

/// Welford accumulator.
class MeanAccumulator {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double se() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
    Estimate estimate() const { return {mean_, se(), n_}; }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// sqrt(a.se^2 + b.se^2).
inline double combined_se(const Estimate& a, const Estimate& b) { return std::hypot(a.se, b.se); }

/// sum_i exp(-beta t_i) (r_i + gamma p_i) dt along one trajectory.
double discounted_return(const Trajectory& traj, double beta, double gamma);

/// Mean and standard error of discounted_return over n independent rollouts from x0.
/// Throws RolloutDiverged if any rollout diverges.
Estimate mc_performance(const EnvModel& env, const Policy& policy, const State& x0, double beta, double gamma,
                        double T, double dt, std::size_t n, Rng& rng);

}  // namespace cpo
