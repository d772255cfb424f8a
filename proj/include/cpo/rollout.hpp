#pragma once

#include <cstddef>
#include <vector>

#include "cpo/env.hpp"
#include "cpo/policy.hpp"
#include "cpo/random.hpp"

namespace cpo {

/// One rollout on the grid t_i = i dt, i = 0..n_steps-1. Rewards and
/// regularizer rates are recorded at the pre-step (state, action) pair.
struct Trajectory {
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::vector<State> states;
    std::vector<double> actions;
    std::vector<double> rewards;
    std::vector<double> reg_values;

    double time(std::size_t i) const { return static_cast<double>(i) * dt; }
    double horizon() const { return static_cast<double>(n_steps) * dt; }
};

/// Number of grid points for horizon T. Throws ConfigError unless T is a
/// positive integer multiple of dt (up to 1e-9 relative rounding).
std::size_t grid_steps(double T, double dt);

/// Simulates n_steps = T/dt grid points. Per step one standard normal is
/// drawn per noise dimension, after the action draw.
Trajectory rollout(const EnvModel& env, const Policy& policy, const State& x0, double T, double dt, Rng& rng);

}  // namespace cpo
