#include "cpo/rollout.hpp"

#include <cmath>
#include <sstream>

namespace cpo {

std::size_t grid_steps(double T, double dt) {
    if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("horizon T and step dt must be positive");
    const double ratio = T / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        std::ostringstream os;
        os << "T = " << T << " is not an integer multiple of dt = " << dt;
        throw ConfigError(os.str());
    }
    return static_cast<std::size_t>(rounded);
}

Trajectory rollout(const EnvModel& env, const Policy& policy, const State& x0, double T, double dt, Rng& rng) {
    if (x0.size() != env.state_dim) throw InternalError("initial state dimension does not match " + env.name);
    Trajectory traj;
    traj.dt = dt;
    traj.n_steps = grid_steps(T, dt);
    traj.states.reserve(traj.n_steps);
    traj.actions.reserve(traj.n_steps);
    traj.rewards.reserve(traj.n_steps);
    traj.reg_values.reserve(traj.n_steps);

    State x = x0;
    State z(env.noise_dim);
    for (std::size_t i = 0; i < traj.n_steps; ++i) {
        const double a = sample_action(policy, x, rng);
        if (!env.action_space.contains(a)) {
            throw InternalError("policy produced an action outside the action space of " + env.name);
        }
        traj.states.push_back(x);
        traj.actions.push_back(a);
        traj.rewards.push_back(env.reward(x, a));
        traj.reg_values.push_back(regularizer_rate(env, policy, x, a));
        for (int k = 0; k < env.noise_dim; ++k) z(k) = rng.normal();
        if (i + 1 < traj.n_steps) x = euler_step(env, x, a, dt, z, i);
    }
    return traj;
}

}  // namespace cpo
