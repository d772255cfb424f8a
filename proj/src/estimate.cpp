#include "cpo/estimate.hpp"

namespace cpo {

double discounted_return(const Trajectory& traj, double beta, double gamma) {
    const double decay = std::exp(-beta * traj.dt);
    double weight = traj.dt;
    double sum = 0.0;
    for (std::size_t i = 0; i < traj.n_steps; ++i) {
        sum += weight * (traj.rewards[i] + gamma * traj.reg_values[i]);
        weight *= decay;
    }
    return sum;
}

Estimate mc_performance(const EnvModel& env, const Policy& policy, const State& x0, double beta, double gamma,
                        double T, double dt, std::size_t n, Rng& rng) {
    if (n < 2) throw ConfigError("mc_performance needs at least 2 rollouts");
    MeanAccumulator acc;
    for (std::size_t j = 0; j < n; ++j) acc.add(discounted_return(rollout(env, policy, x0, T, dt, rng), beta, gamma));
    return acc.estimate();
}

}  // namespace cpo
