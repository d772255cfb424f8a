#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cpo/critic.hpp"
#include "cpo/env.hpp"
#include "cpo/occupation.hpp"
#include "cpo/policy.hpp"
#include "cpo/random.hpp"
#include "cpo/rollout.hpp"

namespace cpo {

/// Shape of the learning-rate decay after the pivot iteration.
///
///   table         base for k <= pivot, base * log(pivot / k) afterwards,
///                 clamped at 0 (the raw log is negative past the pivot)
///   inverse       base * pivot / k
///   inverse_sqrt  base * sqrt(pivot / k)
///   log_ratio     base * log(pivot) / log(k)
///   constant      base
enum class LrDecay { table, inverse, inverse_sqrt, log_ratio, constant };

struct LearningRate {
    double base = 0.0;
    LrDecay decay = LrDecay::inverse;
    double pivot = 50.0;

    double at(std::size_t k) const;
};

/// Inner loop of the penalized update.
///
///   gradient  s plain ascent steps on scale * L - C D
///   proximal  s ascent steps on scale * L, each followed by the proximal step
///             of C D restricted to the ray from theta_k (a closed-form shrink
///             toward theta_k, using that D is homogeneous of degree 1 for
///             sqrt-KL and 2 for KL near theta_k)
enum class InnerOptimizer { gradient, proximal };

struct AlgoConfig {
    double T = 25.0;
    double dt = 0.005;
    double beta = 1.0;
    double gamma = 0.1;
    std::size_t J = 100;
    LearningRate alpha_policy{0.02};
    LearningRate alpha_critic{0.01};
    std::size_t K_iters = 2000;
    std::size_t s_steps = 10;
    double delta_radius = 0.0002;
    double epsilon_tol = 0.5;
    double c_penalty_init = 1.0;
    InnerOptimizer inner = InnerOptimizer::gradient;
    std::uint64_t seed = 0;

    /// Throws ConfigError on T not a multiple of dt, J = 0, delta or epsilon <= 0.
    void validate() const;
};

struct PenaltyState {
    double c_penalty = 1.0;
};

enum class KlVariant { sqrt, linear };

struct IterationRecord {
    std::size_t k = 0;
    ParamVector theta;  // after the update
    ParamVector phi;    // critic after the sweep
    /// D between the new and old policy on the sampled states: mean sqrt-KL,
    /// or mean KL for the linear CPPO variant.
    double mean_kl_step = 0.0;
    double grad_norm = 0.0;
    std::optional<double> c_penalty;  // penalty used for the next iteration
    std::size_t skipped_ratios = 0;
    /// The J rollout-time states the update used (x ~ beta d of the old policy).
    std::vector<State> states;
};

/// Everything a training loop carries between iterations.
struct TrainState {
    Policy policy;
    Critic critic;
    PenaltyState penalty;
    std::size_t k = 0;
};

/// Data for one update: the trajectory and J rollout-time samples.
struct SampleBatch {
    Trajectory traj;
    std::vector<RolloutSample> samples;
};

/// Per-iteration random substreams: "rollout" for the trajectory (actions and
/// noise) and "tau" for rollout times, both indexed by k.
struct IterationStreams {
    Rng rollout;
    Rng tau;

    IterationStreams(std::uint64_t master, std::size_t k);
};

/// Steps 2-5 of CPG: rollout, critic sweep, J rollout times with q estimates.
/// `continuous_critic` selects the MSTDE rule; otherwise TD(0) is used.
SampleBatch collect_samples(const EnvModel& env, const Policy& policy, Critic& critic, const AlgoConfig& config,
                            const State& x0, double alpha_critic, IterationStreams& streams,
                            bool continuous_critic = true);

/// (1/beta)(1/J) sum_j [score (q_j + gamma p_j) + gamma grad p_j].
ParamVector cpg_gradient(const EnvModel& env, const Policy& policy, std::span<const RolloutSample> samples,
                         double beta, double gamma);

/// Discrete advantage A = q dt: mean [score (A + gamma p dt) + gamma dt grad p],
/// which is beta dt times cpg_gradient on the same samples.
ParamVector dpg_gradient(const EnvModel& env, const Policy& policy, std::span<const RolloutSample> samples,
                         double gamma, double dt);

/// Mean over states of sqrt(KL(old || new)).
double mean_sqrt_kl(const Policy& theta_new, const Policy& theta_old, std::span<const State> states);

/// Mean over states of KL(old || new).
double mean_kl(const Policy& theta_new, const Policy& theta_old, std::span<const State> states);

/// Gradient of mean_sqrt_kl (or mean_kl) with respect to theta_new. The square
/// root uses a floor of 1e-12 on the KL so the gradient is defined at theta_old.
ParamVector penalty_gradient(const Policy& theta_new, const Policy& theta_old, std::span<const State> states,
                             KlVariant variant);

/// Doubles c when measured >= (1 + epsilon) delta, halves it when
/// measured <= delta / (1 + epsilon), keeps it otherwise.
PenaltyState penalty_adapt(PenaltyState c, double measured, double delta, double epsilon);

/// One CPG iteration. Throws RolloutDiverged when the rollout leaves the
/// admissible region and NumericError when the update is not finite.
IterationRecord cpg_iteration(TrainState& state, const EnvModel& env, const AlgoConfig& config, const State& x0);

/// One CPPO iteration: CPG data collection, s_steps of ascent on
/// L(theta) - C D(theta || theta_k), then penalty adaptation.
IterationRecord cppo_iteration(TrainState& state, const EnvModel& env, const AlgoConfig& config, const State& x0,
                               KlVariant variant);

enum class DiscreteAlgo { dpg, dppo };

/// Discrete-time PG / PPO on the dt-grid MDP with a TD(0) critic and no 1/dt
/// rate scaling. DPPO uses the sqrt-KL controller of CPPO.
IterationRecord discrete_baseline_iteration(TrainState& state, const EnvModel& env, const AlgoConfig& config,
                                            const State& x0, DiscreteAlgo algo);

/// Action distribution produced by soft-q improvement; variance 0 is a point mass.
struct ActionDistribution {
    double mean;
    double variance;
};

/// For q(a) = c2 a^2 + c1 a + c0 at a fixed state: the Boltzmann distribution
/// proportional to exp(q / gamma), i.e. Normal(-c1 / (2 c2), gamma / (-2 c2)),
/// or the point mass at the argmax when gamma = 0. Throws NumericError when c2 >= 0.
ActionDistribution soft_q_improvement(const std::function<double(double)>& q_of_action, double gamma);

/// Soft-q improvement of a quadratic value function on the LQ model, read back
/// as a Gaussian-linear policy from the improved distributions at x = 0 and x = 1.
GaussianLinearPolicy soft_q_policy(const QuadraticCritic& v, const LQParams& p);

}  // namespace cpo
