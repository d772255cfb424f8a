#include "cpo/algorithms.hpp"

#include <algorithm>
#include <cmath>

#include "cpo/lq_oracle.hpp"

namespace cpo {

namespace {

constexpr double kSqrtKlFloor = 1e-12;

void require_finite(const Policy& policy, std::size_t k) {
    if (!is_finite(policy)) throw NumericError("policy parameters became non-finite at iteration " + std::to_string(k));
}

std::vector<State> sample_states(std::span<const RolloutSample> samples) {
    std::vector<State> states;
    states.reserve(samples.size());
    for (const auto& s : samples) states.push_back(s.state);
    return states;
}

}  // namespace

double LearningRate::at(std::size_t k) const {
    const double kk = static_cast<double>(k);
    if (decay == LrDecay::constant || kk <= pivot) return base;
    switch (decay) {
        case LrDecay::table: return std::max(0.0, base * std::log(pivot / kk));
        case LrDecay::inverse: return base * pivot / kk;
        case LrDecay::inverse_sqrt: return base * std::sqrt(pivot / kk);
        case LrDecay::log_ratio: return base * std::log(pivot) / std::log(kk);
        case LrDecay::constant: break;
    }
    return base;
}

void AlgoConfig::validate() const {
    if (grid_steps(T, dt) < 2) throw ConfigError("horizon needs at least two grid points");
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be nonnegative");
    if (J < 1) throw ConfigError("J must be at least 1");
    if (!(delta_radius > 0.0)) throw ConfigError("delta_radius must be positive");
    if (!(epsilon_tol > 0.0)) throw ConfigError("epsilon_tol must be positive");
    if (!(c_penalty_init > 0.0)) throw ConfigError("c_penalty_init must be positive");
    if (!(alpha_policy.base >= 0.0) || !(alpha_critic.base >= 0.0)) throw ConfigError("learning rates must be >= 0");
    if (!(alpha_policy.pivot >= 1.0) || !(alpha_critic.pivot >= 1.0)) throw ConfigError("lr pivot must be >= 1");
}

IterationStreams::IterationStreams(std::uint64_t master, std::size_t k)
    : rollout(derive_seed(master, "rollout", k)), tau(derive_seed(master, "tau", k)) {}

SampleBatch collect_samples(const EnvModel& env, const Policy& policy, Critic& critic, const AlgoConfig& config,
                            const State& x0, double alpha_critic, IterationStreams& streams, bool continuous_critic) {
    SampleBatch batch;
    batch.traj = rollout(env, policy, x0, config.T, config.dt, streams.rollout);
    if (continuous_critic) {
        mstde_sweep(critic, batch.traj, alpha_critic, config.beta, config.gamma);
    } else {
        td0_sweep(critic, batch.traj, alpha_critic, config.beta, config.gamma);
    }
    batch.samples.reserve(config.J);
    for (std::size_t j = 0; j < config.J; ++j) {
        const auto tau = sample_rollout_time(config.beta, config.dt, config.T, streams.tau);
        const auto q = q_estimate(critic, batch.traj, tau.index, config.beta);
        batch.samples.push_back({q.state, q.action, q.value, batch.traj.reg_values[tau.index]});
    }
    return batch;
}

ParamVector cpg_gradient(const EnvModel& env, const Policy& policy, std::span<const RolloutSample> samples,
                         double beta, double gamma) {
    ParamVector grad = ParamVector::Zero(parameter_count(policy));
    if (samples.empty()) return grad;
    for (const auto& s : samples) {
        grad += score(policy, s.state, s.action) * (s.q_hat + gamma * s.p_hat);
        if (gamma != 0.0) grad += gamma * regularizer_gradient(env, policy, s.state, s.action);
    }
    return grad / (beta * static_cast<double>(samples.size()));
}

ParamVector dpg_gradient(const EnvModel& env, const Policy& policy, std::span<const RolloutSample> samples,
                         double gamma, double dt) {
    ParamVector grad = ParamVector::Zero(parameter_count(policy));
    if (samples.empty()) return grad;
    for (const auto& s : samples) {
        grad += score(policy, s.state, s.action) * (s.q_hat * dt + gamma * s.p_hat * dt);
        if (gamma != 0.0) grad += gamma * dt * regularizer_gradient(env, policy, s.state, s.action);
    }
    return grad / static_cast<double>(samples.size());
}

double mean_sqrt_kl(const Policy& theta_new, const Policy& theta_old, std::span<const State> states) {
    if (states.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& x : states) sum += std::sqrt(kl_divergence(theta_old, theta_new, x));
    return sum / static_cast<double>(states.size());
}

double mean_kl(const Policy& theta_new, const Policy& theta_old, std::span<const State> states) {
    if (states.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& x : states) sum += kl_divergence(theta_old, theta_new, x);
    return sum / static_cast<double>(states.size());
}

ParamVector penalty_gradient(const Policy& theta_new, const Policy& theta_old, std::span<const State> states,
                             KlVariant variant) {
    ParamVector grad = ParamVector::Zero(parameter_count(theta_new));
    if (states.empty()) return grad;
    for (const auto& x : states) {
        const ParamVector g = kl_gradient_wrt_second(theta_old, theta_new, x);
        if (variant == KlVariant::linear) {
            grad += g;
        } else {
            const double kl = std::max(kl_divergence(theta_old, theta_new, x), kSqrtKlFloor);
            grad += g / (2.0 * std::sqrt(kl));
        }
    }
    return grad / static_cast<double>(states.size());
}

PenaltyState penalty_adapt(PenaltyState c, double measured, double delta, double epsilon) {
    if (measured >= (1.0 + epsilon) * delta) {
        c.c_penalty *= 2.0;
    } else if (measured <= delta / (1.0 + epsilon)) {
        c.c_penalty /= 2.0;
    }
    return c;
}

IterationRecord cpg_iteration(TrainState& state, const EnvModel& env, const AlgoConfig& config, const State& x0) {
    IterationStreams streams(config.seed, state.k);
    const auto batch =
        collect_samples(env, state.policy, state.critic, config, x0, config.alpha_critic.at(state.k), streams);
    const ParamVector grad = cpg_gradient(env, state.policy, batch.samples, config.beta, config.gamma);

    IterationRecord rec;
    rec.k = state.k;
    rec.grad_norm = grad.norm();
    rec.states = sample_states(batch.samples);
    const Policy old = state.policy;
    state.policy = with_parameters(old, parameters(old) + config.alpha_policy.at(state.k) * grad);
    require_finite(state.policy, state.k);
    rec.mean_kl_step = mean_sqrt_kl(state.policy, old, rec.states);
    rec.theta = parameters(state.policy);
    rec.phi = parameters(state.critic);
    ++state.k;
    return rec;
}

namespace {

/// s_steps of ascent on scale * L(theta) - C D(theta || old), then adaptation.
IterationRecord penalized_update(TrainState& state, const EnvModel& env, const AlgoConfig& config,
                                 const SampleBatch& batch, KlVariant variant, double surrogate_scale) {
    IterationRecord rec;
    rec.k = state.k;
    rec.states = sample_states(batch.samples);
    const Policy old = state.policy;
    const double lr = config.alpha_policy.at(state.k);
    const double c = state.penalty.c_penalty;

    const ParamVector theta_k = parameters(old);
    const auto measure = [&](const Policy& p) {
        return variant == KlVariant::sqrt ? mean_sqrt_kl(p, old, rec.states) : mean_kl(p, old, rec.states);
    };

    Policy current = old;
    for (std::size_t s = 0; s < config.s_steps; ++s) {
        ParamVector grad = surrogate_scale * surrogate_gradient(env, current, old, batch.samples, config.beta,
                                                                config.gamma);
        if (s == 0) rec.grad_norm = grad.norm();
        if (config.inner == InnerOptimizer::gradient) {
            grad -= c * penalty_gradient(current, old, rec.states, variant);
            current = with_parameters(current, parameters(current) + lr * grad);
        } else {
            const Policy forward = with_parameters(current, parameters(current) + lr * grad);
            require_finite(forward, state.k);
            const ParamVector delta = parameters(forward) - theta_k;
            const double n2 = delta.squaredNorm();
            const double d = measure(forward);
            double t = 0.0;
            if (n2 > 0.0) {
                t = variant == KlVariant::sqrt ? std::max(0.0, 1.0 - lr * c * d / n2) : n2 / (n2 + 2.0 * lr * c * d);
            }
            current = with_parameters(old, theta_k + t * delta);
        }
        require_finite(current, state.k);
    }
    if (config.s_steps > 0) rec.skipped_ratios = surrogate_objective(env, current, old, batch.samples, config.beta,
                                                                     config.gamma).skipped;

    rec.mean_kl_step = measure(current);
    state.penalty = penalty_adapt(state.penalty, rec.mean_kl_step, config.delta_radius, config.epsilon_tol);
    state.policy = current;
    rec.c_penalty = state.penalty.c_penalty;
    rec.theta = parameters(state.policy);
    rec.phi = parameters(state.critic);
    ++state.k;
    return rec;
}

}  // namespace

IterationRecord cppo_iteration(TrainState& state, const EnvModel& env, const AlgoConfig& config, const State& x0,
                               KlVariant variant) {
    IterationStreams streams(config.seed, state.k);
    const auto batch =
        collect_samples(env, state.policy, state.critic, config, x0, config.alpha_critic.at(state.k), streams);
    return penalized_update(state, env, config, batch, variant, 1.0);
}

IterationRecord discrete_baseline_iteration(TrainState& state, const EnvModel& env, const AlgoConfig& config,
                                            const State& x0, DiscreteAlgo algo) {
    IterationStreams streams(config.seed, state.k);
    const auto batch = collect_samples(env, state.policy, state.critic, config, x0, config.alpha_critic.at(state.k),
                                       streams, false);
    if (algo == DiscreteAlgo::dppo) {
        // The discrete surrogate is the continuous one times beta dt.
        return penalized_update(state, env, config, batch, KlVariant::sqrt, config.beta * config.dt);
    }

    const ParamVector grad = dpg_gradient(env, state.policy, batch.samples, config.gamma, config.dt);
    IterationRecord rec;
    rec.k = state.k;
    rec.grad_norm = grad.norm();
    rec.states = sample_states(batch.samples);
    const Policy old = state.policy;
    state.policy = with_parameters(old, parameters(old) + config.alpha_policy.at(state.k) * grad);
    require_finite(state.policy, state.k);
    rec.mean_kl_step = mean_sqrt_kl(state.policy, old, rec.states);
    rec.theta = parameters(state.policy);
    rec.phi = parameters(state.critic);
    ++state.k;
    return rec;
}

ActionDistribution soft_q_improvement(const std::function<double(double)>& q_of_action, double gamma) {
    if (!(gamma >= 0.0)) throw ParameterError("temperature must be nonnegative");
    const double q0 = q_of_action(0.0);
    const double qp = q_of_action(1.0);
    const double qm = q_of_action(-1.0);
    const double c2 = 0.5 * (qp + qm) - q0;
    const double c1 = 0.5 * (qp - qm);
    if (!(c2 < 0.0)) throw NumericError("soft-q improvement undefined: q is not strictly concave in the action");
    return {-c1 / (2.0 * c2), gamma / (-2.0 * c2)};
}

GaussianLinearPolicy soft_q_policy(const QuadraticCritic& v, const LQParams& p) {
    const auto at = [&](double x) {
        return soft_q_improvement([&](double a) { return analytic_q(v, p, x, a); }, p.gamma);
    };
    const auto d0 = at(0.0);
    const auto d1 = at(1.0);
    if (!(d0.variance > 0.0)) throw NumericError("soft-q policy needs gamma > 0");
    return {d1.mean - d0.mean, d0.mean, std::log(d0.variance)};
}

}  // namespace cpo
