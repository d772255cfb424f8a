#pragma once

#include <cstddef>
#include <variant>

#include "cpo/mlp.hpp"
#include "cpo/rollout.hpp"
#include "cpo/types.hpp"

namespace cpo {

/// V(x) = phi2 x^2 / 2 + phi1 x + phi0 on a scalar state.
struct QuadraticCritic {
    double phi0 = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;
};

/// Scalar-output MLP value function.
struct MLPCritic {
    Mlp net;

    /// Network {state_dim, hidden, 1} with weights uniform on [-0.5, 0.5].
    static MLPCritic random_init(int state_dim, int hidden, Rng& rng);
};

using Critic = std::variant<QuadraticCritic, MLPCritic>;

struct QEstimate {
    double value;
    State state;
    double action;
    std::size_t index;
};

double value(const Critic& critic, const State& x);
ParamVector value_gradient(const Critic& critic, const State& x);

ParamVector parameters(const Critic& critic);
Critic with_parameters(const Critic& critic, const ParamVector& p);

/// One martingale (MSTDE) step on the grid pair (t_i, t_{i+1}):
///   phi += alpha dV/dphi(X_i) [V(X_{i+1}) - V(X_i) + (r_i + gamma p_i - beta V(X_i)) dt].
Critic mstde_update(const Critic& critic, const Trajectory& traj, std::size_t i, double alpha, double beta,
                    double gamma);

/// In-place sweep of mstde_update over i = 0..n_steps-2.
void mstde_sweep(Critic& critic, const Trajectory& traj, double alpha, double beta, double gamma);

/// Discrete-time TD(0) sweep with per-step reward (r_i + gamma p_i) dt and
/// per-step discount exp(-beta dt).
void td0_sweep(Critic& critic, const Trajectory& traj, double alpha, double beta, double gamma);

/// (r_i dt + exp(-beta dt) V(X_{i+1}) - V(X_i)) / dt.
QEstimate q_estimate(const Critic& critic, const Trajectory& traj, std::size_t i, double beta);

}  // namespace cpo
