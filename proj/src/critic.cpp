#include "cpo/critic.hpp"

#include <cmath>

namespace cpo {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void check_index(const Trajectory& traj, std::size_t i) {
    if (i + 1 >= traj.n_steps) throw InternalError("critic step index needs a successor grid point");
}

}  // namespace

MLPCritic MLPCritic::random_init(int state_dim, int hidden, Rng& rng) {
    return MLPCritic{Mlp::uniform_init({state_dim, hidden, 1}, rng)};
}

double value(const Critic& critic, const State& x) {
    return std::visit(overloaded{
                          [&](const QuadraticCritic& c) { return 0.5 * c.phi2 * x(0) * x(0) + c.phi1 * x(0) + c.phi0; },
                          [&](const MLPCritic& c) { return c.net.forward(x)(0); },
                      },
                      critic);
}

ParamVector value_gradient(const Critic& critic, const State& x) {
    return std::visit(overloaded{
                          [&](const QuadraticCritic&) {
                              ParamVector g(3);
                              g << 1.0, x(0), 0.5 * x(0) * x(0);
                              return g;
                          },
                          [&](const MLPCritic& c) { return c.net.backward(x, Eigen::VectorXd::Ones(1)); },
                      },
                      critic);
}

ParamVector parameters(const Critic& critic) {
    return std::visit(overloaded{
                          [](const QuadraticCritic& c) {
                              ParamVector p(3);
                              p << c.phi0, c.phi1, c.phi2;
                              return p;
                          },
                          [](const MLPCritic& c) { return ParamVector(c.net.parameters()); },
                      },
                      critic);
}

Critic with_parameters(const Critic& critic, const ParamVector& p) {
    return std::visit(overloaded{
                          [&](const QuadraticCritic&) -> Critic {
                              if (p.size() != 3) throw ParameterError("quadratic critic takes 3 parameters");
                              return QuadraticCritic{p(0), p(1), p(2)};
                          },
                          [&](const MLPCritic& c) -> Critic {
                              MLPCritic out = c;
                              out.net.set_parameters(p);
                              return out;
                          },
                      },
                      critic);
}

Critic mstde_update(const Critic& critic, const Trajectory& traj, std::size_t i, double alpha, double beta,
                    double gamma) {
    Critic out = critic;
    check_index(traj, i);
    const State& x = traj.states[i];
    const double v = value(critic, x);
    const double dt = traj.dt;
    const double residual = value(critic, traj.states[i + 1]) - v +
                            (traj.rewards[i] + gamma * traj.reg_values[i] - beta * v) * dt;
    if (alpha == 0.0 || residual == 0.0) return out;
    return with_parameters(critic, parameters(critic) + alpha * residual * value_gradient(critic, x));
}

void mstde_sweep(Critic& critic, const Trajectory& traj, double alpha, double beta, double gamma) {
    if (alpha == 0.0 || traj.n_steps < 2) return;
    // The quadratic case is the hot loop of every LQ iteration; keep it allocation free.
    if (auto* q = std::get_if<QuadraticCritic>(&critic)) {
        const double dt = traj.dt;
        for (std::size_t i = 0; i + 1 < traj.n_steps; ++i) {
            const double x = traj.states[i](0);
            const double y = traj.states[i + 1](0);
            const double vx = 0.5 * q->phi2 * x * x + q->phi1 * x + q->phi0;
            const double vy = 0.5 * q->phi2 * y * y + q->phi1 * y + q->phi0;
            const double step = alpha * (vy - vx + (traj.rewards[i] + gamma * traj.reg_values[i] - beta * vx) * dt);
            q->phi0 += step;
            q->phi1 += step * x;
            q->phi2 += step * 0.5 * x * x;
        }
        return;
    }
    auto& net = std::get<MLPCritic>(critic).net;
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
    for (std::size_t i = 0; i + 1 < traj.n_steps; ++i) {
        const State& x = traj.states[i];
        const double vx = net.forward(x)(0);
        const double vy = net.forward(traj.states[i + 1])(0);
        const double residual = vy - vx + (traj.rewards[i] + gamma * traj.reg_values[i] - beta * vx) * traj.dt;
        net.set_parameters(net.parameters() + alpha * residual * net.backward(x, one));
    }
}

void td0_sweep(Critic& critic, const Trajectory& traj, double alpha, double beta, double gamma) {
    if (alpha == 0.0) return;
    const double discount = std::exp(-beta * traj.dt);
    for (std::size_t i = 0; i + 1 < traj.n_steps; ++i) {
        const State& x = traj.states[i];
        const double residual = (traj.rewards[i] + gamma * traj.reg_values[i]) * traj.dt +
                                discount * value(critic, traj.states[i + 1]) - value(critic, x);
        critic = with_parameters(critic, parameters(critic) + alpha * residual * value_gradient(critic, x));
    }
}

QEstimate q_estimate(const Critic& critic, const Trajectory& traj, std::size_t i, double beta) {
    check_index(traj, i);
    const double dt = traj.dt;
    const double q =
        (traj.rewards[i] * dt + std::exp(-beta * dt) * value(critic, traj.states[i + 1]) - value(critic, traj.states[i])) /
        dt;
    return {q, traj.states[i], traj.actions[i], i};
}

}  // namespace cpo
