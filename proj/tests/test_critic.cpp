#include <cmath>

#include <gtest/gtest.h>

#include "cpo/critic.hpp"
#include "support.hpp"

using namespace cpo;

namespace {

Trajectory segment(double dt, std::vector<double> xs, std::vector<double> rs, std::vector<double> ps) {
    Trajectory t;
    t.dt = dt;
    t.n_steps = xs.size();
    for (double x : xs) t.states.push_back(scalar_state(x));
    t.actions.assign(xs.size(), 0.0);
    t.rewards = std::move(rs);
    t.reg_values = std::move(ps);
    return t;
}

const QuadraticCritic kOptimal{0.71914874, -0.10555128, -0.53518376};

}  // namespace

TEST(Value, Quadratic) {
    EXPECT_EQ(value(QuadraticCritic{}, scalar_state(3.0)), 0.0);
    EXPECT_DOUBLE_EQ(value(kOptimal, scalar_state(0.0)), 0.71914874);
    EXPECT_NEAR(value(kOptimal, scalar_state(1.0)), 0.34600558, 1e-8);
}

TEST(ValueGradient, Quadratic) {
    const ParamVector g0 = value_gradient(kOptimal, scalar_state(0.0));
    EXPECT_EQ(g0, (ParamVector(3) << 1, 0, 0).finished());
    const ParamVector g2 = value_gradient(kOptimal, scalar_state(2.0));
    EXPECT_EQ(g2, (ParamVector(3) << 1, 2, 2).finished());
}

TEST(ValueGradient, FiniteDifferenceProbes) {
    const auto r = cpo::testing::run_gradient_probes(100, 17);
    EXPECT_LT(r.quadratic_critic, 1e-5);
    EXPECT_LT(r.mlp_critic, 1e-5);
}

TEST(Mstde, ZeroStepLeavesCritic) {
    const auto traj = segment(0.1, {1.0, 1.5}, {-0.5, 0.0}, {0.3, 0.0});
    const Critic c = QuadraticCritic{0.2, -0.1, 0.4};
    EXPECT_EQ(parameters(mstde_update(c, traj, 0, 0.0, 1.0, 0.1)), parameters(c));
}

TEST(Mstde, ZeroResidualFixedPoint) {
    // Constant V = 2 with r = beta V makes the bracket vanish.
    const auto traj = segment(0.1, {1.0, -3.0}, {2.0, 0.0}, {0.0, 0.0});
    const Critic c = QuadraticCritic{2.0, 0.0, 0.0};
    EXPECT_EQ(parameters(mstde_update(c, traj, 0, 0.5, 1.0, 0.0)), parameters(c));
}

TEST(Mstde, HandUpdate) {
    const double dt = 0.1, alpha = 0.05, beta = 1.0, gamma = 0.1;
    const auto traj = segment(dt, {1.0, 1.5}, {-0.5, 0.0}, {0.3, 0.0});
    const QuadraticCritic c{0.2, -0.1, 0.4};
    const double v0 = 0.4 * 1.0 / 2 - 0.1 * 1.0 + 0.2;
    const double v1 = 0.4 * 2.25 / 2 - 0.1 * 1.5 + 0.2;
    const double bracket = v1 - v0 + (-0.5 + gamma * 0.3 - beta * v0) * dt;
    const auto out = std::get<QuadraticCritic>(mstde_update(c, traj, 0, alpha, beta, gamma));
    EXPECT_NEAR(out.phi0, 0.2 + alpha * bracket * 1.0, 1e-12);
    EXPECT_NEAR(out.phi1, -0.1 + alpha * bracket * 1.0, 1e-12);
    EXPECT_NEAR(out.phi2, 0.4 + alpha * bracket * 0.5, 1e-12);
}

TEST(Mstde, SweepAppliesStepsInOrder) {
    const auto traj = segment(0.1, {1.0, 1.5, 0.5}, {-0.5, 0.2, 0.0}, {0.3, 0.1, 0.0});
    Critic manual = QuadraticCritic{0.2, -0.1, 0.4};
    manual = mstde_update(manual, traj, 0, 0.05, 1.0, 0.1);
    manual = mstde_update(manual, traj, 1, 0.05, 1.0, 0.1);
    Critic swept = QuadraticCritic{0.2, -0.1, 0.4};
    mstde_sweep(swept, traj, 0.05, 1.0, 0.1);
    EXPECT_EQ(parameters(swept), parameters(manual));
}

TEST(Td0, HandUpdate) {
    const double dt = 0.1, alpha = 0.05, beta = 1.0, gamma = 0.1;
    const auto traj = segment(dt, {1.0, 1.5}, {-0.5, 0.0}, {0.3, 0.0});
    Critic c = QuadraticCritic{0.2, -0.1, 0.4};
    const double v0 = 0.4 / 2 - 0.1 + 0.2, v1 = 0.4 * 2.25 / 2 - 0.15 + 0.2;
    const double residual = (-0.5 + gamma * 0.3) * dt + std::exp(-beta * dt) * v1 - v0;
    td0_sweep(c, traj, alpha, beta, gamma);
    const auto out = std::get<QuadraticCritic>(c);
    EXPECT_NEAR(out.phi0, 0.2 + alpha * residual, 1e-12);
    EXPECT_NEAR(out.phi2, 0.4 + alpha * residual * 0.5, 1e-12);
}

TEST(QEstimate, Examples) {
    const auto traj = segment(0.005, {0.3, 0.7}, {0.0, 0.0}, {0.0, 0.0});
    EXPECT_EQ(q_estimate(QuadraticCritic{}, traj, 0, 1.0).value, 0.0);
    const auto q = q_estimate(QuadraticCritic{1.0, 0.0, 0.0}, traj, 0, 1.0);
    EXPECT_NEAR(q.value, std::expm1(-0.005) / 0.005, 1e-12);
    EXPECT_NEAR(q.value, -0.9975, 1e-4);
    EXPECT_EQ(q.index, 0u);
    EXPECT_EQ(q.state(0), 0.3);
}
