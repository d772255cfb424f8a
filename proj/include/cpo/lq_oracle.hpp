#pragma once

#include <array>
#include <span>

#include "cpo/critic.hpp"
#include "cpo/env.hpp"
#include "cpo/policy.hpp"

namespace cpo {

/// Closed-form optimum of the entropy-regularized scalar LQ problem.
struct LQSolution {
    double k0 = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
    double mean_slope = 0.0;
    double mean_intercept = 0.0;
    double variance = 0.0;

    /// theta = (mean_slope, mean_intercept, log(variance)).
    GaussianLinearPolicy policy() const;
    QuadraticCritic value_function() const { return {k0, k1, k2}; }
};

/// Throws ConfigError on a negative discriminant and NumericError when N - k2 D^2 <= 0.
LQSolution solve_lq(const LQParams& p);

/// Value function constants of an arbitrary Gaussian-linear policy, from
/// matching the x^2, x and constant terms of the HJ equation. Throws
/// ConfigError when beta <= 2(A + B theta1) + (C + D theta1)^2 (infinite value).
QuadraticCritic policy_value(const LQParams& p, const GaussianLinearPolicy& policy);

/// q(x, a) = b V' + sigma^2 V'' / 2 + r - beta V for V given by `v`.
double analytic_q(const QuadraticCritic& v, const LQParams& p, double x, double a);
double analytic_q(const LQSolution& sol, const LQParams& p, double x, double a);

/// beta V - b~ V' - sigma~^2 V'' / 2 - r~ - gamma p~ at x, using the Gaussian
/// closed forms of the aggregated quantities.
double hj_residual(const QuadraticCritic& critic, const GaussianLinearPolicy& policy, const LQParams& p, double x);

/// The residual as a polynomial in x: {c0, c1, c2} with residual = c0 + c1 x + c2 x^2.
std::array<double, 3> hj_residual_coefficients(const QuadraticCritic& critic, const GaussianLinearPolicy& policy,
                                               const LQParams& p);

/// Mean over `states` of KL(pi(.|x) || pi*(.|x)). With this argument order
/// eta(pi) - eta(pi*) = -(gamma / beta) E_{x ~ beta d^pi} KL.
double kl_to_optimal(const GaussianLinearPolicy& policy, const LQSolution& sol, std::span<const State> states);

}  // namespace cpo
