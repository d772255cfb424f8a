#include "cpo/lq_oracle.hpp"

#include <cmath>
#include <numbers>

namespace cpo {

namespace {

double gaussian_entropy(double variance) {
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

}  // namespace

GaussianLinearPolicy LQSolution::policy() const { return {mean_slope, mean_intercept, std::log(variance)}; }

LQSolution solve_lq(const LQParams& p) {
    p.validate();
    const double bcd = p.B + p.C * p.D;
    const double excess = p.beta - (2.0 * p.A + p.C * p.C);
    const double lin = excess * p.N + 2.0 * bcd * p.R - p.D * p.D * p.M;
    const double den = bcd * bcd + excess * p.D * p.D;
    const double disc = lin * lin - 4.0 * den * (p.R * p.R - p.M * p.N);
    if (disc < 0.0) throw ConfigError("LQ value quadratic has a negative discriminant");
    if (den == 0.0) throw ConfigError("LQ value quadratic is degenerate ((B + C D)^2 + (beta - 2A - C^2) D^2 = 0)");

    LQSolution s;
    s.k2 = 0.5 * lin / den - 0.5 * std::sqrt(disc) / den;
    const double curvature = p.N - s.k2 * p.D * p.D;
    if (!(curvature > 0.0)) throw NumericError("LQ optimal policy is degenerate (N - k2 D^2 <= 0)");
    s.k1 = (p.P * curvature - p.Q * p.R) / (s.k2 * p.B * bcd + (p.A - p.beta) * curvature - p.B * p.R);
    const double offset = s.k1 * p.B - p.Q;
    s.k0 = offset * offset / (2.0 * p.beta * curvature) +
           p.gamma / (2.0 * p.beta) *
               (std::log(2.0 * std::numbers::pi * std::numbers::e * p.gamma / curvature) - 1.0);
    s.mean_slope = (s.k2 * bcd - p.R) / curvature;
    s.mean_intercept = offset / curvature;
    s.variance = p.gamma / curvature;
    return s;
}

QuadraticCritic policy_value(const LQParams& p, const GaussianLinearPolicy& pi) {
    const double v = pi.variance();
    const double a1 = p.A + p.B * pi.theta1;
    const double a0 = p.B * pi.theta2;
    const double s1 = p.C + p.D * pi.theta1;
    const double s0 = p.D * pi.theta2;
    const double quad_den = p.beta - 2.0 * a1 - s1 * s1;
    const double lin_den = p.beta - a1;
    if (!(quad_den > 0.0) || !(lin_den > 0.0)) {
        throw ConfigError("policy is not admissible: beta <= 2(A + B theta1) + (C + D theta1)^2");
    }
    const double l2 = p.M + 2.0 * p.R * pi.theta1 + p.N * pi.theta1 * pi.theta1;
    const double l1 = p.R * pi.theta2 + p.N * pi.theta1 * pi.theta2 + p.P + p.Q * pi.theta1;
    const double l0 = 0.5 * p.N * (pi.theta2 * pi.theta2 + v) + p.Q * pi.theta2;

    QuadraticCritic c;
    c.phi2 = -l2 / quad_den;
    c.phi1 = (c.phi2 * (a0 + s1 * s0) - l1) / lin_den;
    c.phi0 = (a0 * c.phi1 + 0.5 * c.phi2 * (s0 * s0 + p.D * p.D * v) - l0 + p.gamma * gaussian_entropy(v)) / p.beta;
    return c;
}

double analytic_q(const QuadraticCritic& v, const LQParams& p, double x, double a) {
    const double dv = v.phi2 * x + v.phi1;
    const double val = 0.5 * v.phi2 * x * x + v.phi1 * x + v.phi0;
    const double sig = p.C * x + p.D * a;
    const double r = -(0.5 * p.M * x * x + p.R * x * a + 0.5 * p.N * a * a + p.P * x + p.Q * a);
    return (p.A * x + p.B * a) * dv + 0.5 * sig * sig * v.phi2 + r - p.beta * val;
}

double analytic_q(const LQSolution& sol, const LQParams& p, double x, double a) {
    return analytic_q(sol.value_function(), p, x, a);
}

double hj_residual(const QuadraticCritic& c, const GaussianLinearPolicy& pi, const LQParams& p, double x) {
    const double m = pi.mean(scalar_state(x));
    const double v = pi.variance();
    const double val = 0.5 * c.phi2 * x * x + c.phi1 * x + c.phi0;
    const double dv = c.phi2 * x + c.phi1;
    const double drift = p.A * x + p.B * m;
    const double sig_mean = p.C * x + p.D * m;
    const double diff_sq = sig_mean * sig_mean + p.D * p.D * v;
    const double reward = -(0.5 * p.M * x * x + p.R * x * m + 0.5 * p.N * (m * m + v) + p.P * x + p.Q * m);
    return p.beta * val - drift * dv - 0.5 * diff_sq * c.phi2 - reward - p.gamma * gaussian_entropy(v);
}

std::array<double, 3> hj_residual_coefficients(const QuadraticCritic& c, const GaussianLinearPolicy& pi,
                                               const LQParams& p) {
    const double v = pi.variance();
    const double a1 = p.A + p.B * pi.theta1;
    const double a0 = p.B * pi.theta2;
    const double s1 = p.C + p.D * pi.theta1;
    const double s0 = p.D * pi.theta2;
    const double c2 = 0.5 * p.beta * c.phi2 - a1 * c.phi2 - 0.5 * c.phi2 * s1 * s1 +
                      (0.5 * p.M + p.R * pi.theta1 + 0.5 * p.N * pi.theta1 * pi.theta1);
    const double c1 = p.beta * c.phi1 - a1 * c.phi1 - a0 * c.phi2 - c.phi2 * s1 * s0 +
                      (p.R * pi.theta2 + p.N * pi.theta1 * pi.theta2 + p.P + p.Q * pi.theta1);
    const double c0 = p.beta * c.phi0 - a0 * c.phi1 - 0.5 * c.phi2 * (s0 * s0 + p.D * p.D * v) +
                      (0.5 * p.N * (pi.theta2 * pi.theta2 + v) + p.Q * pi.theta2) - p.gamma * gaussian_entropy(v);
    return {c0, c1, c2};
}

double kl_to_optimal(const GaussianLinearPolicy& policy, const LQSolution& sol, std::span<const State> states) {
    if (states.empty()) return 0.0;
    const Policy pi = policy;
    const Policy opt = sol.policy();
    double sum = 0.0;
    for (const auto& x : states) sum += kl_divergence(pi, opt, x);
    return sum / static_cast<double>(states.size());
}

}  // namespace cpo
