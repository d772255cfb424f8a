#pragma once

#include <variant>

#include "cpo/env.hpp"
#include "cpo/mlp.hpp"
#include "cpo/random.hpp"
#include "cpo/types.hpp"

namespace cpo {

/// pi(.|x) = Normal(theta1 x + theta2, exp(theta3)). exp(theta3) is the variance.
struct GaussianLinearPolicy {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double theta3 = 0.0;

    double mean(const State& x) const { return theta1 * x(0) + theta2; }
    double variance() const;
};

/// Beta policy on [-ell, ell] whose shape parameters come from a shared MLP
/// with two outputs, mapped through softplus(.) + 1e-3.
class BetaMLPPolicy {
public:
    static constexpr double kShapeFloor = 1e-3;

    BetaMLPPolicy(Mlp net, double ell);

    /// Network {state_dim, hidden, 2} with weights uniform on [-0.5, 0.5].
    static BetaMLPPolicy random_init(int state_dim, int hidden, double ell, Rng& rng);

    struct Shape {
        double alpha;
        double beta;
        double dalpha_draw;  // d alpha / d raw output
        double dbeta_draw;
    };
    Shape shape(const State& x) const;

    const Mlp& net() const { return net_; }
    double ell() const { return ell_; }
    BetaMLPPolicy with_parameters(const ParamVector& p) const;

private:
    Mlp net_;
    double ell_;
};

using Policy = std::variant<GaussianLinearPolicy, BetaMLPPolicy>;

struct LogDensity {
    double value;
    bool in_support;
};

/// Aggregated (exploratory) coefficients: b~ = E_pi b(x, a), sigma~^2 = E_pi sigma sigma^T.
struct AggregatedCoefficients {
    State drift;
    Matrix diffusion_sq;
};

ParamVector parameters(const Policy& policy);
Policy with_parameters(const Policy& policy, const ParamVector& p);
Eigen::Index parameter_count(const Policy& policy);
bool is_finite(const Policy& policy);

double sample_action(const Policy& policy, const State& x, Rng& rng);

LogDensity log_density(const Policy& policy, const State& x, double a);

/// d/dtheta log pi_theta(a|x). Throws ParameterError when a is outside the support.
ParamVector score(const Policy& policy, const State& x, double a);

/// KL(p(.|x) || q(.|x)). Both policies must be of the same family.
double kl_divergence(const Policy& p, const Policy& q, const State& x);

/// Gradient of KL(p(.|x) || q(.|x)) with respect to the parameters of q.
ParamVector kl_gradient_wrt_second(const Policy& p, const Policy& q, const State& x);

/// Differential entropy of pi(.|x).
double entropy(const Policy& policy, const State& x);

/// p(x, a, pi): 0 without regularizer, -log pi(a|x) for the entropy regularizer.
/// Out-of-support actions give +infinity.
double regularizer_rate(const EnvModel& env, const Policy& policy, const State& x, double a);

/// d/dtheta p(x, a, pi_theta) at fixed a.
ParamVector regularizer_gradient(const EnvModel& env, const Policy& policy, const State& x, double a);

/// Closed form for LQ with a Gaussian policy, 32-point Gauss-Hermite for other
/// Gaussian cases, and 10^4-sample Monte Carlo (fixed internal seed) otherwise.
/// Throws NumericError when the Monte Carlo standard error exceeds 1e-2 (1 + |estimate|).
AggregatedCoefficients aggregated_coefficients(const EnvModel& env, const Policy& policy, const State& x);

/// Nodes and weights for E f(Z), Z ~ N(0, 1).
struct GaussHermiteRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};
GaussHermiteRule standard_normal_rule(int points = 32);

}  // namespace cpo
