#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "cpo/critic.hpp"
#include "cpo/mlp.hpp"
#include "cpo/policy.hpp"
#include "cpo/random.hpp"

namespace cpo::testing {

/// Beta policy on [-ell, ell] whose shapes are (alpha, beta) at every state.
inline BetaMLPPolicy constant_beta_policy(double alpha, double beta, double ell, int state_dim = 1, int hidden = 4) {
    const auto inverse_softplus = [](double y) { return std::log(std::expm1(y)); };
    Mlp net({state_dim, hidden, 2});
    ParamVector p = ParamVector::Zero(net.parameter_count());
    p(p.size() - 2) = inverse_softplus(alpha - BetaMLPPolicy::kShapeFloor);
    p(p.size() - 1) = inverse_softplus(beta - BetaMLPPolicy::kShapeFloor);
    net.set_parameters(p);
    return BetaMLPPolicy(net, ell);
}

/// Central differences of f around p with step h.
inline ParamVector central_difference(const std::function<double(const ParamVector&)>& f, const ParamVector& p,
                                      double h = 1e-6) {
    ParamVector g(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        ParamVector up = p, dn = p;
        up(i) += h;
        dn(i) -= h;
        g(i) = (f(up) - f(dn)) / (2.0 * h);
    }
    return g;
}

/// max |analytic - fd| / max |fd|, guarded against an all-zero reference.
inline double relative_error(const ParamVector& analytic, const ParamVector& fd) {
    const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
    return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

/// Worst relative error over n random probes of each gradient.
struct ProbeReport {
    double gaussian_score = 0.0;
    double beta_score = 0.0;
    double gaussian_kl = 0.0;
    double beta_kl = 0.0;
    double quadratic_critic = 0.0;
    double mlp_critic = 0.0;
};

inline ProbeReport run_gradient_probes(int n, std::uint64_t seed) {
    Rng rng(seed);
    ProbeReport r;
    const auto state2 = [&] {
        State x(2);
        x << rng.uniform(5.0, 9.0), rng.uniform(-0.5, 2.0);
        return x;
    };
    for (int i = 0; i < n; ++i) {
        {
            const GaussianLinearPolicy g{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-2, 1)};
            const State x = scalar_state(rng.uniform(-2, 2));
            const double a = g.mean(x) + std::sqrt(g.variance()) * rng.normal();
            const Policy pol = g;
            const auto f = [&](const ParamVector& p) { return log_density(with_parameters(pol, p), x, a).value; };
            r.gaussian_score = std::max(r.gaussian_score,
                                        relative_error(score(pol, x, a), central_difference(f, parameters(pol))));

            const Policy other = GaussianLinearPolicy{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-2, 1)};
            const auto fk = [&](const ParamVector& p) { return kl_divergence(other, with_parameters(pol, p), x); };
            r.gaussian_kl = std::max(r.gaussian_kl, relative_error(kl_gradient_wrt_second(other, pol, x),
                                                                   central_difference(fk, parameters(pol))));
        }
        {
            const Policy pol = BetaMLPPolicy::random_init(2, 32, 5.0, rng);
            const State x = state2();
            const double a = rng.uniform(-4.75, 4.75);
            const auto f = [&](const ParamVector& p) { return log_density(with_parameters(pol, p), x, a).value; };
            r.beta_score =
                std::max(r.beta_score, relative_error(score(pol, x, a), central_difference(f, parameters(pol))));

            const Policy other = BetaMLPPolicy::random_init(2, 32, 5.0, rng);
            const auto fk = [&](const ParamVector& p) { return kl_divergence(other, with_parameters(pol, p), x); };
            r.beta_kl = std::max(r.beta_kl, relative_error(kl_gradient_wrt_second(other, pol, x),
                                                           central_difference(fk, parameters(pol))));
        }
        {
            const Critic c = QuadraticCritic{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            const State x = scalar_state(rng.uniform(-3, 3));
            const auto f = [&](const ParamVector& p) { return value(with_parameters(c, p), x); };
            r.quadratic_critic = std::max(r.quadratic_critic,
                                          relative_error(value_gradient(c, x), central_difference(f, parameters(c))));
        }
        {
            const Critic c = MLPCritic::random_init(2, 32, rng);
            const State x = state2();
            const auto f = [&](const ParamVector& p) { return value(with_parameters(c, p), x); };
            r.mlp_critic =
                std::max(r.mlp_critic, relative_error(value_gradient(c, x), central_difference(f, parameters(c))));
        }
    }
    return r;
}

}  // namespace cpo::testing
