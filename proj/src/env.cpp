#include "cpo/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cpo {

void LQParams::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("LQ parameters violate " + what); };
    if (!(N > 0.0)) fail("N > 0");
    if (!(M >= 0.0)) fail("M >= 0");
    if (!(R * R < M * N)) fail("R^2 < M N");
    if (!(beta > 0.0)) fail("beta > 0");
    if (!(gamma >= 0.0)) fail("gamma >= 0");
    const double bound = 2.0 * A + C * C + std::max((D * D * R * R - 2.0 * N * R * (B + C * D)) / N, 0.0);
    if (!(beta > bound)) {
        std::ostringstream os;
        os << "beta > 2A + C^2 + max((D^2 R^2 - 2 N R (B + C D)) / N, 0) (beta = " << beta
           << ", bound = " << bound << ")";
        fail(os.str());
    }
}

void PairTradingParams::validate() const {
    if (!(k >= 0.0)) throw ConfigError("pair-trading parameters violate k >= 0");
    if (!(eta > 0.0)) throw ConfigError("pair-trading parameters violate eta > 0");
    if (!(ell > 0.0)) throw ConfigError("pair-trading parameters violate ell > 0");
}

State euler_step(const EnvModel& env, const State& x, double a, double dt, const State& z, std::size_t step) {
    State next = x + env.drift(x, a) * dt + env.diffusion(x, a) * z * std::sqrt(dt);
    if (!next.allFinite()) throw RolloutDiverged(step, "non-finite state in " + env.name);
    if (env.admissible && !env.admissible(next)) throw RolloutDiverged(step, "inadmissible state in " + env.name);
    return next;
}

EnvModel make_lq_env(const LQParams& p) {
    p.validate();
    EnvModel env;
    env.name = "lq";
    env.state_dim = 1;
    env.noise_dim = 1;
    env.drift = [p](const State& x, double a) { return scalar_state(p.A * x(0) + p.B * a); };
    env.diffusion = [p](const State& x, double a) {
        Matrix s(1, 1);
        s(0, 0) = p.C * x(0) + p.D * a;
        return s;
    };
    env.reward = [p](const State& s, double a) {
        const double x = s(0);
        return -(0.5 * p.M * x * x + p.R * x * a + 0.5 * p.N * a * a + p.P * x + p.Q * a);
    };
    env.regularizer = RegularizerKind::entropy;
    env.action_space = ActionSpace::real_line();
    env.lq = p;
    return env;
}

EnvModel make_pair_trading_env(const PairTradingParams& p) {
    p.validate();
    EnvModel env;
    env.name = "pairs";
    env.state_dim = 2;
    env.noise_dim = 1;
    // State is (S, W). Both equations share the single Brownian increment.
    env.drift = [p](const State& x, double a) {
        const double reversion = p.k * (p.theta_mean - x(0));
        State d(2);
        d(0) = reversion;
        d(1) = a * x(1) * (reversion + 0.5 * p.eta * p.eta + p.rho * p.sigma * p.eta + p.r_f);
        return d;
    };
    // The wealth diffusion carries no action factor.
    env.diffusion = [p](const State& x, double) {
        Matrix s(2, 1);
        s(0, 0) = p.eta;
        s(1, 0) = p.eta * x(1);
        return s;
    };
    env.reward = [](const State& x, double) { return std::log1p(x(1)); };
    env.regularizer = RegularizerKind::none;
    env.action_space = ActionSpace::interval(p.ell);
    env.admissible = [](const State& x) { return x(1) > -1.0; };
    return env;
}

EnvModel make_synthetic_bounded_env(const SyntheticBoundedParams& p) {
    EnvModel env;
    env.name = "synthetic-bounded";
    env.drift = [p](const State& x, double a) { return scalar_state(p.lambda * std::tanh(x(0)) + std::tanh(a)); };
    env.diffusion = [p](const State&, double) {
        Matrix s(1, 1);
        s(0, 0) = p.sigma;
        return s;
    };
    env.reward = [](const State& x, double) { return -0.5 * x(0) * x(0); };
    env.regularizer = RegularizerKind::none;
    env.action_space = ActionSpace::real_line();
    return env;
}

EnvModel make_ou_env() {
    EnvModel env;
    env.name = "ou";
    env.drift = [](const State& x, double) { return scalar_state(-x(0)); };
    env.diffusion = [](const State&, double) { return Matrix::Identity(1, 1); };
    env.reward = [](const State&, double) { return 0.0; };
    env.regularizer = RegularizerKind::none;
    env.action_space = ActionSpace::real_line();
    return env;
}

}  // namespace cpo
