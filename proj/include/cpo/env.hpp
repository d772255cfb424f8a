#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>

#include "cpo/types.hpp"

namespace cpo {

enum class RegularizerKind { none, entropy };

/// Scalar action domain: the whole real line or the interval [-ell, ell].
struct ActionSpace {
    bool bounded = false;
    double ell = 0.0;

    static ActionSpace real_line() { return {}; }
    static ActionSpace interval(double ell) { return {true, ell}; }

    bool contains(double a) const { return !bounded || (a >= -ell && a <= ell); }
};

/// Linear-quadratic model: b = Ax + Ba, sigma = Cx + Da,
/// r = -(M/2 x^2 + R x a + N/2 a^2 + P x + Q a), entropy regularizer.
struct LQParams {
    double A = -1.0;
    double B = 0.0;
    double C = 0.0;
    double D = 1.0;
    double M = 2.0;
    double N = 2.0;
    double R = 1.0;
    double P = 1.0;
    double Q = 2.0;
    double beta = 1.0;
    double gamma = 0.1;

    /// Throws ConfigError naming the first violated inequality.
    void validate() const;
};

/// Pair-trading spread/wealth model. The defaults are the reference parameter set.
struct PairTradingParams {
    double k = 0.01;
    double theta_mean = 7.0;
    double eta = 0.1;
    double rho = 0.3;
    double sigma = 1.0;
    double r_f = 0.01;
    double ell = 5.0;

    void validate() const;
};

/// Bounded test environment for the coupling checks:
/// b(x, a) = lambda * tanh(x) + tanh(a), sigma(x, a) = sigma.
struct SyntheticBoundedParams {
    double lambda = 0.25;
    double sigma = 0.2;
};

/// Coefficient bundle of one controlled SDE dX = b(X,a) dt + sigma(X,a) dB.
struct EnvModel {
    std::string name;
    int state_dim = 1;
    int noise_dim = 1;
    std::function<State(const State&, double)> drift;
    std::function<Matrix(const State&, double)> diffusion;
    std::function<double(const State&, double)> reward;
    RegularizerKind regularizer = RegularizerKind::none;
    ActionSpace action_space;
    /// Extra state constraint checked after every step (e.g. wealth above -1).
    std::function<bool(const State&)> admissible;
    /// Set for LQ environments so closed-form aggregations can be used.
    std::optional<LQParams> lq;
};

/// x + b(x,a) dt + sigma(x,a) z sqrt(dt); throws RolloutDiverged on a
/// non-finite or inadmissible result.
State euler_step(const EnvModel& env, const State& x, double a, double dt, const State& z,
                 std::size_t step = 0);

EnvModel make_lq_env(const LQParams& p);
EnvModel make_pair_trading_env(const PairTradingParams& p);
EnvModel make_synthetic_bounded_env(const SyntheticBoundedParams& p);

/// dX = -X dt + dB, zero reward, no regularizer. The action is ignored.
EnvModel make_ou_env();

}  // namespace cpo
