#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpo/env.hpp"
#include "cpo/estimate.hpp"
#include "cpo/policy.hpp"
#include "cpo/random.hpp"
#include "cpo/rollout.hpp"

namespace cpo {

/// An Exponential(beta) time snapped down to the sampling grid.
struct RolloutTime {
    double tau_raw;
    double tau_grid;
    std::size_t index;
};

/// Draws tau ~ Exp(beta) and floors it to the grid. Draws whose index exceeds
/// N - 2 (no successor grid point inside the horizon) are redrawn; more than
/// 10^6 consecutive rejections throw ConfigError.
RolloutTime sample_rollout_time(double beta, double dt, double T, Rng& rng);

/// Grid index of a raw time: floor(tau / dt), snapping exact multiples that
/// floating-point division puts just below an integer.
std::size_t grid_index(double tau, double dt);

struct BinSpec {
    double lo;
    double hi;
    std::size_t count;
    int coordinate = 0;
};

/// Histogram of the discounted occupation measure d (total mass about 1/beta).
struct OccupationEstimate {
    std::vector<double> bin_edges;
    std::vector<double> masses;
    double underflow = 0.0;
    double overflow = 0.0;
    /// Mass target for the continuous-time measure: 1 / beta.
    double normalization = 0.0;

    double total_mass() const;
    /// Sum over bins of mass times the bin average of phi (3-point Gauss-Legendre); overflow
    /// masses use phi at the window edges.
    double integrate(const std::function<double(double)>& phi) const;
};

/// Each grid point contributes exp(-beta t_i) dt / #trajectories to its bin.
OccupationEstimate occupation_histogram(std::span<const Trajectory> trajectories, double beta, const BinSpec& bins);

/// sum_i exp(-beta t_i) dt over the grid of n_steps points.
double discrete_discount_mass(double beta, double dt, std::size_t n_steps);

using StateFunction = std::function<double(const State&)>;

/// E int_0^T exp(-beta s) phi(X_s) ds as the grid sum, averaged over n_traj rollouts.
Estimate discounted_functional(const EnvModel& env, const Policy& policy, const StateFunction& phi,
                               const State& x0, double beta, double T, double dt, std::size_t n_traj, Rng& rng);

/// Per-trajectory grid sum used by discounted_functional.
double discounted_sum(const Trajectory& traj, const StateFunction& phi, double beta);

/// q(x, a) for a fixed reference policy.
using QProvider = std::function<double(const State&, double)>;

struct PerformanceDifferenceConfig {
    double T = 25.0;
    double dt = 0.005;
    double gamma = 0.1;
    std::size_t n_lhs = 4000;   // rollouts per policy for the direct difference
    std::size_t n_rhs = 4000;   // rollouts under pi_hat for the occupation side
    std::size_t taus_per_rollout = 8;
};

struct PerformanceDifference {
    Estimate lhs;
    Estimate rhs;
};

/// lhs = eta(pi_hat) - eta(pi) by direct Monte Carlo (paired rollouts);
/// rhs = E_{x ~ beta d^{pi_hat}, a ~ pi_hat}[q(x, a; pi) + gamma p(x, a, pi_hat)] / beta.
PerformanceDifference performance_difference_mc(const EnvModel& env, const Policy& pi_hat, const Policy& pi,
                                                const QProvider& q_pi, const State& x0, double beta,
                                                const PerformanceDifferenceConfig& config, Rng& rng);

/// One on-policy sample (X_tau, a_tau) with its advantage-rate estimate and
/// the regularizer under the sampling policy.
struct RolloutSample {
    State state;
    double action;
    double q_hat;
    double p_hat;
};

struct SurrogateValue {
    double value = 0.0;
    std::size_t skipped = 0;
    bool warning = false;  // more than 1% of samples skipped
};

/// (1/beta) mean[pi_new(a|x)/pi_old(a|x) (q_hat + gamma p(x, a, pi_new))];
/// the eta(pi_old) constant is omitted.
SurrogateValue surrogate_objective(const EnvModel& env, const Policy& pi_new, const Policy& pi_old,
                                   std::span<const RolloutSample> samples, double beta, double gamma);

/// Gradient of surrogate_objective with respect to the parameters of pi_new.
ParamVector surrogate_gradient(const EnvModel& env, const Policy& pi_new, const Policy& pi_old,
                               std::span<const RolloutSample> samples, double beta, double gamma);

/// Two exploratory-SDE paths driven by the same Gaussian increments from the same x0.
struct CoupledPair {
    double dt = 0.0;
    std::vector<State> x;  // under pi
    std::vector<State> y;  // under pi_hat
};

CoupledPair coupled_rollout(const EnvModel& env, const Policy& pi, const Policy& pi_hat, const State& x0, double T,
                            double dt, Rng& rng);

struct MomentPoint {
    double t;
    double mean;
    double se;
};

/// E||X_t - Y_t||^2 on the grid over n_pairs independent coupled pairs.
std::vector<MomentPoint> coupled_gap_moments(const EnvModel& env, const Policy& pi, const Policy& pi_hat,
                                             const State& x0, double T, double dt, std::size_t n_pairs, Rng& rng);

struct GronwallConstants {
    double c_b;      // drift monotonicity
    double c_sigma;  // diffusion Lipschitz
    double c_pi;     // sup drift gap^2 + 2 sup diffusion gap^2
};

enum class CheckStatus { pass, fail, not_applicable };

struct GronwallReport {
    CheckStatus status = CheckStatus::not_applicable;
    /// min over t of bound(t) - (mean(t) - 3 se(t)); negative means violated.
    double worst_margin = 0.0;
    double worst_time = 0.0;
};

/// C_pi / C (exp(C t) - 1) with C = 2 c_b + 1 + 2 c_sigma^2.
double gronwall_bound(const GronwallConstants& c, double t);

GronwallReport gronwall_check(std::span<const MomentPoint> curve, const std::optional<GronwallConstants>& constants);

/// Constants of the synthetic bounded environment for two Gaussian-linear
/// policies: c_b = max(lambda, 0) + max(theta1, theta1_hat, 0), c_sigma = 0,
/// c_pi = sup_x |b~(x, pi) - b~(x, pi_hat)|^2 (the diffusion gap is zero).
/// The supremum is taken over a grid on [-20, 20] plus the x -> +-inf limits.
GronwallConstants synthetic_gronwall_constants(const SyntheticBoundedParams& p, const GaussianLinearPolicy& pi,
                                               const GaussianLinearPolicy& pi_hat);

/// One row of a verification report.
struct CheckResult {
    std::string name;
    double lhs;
    double rhs;
    double se;
    bool pass;
};

void write_checks_csv(std::ostream& os, std::span<const CheckResult> checks);

}  // namespace cpo
