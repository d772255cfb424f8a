#include "cpo/occupation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Eigenvalues>

namespace cpo {

std::size_t grid_index(double tau, double dt) {
    const double ratio = tau / dt;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::floor(ratio));
}

RolloutTime sample_rollout_time(double beta, double dt, double T, Rng& rng) {
    if (!(beta > 0.0)) throw ConfigError("rollout times need beta > 0");
    const std::size_t n = grid_steps(T, dt);
    if (n < 2) throw ConfigError("rollout times need at least two grid points");
    constexpr int kMaxDraws = 1000000;
    for (int draw = 0; draw < kMaxDraws; ++draw) {
        const double tau = rng.exponential(beta);
        const std::size_t idx = grid_index(tau, dt);
        if (idx <= n - 2) return {tau, static_cast<double>(idx) * dt, idx};
    }
    throw ConfigError("rollout time rejection exceeded 10^6 draws; the horizon T is far too short for beta");
}

double OccupationEstimate::total_mass() const {
    double sum = underflow + overflow;
    for (double m : masses) sum += m;
    return sum;
}

double OccupationEstimate::integrate(const std::function<double(double)>& phi) const {
    double sum = underflow * phi(bin_edges.front()) + overflow * phi(bin_edges.back());
    for (std::size_t b = 0; b < masses.size(); ++b) {
        const double lo = bin_edges[b];
        const double hi = bin_edges[b + 1];
        // Three-point Gauss-Legendre bin average; it never evaluates phi on a bin edge.
        const double mid = 0.5 * (lo + hi);
        const double off = 0.5 * (hi - lo) * std::sqrt(0.6);
        const double avg = (5.0 * phi(mid - off) + 8.0 * phi(mid) + 5.0 * phi(mid + off)) / 18.0;
        sum += masses[b] * avg;
    }
    return sum;
}

OccupationEstimate occupation_histogram(std::span<const Trajectory> trajectories, double beta, const BinSpec& bins) {
    if (trajectories.empty()) throw ConfigError("occupation histogram needs at least one trajectory");
    if (!(bins.hi > bins.lo) || bins.count == 0) throw ConfigError("invalid histogram window");
    const double dt = trajectories.front().dt;
    const std::size_t n = trajectories.front().n_steps;
    for (const auto& t : trajectories) {
        if (t.dt != dt || t.n_steps != n) throw ConfigError("occupation histogram needs a common grid");
    }

    OccupationEstimate est;
    est.normalization = 1.0 / beta;
    est.masses.assign(bins.count, 0.0);
    est.bin_edges.resize(bins.count + 1);
    const double width = (bins.hi - bins.lo) / static_cast<double>(bins.count);
    for (std::size_t b = 0; b <= bins.count; ++b) est.bin_edges[b] = bins.lo + width * static_cast<double>(b);

    const double scale = dt / static_cast<double>(trajectories.size());
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = std::exp(-beta * static_cast<double>(i) * dt) * scale;

    for (const auto& traj : trajectories) {
        for (std::size_t i = 0; i < n; ++i) {
            const double x = traj.states[i](bins.coordinate);
            if (x < bins.lo) {
                est.underflow += weights[i];
            } else if (x >= bins.hi) {
                est.overflow += weights[i];
            } else {
                const auto b = std::min(static_cast<std::size_t>((x - bins.lo) / width), bins.count - 1);
                est.masses[b] += weights[i];
            }
        }
    }
    return est;
}

double discrete_discount_mass(double beta, double dt, std::size_t n_steps) {
    const double q = std::exp(-beta * dt);
    return dt * -std::expm1(static_cast<double>(n_steps) * std::log(q)) / -std::expm1(-beta * dt);
}

double discounted_sum(const Trajectory& traj, const StateFunction& phi, double beta) {
    double sum = 0.0;
    for (std::size_t i = 0; i < traj.n_steps; ++i) {
        sum += std::exp(-beta * traj.time(i)) * phi(traj.states[i]);
    }
    return sum * traj.dt;
}

Estimate discounted_functional(const EnvModel& env, const Policy& policy, const StateFunction& phi,
                               const State& x0, double beta, double T, double dt, std::size_t n_traj, Rng& rng) {
    MeanAccumulator acc;
    for (std::size_t j = 0; j < n_traj; ++j) acc.add(discounted_sum(rollout(env, policy, x0, T, dt, rng), phi, beta));
    return acc.estimate();
}

PerformanceDifference performance_difference_mc(const EnvModel& env, const Policy& pi_hat, const Policy& pi,
                                                const QProvider& q_pi, const State& x0, double beta,
                                                const PerformanceDifferenceConfig& config, Rng& rng) {
    PerformanceDifference out;

    // Direct side: paired rollouts sharing one seed per pair.
    MeanAccumulator lhs;
    for (std::size_t j = 0; j < config.n_lhs; ++j) {
        const std::uint64_t seed = rng.engine()();
        Rng r1(seed);
        Rng r2(seed);
        const double eta_hat = discounted_return(rollout(env, pi_hat, x0, config.T, config.dt, r1), beta, config.gamma);
        const double eta = discounted_return(rollout(env, pi, x0, config.T, config.dt, r2), beta, config.gamma);
        lhs.add(eta_hat - eta);
    }
    out.lhs = lhs.estimate();

    // Occupation side: states from beta d^{pi_hat}, fresh actions from pi_hat.
    MeanAccumulator rhs;
    for (std::size_t j = 0; j < config.n_rhs; ++j) {
        const Trajectory traj = rollout(env, pi_hat, x0, config.T, config.dt, rng);
        double sum = 0.0;
        for (std::size_t m = 0; m < config.taus_per_rollout; ++m) {
            const auto tau = sample_rollout_time(beta, config.dt, config.T, rng);
            const State& x = traj.states[tau.index];
            const double a = sample_action(pi_hat, x, rng);
            sum += q_pi(x, a) + config.gamma * regularizer_rate(env, pi_hat, x, a);
        }
        rhs.add(sum / static_cast<double>(config.taus_per_rollout) / beta);
    }
    out.rhs = rhs.estimate();
    return out;
}

namespace {

/// log pi_new(a|x) - log pi_old(a|x), or nullopt when the ratio is unusable.
std::optional<double> log_ratio(const Policy& pi_new, const Policy& pi_old, const State& x, double a) {
    const auto lo = log_density(pi_old, x, a);
    const auto ln = log_density(pi_new, x, a);
    if (!lo.in_support || !ln.in_support || !std::isfinite(lo.value) || !std::isfinite(ln.value)) return std::nullopt;
    const double lr = ln.value - lo.value;
    if (lr > std::log(std::numeric_limits<double>::max()) - 1.0) return std::nullopt;
    return lr;
}

}  // namespace

SurrogateValue surrogate_objective(const EnvModel& env, const Policy& pi_new, const Policy& pi_old,
                                   std::span<const RolloutSample> samples, double beta, double gamma) {
    SurrogateValue out;
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& s : samples) {
        const auto lr = log_ratio(pi_new, pi_old, s.state, s.action);
        if (!lr) {
            ++out.skipped;
            continue;
        }
        sum += std::exp(*lr) * (s.q_hat + gamma * regularizer_rate(env, pi_new, s.state, s.action));
        ++used;
    }
    out.value = used > 0 ? sum / static_cast<double>(used) / beta : 0.0;
    out.warning = static_cast<double>(out.skipped) > 0.01 * static_cast<double>(samples.size());
    return out;
}

ParamVector surrogate_gradient(const EnvModel& env, const Policy& pi_new, const Policy& pi_old,
                               std::span<const RolloutSample> samples, double beta, double gamma) {
    ParamVector grad = ParamVector::Zero(parameter_count(pi_new));
    std::size_t used = 0;
    for (const auto& s : samples) {
        const auto lr = log_ratio(pi_new, pi_old, s.state, s.action);
        if (!lr) continue;
        const double ratio = std::exp(*lr);
        const double p_new = regularizer_rate(env, pi_new, s.state, s.action);
        // d/dtheta [ratio (q + gamma p)] = ratio [score (q + gamma p) + gamma dp/dtheta]
        grad += ratio * (score(pi_new, s.state, s.action) * (s.q_hat + gamma * p_new) +
                         gamma * regularizer_gradient(env, pi_new, s.state, s.action));
        ++used;
    }
    if (used > 0) grad /= static_cast<double>(used) * beta;
    return grad;
}

namespace {

Matrix symmetric_sqrt(const Matrix& m) {
    if (m.rows() == 1) {
        Matrix s(1, 1);
        s(0, 0) = std::sqrt(std::max(m(0, 0), 0.0));
        return s;
    }
    const Eigen::MatrixXd dense = m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
    const Eigen::VectorXd root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return Matrix(solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().transpose());
}

}  // namespace

CoupledPair coupled_rollout(const EnvModel& env, const Policy& pi, const Policy& pi_hat, const State& x0, double T,
                            double dt, Rng& rng) {
    const std::size_t n = grid_steps(T, dt);
    CoupledPair pair;
    pair.dt = dt;
    pair.x.reserve(n);
    pair.y.reserve(n);
    State x = x0;
    State y = x0;
    State z(env.state_dim);
    const double sqdt = std::sqrt(dt);
    for (std::size_t i = 0; i < n; ++i) {
        pair.x.push_back(x);
        pair.y.push_back(y);
        if (i + 1 == n) break;
        for (int k = 0; k < env.state_dim; ++k) z(k) = rng.normal();
        const auto cx = aggregated_coefficients(env, pi, x);
        const auto cy = aggregated_coefficients(env, pi_hat, y);
        x = x + cx.drift * dt + symmetric_sqrt(cx.diffusion_sq) * z * sqdt;
        y = y + cy.drift * dt + symmetric_sqrt(cy.diffusion_sq) * z * sqdt;
        if (!x.allFinite() || !y.allFinite()) throw RolloutDiverged(i, "non-finite coupled state");
    }
    return pair;
}

std::vector<MomentPoint> coupled_gap_moments(const EnvModel& env, const Policy& pi, const Policy& pi_hat,
                                             const State& x0, double T, double dt, std::size_t n_pairs, Rng& rng) {
    const std::size_t n = grid_steps(T, dt);
    std::vector<MeanAccumulator> acc(n);
    for (std::size_t j = 0; j < n_pairs; ++j) {
        const auto pair = coupled_rollout(env, pi, pi_hat, x0, T, dt, rng);
        for (std::size_t i = 0; i < n; ++i) acc[i].add((pair.x[i] - pair.y[i]).squaredNorm());
    }
    std::vector<MomentPoint> curve(n);
    for (std::size_t i = 0; i < n; ++i) curve[i] = {static_cast<double>(i) * dt, acc[i].mean(), acc[i].se()};
    return curve;
}

double gronwall_bound(const GronwallConstants& c, double t) {
    const double rate = 2.0 * c.c_b + 1.0 + 2.0 * c.c_sigma * c.c_sigma;
    return c.c_pi / rate * std::expm1(rate * t);
}

GronwallReport gronwall_check(std::span<const MomentPoint> curve, const std::optional<GronwallConstants>& constants) {
    GronwallReport report;
    if (!constants) return report;
    report.status = CheckStatus::pass;
    report.worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& pt : curve) {
        const double margin = gronwall_bound(*constants, pt.t) - (pt.mean - 3.0 * pt.se);
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            report.worst_time = pt.t;
        }
    }
    // Rounding slack only: the curve and the bound are both exactly zero when C_pi = 0.
    if (report.worst_margin < -1e-12) report.status = CheckStatus::fail;
    return report;
}

GronwallConstants synthetic_gronwall_constants(const SyntheticBoundedParams& p, const GaussianLinearPolicy& pi,
                                               const GaussianLinearPolicy& pi_hat) {
    static const GaussHermiteRule rule = standard_normal_rule(32);
    auto mean_tanh = [](const GaussianLinearPolicy& g, double x) {
        const State s = scalar_state(x);
        const double m = g.mean(s);
        const double sd = std::sqrt(g.variance());
        double sum = 0.0;
        for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) sum += rule.weights(i) * std::tanh(m + sd * rule.nodes(i));
        return sum;
    };
    auto gap = [&](double x) { return std::abs(mean_tanh(pi, x) - mean_tanh(pi_hat, x)); };

    double sup = std::max(gap(-1e6), gap(1e6));
    constexpr int kGrid = 4001;
    for (int i = 0; i < kGrid; ++i) sup = std::max(sup, gap(-20.0 + 40.0 * i / (kGrid - 1)));

    GronwallConstants c;
    c.c_b = std::max(p.lambda, 0.0) + std::max({pi.theta1, pi_hat.theta1, 0.0});
    c.c_sigma = 0.0;
    c.c_pi = sup * sup;
    return c;
}

void write_checks_csv(std::ostream& os, std::span<const CheckResult> checks) {
    os << "check,lhs,rhs,se,pass\n";
    const auto old = os.precision(12);
    for (const auto& c : checks) {
        os << c.name << ',' << c.lhs << ',' << c.rhs << ',' << c.se << ',' << (c.pass ? "pass" : "fail") << '\n';
    }
    os.precision(old);
}

}  // namespace cpo
