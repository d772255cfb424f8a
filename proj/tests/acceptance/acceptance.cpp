// Acceptance gate: runs the twelve criteria and prints one PASS/FAIL line each.
// Usage: cpo_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cpo/algorithms.hpp"
#include "cpo/harness.hpp"
#include "cpo/lq_oracle.hpp"
#include "cpo/occupation.hpp"
#include "../support.hpp"

using namespace cpo;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

GaussianLinearPolicy theta_policy(const ParamVector& t) { return {t(0), t(1), t(2)}; }

const LQParams kLq{};

// ---------------------------------------------------------------------------

Outcome oracle_constants() {
    const auto start = std::chrono::steady_clock::now();
    const auto sol = solve_lq(kLq);
    const double us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
    const double printed[] = {0.71914874, -0.10555128, -0.53518376, -0.39444872, -0.78889745};
    const double got[] = {sol.k0, sol.k1, sol.k2, sol.mean_slope, sol.mean_intercept};
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) worst = std::max(worst, std::abs(got[i] - printed[i]));
    return {worst <= 1e-6 && us < 1000.0,
            "max |diff| " + num(worst) + ", solve " + num(us, 3) + " us, theta3* = log(" + num(sol.variance, 10) +
                ") = " + num(std::log(sol.variance), 10)};
}

Outcome hj_residual_zero() {
    const auto sol = solve_lq(kLq);
    double worst = 0.0;
    for (double x : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
        worst = std::max(worst, std::abs(hj_residual(sol.value_function(), sol.policy(), kLq, x)));
    }
    double coeff = 0.0;
    for (double c : hj_residual_coefficients(sol.value_function(), sol.policy(), kLq)) coeff = std::max(coeff, std::abs(c));
    return {worst < 1e-9 && coeff < 1e-9, "max |residual| " + num(worst) + ", max |coefficient| " + num(coeff)};
}

Outcome occupation_identity() {
    RunConfig c = parse_config("env = ou\nalgo = verify\nx0 = 1\nverify_trajectories = 10000\n");
    const auto checks = run_verify(c, 1);
    bool pass = true;
    std::string detail;
    int lemma = 0;
    for (const auto& ch : checks) {
        if (ch.name.rfind("lemma1_", 0) != 0) continue;
        ++lemma;
        pass = pass && ch.pass;
        detail += ch.name.substr(7) + " |diff| " + num(std::abs(ch.lhs - ch.rhs), 3) + " se " + num(ch.se, 3) + "; ";
    }
    return {pass && lemma == 5, detail + "(10^4 trajectories per side, T=25, dt=0.005)"};
}

GaussianLinearPolicy random_near_optimum(Rng& rng, double radius) {
    const auto star = solve_lq(kLq).policy();
    Eigen::Vector3d u(rng.normal(), rng.normal(), rng.normal());
    u *= radius * std::cbrt(rng.uniform()) / u.norm();
    return {star.theta1 + u(0), star.theta2 + u(1), star.theta3 + u(2)};
}

Outcome performance_difference() {
    const auto env = make_lq_env(kLq);
    Rng draw(derive_seed(4, "acceptance-pairs"));
    PerformanceDifferenceConfig cfg;
    cfg.n_lhs = 2000;
    cfg.n_rhs = 2000;
    int passed = 0;
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const auto pi = random_near_optimum(draw, 0.5);
        const auto pi_hat = random_near_optimum(draw, 0.5);
        const QuadraticCritic v = policy_value(kLq, pi);
        Rng rng(derive_seed(4, "acceptance-performance-difference", i));
        const auto r = performance_difference_mc(
            env, pi_hat, pi, [&](const State& x, double a) { return analytic_q(v, kLq, x(0), a); }, scalar_state(0.0),
            kLq.beta, cfg, rng);
        const double z = std::abs(r.lhs.mean - r.rhs.mean) / combined_se(r.lhs, r.rhs);
        worst = std::max(worst, z);
        if (z <= 3.0) ++passed;
    }
    return {passed == 10, std::to_string(passed) + "/10 pairs within 3 combined SE, worst z=" + num(worst, 3)};
}

/// Mean and SE per component of the oracle-q policy-gradient estimator.
std::pair<ParamVector, ParamVector> oracle_gradient(const GaussianLinearPolicy& pi, std::size_t rollouts,
                                                    std::size_t taus, std::uint64_t seed) {
    const auto env = make_lq_env(kLq);
    const AlgoConfig a;
    const QuadraticCritic v = policy_value(kLq, pi);
    Rng rng(seed);
    std::vector<MeanAccumulator> acc(3);
    for (std::size_t j = 0; j < rollouts; ++j) {
        const auto traj = rollout(env, pi, scalar_state(0.0), a.T, a.dt, rng);
        std::vector<RolloutSample> samples;
        for (std::size_t m = 0; m < taus; ++m) {
            const auto tau = sample_rollout_time(a.beta, a.dt, a.T, rng);
            const State& x = traj.states[tau.index];
            const double act = traj.actions[tau.index];
            samples.push_back({x, act, analytic_q(v, kLq, x(0), act), traj.reg_values[tau.index]});
        }
        const ParamVector g = cpg_gradient(env, pi, samples, a.beta, a.gamma);
        for (int i = 0; i < 3; ++i) acc[i].add(g(i));
    }
    ParamVector mean(3), se(3);
    for (int i = 0; i < 3; ++i) {
        mean(i) = acc[i].mean();
        se(i) = acc[i].se();
    }
    return {mean, se};
}

/// Central differences of eta with common random numbers, per coordinate.
std::pair<ParamVector, ParamVector> fd_gradient(const GaussianLinearPolicy& pi, std::size_t n, double h,
                                                std::uint64_t seed) {
    const auto env = make_lq_env(kLq);
    const AlgoConfig a;
    ParamVector mean(3), se(3);
    const ParamVector theta = parameters(Policy(pi));
    for (int i = 0; i < 3; ++i) {
        ParamVector up = theta, dn = theta;
        up(i) += h;
        dn(i) -= h;
        MeanAccumulator acc;
        for (std::size_t j = 0; j < n; ++j) {
            const std::uint64_t s = derive_seed(seed, "crn", j);
            Rng r1(s), r2(s);
            const double e1 = discounted_return(rollout(env, theta_policy(up), scalar_state(0.0), a.T, a.dt, r1),
                                                a.beta, a.gamma);
            const double e2 = discounted_return(rollout(env, theta_policy(dn), scalar_state(0.0), a.T, a.dt, r2),
                                                a.beta, a.gamma);
            acc.add((e1 - e2) / (2.0 * h));
        }
        mean(i) = acc.mean();
        se(i) = acc.se();
    }
    return {mean, se};
}

Outcome policy_gradient() {
    const auto star = solve_lq(kLq).policy();
    const std::vector<GaussianLinearPolicy> points{
        {0.0, 0.0, 0.0},
        {star.theta1 + 0.3, star.theta2 - 0.2, star.theta3 + 0.4},
        {star.theta1 - 0.25, star.theta2 + 0.3, star.theta3 - 0.3},
    };
    bool pass = true;
    std::string detail;
    for (std::size_t p = 0; p < points.size(); ++p) {
        const auto [g, gse] = oracle_gradient(points[p], 2000, 20, derive_seed(5, "acceptance-gradient", p));
        const auto [f, fse] = fd_gradient(points[p], 2000, 0.05, derive_seed(5, "acceptance-fd", p));
        double worst = 0.0, se = 0.0;
        for (int i = 0; i < 3; ++i) {
            worst = std::max(worst, std::abs(g(i) - f(i)) / std::hypot(gse(i), fse(i)));
            se = std::max(se, std::hypot(gse(i), fse(i)));
        }
        pass = pass && worst <= 3.0;
        detail += "point" + std::to_string(p) + " |g|=" + num(g.norm(), 3) + " max se " + num(se, 2) + " worst z=" +
                  num(worst, 3) + "; ";
    }
    const auto [g, gse] = oracle_gradient(star, 4000, 20, derive_seed(5, "acceptance-gradient-optimum"));
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(g(i)) / gse(i));
    pass = pass && worst < 3.0;
    detail += "| at optimum |g|=" + num(g.norm(), 3) + " worst z=" + num(worst, 3);
    return {pass, detail};
}

Outcome zero_advantage_and_surrogate() {
    const auto env = make_lq_env(kLq);
    const auto sol = solve_lq(kLq);
    const Policy pi = sol.policy();
    const Critic critic = sol.value_function();
    const AlgoConfig a;
    Rng rng(derive_seed(6, "acceptance-f0"));
    MeanAccumulator acc;
    for (int j = 0; j < 2000; ++j) {
        const auto traj = rollout(env, pi, scalar_state(0.0), a.T, a.dt, rng);
        double sum = 0.0;
        for (std::size_t m = 0; m < a.J; ++m) {
            const auto tau = sample_rollout_time(a.beta, a.dt, a.T, rng);
            sum += q_estimate(critic, traj, tau.index, a.beta).value + a.gamma * traj.reg_values[tau.index];
        }
        acc.add(sum / static_cast<double>(a.J));
    }
    const double z = std::abs(acc.mean()) / acc.se();

    // Surrogate gradient at theta_new = theta_old against the policy gradient on shared samples.
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 5; ++k) {
        AlgoConfig cfg;
        cfg.seed = 6;
        Critic c = QuadraticCritic{};
        const Policy start = GaussianLinearPolicy{0.1 * static_cast<double>(k), -0.2, -0.5};
        IterationStreams streams(cfg.seed, k);
        const auto batch = collect_samples(env, start, c, cfg, scalar_state(0.0), cfg.alpha_critic.at(k), streams);
        const ParamVector s = surrogate_gradient(env, start, start, batch.samples, cfg.beta, cfg.gamma);
        const ParamVector g = cpg_gradient(env, start, batch.samples, cfg.beta, cfg.gamma);
        worst = std::max(worst, (s - g).cwiseAbs().maxCoeff());
    }
    return {z <= 3.0 && worst <= 1e-8, "mean(q_hat + gamma p) = " + num(acc.mean(), 3) + " (z=" + num(z, 3) +
                                           "), max |surrogate grad - policy grad| = " + num(worst, 3)};
}

// --- learning runs, shared by criteria 7, 8 and 10 ---------------------------

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

struct LqRuns {
    std::vector<SeedResult> cpg, cppo, cppo_nst;
    bool done = false;
};

LqRuns& lq_runs(bool need_nst) {
    static LqRuns runs;
    auto run_all = [](const char* algo) {
        std::vector<SeedResult> out;
        const RunConfig c = parse_config(std::string("env = lq\nalgo = ") + algo + "\n");
        for (auto s : kSeeds) {
            out.push_back(run_seed(c, s));
            std::fprintf(stderr, "  %s seed %llu: %zu rows%s\n", algo, static_cast<unsigned long long>(s),
                         out.back().rows.size(), out.back().diverged ? " (diverged)" : "");
        }
        return out;
    };
    if (!runs.done) {
        runs.cpg = run_all("cpg");
        runs.cppo = run_all("cppo");
        runs.done = true;
    }
    if (need_nst && runs.cppo_nst.empty()) runs.cppo_nst = run_all("cppo-nst");
    return runs;
}

/// Mean KL to the optimum over states drawn from beta d of the policy itself.
double kl_on_own_occupation(const GaussianLinearPolicy& g, std::uint64_t seed) {
    const auto env = make_lq_env(kLq);
    const auto sol = solve_lq(kLq);
    const AlgoConfig a;
    Rng rng(derive_seed(seed, "acceptance-kl"));
    std::vector<State> states;
    try {
        for (int j = 0; j < 20; ++j) {
            const auto traj = rollout(env, g, scalar_state(0.0), a.T, a.dt, rng);
            for (int m = 0; m < 100; ++m) states.push_back(traj.states[sample_rollout_time(a.beta, a.dt, a.T, rng).index]);
        }
    } catch (const RolloutDiverged&) {
        return std::numeric_limits<double>::infinity();
    }
    return kl_to_optimal(g, sol, states);
}

Outcome convergence_for(const std::vector<SeedResult>& results, const std::string& algo) {
    const auto sol = solve_lq(kLq);
    const GaussianLinearPolicy init{};
    const double l2_init = std::hypot(init.theta1 - sol.mean_slope, init.theta2 - sol.mean_intercept);
    std::vector<double> l2, kl;
    bool every_seed_improves = true;
    std::size_t diverged = 0;
    for (const auto& r : results) {
        if (r.diverged) {
            ++diverged;
            l2.push_back(std::numeric_limits<double>::infinity());
            kl.push_back(std::numeric_limits<double>::infinity());
            every_seed_improves = false;
            continue;
        }
        const auto g = theta_policy(r.checkpoints.back().theta);
        l2.push_back(std::hypot(g.theta1 - sol.mean_slope, g.theta2 - sol.mean_intercept));
        kl.push_back(kl_on_own_occupation(g, r.seed));
        const double kl_init = kl_on_own_occupation(init, r.seed);
        every_seed_improves = every_seed_improves && l2.back() < l2_init && kl.back() < kl_init;
    }
    const double ml2 = median(l2), mkl = median(kl);
    return {ml2 < 0.1 && mkl < 0.05 && every_seed_improves,
            algo + ": median l2 " + num(ml2, 3) + ", median KL " + num(mkl, 3) + ", diverged " +
                std::to_string(diverged) + "/" + std::to_string(results.size()) +
                (every_seed_improves ? ", all seeds improve" : ", not all seeds improve")};
}

Outcome learning_convergence() {
    const auto& runs = lq_runs(false);
    const auto a = convergence_for(runs.cpg, "cpg");
    const auto b = convergence_for(runs.cppo, "cppo");
    return {a.pass && b.pass, a.detail + " | " + b.detail};
}

Outcome penalty_controller() {
    // Unit suite with the LQ defaults.
    const double delta = 0.0002, eps = 0.5;
    bool unit = penalty_adapt({1.0}, 0.0004, delta, eps).c_penalty == 2.0 &&
                penalty_adapt({1.0}, 0.0001, delta, eps).c_penalty == 0.5 &&
                penalty_adapt({1.0}, 0.0002, delta, eps).c_penalty == 1.0;
    Rng rng(8);
    for (int i = 0; i < 10000 && unit; ++i) {
        const double c = std::exp(rng.uniform(-30, 30));
        const double m = delta * std::exp(rng.uniform(-3, 3));
        const double out = penalty_adapt({c}, m, delta, eps).c_penalty;
        const bool dbl = m >= (1 + eps) * delta, half = !dbl && m <= delta / (1 + eps);
        unit = out == (dbl ? 2 * c : half ? c / 2 : c) && penalty_adapt({2 * c}, 0.0, delta, eps).c_penalty == c;
    }

    // Band occupancy over the first seed's full CPPO run; iterations lost to
    // divergence count as out of band.
    const auto& run = lq_runs(false).cppo.front();
    const AlgoConfig a;
    const std::size_t warmup = a.K_iters / 10;
    std::size_t in_band = 0;
    for (const auto& row : run.rows) {
        if (row.k < warmup || row.diverged || !row.mean_kl_step) continue;
        const double d = *row.mean_kl_step;
        if (d >= delta / (1 + eps) && d <= (1 + eps) * delta) ++in_band;
    }
    const double frac = static_cast<double>(in_band) / static_cast<double>(a.K_iters - warmup);
    return {unit && frac >= 0.6, std::string("unit suite ") + (unit ? "ok" : "FAILED") + ", in-band fraction " +
                                     num(frac, 3) + " over iterations " + std::to_string(warmup) + ".." +
                                     std::to_string(a.K_iters - 1) +
                                     (run.diverged ? " (run diverged at k=" + std::to_string(run.rows.back().k) + ")"
                                                   : "")};
}

Outcome gronwall() {
    const RunConfig c = parse_config("env = synthetic-bounded\nalgo = verify\nx0 = 0.5\n");
    const auto checks = run_verify(c, 9);
    bool envelope = false, negative = false;
    std::string detail;
    for (const auto& ch : checks) {
        if (ch.name == "gronwall_envelope") {
            envelope = ch.pass;
            detail += "envelope margin " + num(ch.lhs, 3);
        }
        if (ch.name == "gronwall_halved_violated") {
            negative = ch.pass;
            detail += ", halved-constant margin " + num(ch.lhs, 3);
        }
    }
    return {envelope && negative, detail};
}

Outcome sqrt_vs_linear() {
    const auto& runs = lq_runs(true);
    std::size_t complete_sqrt = 0, complete_linear = 0;
    for (const auto& r : runs.cppo) complete_sqrt += !r.diverged;
    for (const auto& r : runs.cppo_nst) complete_linear += !r.diverged;
    const bool pass = complete_sqrt == kSeeds.size() && complete_linear == kSeeds.size();
    std::string detail = "completed: sqrt " + std::to_string(complete_sqrt) + "/5, linear " +
                         std::to_string(complete_linear) + "/5; divergence iterations sqrt [";
    for (const auto& r : runs.cppo) detail += r.diverged ? std::to_string(r.rows.back().k) + " " : "- ";
    detail += "] linear [";
    for (const auto& r : runs.cppo_nst) detail += r.diverged ? std::to_string(r.rows.back().k) + " " : "- ";
    return {pass, detail + "]"};
}

Outcome pair_trading() {
    bool pass = true;
    std::string detail;
    for (const char* algo : {"cpg", "cppo"}) {
        const RunConfig c = parse_config(std::string("env = pairs\nalgo = ") + algo + "\n");
        std::vector<double> z;
        for (std::uint64_t s : {1, 2, 3}) {
            const TrainState init = initial_train_state(c, s);
            Rng rng(derive_seed(s, "acceptance-initial-eval"));
            const auto& a = c.algo_config;
            const Estimate before = mc_performance(make_env(c), init.policy, initial_state(c), a.beta, a.gamma, a.T,
                                                   a.dt, c.mc_eval_samples, rng);
            const auto r = run_seed(c, s);
            if (r.diverged || !r.rows.back().eta_hat) {
                z.push_back(-std::numeric_limits<double>::infinity());
                continue;
            }
            const double after = *r.rows.back().eta_hat;
            z.push_back((after - before.mean) / std::hypot(before.se, *r.rows.back().eta_se));
            detail += std::string(algo) + " seed " + std::to_string(s) + " " + num(before.mean, 4) + "->" +
                      num(after, 4) + " ";
        }
        const double mz = median(z);
        pass = pass && mz > 3.0;
        detail += "(median z=" + num(mz, 3) + ") ";
    }
    return {pass, detail};
}

Outcome gradient_plumbing() {
    const auto r = cpo::testing::run_gradient_probes(100, 12);
    const double worst = std::max({r.gaussian_score, r.beta_score, r.gaussian_kl, r.beta_kl, r.quadratic_critic,
                                   r.mlp_critic});
    return {worst < 1e-5, "max relative error: gaussian score " + num(r.gaussian_score, 2) + ", beta score " +
                              num(r.beta_score, 2) + ", gaussian kl " + num(r.gaussian_kl, 2) + ", beta kl " +
                              num(r.beta_kl, 2) + ", quadratic critic " + num(r.quadratic_critic, 2) +
                              ", mlp critic " + num(r.mlp_critic, 2)};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "oracle constants", oracle_constants},
        {2, "HJ residual", hj_residual_zero},
        {3, "occupation identity", occupation_identity},
        {4, "performance difference", performance_difference},
        {5, "policy gradient", policy_gradient},
        {6, "zero advantage / surrogate match", zero_advantage_and_surrogate},
        {7, "learning convergence", learning_convergence},
        {8, "penalty controller", penalty_controller},
        {9, "coupling and Gronwall bound", gronwall},
        {10, "sqrt vs linear KL", sqrt_vs_linear},
        {11, "pair-trading improvement", pair_trading},
        {12, "gradient plumbing", gradient_plumbing},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !out.pass;
        std::printf("criterion %2d %s  %s: %s [%.1f s]\n", c.id, out.pass ? "PASS" : "FAIL", c.name,
                    out.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d criteria failed\n", failed);
    return 0;
}
