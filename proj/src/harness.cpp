#include "cpo/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "cpo/lq_oracle.hpp"

namespace cpo {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) throw ConfigError("expected a finite number, got '" + s + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& s) {
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError("expected a nonnegative integer, got '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("expected true or false, got '" + s + "'");
}

std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
    return std::string(buf, ptr);
}

EnvKind parse_env(const std::string& s) {
    if (s == "lq") return EnvKind::lq;
    if (s == "pairs") return EnvKind::pairs;
    if (s == "synthetic-bounded") return EnvKind::synthetic_bounded;
    if (s == "ou") return EnvKind::ou;
    throw ConfigError("unknown env '" + s + "' (lq, pairs, synthetic-bounded, ou)");
}

AlgoKind parse_algo(const std::string& s) {
    if (s == "cpg") return AlgoKind::cpg;
    if (s == "cppo") return AlgoKind::cppo;
    if (s == "cppo-nst") return AlgoKind::cppo_nst;
    if (s == "dpg") return AlgoKind::dpg;
    if (s == "dppo") return AlgoKind::dppo;
    if (s == "verify") return AlgoKind::verify;
    throw ConfigError("unknown algo '" + s + "' (cpg, cppo, cppo-nst, dpg, dppo, verify)");
}

LrDecay parse_decay(const std::string& s) {
    if (s == "table") return LrDecay::table;
    if (s == "inverse") return LrDecay::inverse;
    if (s == "inverse_sqrt") return LrDecay::inverse_sqrt;
    if (s == "log_ratio") return LrDecay::log_ratio;
    if (s == "constant") return LrDecay::constant;
    throw ConfigError("unknown lr_decay '" + s + "' (table, inverse, inverse_sqrt, log_ratio, constant)");
}

InnerOptimizer parse_inner(const std::string& s) {
    if (s == "gradient") return InnerOptimizer::gradient;
    if (s == "proximal") return InnerOptimizer::proximal;
    throw ConfigError("unknown cppo_inner '" + s + "' (gradient, proximal)");
}

void apply_env_defaults(RunConfig& c) {
    AlgoConfig& a = c.algo_config;
    a = AlgoConfig{};
    if (c.env == EnvKind::pairs) {
        a.gamma = 0.0;
        a.K_iters = 200;
        a.delta_radius = 0.025;
        a.alpha_policy.base = 0.005;
    }
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto number = [&t](const std::string& key, auto field) {
            t[key] = [field](RunConfig& c, const std::string& v) { field(c) = parse_double(v); };
        };
        auto count = [&t](const std::string& key, auto field) {
            t[key] = [field](RunConfig& c, const std::string& v) {
                field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(parse_uint(v));
            };
        };
        t["env"] = [](RunConfig&, const std::string& v) { parse_env(v); };
        t["algo"] = [](RunConfig& c, const std::string& v) { c.algo = parse_algo(v); };
        t["seeds"] = [](RunConfig& c, const std::string& v) {
            c.seeds.clear();
            for (const auto& s : split(v, ',')) c.seeds.push_back(parse_uint(s));
        };
        t["seed"] = [](RunConfig& c, const std::string& v) { c.seeds = {parse_uint(v)}; };
        t["out"] = [](RunConfig& c, const std::string& v) { c.out_dir = v; };
        number("T", [](RunConfig& c) -> double& { return c.algo_config.T; });
        number("dt", [](RunConfig& c) -> double& { return c.algo_config.dt; });
        number("beta", [](RunConfig& c) -> double& { return c.algo_config.beta; });
        number("gamma", [](RunConfig& c) -> double& { return c.algo_config.gamma; });
        count("J", [](RunConfig& c) -> std::size_t& { return c.algo_config.J; });
        count("K", [](RunConfig& c) -> std::size_t& { return c.algo_config.K_iters; });
        count("s_steps", [](RunConfig& c) -> std::size_t& { return c.algo_config.s_steps; });
        number("delta", [](RunConfig& c) -> double& { return c.algo_config.delta_radius; });
        number("epsilon", [](RunConfig& c) -> double& { return c.algo_config.epsilon_tol; });
        number("c_penalty_init", [](RunConfig& c) -> double& { return c.algo_config.c_penalty_init; });
        number("lr_policy", [](RunConfig& c) -> double& { return c.algo_config.alpha_policy.base; });
        number("lr_critic", [](RunConfig& c) -> double& { return c.algo_config.alpha_critic.base; });
        t["lr_decay"] = [](RunConfig& c, const std::string& v) {
            c.algo_config.alpha_policy.decay = c.algo_config.alpha_critic.decay = parse_decay(v);
        };
        t["cppo_inner"] = [](RunConfig& c, const std::string& v) { c.algo_config.inner = parse_inner(v); };
        t["lr_pivot"] = [](RunConfig& c, const std::string& v) {
            c.algo_config.alpha_policy.pivot = c.algo_config.alpha_critic.pivot = parse_double(v);
        };
        count("mc_eval_samples", [](RunConfig& c) -> std::size_t& { return c.mc_eval_samples; });
        count("eval_stride", [](RunConfig& c) -> std::size_t& { return c.eval_stride; });
        count("checkpoint_stride", [](RunConfig& c) -> std::size_t& { return c.checkpoint_stride; });
        count("verify_trajectories", [](RunConfig& c) -> std::size_t& { return c.verify_trajectories; });
        count("hidden", [](RunConfig& c) -> int& { return c.hidden; });
        t["record_wall_time"] = [](RunConfig& c, const std::string& v) { c.record_wall_time = parse_bool(v); };
        t["theta0"] = [](RunConfig& c, const std::string& v) {
            const auto parts = split(v, ',');
            if (parts.size() != 3) throw ConfigError("theta0 takes three comma-separated numbers");
            for (int i = 0; i < 3; ++i) c.theta0[i] = parse_double(parts[i]);
        };
        number("x0", [](RunConfig& c) -> double& { return c.x0; });
        number("s0", [](RunConfig& c) -> double& { return c.s0; });
        number("w0", [](RunConfig& c) -> double& { return c.w0; });
        number("lq.A", [](RunConfig& c) -> double& { return c.lq.A; });
        number("lq.B", [](RunConfig& c) -> double& { return c.lq.B; });
        number("lq.C", [](RunConfig& c) -> double& { return c.lq.C; });
        number("lq.D", [](RunConfig& c) -> double& { return c.lq.D; });
        number("lq.M", [](RunConfig& c) -> double& { return c.lq.M; });
        number("lq.N", [](RunConfig& c) -> double& { return c.lq.N; });
        number("lq.R", [](RunConfig& c) -> double& { return c.lq.R; });
        number("lq.P", [](RunConfig& c) -> double& { return c.lq.P; });
        number("lq.Q", [](RunConfig& c) -> double& { return c.lq.Q; });
        number("pairs.k", [](RunConfig& c) -> double& { return c.pairs.k; });
        number("pairs.theta", [](RunConfig& c) -> double& { return c.pairs.theta_mean; });
        number("pairs.eta", [](RunConfig& c) -> double& { return c.pairs.eta; });
        number("pairs.rho", [](RunConfig& c) -> double& { return c.pairs.rho; });
        number("pairs.sigma", [](RunConfig& c) -> double& { return c.pairs.sigma; });
        number("pairs.r_f", [](RunConfig& c) -> double& { return c.pairs.r_f; });
        number("pairs.ell", [](RunConfig& c) -> double& { return c.pairs.ell; });
        number("synthetic.lambda", [](RunConfig& c) -> double& { return c.synthetic.lambda; });
        number("synthetic.sigma", [](RunConfig& c) -> double& { return c.synthetic.sigma; });
        return t;
    }();
    return table;
}

struct Entry {
    std::string key;
    std::string value;
    std::string where;  // "line N" or "override --key"
};

[[noreturn]] void fail_at(const std::string& where, const std::string& what) { throw ConfigError(where + ": " + what); }

}  // namespace

std::string to_string(EnvKind env) {
    switch (env) {
        case EnvKind::lq: return "lq";
        case EnvKind::pairs: return "pairs";
        case EnvKind::synthetic_bounded: return "synthetic-bounded";
        case EnvKind::ou: return "ou";
    }
    return "?";
}

std::string to_string(AlgoKind algo) {
    switch (algo) {
        case AlgoKind::cpg: return "cpg";
        case AlgoKind::cppo: return "cppo";
        case AlgoKind::cppo_nst: return "cppo-nst";
        case AlgoKind::dpg: return "dpg";
        case AlgoKind::dppo: return "dppo";
        case AlgoKind::verify: return "verify";
    }
    return "?";
}

std::string to_string(LrDecay decay) {
    switch (decay) {
        case LrDecay::table: return "table";
        case LrDecay::inverse: return "inverse";
        case LrDecay::inverse_sqrt: return "inverse_sqrt";
        case LrDecay::log_ratio: return "log_ratio";
        case LrDecay::constant: return "constant";
    }
    return "?";
}

RunConfig parse_config(std::string_view text, const ConfigOverrides& overrides) {
    std::vector<Entry> entries;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string body = trim(line);
        if (!body.empty()) {
            const auto eq = body.find('=');
            const std::string where = "line " + std::to_string(line_no);
            if (eq == std::string::npos) fail_at(where, "expected 'key = value'");
            Entry e{trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)), where};
            if (e.key.empty()) fail_at(where, "missing key");
            if (e.value.empty()) fail_at(where, "missing value for '" + e.key + "'");
            entries.push_back(std::move(e));
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    for (const auto& [k, v] : overrides) entries.push_back({k, v, "override --" + k});

    RunConfig c;
    std::map<std::string, std::string> last_seen;
    for (const auto& e : entries) {
        if (!setters().count(e.key)) fail_at(e.where, "unknown key '" + e.key + "'");
        if (e.key == "env") {
            try {
                c.env = parse_env(e.value);
            } catch (const ConfigError& err) {
                fail_at(e.where, err.what());
            }
        }
    }
    apply_env_defaults(c);
    for (const auto& e : entries) {
        try {
            setters().at(e.key)(c, e.value);
        } catch (const ConfigError& err) {
            fail_at(e.where, err.what());
        }
        last_seen[e.key] = e.where;
    }

    auto where_of = [&](std::initializer_list<const char*> keys) {
        std::string w = "defaults";
        for (const char* k : keys) {
            if (auto it = last_seen.find(k); it != last_seen.end()) w = it->second;
        }
        return w;
    };
    auto check = [&](bool ok, std::initializer_list<const char*> keys, const std::string& what) {
        if (!ok) fail_at(where_of(keys), what);
    };

    c.lq.beta = c.algo_config.beta;
    c.lq.gamma = c.algo_config.gamma;
    try {
        grid_steps(c.algo_config.T, c.algo_config.dt);
    } catch (const ConfigError& err) {
        fail_at(where_of({"T", "dt"}), err.what());
    }
    try {
        c.algo_config.validate();
    } catch (const ConfigError& err) {
        fail_at(where_of({"T", "dt", "beta", "gamma", "J", "delta", "epsilon", "c_penalty_init", "lr_policy",
                          "lr_critic", "lr_pivot"}),
                err.what());
    }
    check(!c.seeds.empty(), {"seeds", "seed"}, "seed list is empty");
    check(c.mc_eval_samples >= 2, {"mc_eval_samples"}, "mc_eval_samples must be at least 2");
    check(c.eval_stride >= 1, {"eval_stride"}, "eval_stride must be at least 1");
    check(c.hidden >= 1, {"hidden"}, "hidden must be at least 1");
    check(c.verify_trajectories >= 2, {"verify_trajectories"}, "verify_trajectories must be at least 2");
    check(c.w0 > -1.0, {"w0"}, "w0 must exceed -1");
    try {
        if (c.env == EnvKind::lq) c.lq.validate();
        if (c.env == EnvKind::pairs) c.pairs.validate();
    } catch (const ConfigError& err) {
        fail_at(where_of({"beta", "gamma", "lq.A", "lq.B", "lq.C", "lq.D", "lq.M", "lq.N", "lq.R", "lq.P", "lq.Q",
                          "pairs.k", "pairs.theta", "pairs.eta", "pairs.rho", "pairs.sigma", "pairs.r_f",
                          "pairs.ell"}),
                err.what());
    }
    check(c.env != EnvKind::pairs || c.algo != AlgoKind::verify, {"algo", "env"},
          "algo = verify supports env lq, synthetic-bounded and ou");
    check(c.env != EnvKind::ou || c.algo == AlgoKind::verify, {"algo", "env"}, "env = ou is only used by algo = verify");
    return c;
}

std::string resolved_config(const RunConfig& c) {
    const AlgoConfig& a = c.algo_config;
    std::ostringstream os;
    std::string seeds;
    for (std::size_t i = 0; i < c.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(c.seeds[i]);
    os << "env = " << to_string(c.env) << '\n'
       << "algo = " << to_string(c.algo) << '\n'
       << "seeds = " << seeds << '\n'
       << "out = " << c.out_dir << '\n'
       << "T = " << fmt(a.T) << '\n'
       << "dt = " << fmt(a.dt) << '\n'
       << "beta = " << fmt(a.beta) << '\n'
       << "gamma = " << fmt(a.gamma) << '\n'
       << "J = " << a.J << '\n'
       << "K = " << a.K_iters << '\n'
       << "s_steps = " << a.s_steps << '\n'
       << "delta = " << fmt(a.delta_radius) << '\n'
       << "epsilon = " << fmt(a.epsilon_tol) << '\n'
       << "c_penalty_init = " << fmt(a.c_penalty_init) << '\n'
       << "lr_policy = " << fmt(a.alpha_policy.base) << '\n'
       << "lr_critic = " << fmt(a.alpha_critic.base) << '\n'
       << "lr_decay = " << to_string(a.alpha_policy.decay) << '\n'
       << "lr_pivot = " << fmt(a.alpha_policy.pivot) << '\n'
       << "cppo_inner = " << (a.inner == InnerOptimizer::gradient ? "gradient" : "proximal") << '\n'
       << "mc_eval_samples = " << c.mc_eval_samples << '\n'
       << "eval_stride = " << c.eval_stride << '\n'
       << "checkpoint_stride = " << c.checkpoint_stride << '\n'
       << "record_wall_time = " << (c.record_wall_time ? "true" : "false") << '\n'
       << "hidden = " << c.hidden << '\n'
       << "theta0 = " << fmt(c.theta0[0]) << ',' << fmt(c.theta0[1]) << ',' << fmt(c.theta0[2]) << '\n'
       << "x0 = " << fmt(c.x0) << '\n'
       << "s0 = " << fmt(c.s0) << '\n'
       << "w0 = " << fmt(c.w0) << '\n'
       << "verify_trajectories = " << c.verify_trajectories << '\n'
       << "lq.A = " << fmt(c.lq.A) << '\n'
       << "lq.B = " << fmt(c.lq.B) << '\n'
       << "lq.C = " << fmt(c.lq.C) << '\n'
       << "lq.D = " << fmt(c.lq.D) << '\n'
       << "lq.M = " << fmt(c.lq.M) << '\n'
       << "lq.N = " << fmt(c.lq.N) << '\n'
       << "lq.R = " << fmt(c.lq.R) << '\n'
       << "lq.P = " << fmt(c.lq.P) << '\n'
       << "lq.Q = " << fmt(c.lq.Q) << '\n'
       << "pairs.k = " << fmt(c.pairs.k) << '\n'
       << "pairs.theta = " << fmt(c.pairs.theta_mean) << '\n'
       << "pairs.eta = " << fmt(c.pairs.eta) << '\n'
       << "pairs.rho = " << fmt(c.pairs.rho) << '\n'
       << "pairs.sigma = " << fmt(c.pairs.sigma) << '\n'
       << "pairs.r_f = " << fmt(c.pairs.r_f) << '\n'
       << "pairs.ell = " << fmt(c.pairs.ell) << '\n'
       << "synthetic.lambda = " << fmt(c.synthetic.lambda) << '\n'
       << "synthetic.sigma = " << fmt(c.synthetic.sigma) << '\n';
    return os.str();
}

State initial_state(const RunConfig& c) {
    if (c.env == EnvKind::pairs) {
        State x(2);
        x << c.s0, c.w0;
        return x;
    }
    return scalar_state(c.x0);
}

EnvModel make_env(const RunConfig& c) {
    switch (c.env) {
        case EnvKind::lq: return make_lq_env(c.lq);
        case EnvKind::pairs: return make_pair_trading_env(c.pairs);
        case EnvKind::synthetic_bounded: return make_synthetic_bounded_env(c.synthetic);
        case EnvKind::ou: return make_ou_env();
    }
    throw InternalError("unhandled env");
}

TrainState initial_train_state(const RunConfig& c, std::uint64_t seed) {
    TrainState st{GaussianLinearPolicy{c.theta0[0], c.theta0[1], c.theta0[2]}, QuadraticCritic{},
                  PenaltyState{c.algo_config.c_penalty_init}, 0};
    if (c.env == EnvKind::pairs) {
        Rng policy_rng(derive_seed(seed, "init-policy"));
        Rng critic_rng(derive_seed(seed, "init-critic"));
        st.policy = BetaMLPPolicy::random_init(2, c.hidden, c.pairs.ell, policy_rng);
        st.critic = MLPCritic::random_init(2, c.hidden, critic_rng);
    }
    return st;
}

std::string format_row(const MetricsRow& r) {
    std::string line = std::to_string(r.seed) + ',' + std::to_string(r.k);
    auto field = [&](const std::optional<double>& v) {
        line += ',';
        if (r.diverged) {
            line += "diverged";
        } else if (v) {
            line += fmt(*v);
        }
    };
    field(r.l2_to_theta_star);
    field(r.kl_to_optimal);
    field(r.eta_hat);
    field(r.eta_se);
    field(r.mean_kl_step);
    field(r.c_penalty);
    line += ',' + fmt(r.wall_ms);
    return line;
}

MetricsRow parse_row(std::string_view line) {
    const auto parts = split(line, ',');
    if (parts.size() != 9) throw ConfigError("metrics row needs 9 fields");
    MetricsRow r;
    r.seed = parse_uint(parts[0]);
    r.k = parse_uint(parts[1]);
    std::optional<double>* fields[] = {&r.l2_to_theta_star, &r.kl_to_optimal, &r.eta_hat,
                                       &r.eta_se,           &r.mean_kl_step,  &r.c_penalty};
    for (int i = 0; i < 6; ++i) {
        const auto& s = parts[2 + i];
        if (s == "diverged") {
            r.diverged = true;
        } else if (!s.empty()) {
            *fields[i] = parse_double(s);
        }
    }
    r.wall_ms = parse_double(parts[8]);
    return r;
}

Estimate evaluate_policy(const RunConfig& c, const Policy& policy, std::uint64_t seed, std::size_t k) {
    Rng rng(derive_seed(seed, "eval", k));
    const AlgoConfig& a = c.algo_config;
    return mc_performance(make_env(c), policy, initial_state(c), a.beta, a.gamma, a.T, a.dt, c.mc_eval_samples, rng);
}

SeedResult run_seed(const RunConfig& c, std::uint64_t seed) {
    if (c.algo == AlgoKind::verify) throw InternalError("run_seed does not run the verify suite");
    SeedResult result;
    result.seed = seed;
    const EnvModel env = make_env(c);
    const State x0 = initial_state(c);
    AlgoConfig config = c.algo_config;
    config.seed = seed;
    TrainState st = initial_train_state(c, seed);
    std::optional<LQSolution> sol;
    if (c.env == EnvKind::lq) sol = solve_lq(c.lq);
    const std::size_t K = config.K_iters;

    for (std::size_t k = 0; k < K; ++k) {
        MetricsRow row;
        row.seed = seed;
        row.k = k;
        const auto start = std::chrono::steady_clock::now();
        try {
            IterationRecord rec;
            switch (c.algo) {
                case AlgoKind::cpg: rec = cpg_iteration(st, env, config, x0); break;
                case AlgoKind::cppo: rec = cppo_iteration(st, env, config, x0, KlVariant::sqrt); break;
                case AlgoKind::cppo_nst: rec = cppo_iteration(st, env, config, x0, KlVariant::linear); break;
                case AlgoKind::dpg: rec = discrete_baseline_iteration(st, env, config, x0, DiscreteAlgo::dpg); break;
                case AlgoKind::dppo: rec = discrete_baseline_iteration(st, env, config, x0, DiscreteAlgo::dppo); break;
                case AlgoKind::verify: break;
            }
            row.mean_kl_step = rec.mean_kl_step;
            row.c_penalty = rec.c_penalty;
            if (sol) {
                const auto& g = std::get<GaussianLinearPolicy>(st.policy);
                row.l2_to_theta_star = std::hypot(g.theta1 - sol->mean_slope, g.theta2 - sol->mean_intercept);
                row.kl_to_optimal = kl_to_optimal(g, *sol, rec.states);
            }
            if ((k + 1) % c.eval_stride == 0 || k + 1 == K) {
                const Estimate eta = evaluate_policy(c, st.policy, seed, k);
                row.eta_hat = eta.mean;
                row.eta_se = eta.se;
            }
        } catch (const RolloutDiverged& e) {
            row.diverged = true;
            result.divergence = e.what();
        } catch (const NumericError& e) {
            row.diverged = true;
            result.divergence = e.what();
        }
        if (c.record_wall_time) {
            row.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
        result.rows.push_back(row);
        if (row.diverged) {
            result.diverged = true;
            break;
        }
        if ((c.checkpoint_stride > 0 && (k + 1) % c.checkpoint_stride == 0) || k + 1 == K) {
            result.checkpoints.push_back({k + 1, parameters(st.policy), parameters(st.critic)});
        }
    }
    return result;
}

namespace {

double lemma_phi(int which, double x) {
    switch (which) {
        case 0: return 1.0;
        case 1: return x;
        case 2: return x * x;
        case 3: return x > 0.0 ? 1.0 : 0.0;
        default: return std::exp(-x * x);
    }
}

constexpr const char* kLemmaNames[] = {"lemma1_one", "lemma1_x", "lemma1_x2", "lemma1_positive", "lemma1_gauss"};

}  // namespace

std::vector<CheckResult> run_verify(const RunConfig& c, std::uint64_t seed) {
    const EnvModel env = make_env(c);
    const State x0 = initial_state(c);
    const AlgoConfig& a = c.algo_config;
    const Policy policy = GaussianLinearPolicy{c.theta0[0], c.theta0[1], c.theta0[2]};
    const std::size_t n = c.verify_trajectories;
    const std::size_t steps = grid_steps(a.T, a.dt);
    std::vector<CheckResult> checks;

    // Occupation identity: grid functional on one trajectory set against the
    // histogram of an independent set.
    {
        Rng pilot_rng(derive_seed(seed, "verify-pilot"));
        double lo = x0(0);
        double hi = x0(0);
        for (int j = 0; j < 50; ++j) {
            for (const auto& x : rollout(env, policy, x0, a.T, a.dt, pilot_rng).states) {
                lo = std::min(lo, x(0));
                hi = std::max(hi, x(0));
            }
        }
        // Symmetric window with an even bin count puts an edge at 0, where the
        // indicator test function jumps.
        const double half = std::max(std::abs(lo), std::abs(hi)) * 1.5 + 1.0;
        const BinSpec bins{-half, half, 400, 0};

        Rng lhs_rng(derive_seed(seed, "verify-functional"));
        Rng rhs_rng(derive_seed(seed, "verify-histogram"));
        std::vector<MeanAccumulator> lhs(5);
        std::vector<MeanAccumulator> rhs(5);
        std::vector<double> pooled(bins.count, 0.0);
        double under = 0.0;
        double over = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const Trajectory t1 = rollout(env, policy, x0, a.T, a.dt, lhs_rng);
            for (int f = 0; f < 5; ++f) {
                lhs[f].add(discounted_sum(t1, [f](const State& x) { return lemma_phi(f, x(0)); }, a.beta));
            }
            const Trajectory t2 = rollout(env, policy, x0, a.T, a.dt, rhs_rng);
            const auto est = occupation_histogram(std::span<const Trajectory>(&t2, 1), a.beta, bins);
            for (int f = 0; f < 5; ++f) rhs[f].add(est.integrate([f](double x) { return lemma_phi(f, x); }));
            for (std::size_t b = 0; b < bins.count; ++b) pooled[b] += est.masses[b];
            under += est.underflow;
            over += est.overflow;
        }
        for (int f = 0; f < 5; ++f) {
            const double se = std::hypot(lhs[f].se(), rhs[f].se());
            const double diff = std::abs(lhs[f].mean() - rhs[f].mean());
            checks.push_back({kLemmaNames[f], lhs[f].mean(), rhs[f].mean(), se, diff <= 3.0 * se + 1e-12});
        }
        double mass = under + over;
        for (double m : pooled) mass += m;
        mass /= static_cast<double>(n);
        const double discrete = discrete_discount_mass(a.beta, a.dt, steps);
        checks.push_back({"occupation_mass_discrete", mass, discrete, 0.0, std::abs(mass - discrete) <= 1e-9});
        const double continuous = -std::expm1(-a.beta * a.T) / a.beta;
        checks.push_back({"occupation_mass_continuous", mass, continuous, 0.0,
                          std::abs(mass - continuous) <= a.beta * a.dt * continuous});
    }

    // Rollout times: grid-snapped Exp(beta) restricted to indices <= N - 2.
    {
        Rng rng(derive_seed(seed, "verify-tau"));
        MeanAccumulator acc;
        for (std::size_t j = 0; j < 100000; ++j) acc.add(sample_rollout_time(a.beta, a.dt, a.T, rng).tau_grid);
        const double q = std::exp(-a.beta * a.dt);
        double num = 0.0;
        double den = 0.0;
        double w = 1.0;
        for (std::size_t i = 0; i + 1 < steps; ++i) {
            num += w * static_cast<double>(i) * a.dt;
            den += w;
            w *= q;
        }
        const double expected = num / den;
        checks.push_back({"rollout_time_mean", acc.mean(), expected, acc.se(),
                          std::abs(acc.mean() - expected) <= 3.0 * acc.se()});
    }

    if (c.env == EnvKind::lq) {
        const LQSolution sol = solve_lq(c.lq);
        const QuadraticCritic v = sol.value_function();
        const LQParams p = c.lq;
        PerformanceDifferenceConfig pd;
        pd.T = a.T;
        pd.dt = a.dt;
        pd.gamma = a.gamma;
        pd.n_lhs = n;
        pd.n_rhs = n;
        Rng rng(derive_seed(seed, "verify-performance-difference"));
        const auto res = performance_difference_mc(
            env, policy, sol.policy(), [&](const State& x, double act) { return analytic_q(v, p, x(0), act); }, x0,
            a.beta, pd, rng);
        const double se = combined_se(res.lhs, res.rhs);
        checks.push_back({"performance_difference", res.lhs.mean, res.rhs.mean, se,
                          std::abs(res.lhs.mean - res.rhs.mean) <= 3.0 * se});
    }

    if (c.env == EnvKind::synthetic_bounded) {
        const GaussianLinearPolicy pi{0.0, c.theta0[1], c.theta0[2]};
        const GaussianLinearPolicy pi_hat{0.0, c.theta0[1] + 0.5, c.theta0[2]};
        const double horizon = std::min(a.T, 5.0);
        Rng rng(derive_seed(seed, "verify-coupling"));
        const auto curve = coupled_gap_moments(env, pi, pi_hat, x0, horizon, a.dt, std::min<std::size_t>(n, 1000), rng);
        const GronwallConstants constants = synthetic_gronwall_constants(c.synthetic, pi, pi_hat);
        const auto report = gronwall_check(curve, constants);
        checks.push_back({"gronwall_envelope", report.worst_margin, 0.0, 0.0, report.status == CheckStatus::pass});
        const GronwallConstants halved{0.5 * constants.c_b, 0.5 * constants.c_sigma, 0.5 * constants.c_pi};
        const auto negative = gronwall_check(curve, halved);
        checks.push_back(
            {"gronwall_halved_violated", negative.worst_margin, 0.0, 0.0, negative.status == CheckStatus::fail});
    }
    return checks;
}

namespace {

void write_checkpoints(const std::filesystem::path& dir, const std::vector<SeedResult>& results) {
    std::map<std::size_t, std::vector<std::pair<std::uint64_t, const Checkpoint*>>> by_k;
    for (const auto& r : results) {
        for (const auto& cp : r.checkpoints) by_k[cp.k].push_back({r.seed, &cp});
    }
    for (const auto& [k, list] : by_k) {
        std::ofstream os(dir / ("checkpoint_" + std::to_string(k) + ".txt"));
        for (const auto& [seed, cp] : list) {
            os << "# seed " << seed << '\n' << "theta";
            for (Eigen::Index i = 0; i < cp->theta.size(); ++i) os << ' ' << fmt(cp->theta(i));
            os << '\n' << "phi";
            for (Eigen::Index i = 0; i < cp->phi.size(); ++i) os << ' ' << fmt(cp->phi(i));
            os << '\n';
        }
    }
}

}  // namespace

int run(const RunConfig& c, std::ostream& log) {
    const std::filesystem::path dir(c.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + c.out_dir + "': " + ec.message());
    {
        std::ofstream os(dir / "resolved_config.txt");
        os << resolved_config(c);
    }

    if (c.algo == AlgoKind::verify) {
        std::vector<CheckResult> all;
        for (auto seed : c.seeds) {
            for (auto& check : run_verify(c, seed)) {
                check.name = "seed" + std::to_string(seed) + ":" + check.name;
                log << check.name << ' ' << (check.pass ? "pass" : "fail") << '\n';
                all.push_back(std::move(check));
            }
        }
        std::ofstream os(dir / "checks.csv");
        write_checks_csv(os, all);
        return kExitOk;
    }

    std::vector<SeedResult> results;
    std::size_t diverged = 0;
    for (auto seed : c.seeds) {
        results.push_back(run_seed(c, seed));
        const auto& r = results.back();
        if (r.diverged) {
            ++diverged;
            log << "seed " << seed << " diverged at iteration " << r.rows.back().k << ": " << r.divergence << '\n';
        } else {
            log << "seed " << seed << " completed " << r.rows.size() << " iterations\n";
        }
    }
    {
        std::ofstream os(dir / "metrics.csv");
        os << kMetricsHeader << '\n';
        for (const auto& r : results) {
            for (const auto& row : r.rows) os << format_row(row) << '\n';
        }
    }
    write_checkpoints(dir, results);
    return diverged == results.size() ? kExitAllDiverged : kExitOk;
}

}  // namespace cpo
