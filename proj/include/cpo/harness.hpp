#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cpo/algorithms.hpp"
#include "cpo/env.hpp"
#include "cpo/estimate.hpp"
#include "cpo/occupation.hpp"

namespace cpo {

enum class EnvKind { lq, pairs, synthetic_bounded, ou };
enum class AlgoKind { cpg, cppo, cppo_nst, dpg, dppo, verify };

std::string to_string(EnvKind env);
std::string to_string(AlgoKind algo);
std::string to_string(LrDecay decay);

struct RunConfig {
    EnvKind env = EnvKind::lq;
    AlgoKind algo = AlgoKind::cpg;
    AlgoConfig algo_config;
    LQParams lq;
    PairTradingParams pairs;
    SyntheticBoundedParams synthetic;
    std::size_t mc_eval_samples = 100;
    std::size_t eval_stride = 10;
    /// Checkpoint every this many iterations; 0 writes only the final one.
    std::size_t checkpoint_stride = 0;
    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "out";
    bool record_wall_time = false;
    int hidden = 32;
    /// Initial Gaussian-linear parameters (lq, synthetic-bounded, ou).
    std::array<double, 3> theta0{0.0, 0.0, 0.0};
    double x0 = 0.0;
    double s0 = 7.0;
    double w0 = 1.0;
    /// Trajectories per side of each identity check run by algo = verify.
    std::size_t verify_trajectories = 2000;
};

/// Key = value overrides applied after the document (CLI flags).
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Parses a line-oriented `key = value` document with `#` comments. Keys not
/// given take the defaults of the selected env (the reference LQ and
/// pair-trading settings). Throws ConfigError with the offending line number.
RunConfig parse_config(std::string_view text, const ConfigOverrides& overrides = {});

/// Every key with its resolved value, one `key = value` per line; parsing the
/// result gives back the same configuration.
std::string resolved_config(const RunConfig& config);

/// Initial state of the selected env.
State initial_state(const RunConfig& config);

EnvModel make_env(const RunConfig& config);

/// Initial policy and critic for one seed.
TrainState initial_train_state(const RunConfig& config, std::uint64_t seed);

/// One CSV row. Empty optionals print as empty fields.
struct MetricsRow {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::optional<double> l2_to_theta_star;
    std::optional<double> kl_to_optimal;
    std::optional<double> eta_hat;
    std::optional<double> eta_se;
    std::optional<double> mean_kl_step;
    std::optional<double> c_penalty;
    double wall_ms = 0.0;
    bool diverged = false;
};

inline constexpr std::string_view kMetricsHeader =
    "seed,k,l2_to_theta_star,kl_to_optimal,eta_hat,eta_se,mean_kl_step,c_penalty,wall_ms";

std::string format_row(const MetricsRow& row);

/// Inverse of format_row. Throws ConfigError on malformed input.
MetricsRow parse_row(std::string_view line);

struct Checkpoint {
    std::size_t k;
    ParamVector theta;
    ParamVector phi;
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<MetricsRow> rows;
    std::vector<Checkpoint> checkpoints;
    bool diverged = false;
    std::string divergence;
};

/// K iterations of the configured algorithm for one seed. Row k describes the
/// policy after update k; eta_hat is filled when (k + 1) is a multiple of the
/// evaluation stride and on the last iteration.
SeedResult run_seed(const RunConfig& config, std::uint64_t seed);

/// Monte-Carlo evaluation of a policy with the evaluation substream of (seed, k).
Estimate evaluate_policy(const RunConfig& config, const Policy& policy, std::uint64_t seed, std::size_t k);

/// Identity checks run by algo = verify on the configured env.
std::vector<CheckResult> run_verify(const RunConfig& config, std::uint64_t seed);

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitAllDiverged = 3 };

/// Runs every seed and writes metrics.csv (or checks.csv for verify),
/// resolved_config.txt and checkpoint_<k>.txt into out_dir.
int run(const RunConfig& config, std::ostream& log);

}  // namespace cpo
