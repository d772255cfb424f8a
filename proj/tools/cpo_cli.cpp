// Command-line front end: `cpo run --config <path>` and `cpo oracle`.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cpo/harness.hpp"
#include "cpo/lq_oracle.hpp"

namespace {

int print_oracle(const cpo::LQParams& p) {
    const auto sol = cpo::solve_lq(p);
    std::printf("k0 %.10f\n", sol.k0);
    std::printf("k1 %.10f\n", sol.k1);
    std::printf("k2 %.10f\n", sol.k2);
    std::printf("theta1 %.10f\n", sol.mean_slope);
    std::printf("theta2 %.10f\n", sol.mean_intercept);
    std::printf("variance %.10f\n", sol.variance);
    std::printf("theta3 %.10f\n", std::log(sol.variance));
    return cpo::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-time policy optimization experiments"};
    app.require_subcommand(1);

    auto* run_cmd = app.add_subcommand("run", "Train or verify according to a config file");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> algo;
    std::optional<std::string> env;
    std::optional<std::string> out;
    run_cmd->add_option("--config", config_path, "key = value config file")->required();
    run_cmd->add_option("--seed", seed, "Run a single seed");
    run_cmd->add_option("--algo", algo, "cpg, cppo, cppo-nst, dpg, dppo or verify");
    run_cmd->add_option("--env", env, "lq, pairs, synthetic-bounded or ou");
    run_cmd->add_option("--out", out, "Output directory");

    auto* oracle_cmd = app.add_subcommand("oracle", "Print the closed-form LQ constants");
    cpo::LQParams lq;
    oracle_cmd->add_option("--beta", lq.beta);
    oracle_cmd->add_option("--gamma", lq.gamma);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cpo::kExitConfig;
    }

    if (oracle_cmd->parsed()) {
        try {
            return print_oracle(lq);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return cpo::kExitConfig;
        }
    }

    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "error: cannot read config '" << config_path << "'\n";
        return cpo::kExitConfig;
    }
    std::stringstream text;
    text << in.rdbuf();

    cpo::ConfigOverrides overrides;
    if (env) overrides.emplace_back("env", *env);
    if (algo) overrides.emplace_back("algo", *algo);
    if (seed) overrides.emplace_back("seed", std::to_string(*seed));
    if (out) overrides.emplace_back("out", *out);

    try {
        const auto config = cpo::parse_config(text.str(), overrides);
        return cpo::run(config, std::cerr);
    } catch (const cpo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cpo::kExitConfig;
    }
}
