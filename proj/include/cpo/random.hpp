#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cpo {

/// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix64(std::uint64_t z);

/// Seed for substream `index` of purpose `purpose` under `master`.
///
/// The derivation is `mix64(mix64(master ^ fnv1a(purpose)) + index)`, so
/// adding a new purpose (say, extra evaluations) never shifts the draws of
/// an existing one.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0);

/// Exclusively owned random stream. All samplers are deterministic given the seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }
    double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }
    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace cpo
