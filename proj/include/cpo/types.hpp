#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace cpo {

/// Largest state / noise dimension supported without heap allocation.
inline constexpr int kMaxDim = 4;

using State = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Flat parameter vectors and gradients of policies and critics.
using ParamVector = Eigen::VectorXd;

inline State scalar_state(double x) {
    State s(1);
    s(0) = x;
    return s;
}

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParameterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A simulated state left the finite (or admissible) region.
class RolloutDiverged : public std::runtime_error {
public:
    RolloutDiverged(std::size_t step, const std::string& what)
        : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}

    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

}  // namespace cpo
