#pragma once

#include <vector>

#include <Eigen/Core>

#include "cpo/random.hpp"
#include "cpo/types.hpp"

namespace cpo {

/// Fully connected network with tanh hidden layers and a linear output layer.
///
/// `widths` lists every layer including input and output, so {2, 32, 2} is the
/// three-layer network (input, one tanh hidden layer, output). Parameters are
/// stored flat, layer by layer, each layer as its row-major weight matrix
/// followed by its bias.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<int> widths);

    /// Weights and biases drawn i.i.d. uniform on [lo, hi].
    static Mlp uniform_init(std::vector<int> widths, Rng& rng, double lo = -0.5, double hi = 0.5);

    int input_dim() const { return widths_.front(); }
    int output_dim() const { return widths_.back(); }
    const std::vector<int>& widths() const { return widths_; }

    Eigen::Index parameter_count() const { return params_.size(); }
    const ParamVector& parameters() const { return params_; }
    void set_parameters(const ParamVector& p);

    Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Gradient of dot(upstream, forward(x)) with respect to the parameters.
    ParamVector backward(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& upstream) const;

private:
    std::vector<int> widths_;
    ParamVector params_;
};

}  // namespace cpo
