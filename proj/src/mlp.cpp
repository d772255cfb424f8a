#include "cpo/mlp.hpp"

#include <utility>

namespace cpo {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Eigen::Index count_params(const std::vector<int>& widths) {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        n += static_cast<Eigen::Index>(widths[l + 1]) * (widths[l] + 1);
    }
    return n;
}

}  // namespace

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw ParameterError("mlp needs at least input and output widths");
    for (int w : widths_) {
        if (w <= 0) throw ParameterError("mlp layer widths must be positive");
    }
    params_ = ParamVector::Zero(count_params(widths_));
}

Mlp Mlp::uniform_init(std::vector<int> widths, Rng& rng, double lo, double hi) {
    Mlp net(std::move(widths));
    for (Eigen::Index i = 0; i < net.params_.size(); ++i) net.params_(i) = rng.uniform(lo, hi);
    return net;
}

void Mlp::set_parameters(const ParamVector& p) {
    if (p.size() != params_.size()) throw ParameterError("mlp parameter vector has wrong length");
    params_ = p;
}

Eigen::VectorXd Mlp::forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd h = x;
    Eigen::Index offset = 0;
    const std::size_t layers = widths_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = widths_[l];
        const int out = widths_[l + 1];
        RowMajorMap w(params_.data() + offset, out, in);
        offset += static_cast<Eigen::Index>(out) * in;
        Eigen::Map<const Eigen::VectorXd> b(params_.data() + offset, out);
        offset += out;
        Eigen::VectorXd z = w * h + b;
        if (l + 1 < layers) {
            h = z.array().tanh().matrix();
        } else {
            h = std::move(z);
        }
    }
    return h;
}

ParamVector Mlp::backward(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& upstream) const {
    const std::size_t layers = widths_.size() - 1;
    std::vector<Eigen::VectorXd> acts;
    acts.reserve(layers + 1);
    acts.emplace_back(x);
    std::vector<Eigen::Index> offsets(layers);
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        offsets[l] = offset;
        const int in = widths_[l];
        const int out = widths_[l + 1];
        RowMajorMap w(params_.data() + offset, out, in);
        Eigen::Map<const Eigen::VectorXd> b(params_.data() + offset + static_cast<Eigen::Index>(out) * in, out);
        offset += static_cast<Eigen::Index>(out) * (in + 1);
        Eigen::VectorXd z = w * acts.back() + b;
        if (l + 1 < layers) z = z.array().tanh().matrix();
        acts.push_back(std::move(z));
    }

    ParamVector grad = ParamVector::Zero(params_.size());
    Eigen::VectorXd delta = upstream;
    for (std::size_t l = layers; l-- > 0;) {
        const int in = widths_[l];
        const int out = widths_[l + 1];
        if (l + 1 < layers) {
            // tanh'(z) = 1 - tanh(z)^2, and acts[l + 1] already holds tanh(z).
            delta = (delta.array() * (1.0 - acts[l + 1].array().square())).matrix();
        }
        RowMajorMutMap gw(grad.data() + offsets[l], out, in);
        gw.noalias() = delta * acts[l].transpose();
        grad.segment(offsets[l] + static_cast<Eigen::Index>(out) * in, out) = delta;
        if (l > 0) {
            RowMajorMap w(params_.data() + offsets[l], out, in);
            delta = w.transpose() * delta;
        }
    }
    return grad;
}

}  // namespace cpo
