#include "cpo/policy.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <type_traits>

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/digamma.hpp>

namespace cpo {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double digamma(double z) { return boost::math::digamma(z); }
double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

/// Maps a in [-ell, ell] to u in [0, 1], nudging the closed endpoints inward.
double unit_coordinate(double a, double ell) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    double u = (a + ell) / (2.0 * ell);
    if (u <= 0.0) u = eps;
    if (u >= 1.0) u = 1.0 - eps;
    return u;
}

void require_same_family(const Policy& p, const Policy& q) {
    if (p.index() != q.index()) throw std::invalid_argument("policies belong to different families");
}

ParamVector gaussian_vec(double a, double b, double c) {
    ParamVector g(3);
    g << a, b, c;
    return g;
}

}  // namespace

double GaussianLinearPolicy::variance() const { return std::exp(theta3); }

BetaMLPPolicy::BetaMLPPolicy(Mlp net, double ell) : net_(std::move(net)), ell_(ell) {
    if (net_.output_dim() != 2) throw ParameterError("beta policy network must have two outputs");
    if (!(ell_ > 0.0)) throw ParameterError("beta policy half-width must be positive");
}

BetaMLPPolicy BetaMLPPolicy::random_init(int state_dim, int hidden, double ell, Rng& rng) {
    return BetaMLPPolicy(Mlp::uniform_init({state_dim, hidden, 2}, rng), ell);
}

BetaMLPPolicy::Shape BetaMLPPolicy::shape(const State& x) const {
    const Eigen::VectorXd raw = net_.forward(x);
    return {softplus(raw(0)) + kShapeFloor, softplus(raw(1)) + kShapeFloor, sigmoid(raw(0)), sigmoid(raw(1))};
}

BetaMLPPolicy BetaMLPPolicy::with_parameters(const ParamVector& p) const {
    BetaMLPPolicy out = *this;
    out.net_.set_parameters(p);
    return out;
}

ParamVector parameters(const Policy& policy) {
    return std::visit(overloaded{
                          [](const GaussianLinearPolicy& g) { return gaussian_vec(g.theta1, g.theta2, g.theta3); },
                          [](const BetaMLPPolicy& b) { return ParamVector(b.net().parameters()); },
                      },
                      policy);
}

Policy with_parameters(const Policy& policy, const ParamVector& p) {
    return std::visit(overloaded{
                          [&](const GaussianLinearPolicy&) -> Policy {
                              if (p.size() != 3) throw ParameterError("gaussian policy takes 3 parameters");
                              return GaussianLinearPolicy{p(0), p(1), p(2)};
                          },
                          [&](const BetaMLPPolicy& b) -> Policy { return b.with_parameters(p); },
                      },
                      policy);
}

Eigen::Index parameter_count(const Policy& policy) {
    return std::visit(overloaded{
                          [](const GaussianLinearPolicy&) -> Eigen::Index { return 3; },
                          [](const BetaMLPPolicy& b) { return b.net().parameter_count(); },
                      },
                      policy);
}

bool is_finite(const Policy& policy) { return parameters(policy).allFinite(); }

double sample_action(const Policy& policy, const State& x, Rng& rng) {
    return std::visit(overloaded{
                          [&](const GaussianLinearPolicy& g) {
                              // Exactly one normal draw per action, independent of theta, so
                              // common random numbers line up across parameter values.
                              return g.mean(x) + std::sqrt(g.variance()) * rng.normal();
                          },
                          [&](const BetaMLPPolicy& b) {
                              const auto s = b.shape(x);
                              return 2.0 * b.ell() * rng.beta(s.alpha, s.beta) - b.ell();
                          },
                      },
                      policy);
}

LogDensity log_density(const Policy& policy, const State& x, double a) {
    return std::visit(overloaded{
                          [&](const GaussianLinearPolicy& g) {
                              const double d = a - g.mean(x);
                              return LogDensity{-0.5 * kLog2Pi - 0.5 * g.theta3 - 0.5 * d * d / g.variance(), true};
                          },
                          [&](const BetaMLPPolicy& b) {
                              if (a < -b.ell() || a > b.ell()) {
                                  return LogDensity{-std::numeric_limits<double>::infinity(), false};
                              }
                              const auto s = b.shape(x);
                              const double u = unit_coordinate(a, b.ell());
                              const double lp = (s.alpha - 1.0) * std::log(u) + (s.beta - 1.0) * std::log1p(-u) -
                                                log_beta_fn(s.alpha, s.beta) - std::log(2.0 * b.ell());
                              return LogDensity{lp, true};
                          },
                      },
                      policy);
}

ParamVector score(const Policy& policy, const State& x, double a) {
    return std::visit(overloaded{
                          [&](const GaussianLinearPolicy& g) {
                              const double v = g.variance();
                              const double d = a - g.mean(x);
                              return gaussian_vec(d * x(0) / v, d / v, -0.5 + 0.5 * d * d / v);
                          },
                          [&](const BetaMLPPolicy& b) {
                              if (a < -b.ell() || a > b.ell()) throw ParameterError("score undefined outside [-ell, ell]");
                              const auto s = b.shape(x);
                              const double u = unit_coordinate(a, b.ell());
                              const double common = digamma(s.alpha + s.beta);
                              Eigen::VectorXd upstream(2);
                              upstream(0) = (std::log(u) - digamma(s.alpha) + common) * s.dalpha_draw;
                              upstream(1) = (std::log1p(-u) - digamma(s.beta) + common) * s.dbeta_draw;
                              return b.net().backward(x, upstream);
                          },
                      },
                      policy);
}

double kl_divergence(const Policy& p, const Policy& q, const State& x) {
    require_same_family(p, q);
    if (const auto* gp = std::get_if<GaussianLinearPolicy>(&p)) {
        const auto& gq = std::get<GaussianLinearPolicy>(q);
        const double dm = gp->mean(x) - gq.mean(x);
        const double kl = 0.5 * (gq.theta3 - gp->theta3) + (gp->variance() + dm * dm) / (2.0 * gq.variance()) - 0.5;
        return std::max(kl, 0.0);
    }
    const auto s1 = std::get<BetaMLPPolicy>(p).shape(x);
    const auto s2 = std::get<BetaMLPPolicy>(q).shape(x);
    const double kl = log_beta_fn(s2.alpha, s2.beta) - log_beta_fn(s1.alpha, s1.beta) +
                      (s1.alpha - s2.alpha) * digamma(s1.alpha) + (s1.beta - s2.beta) * digamma(s1.beta) +
                      (s2.alpha - s1.alpha + s2.beta - s1.beta) * digamma(s1.alpha + s1.beta);
    return std::max(kl, 0.0);
}

ParamVector kl_gradient_wrt_second(const Policy& p, const Policy& q, const State& x) {
    require_same_family(p, q);
    if (const auto* gp = std::get_if<GaussianLinearPolicy>(&p)) {
        const auto& gq = std::get<GaussianLinearPolicy>(q);
        const double vq = gq.variance();
        const double dm = gq.mean(x) - gp->mean(x);
        const double dmean = dm / vq;
        return gaussian_vec(dmean * x(0), dmean, 0.5 - (gp->variance() + dm * dm) / (2.0 * vq));
    }
    const auto& bq = std::get<BetaMLPPolicy>(q);
    const auto s1 = std::get<BetaMLPPolicy>(p).shape(x);
    const auto s2 = bq.shape(x);
    const double c1 = digamma(s1.alpha + s1.beta);
    const double c2 = digamma(s2.alpha + s2.beta);
    Eigen::VectorXd upstream(2);
    upstream(0) = (digamma(s2.alpha) - c2 - digamma(s1.alpha) + c1) * s2.dalpha_draw;
    upstream(1) = (digamma(s2.beta) - c2 - digamma(s1.beta) + c1) * s2.dbeta_draw;
    return bq.net().backward(x, upstream);
}

double entropy(const Policy& policy, const State& x) {
    return std::visit(overloaded{
                          [&](const GaussianLinearPolicy& g) { return 0.5 * (kLog2Pi + 1.0 + g.theta3); },
                          [&](const BetaMLPPolicy& b) {
                              const auto s = b.shape(x);
                              return log_beta_fn(s.alpha, s.beta) - (s.alpha - 1.0) * digamma(s.alpha) -
                                     (s.beta - 1.0) * digamma(s.beta) +
                                     (s.alpha + s.beta - 2.0) * digamma(s.alpha + s.beta) + std::log(2.0 * b.ell());
                          },
                      },
                      policy);
}

double regularizer_rate(const EnvModel& env, const Policy& policy, const State& x, double a) {
    if (env.regularizer == RegularizerKind::none) return 0.0;
    const auto ld = log_density(policy, x, a);
    return -ld.value;
}

ParamVector regularizer_gradient(const EnvModel& env, const Policy& policy, const State& x, double a) {
    if (env.regularizer == RegularizerKind::none) return ParamVector::Zero(parameter_count(policy));
    return -score(policy, x, a);
}

GaussHermiteRule standard_normal_rule(int points) {
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(points, points);
    for (int i = 1; i < points; ++i) {
        jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(static_cast<double>(i));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussHermiteRule rule;
    rule.nodes = solver.eigenvalues();
    rule.weights = solver.eigenvectors().row(0).transpose().array().square();
    return rule;
}

AggregatedCoefficients aggregated_coefficients(const EnvModel& env, const Policy& policy, const State& x) {
    const int n = env.state_dim;
    if (const auto* g = std::get_if<GaussianLinearPolicy>(&policy)) {
        const double m = g->mean(x);
        const double v = g->variance();
        if (env.lq) {
            const auto& p = *env.lq;
            const double s = p.C * x(0) + p.D * m;
            AggregatedCoefficients out{scalar_state(p.A * x(0) + p.B * m), Matrix(1, 1)};
            out.diffusion_sq(0, 0) = s * s + p.D * p.D * v;
            return out;
        }
        static const GaussHermiteRule rule = standard_normal_rule(32);
        AggregatedCoefficients out{State::Zero(n), Matrix::Zero(n, n)};
        const double sd = std::sqrt(v);
        for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
            const double a = m + sd * rule.nodes(i);
            const Matrix s = env.diffusion(x, a);
            out.drift += rule.weights(i) * env.drift(x, a);
            out.diffusion_sq += rule.weights(i) * (s * s.transpose());
        }
        return out;
    }

    constexpr int kSamples = 10000;
    Rng rng(0x5eedULL);
    AggregatedCoefficients out{State::Zero(n), Matrix::Zero(n, n)};
    State drift_sq = State::Zero(n);
    for (int i = 0; i < kSamples; ++i) {
        const double a = sample_action(policy, x, rng);
        const State b = env.drift(x, a);
        const Matrix s = env.diffusion(x, a);
        out.drift += b;
        drift_sq += b.cwiseProduct(b);
        out.diffusion_sq += s * s.transpose();
    }
    out.drift /= kSamples;
    out.diffusion_sq /= kSamples;
    for (int i = 0; i < n; ++i) {
        const double var = std::max(drift_sq(i) / kSamples - out.drift(i) * out.drift(i), 0.0);
        const double se = std::sqrt(var / kSamples);
        const double tol = 1e-2 * (1.0 + std::abs(out.drift(i)));
        if (se > tol) {
            throw NumericError("aggregated drift did not converge: estimate " + std::to_string(out.drift(i)) +
                               ", standard error " + std::to_string(se) + ", tolerance " + std::to_string(tol));
        }
    }
    return out;
}

}  // namespace cpo
