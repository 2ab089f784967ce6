#include "streamal/train.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace streamal {

namespace {

void stack_data(const std::vector<LabeledExample>& data, int d, Eigen::MatrixXd& X,
                Eigen::VectorXd& y) {
    X.resize(static_cast<Eigen::Index>(data.size()), d);
    y.resize(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].x.size() != d)
            throw std::invalid_argument("training data: feature dimension mismatch");
        X.row(static_cast<Eigen::Index>(i)) = data[i].x.transpose();
        y(static_cast<Eigen::Index>(i)) = data[i].binary_label;
    }
}

// 0.5 * (theta - mu)' H_prior (theta - mu); layer blocks are A (x) G.
double prior_quadratic(const ParamVector& theta, const GaussianBelief& prior) {
    if (prior.kind == BeliefKind::Delta) return 0.0;
    if (prior.kind == BeliefKind::Isotropic) {
        const Eigen::VectorXd delta = theta.flat() - prior.mean.flat();
        return 0.5 * prior.iso_precision * delta.squaredNorm();
    }
    double q = 0.0;
    for (int l = 0; l < theta.arch().n_weight_layers(); ++l) {
        const Eigen::MatrixXd delta = theta.layer(l) - prior.mean.layer(l);
        const auto& f = prior.factors[static_cast<std::size_t>(l)];
        q += 0.5 * (delta.cwiseProduct(f.G * delta * f.A)).sum();
    }
    return q;
}

void add_prior_gradient(const ParamVector& theta, const GaussianBelief& prior,
                        ParamVector& grad) {
    if (prior.kind == BeliefKind::Delta) return;
    if (prior.kind == BeliefKind::Isotropic) {
        grad.flat() += prior.iso_precision * (theta.flat() - prior.mean.flat());
        return;
    }
    for (int l = 0; l < theta.arch().n_weight_layers(); ++l) {
        const Eigen::MatrixXd delta = theta.layer(l) - prior.mean.layer(l);
        const auto& f = prior.factors[static_cast<std::size_t>(l)];
        grad.layer(l) += f.G * delta * f.A;
    }
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations;  // A_0 = X, ..., A_{L-1}
    std::vector<Eigen::MatrixXd> preacts;      // S_0 ... S_{L-1}
    Eigen::VectorXd logits;
};

ForwardCache forward_cached(const Eigen::MatrixXd& X, const ParamVector& theta,
                            const MLPArch& arch) {
    ForwardCache c;
    const int L = arch.n_weight_layers();
    c.activations.reserve(static_cast<std::size_t>(L));
    c.preacts.reserve(static_cast<std::size_t>(L));
    Eigen::MatrixXd A = X;
    for (int l = 0; l < L; ++l) {
        c.activations.push_back(A);
        auto W = theta.layer(l);
        Eigen::MatrixXd S = A * W.leftCols(arch.fan_in(l)).transpose();
        S.rowwise() += W.col(arch.fan_in(l)).transpose();
        c.preacts.push_back(S);
        A = (l + 1 < L) ? S.cwiseMax(0.0) : S;
    }
    c.logits = A.col(0);
    return c;
}

}  // namespace

double nll_map_loss(const std::vector<LabeledExample>& data, const ParamVector& theta,
                    const GaussianBelief& prior) {
    if (data.empty()) throw std::invalid_argument("nll_map_loss: empty data");
    const MLPArch& arch = theta.arch();
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    stack_data(data, arch.input_dim(), X, y);
    const Eigen::VectorXd z = forward_batch(X, theta, arch);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) loss += bce_with_logit(z(i), y(i));
    return loss + prior_quadratic(theta, prior);
}

ParamVector gradient(const std::vector<LabeledExample>& data, const ParamVector& theta,
                     const GaussianBelief& prior) {
    if (data.empty()) throw std::invalid_argument("gradient: empty data");
    const MLPArch& arch = theta.arch();
    const int L = arch.n_weight_layers();
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    stack_data(data, arch.input_dim(), X, y);
    const ForwardCache cache = forward_cached(X, theta, arch);

    ParamVector grad(arch);
    // dL/dz = sigmoid(z) - y, propagated back layer by layer.
    Eigen::MatrixXd D =
        (cache.logits.unaryExpr([](double v) { return sigmoid(v); }) - y).matrix();
    for (int l = L - 1; l >= 0; --l) {
        const Eigen::MatrixXd& A_in = cache.activations[static_cast<std::size_t>(l)];
        auto Wg = grad.layer(l);
        Wg.leftCols(arch.fan_in(l)) = D.transpose() * A_in;
        Wg.col(arch.fan_in(l)) = D.colwise().sum().transpose();
        if (l > 0) {
            auto W = theta.layer(l);
            D = (D * W.leftCols(arch.fan_in(l)))
                    .cwiseProduct((cache.preacts[static_cast<std::size_t>(l - 1)].array() > 0.0)
                                      .cast<double>()
                                      .matrix());
        }
    }
    add_prior_gradient(theta, prior, grad);
    return grad;
}

TrainResult train_map(const std::vector<LabeledExample>& data, const GaussianBelief& prior,
                      const TrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train_map: empty data");
    if (cfg.epochs < 0 || cfg.learning_rate <= 0)
        throw std::invalid_argument("train_map: bad optimizer config");

    const MLPArch& arch = prior.mean.arch();
    ParamVector theta = prior.mean;
    if (theta.flat().isZero(0.0)) {
        // Zero-mean prior: break hidden-unit symmetry with a small seeded
        // weight perturbation; biases stay zero.
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> dist(0.0, 1.0);
        for (int l = 0; l < arch.n_weight_layers(); ++l) {
            auto W = theta.layer(l);
            const double scale = cfg.init_perturbation * std::sqrt(2.0 / arch.fan_in(l));
            for (Eigen::Index j = 0; j < arch.fan_in(l); ++j)
                for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = scale * dist(rng);
        }
    }

    TrainResult result;
    result.initial_loss = nll_map_loss(data, theta, prior);
    if (!std::isfinite(result.initial_loss))
        throw std::runtime_error("train_map: non-finite initial loss");
    if (cfg.record_history) result.loss_history.push_back(result.initial_loss);

    ParamVector best = theta;
    double best_loss = result.initial_loss;

    Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const ParamVector g = gradient(data, theta, prior);
        if (cfg.adaptive) {
            m = b1 * m + (1.0 - b1) * g.flat();
            v = b2 * v + (1.0 - b2) * g.flat().cwiseAbs2();
            const double c1 = 1.0 - std::pow(b1, epoch);
            const double c2 = 1.0 - std::pow(b2, epoch);
            theta.flat() -=
                cfg.learning_rate *
                ((m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
        } else {
            theta.flat() -= cfg.learning_rate * g.flat();
        }
        const double loss = nll_map_loss(data, theta, prior);
        if (!std::isfinite(loss))
            throw std::runtime_error("train_map: diverged (non-finite loss) at epoch " +
                                     std::to_string(epoch));
        if (cfg.record_history) result.loss_history.push_back(loss);
        if (loss < best_loss) {
            best_loss = loss;
            best = theta;
        }
    }

    result.theta = std::move(best);
    result.final_loss = best_loss;
    return result;
}

}  // namespace streamal
