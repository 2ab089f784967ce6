#include "streamal/laplace.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace streamal {

Eigen::VectorXd kron_matvec(const Eigen::MatrixXd& A, const Eigen::MatrixXd& G,
                            const Eigen::VectorXd& v) {
    if (v.size() != A.rows() * G.rows() || A.rows() != A.cols() || G.rows() != G.cols())
        throw std::invalid_argument("kron_matvec: shape mismatch");
    Eigen::Map<const Eigen::MatrixXd> X(v.data(), G.rows(), A.rows());
    Eigen::MatrixXd R = G * X * A.transpose();
    return Eigen::Map<Eigen::VectorXd>(R.data(), R.size());
}

Eigen::MatrixXd dense_kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& G) {
    Eigen::MatrixXd K(A.rows() * G.rows(), A.cols() * G.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            K.block(i * G.rows(), j * G.cols(), G.rows(), G.cols()) = A(i, j) * G;
    return K;
}

double ensure_spd(Eigen::MatrixXd& m, const char* context) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return 0.0;
    for (double jitter = 1e-10; jitter <= 1e-4 * 1.0000001; jitter *= 10.0) {
        Eigen::MatrixXd trial = m;
        trial.diagonal().array() += jitter;
        llt.compute(trial);
        if (llt.info() == Eigen::Success) {
            m = std::move(trial);
            return jitter;
        }
    }
    throw std::runtime_error(std::string("ensure_spd: factor not positive definite after "
                                         "jitter ladder (") +
                             context + ")");
}

namespace {

Eigen::LLT<Eigen::MatrixXd> llt_checked(const Eigen::MatrixXd& m, const char* context) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        Eigen::MatrixXd repaired = m;
        ensure_spd(repaired, context);
        llt.compute(repaired);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error(std::string("Cholesky failed (") + context + ")");
    }
    return llt;
}

}  // namespace

std::vector<KroneckerFactorPair> zero_curvature(const MLPArch& arch) {
    std::vector<KroneckerFactorPair> out;
    for (int l = 0; l < arch.n_weight_layers(); ++l)
        out.push_back({Eigen::MatrixXd::Zero(arch.fan_in(l) + 1, arch.fan_in(l) + 1),
                       Eigen::MatrixXd::Zero(arch.fan_out(l), arch.fan_out(l))});
    return out;
}

std::vector<KroneckerFactorPair> likelihood_curvature(
    const std::vector<LabeledExample>& data, const ParamVector& theta_hat,
    const MLPArch& arch) {
    if (data.empty()) throw std::invalid_argument("likelihood_curvature: empty data");
    const int L = arch.n_weight_layers();
    const Eigen::Index n = static_cast<Eigen::Index>(data.size());

    Eigen::MatrixXd X(n, arch.input_dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (data[static_cast<std::size_t>(i)].x.size() != arch.input_dim())
            throw std::invalid_argument("likelihood_curvature: feature dimension mismatch");
        X.row(i) = data[static_cast<std::size_t>(i)].x.transpose();
    }

    // Forward with cached layer inputs and rectifier masks.
    std::vector<Eigen::MatrixXd> inputs;   // A_l, n x fan_in(l)
    std::vector<Eigen::MatrixXd> masks;    // relu'(S_l) for hidden layers
    Eigen::MatrixXd A = X;
    for (int l = 0; l < L; ++l) {
        inputs.push_back(A);
        auto W = theta_hat.layer(l);
        Eigen::MatrixXd S = A * W.leftCols(arch.fan_in(l)).transpose();
        S.rowwise() += W.col(arch.fan_in(l)).transpose();
        if (l + 1 < L) {
            masks.push_back((S.array() > 0.0).cast<double>().matrix());
            A = S.cwiseMax(0.0);
        } else {
            A = std::move(S);
        }
    }

    // Expected Bernoulli second moment of the logit derivative.
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = sigmoid(A(i, 0));
        w(i) = p * (1.0 - p);
    }

    // Logit Jacobian rows U_l = dz/ds_l per example, backpropagated.
    std::vector<KroneckerFactorPair> factors(static_cast<std::size_t>(L));
    Eigen::MatrixXd U = Eigen::MatrixXd::Ones(n, 1);
    for (int l = L - 1; l >= 0; --l) {
        const Eigen::MatrixXd& A_in = inputs[static_cast<std::size_t>(l)];
        Eigen::MatrixXd A_aug(n, A_in.cols() + 1);
        A_aug << A_in, Eigen::VectorXd::Ones(n);
        auto& f = factors[static_cast<std::size_t>(l)];
        f.A = A_aug.transpose() * A_aug;
        f.G = U.transpose() * w.asDiagonal() * U;
        if (l > 0) {
            auto W = theta_hat.layer(l);
            U = (U * W.leftCols(arch.fan_in(l)))
                    .cwiseProduct(masks[static_cast<std::size_t>(l - 1)]);
        }
    }
    return factors;
}

GaussianBelief assemble_posterior(const ParamVector& theta_hat,
                                  const std::vector<KroneckerFactorPair>& h_lik,
                                  const GaussianBelief& prior, double tau, double alpha,
                                  double beta) {
    check_hyperparams(tau, alpha, beta);
    const MLPArch& arch = theta_hat.arch();
    const int L = arch.n_weight_layers();
    if (static_cast<int>(h_lik.size()) != L)
        throw std::invalid_argument("assemble_posterior: factor count mismatch");
    if (prior.kind == BeliefKind::Delta)
        throw std::invalid_argument("assemble_posterior: delta prior has no curvature");
    if (prior.kind == BeliefKind::Kronecker && static_cast<int>(prior.factors.size()) != L)
        throw std::invalid_argument("assemble_posterior: prior factor count mismatch");

    const double w_lik = std::sqrt(tau * beta);
    const double w_pri = std::sqrt(tau * alpha);

    GaussianBelief post;
    post.mean = theta_hat;
    post.kind = BeliefKind::Kronecker;
    post.tau = tau;
    post.alpha = alpha;
    post.beta = beta;
    post.factors.resize(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) {
        const auto& lik = h_lik[static_cast<std::size_t>(l)];
        const Eigen::Index na = arch.fan_in(l) + 1;
        const Eigen::Index ng = arch.fan_out(l);
        if (lik.A.rows() != na || lik.G.rows() != ng)
            throw std::invalid_argument("assemble_posterior: likelihood factor shape mismatch");
        auto& f = post.factors[static_cast<std::size_t>(l)];
        if (prior.kind == BeliefKind::Kronecker) {
            const auto& pf = prior.factors[static_cast<std::size_t>(l)];
            f.A = w_lik * lik.A + w_pri * pf.A;
            f.G = w_lik * lik.G + w_pri * pf.G;
        } else {
            const double iso = std::sqrt(prior.iso_precision);
            f.A = w_lik * lik.A;
            f.A.diagonal().array() += w_pri * iso;
            f.G = w_lik * lik.G;
            f.G.diagonal().array() += w_pri * iso;
        }
        ensure_spd(f.A, "posterior input factor");
        ensure_spd(f.G, "posterior output factor");
    }
    return post;
}

Eigen::MatrixXd dense_layer_precision(const GaussianBelief& belief, int layer,
                                      const MLPArch& arch) {
    const Eigen::Index p =
        static_cast<Eigen::Index>(arch.fan_out(layer)) * (arch.fan_in(layer) + 1);
    switch (belief.kind) {
        case BeliefKind::Isotropic:
            return belief.iso_precision * Eigen::MatrixXd::Identity(p, p);
        case BeliefKind::Kronecker: {
            const auto& f = belief.factors[static_cast<std::size_t>(layer)];
            return dense_kron(f.A, f.G);
        }
        case BeliefKind::Delta:
            throw std::invalid_argument("dense_layer_precision: delta belief");
    }
    throw std::logic_error("dense_layer_precision: unreachable");
}

Eigen::MatrixXd dense_posterior_precision_exact(const KroneckerFactorPair& lik,
                                                const GaussianBelief& prior, int layer,
                                                double tau, double alpha, double beta) {
    check_hyperparams(tau, alpha, beta);
    const Eigen::Index p = lik.A.rows() * lik.G.rows();
    Eigen::MatrixXd prior_block;
    if (prior.kind == BeliefKind::Isotropic)
        prior_block = prior.iso_precision * Eigen::MatrixXd::Identity(p, p);
    else
        prior_block = dense_kron(prior.factors[static_cast<std::size_t>(layer)].A,
                                 prior.factors[static_cast<std::size_t>(layer)].G);
    return tau * (beta * dense_kron(lik.A, lik.G) + alpha * prior_block);
}

PosteriorSampler::PosteriorSampler(const GaussianBelief& posterior) : posterior_(&posterior) {
    if (posterior.kind == BeliefKind::Kronecker) {
        for (const auto& f : posterior.factors) {
            a_chol_.push_back(
                Eigen::MatrixXd(llt_checked(f.A, "sampler input factor").matrixL()));
            g_chol_.push_back(
                Eigen::MatrixXd(llt_checked(f.G, "sampler output factor").matrixL()));
        }
    }
}

ParamVector PosteriorSampler::draw_offset(std::mt19937_64& rng) const {
    const MLPArch& arch = posterior_->mean.arch();
    ParamVector offset(arch);
    if (posterior_->kind == BeliefKind::Delta) return offset;
    std::normal_distribution<double> dist(0.0, 1.0);
    if (posterior_->kind == BeliefKind::Isotropic) {
        const double sd = 1.0 / std::sqrt(posterior_->iso_precision);
        for (Eigen::Index i = 0; i < offset.flat().size(); ++i) offset.flat()(i) = sd * dist(rng);
        return offset;
    }
    for (int l = 0; l < arch.n_weight_layers(); ++l) {
        auto X = offset.layer(l);
        Eigen::MatrixXd Z(X.rows(), X.cols());
        for (Eigen::Index c = 0; c < Z.cols(); ++c)
            for (Eigen::Index r = 0; r < Z.rows(); ++r) Z(r, c) = dist(rng);
        // X = L_G^-T Z L_A^-1 gives vec(X) ~ N(0, (A (x) G)^-1).
        const auto& LA = a_chol_[static_cast<std::size_t>(l)];
        const auto& LG = g_chol_[static_cast<std::size_t>(l)];
        Eigen::MatrixXd T = LG.transpose().triangularView<Eigen::Upper>().solve(Z);
        X = LA.triangularView<Eigen::Lower>().solve<Eigen::OnTheRight>(T);
    }
    return offset;
}

ParamVector PosteriorSampler::draw(std::mt19937_64& rng) const {
    ParamVector sample = draw_offset(rng);
    sample.flat() += posterior_->mean.flat();
    return sample;
}

std::vector<ParamVector> sample_params(const GaussianBelief& posterior, int n_samples,
                                       std::mt19937_64& rng) {
    if (n_samples < 1) throw std::invalid_argument("sample_params: need at least one sample");
    PosteriorSampler sampler(posterior);
    std::vector<ParamVector> out;
    out.reserve(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) out.push_back(sampler.draw(rng));
    return out;
}

double predictive_over(const FeatureVector& x, std::span<const ParamVector> samples,
                       const MLPArch& arch) {
    if (samples.empty()) throw std::invalid_argument("predictive_over: no samples");
    double acc = 0.0;
    for (const auto& theta : samples) acc += sigmoid(forward(x, theta, arch));
    return acc / static_cast<double>(samples.size());
}

double predictive(const FeatureVector& x, const GaussianBelief& posterior,
                  const MLPArch& arch, int n_samples, std::mt19937_64& rng) {
    if (posterior.kind == BeliefKind::Delta)
        return sigmoid(forward(x, posterior.mean, arch));
    const auto samples = sample_params(posterior, n_samples, rng);
    return predictive_over(x, samples, arch);
}

GaussianBelief posterior_to_prior(const GaussianBelief& posterior) {
    // Mean and precision factors carry over verbatim.
    return posterior;
}

}  // namespace streamal
