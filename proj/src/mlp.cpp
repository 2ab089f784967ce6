#include "streamal/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace streamal {

std::int64_t MLPArch::param_count() const {
    std::int64_t p = 0;
    for (int l = 0; l < n_weight_layers(); ++l)
        p += static_cast<std::int64_t>(fan_out(l)) * (fan_in(l) + 1);
    return p;
}

void MLPArch::validate() const {
    if (layer_sizes.size() < 3)
        throw std::invalid_argument("MLPArch: at least one hidden layer required");
    if (layer_sizes.back() != 1)
        throw std::invalid_argument("MLPArch: output width must be 1");
    for (int s : layer_sizes)
        if (s <= 0) throw std::invalid_argument("MLPArch: layer sizes must be positive");
}

MLPArch default_arch(int input_dim) {
    if (input_dim <= 0) throw std::invalid_argument("default_arch: input_dim must be positive");
    return MLPArch{{input_dim, 64, 32, 1}};
}

ParamVector::ParamVector(const MLPArch& arch) : arch_(arch) {
    build_offsets();
    data_ = Eigen::VectorXd::Zero(arch_.param_count());
}

ParamVector::ParamVector(const MLPArch& arch, Eigen::VectorXd flat)
    : arch_(arch), data_(std::move(flat)) {
    build_offsets();
    if (data_.size() != arch_.param_count())
        throw std::invalid_argument("ParamVector: flat size inconsistent with arch");
}

void ParamVector::build_offsets() {
    offsets_.assign(arch_.n_weight_layers() + 1, 0);
    for (int l = 0; l < arch_.n_weight_layers(); ++l)
        offsets_[l + 1] =
            offsets_[l] + static_cast<std::int64_t>(arch_.fan_out(l)) * (arch_.fan_in(l) + 1);
}

Eigen::Map<const Eigen::MatrixXd> ParamVector::layer(int l) const {
    return {data_.data() + offsets_[l], arch_.fan_out(l), arch_.fan_in(l) + 1};
}

Eigen::Map<Eigen::MatrixXd> ParamVector::layer(int l) {
    return {data_.data() + offsets_[l], arch_.fan_out(l), arch_.fan_in(l) + 1};
}

Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> ParamVector::weights(int l) const {
    return {data_.data() + offsets_[l], arch_.fan_out(l), arch_.fan_in(l),
            Eigen::OuterStride<>(arch_.fan_out(l))};
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_with_logit(double logit, double label) {
    // max(z,0) - y z + log(1 + exp(-|z|))
    return std::max(logit, 0.0) - label * logit + std::log1p(std::exp(-std::abs(logit)));
}

double forward(const FeatureVector& x, const ParamVector& theta, const MLPArch& arch) {
    if (x.size() != arch.input_dim())
        throw std::invalid_argument("forward: feature dimension mismatch");
    Eigen::VectorXd a = x;
    const int L = arch.n_weight_layers();
    for (int l = 0; l < L; ++l) {
        auto W = theta.layer(l);
        Eigen::VectorXd s = W.leftCols(arch.fan_in(l)) * a + W.col(arch.fan_in(l));
        if (l + 1 < L) s = s.cwiseMax(0.0);
        a = std::move(s);
    }
    return a(0);
}

Eigen::VectorXd forward_batch(const Eigen::MatrixXd& X, const ParamVector& theta,
                              const MLPArch& arch) {
    if (X.cols() != arch.input_dim())
        throw std::invalid_argument("forward_batch: feature dimension mismatch");
    Eigen::MatrixXd A = X;
    const int L = arch.n_weight_layers();
    for (int l = 0; l < L; ++l) {
        auto W = theta.layer(l);
        Eigen::MatrixXd S =
            A * W.leftCols(arch.fan_in(l)).transpose();
        S.rowwise() += W.col(arch.fan_in(l)).transpose();
        if (l + 1 < L) S = S.cwiseMax(0.0);
        A = std::move(S);
    }
    return A.col(0);
}

}  // namespace streamal
