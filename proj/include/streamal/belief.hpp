// Gaussian beliefs over MLP parameters. A belief is block-diagonal across
// layers; each layer block is either an isotropic precision or a Kronecker
// product A (x) G of an input-side and an output-side factor.
#pragma once

#include "streamal/mlp.hpp"

#include <Eigen/Dense>

#include <vector>

namespace streamal {

// Per-layer curvature factors. A is (fan_in+1) x (fan_in+1) over
// bias-augmented layer inputs, G is fan_out x fan_out over pre-activation
// derivatives. Both symmetric PSD. Under column-major vec of the layer's
// [W | b] matrix, the layer precision block is A (x) G.
struct KroneckerFactorPair {
    Eigen::MatrixXd A;
    Eigen::MatrixXd G;
};

enum class BeliefKind {
    Isotropic,  // precision = iso_precision * I on every layer
    Kronecker,  // per-layer factor pairs
    Delta,      // point mass at the mean (deterministic ablation)
};

// Represents both priors and posteriors. iso_precision is 1/gamma for a
// bootstrap prior N(0, gamma I). tau/alpha/beta are recorded on assembled
// posteriors; they are already baked into the factors.
struct GaussianBelief {
    ParamVector mean;
    BeliefKind kind = BeliefKind::Isotropic;
    double iso_precision = 1.0;
    std::vector<KroneckerFactorPair> factors;  // one per layer when Kronecker
    double tau = 1.0;
    double alpha = 1.0;
    double beta = 1.0;

    static GaussianBelief isotropic_prior(const MLPArch& arch, double gamma);
};

void check_hyperparams(double tau, double alpha, double beta);

}  // namespace streamal
