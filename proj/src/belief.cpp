#include "streamal/belief.hpp"

#include <stdexcept>

namespace streamal {

GaussianBelief GaussianBelief::isotropic_prior(const MLPArch& arch, double gamma) {
    if (gamma <= 0) throw std::invalid_argument("isotropic_prior: gamma must be positive");
    GaussianBelief b;
    b.mean = ParamVector(arch);
    b.kind = BeliefKind::Isotropic;
    b.iso_precision = 1.0 / gamma;
    return b;
}

void check_hyperparams(double tau, double alpha, double beta) {
    if (!(tau > 0)) throw std::invalid_argument("hyperparams: tau must be > 0");
    if (alpha < 0 || beta < 0)
        throw std::invalid_argument("hyperparams: alpha and beta must be >= 0");
    if (!(alpha + beta > 0))
        throw std::invalid_argument("hyperparams: alpha + beta must be > 0");
}

}  // namespace streamal
