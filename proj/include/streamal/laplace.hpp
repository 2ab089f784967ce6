// Laplace approximation machinery: Kronecker-factored likelihood curvature,
// posterior assembly under the (tau, alpha, beta) tempering rule, matrix-normal
// parameter sampling, Monte-Carlo predictive marginalization, and
// posterior-to-prior chaining.
#pragma once

#include "streamal/belief.hpp"
#include "streamal/datagen.hpp"
#include "streamal/mlp.hpp"

#include <Eigen/Cholesky>

#include <random>
#include <span>
#include <vector>

namespace streamal {

// (A (x) G) v for v = vec(X), X of shape rows(G) x rows(A), column-major.
// Uses the identity (A (x) G) vec(X) = vec(G X A').
Eigen::VectorXd kron_matvec(const Eigen::MatrixXd& A, const Eigen::MatrixXd& G,
                            const Eigen::VectorXd& v);

// Standard Kronecker product, dense. Test oracle for the identity above and
// for dense assembly on tiny layers.
Eigen::MatrixXd dense_kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& G);

// GGN/Fisher curvature of the data log-likelihood at theta_hat, one factor
// pair per layer. Scaling convention (fixed): both factors accumulate raw
// sums over examples,
//   A_l = sum_i a_i a_i',   G_l = sum_i p_i (1 - p_i) u_i' u_i,
// with a_i the bias-augmented layer input and u_i = dz/ds_l the logit
// Jacobian row. The expected (not empirical) Bernoulli second moment
// p(1-p) makes every factor PSD. For a single example the Kronecker
// product equals the exact GGN block, and factors add exactly across
// datasets at fixed theta; the tempering scalars absorb the remaining
// N-dependent scale of the product.
std::vector<KroneckerFactorPair> likelihood_curvature(
    const std::vector<LabeledExample>& data, const ParamVector& theta_hat,
    const MLPArch& arch);

// Zero factors of the right shapes (vacuous likelihood term).
std::vector<KroneckerFactorPair> zero_curvature(const MLPArch& arch);

// Factor-wise tempered combination: each posterior factor is
//   sqrt(tau*beta) * F_lik + sqrt(tau*alpha) * F_prior,
// an isotropic prior entering as sqrt(1/gamma) * I on both sides so the
// per-layer product carries tau*(beta H_lik + alpha H_prior) up to the
// factor-wise cross terms. Factors are jittered to SPD (1e-10 escalating
// x10 to 1e-4) and the accepted jitter is baked in; failure throws.
GaussianBelief assemble_posterior(const ParamVector& theta_hat,
                                  const std::vector<KroneckerFactorPair>& h_lik,
                                  const GaussianBelief& prior, double tau, double alpha,
                                  double beta);

// Exact dense per-layer posterior precision tau*(beta A_l (x) G_l + alpha P),
// for quantifying the factor-wise approximation on small layers.
Eigen::MatrixXd dense_posterior_precision_exact(const KroneckerFactorPair& lik,
                                                const GaussianBelief& prior, int layer,
                                                double tau, double alpha, double beta);
// Dense precision of one layer of an assembled belief.
Eigen::MatrixXd dense_layer_precision(const GaussianBelief& belief, int layer,
                                      const MLPArch& arch);

// Cached factor Cholesky decompositions for repeated sampling from one
// assembled posterior. Draws are matrix-normal per layer:
// X = chol(G)^-T Z chol(A)^-1 with Z iid standard normal.
class PosteriorSampler {
  public:
    explicit PosteriorSampler(const GaussianBelief& posterior);

    const GaussianBelief& posterior() const { return *posterior_; }

    // One draw centred at the posterior mean.
    ParamVector draw(std::mt19937_64& rng) const;
    // Zero-mean offset; callers can rescale (precision tau-scaling divides
    // offsets by sqrt(tau)) before adding a mean.
    ParamVector draw_offset(std::mt19937_64& rng) const;

  private:
    const GaussianBelief* posterior_;
    std::vector<Eigen::MatrixXd> a_chol_;  // lower factors
    std::vector<Eigen::MatrixXd> g_chol_;
};

// S i.i.d. draws from the belief. Delta beliefs return copies of the mean.
std::vector<ParamVector> sample_params(const GaussianBelief& posterior, int n_samples,
                                       std::mt19937_64& rng);

// Monte-Carlo predictive (1/S) sum_s sigmoid(forward(x, theta_s)).
double predictive(const FeatureVector& x, const GaussianBelief& posterior,
                  const MLPArch& arch, int n_samples, std::mt19937_64& rng);

// Same average over a caller-supplied sample set.
double predictive_over(const FeatureVector& x, std::span<const ParamVector> samples,
                       const MLPArch& arch);

// Chain: the assembled posterior of task t-1 becomes the prior of task t,
// mean and precision factors carried over verbatim.
GaussianBelief posterior_to_prior(const GaussianBelief& posterior);

// SPD repair used throughout: jitter ladder 1e-10 * 10^k up to 1e-4 added to
// the diagonal in place; returns the jitter applied. Throws if the ladder is
// exhausted.
double ensure_spd(Eigen::MatrixXd& m, const char* context);

}  // namespace streamal
