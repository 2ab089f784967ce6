// MAP training of one head under a Gaussian prior: penalized cross-entropy
// loss, exact backprop, and a full-batch optimizer.
#pragma once

#include "streamal/belief.hpp"
#include "streamal/datagen.hpp"
#include "streamal/mlp.hpp"

#include <cstdint>
#include <vector>

namespace streamal {

struct TrainConfig {
    double learning_rate = 0.02;
    int epochs = 200;
    std::uint64_t seed = 0;
    bool adaptive = true;        // Adam-style moments; plain GD when false
    double init_perturbation = 1e-2;  // symmetry-breaking noise at task 0
    bool record_history = false;
};

struct TrainResult {
    ParamVector theta;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss_history;  // per-epoch, when recorded
};

// Sum of per-example binary cross-entropy plus the prior quadratic
// 0.5 * (theta - mu)' H_prior (theta - mu). Delta priors contribute no
// quadratic term (the mean is only the initialization).
double nll_map_loss(const std::vector<LabeledExample>& data, const ParamVector& theta,
                    const GaussianBelief& prior);

// Exact gradient of nll_map_loss.
ParamVector gradient(const std::vector<LabeledExample>& data, const ParamVector& theta,
                     const GaussianBelief& prior);

// Full-batch MAP optimization initialized at the prior mean. For a zero-mean
// isotropic prior a small seeded symmetric perturbation breaks hidden-unit
// symmetry. Returns the best iterate seen, so final_loss <= initial_loss.
// Throws on non-finite loss.
TrainResult train_map(const std::vector<LabeledExample>& data, const GaussianBelief& prior,
                      const TrainConfig& cfg);

}  // namespace streamal
