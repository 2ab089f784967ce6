// Temporal fusion and querying (log-odds filter, normalized entropy,
// threshold rule) and informative data selection (BALD, BatchBALD with
// subsampling).
#pragma once

#include "streamal/belief.hpp"
#include "streamal/datagen.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace streamal {

// Per-class accumulated log-odds of the recursive binary-state Bayes filter.
// The retrievable probability is sigmoid(log_odds), always in (0,1).
struct FilterState {
    double log_odds = 0.0;
    double prior_log_odds = 0.0;  // from the class prior p(y=1); 0 for 0.5
    int frame_count = 0;

    static FilterState with_prior(double p_prior);
    double probability() const;
    void reset();
};

// l <- logit(p_k) + l_prev - l_0, probabilities clamped to
// [1e-6, 1 - 1e-6] before the logit.
void filter_update(FilterState& state, double measurement_p);

// Binary Shannon entropy in bits; equals the normalized entropy for two
// outcomes. 0 log 0 taken as 0.
double normalized_entropy(double p);

// Query iff the best filtered probability is below the confidence threshold.
bool should_query(double filtered_winner_p, double confidence_threshold);

enum class AcquisitionMethod { Uniform, Bald, BatchBald, BatchBaldSubsample };

struct AcquisitionConfig {
    AcquisitionMethod method = AcquisitionMethod::BatchBaldSubsample;
    int batch_size = 32;      // points kept per query
    int subsample = 80;       // uniform pre-selection before BatchBALD
    int mc_samples = 32;      // posterior draws for scoring
    int exact_config_limit = 12;   // enumerate 2^b outcome configs up to here
    int sampled_configs = 4096;    // sampled configurations beyond the limit
    std::uint64_t seed = 0;

    void validate() const;
};

// Per-candidate probability matrix: row i holds p(y_i = 1 | theta_s) for
// each posterior sample s. All acquisition scores reduce to this matrix,
// which keeps the scoring functions independent of how samples were made.
Eigen::MatrixXd candidate_prob_matrix(const std::vector<LabeledExample>& candidates,
                                      const GaussianBelief& posterior, const MLPArch& arch,
                                      int mc_samples, std::mt19937_64& rng);

// BALD: H(mean_s p_is) - mean_s H(p_is), in bits.
Eigen::VectorXd bald_scores_from_probs(const Eigen::MatrixXd& probs);
Eigen::VectorXd bald_scores(const std::vector<LabeledExample>& candidates,
                            const GaussianBelief& posterior, const MLPArch& arch,
                            int mc_samples, std::mt19937_64& rng);

struct BatchBaldResult {
    std::vector<int> selected;           // candidate indices in pick order
    std::vector<double> joint_mi;        // objective value after each pick
    std::vector<double> marginal_gains;  // nonincreasing under exact mode
};

// Greedy maximization of I(y_batch; theta) over the candidate set. The joint
// entropy enumerates all 2^b binary outcome configurations while b stays at
// or below exact_config_limit and switches to sampled configurations above.
BatchBaldResult batchbald_select_from_probs(const Eigen::MatrixXd& probs, int batch_size,
                                            int exact_config_limit, int sampled_configs,
                                            std::uint64_t seed);
BatchBaldResult batchbald_select(const std::vector<LabeledExample>& candidates,
                                 const GaussianBelief& posterior, const MLPArch& arch,
                                 const AcquisitionConfig& cfg);

// Joint mutual information of a fixed index set, by direct enumeration of
// all configurations. Brute-force oracle for the greedy path.
double joint_mutual_information(const Eigen::MatrixXd& probs, const std::vector<int>& subset);

// Uniform subsample of size cfg.subsample (seeded), then the configured
// selection keeps cfg.batch_size of them. Uniform method skips scoring.
std::vector<LabeledExample> subsample_then_select(const std::vector<LabeledExample>& demo_data,
                                                  const GaussianBelief& posterior,
                                                  const MLPArch& arch,
                                                  const AcquisitionConfig& cfg);

}  // namespace streamal
