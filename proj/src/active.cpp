#include "streamal/active.hpp"

#include "streamal/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace streamal {

namespace {

constexpr double kProbClamp = 1e-6;

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double logit(double p) {
    p = clamp_prob(p);
    return std::log(p / (1.0 - p));
}

double entropy_bits(double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

}  // namespace

FilterState FilterState::with_prior(double p_prior) {
    FilterState s;
    s.prior_log_odds = logit(p_prior);
    s.log_odds = s.prior_log_odds;
    return s;
}

double FilterState::probability() const { return sigmoid(log_odds); }

void FilterState::reset() {
    log_odds = prior_log_odds;
    frame_count = 0;
}

void filter_update(FilterState& state, double measurement_p) {
    state.log_odds = logit(measurement_p) + state.log_odds - state.prior_log_odds;
    ++state.frame_count;
}

double normalized_entropy(double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("normalized_entropy: p outside [0,1]");
    return entropy_bits(p);
}

bool should_query(double filtered_winner_p, double confidence_threshold) {
    return filtered_winner_p < confidence_threshold;
}

void AcquisitionConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("AcquisitionConfig: batch_size must be >= 1");
    if (subsample < batch_size)
        throw std::invalid_argument("AcquisitionConfig: subsample must be >= batch_size");
    if (mc_samples < 2) throw std::invalid_argument("AcquisitionConfig: mc_samples must be >= 2");
    if (exact_config_limit < 1 || sampled_configs < 1)
        throw std::invalid_argument("AcquisitionConfig: config counts must be >= 1");
}

Eigen::MatrixXd candidate_prob_matrix(const std::vector<LabeledExample>& candidates,
                                      const GaussianBelief& posterior, const MLPArch& arch,
                                      int mc_samples, std::mt19937_64& rng) {
    if (candidates.empty()) throw std::invalid_argument("candidate_prob_matrix: no candidates");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(candidates.size()), arch.input_dim());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        X.row(static_cast<Eigen::Index>(i)) = candidates[i].x.transpose();

    if (posterior.kind == BeliefKind::Delta) {
        Eigen::MatrixXd P(X.rows(), mc_samples);
        const Eigen::VectorXd z = forward_batch(X, posterior.mean, arch);
        for (int s = 0; s < mc_samples; ++s)
            P.col(s) = z.unaryExpr([](double v) { return sigmoid(v); });
        return P;
    }

    const auto samples = sample_params(posterior, mc_samples, rng);
    Eigen::MatrixXd P(X.rows(), mc_samples);
    for (int s = 0; s < mc_samples; ++s)
        P.col(s) = forward_batch(X, samples[static_cast<std::size_t>(s)], arch)
                       .unaryExpr([](double v) { return sigmoid(v); });
    return P;
}

Eigen::VectorXd bald_scores_from_probs(const Eigen::MatrixXd& probs) {
    if (probs.cols() < 2) throw std::invalid_argument("bald_scores: need >= 2 samples");
    Eigen::VectorXd scores(probs.rows());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const double mean_p = probs.row(i).mean();
        double cond = 0.0;
        for (Eigen::Index s = 0; s < probs.cols(); ++s) cond += entropy_bits(probs(i, s));
        scores(i) = entropy_bits(mean_p) - cond / static_cast<double>(probs.cols());
    }
    return scores;
}

Eigen::VectorXd bald_scores(const std::vector<LabeledExample>& candidates,
                            const GaussianBelief& posterior, const MLPArch& arch,
                            int mc_samples, std::mt19937_64& rng) {
    return bald_scores_from_probs(
        candidate_prob_matrix(candidates, posterior, arch, mc_samples, rng));
}

namespace {

// Per-sample probabilities of outcome configurations of the selected set.
// Exact mode keeps all 2^b rows; sampled mode keeps rows for configurations
// drawn from the mixture joint itself.
struct ConfigTable {
    Eigen::MatrixXd M;  // n_configs x n_samples, M(k,s) = p(c_k | theta_s)
    bool exact = true;
};

// Joint entropy of (selected, candidate i) in bits. Exact mode sums over all
// configurations; sampled mode is the Monte-Carlo estimator
//   H ~ -(1/K) sum_k sum_y p(y | c_k) log p(c_k, y),   c_k ~ p(c).
double joint_entropy_with(const ConfigTable& table, const Eigen::MatrixXd& probs, int cand) {
    const double S = static_cast<double>(table.M.cols());
    const Eigen::RowVectorXd p1 = probs.row(cand);
    double h = 0.0;
    for (Eigen::Index k = 0; k < table.M.rows(); ++k) {
        const double joint1 = table.M.row(k).dot(p1) / S;
        const double joint0 =
            table.M.row(k).dot((1.0 - p1.array()).matrix()) / S;
        if (table.exact) {
            if (joint1 > 0.0) h -= joint1 * std::log2(joint1);
            if (joint0 > 0.0) h -= joint0 * std::log2(joint0);
        } else {
            const double pc = joint0 + joint1;
            if (pc <= 0.0) continue;
            if (joint1 > 0.0) h -= (joint1 / pc) * std::log2(joint1);
            if (joint0 > 0.0) h -= (joint0 / pc) * std::log2(joint0);
        }
    }
    if (!table.exact) h /= static_cast<double>(table.M.rows());
    return h;
}

void extend_exact(ConfigTable& table, const Eigen::RowVectorXd& p_sel) {
    const Eigen::Index k = table.M.rows();
    Eigen::MatrixXd next(2 * k, table.M.cols());
    for (Eigen::Index row = 0; row < k; ++row) {
        next.row(2 * row) = table.M.row(row).cwiseProduct((1.0 - p_sel.array()).matrix());
        next.row(2 * row + 1) = table.M.row(row).cwiseProduct(p_sel);
    }
    table.M = std::move(next);
}

void to_sampled(ConfigTable& table, int n_configs, std::mt19937_64& rng) {
    // Draw configuration rows from the current exact joint.
    const double S = static_cast<double>(table.M.cols());
    Eigen::VectorXd weights = table.M.rowwise().sum() / S;
    std::discrete_distribution<Eigen::Index> pick(weights.data(),
                                                  weights.data() + weights.size());
    Eigen::MatrixXd sampled(n_configs, table.M.cols());
    for (int k = 0; k < n_configs; ++k) sampled.row(k) = table.M.row(pick(rng));
    table.M = std::move(sampled);
    table.exact = false;
}

void extend_sampled(ConfigTable& table, const Eigen::RowVectorXd& p_sel,
                    std::mt19937_64& rng) {
    // Extend each sampled configuration with a bit drawn from its posterior
    // predictive, keeping rows distributed as the grown joint.
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index k = 0; k < table.M.rows(); ++k) {
        const double w1 = table.M.row(k).dot(p_sel);
        const double w0 = table.M.row(k).dot((1.0 - p_sel.array()).matrix());
        const double p_bit = (w0 + w1) > 0.0 ? w1 / (w0 + w1) : 0.5;
        if (unif(rng) < p_bit)
            table.M.row(k) = table.M.row(k).cwiseProduct(p_sel);
        else
            table.M.row(k) = table.M.row(k).cwiseProduct((1.0 - p_sel.array()).matrix());
    }
}

}  // namespace

double joint_mutual_information(const Eigen::MatrixXd& probs, const std::vector<int>& subset) {
    const Eigen::Index S = probs.cols();
    const std::size_t b = subset.size();
    if (b == 0) return 0.0;
    if (b > 30) throw std::invalid_argument("joint_mutual_information: subset too large");
    const std::size_t n_configs = std::size_t{1} << b;
    double joint_h = 0.0;
    for (std::size_t c = 0; c < n_configs; ++c) {
        double pc = 0.0;
        for (Eigen::Index s = 0; s < S; ++s) {
            double prod = 1.0;
            for (std::size_t j = 0; j < b; ++j) {
                const double p = probs(subset[j], s);
                prod *= (c >> j) & 1U ? p : 1.0 - p;
            }
            pc += prod;
        }
        pc /= static_cast<double>(S);
        if (pc > 0.0) joint_h -= pc * std::log2(pc);
    }
    double cond = 0.0;
    for (std::size_t j = 0; j < b; ++j)
        for (Eigen::Index s = 0; s < S; ++s) cond += entropy_bits(probs(subset[j], s));
    return joint_h - cond / static_cast<double>(S);
}

BatchBaldResult batchbald_select_from_probs(const Eigen::MatrixXd& probs, int batch_size,
                                            int exact_config_limit, int sampled_configs,
                                            std::uint64_t seed) {
    const Eigen::Index m = probs.rows();
    if (batch_size < 1 || batch_size > m)
        throw std::invalid_argument("batchbald_select: batch size exceeds candidate count");
    if (probs.cols() < 2) throw std::invalid_argument("batchbald_select: need >= 2 samples");

    // Per-candidate conditional entropies, shared across greedy steps.
    Eigen::VectorXd cond(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        double c = 0.0;
        for (Eigen::Index s = 0; s < probs.cols(); ++s) c += entropy_bits(probs(i, s));
        cond(i) = c / static_cast<double>(probs.cols());
    }

    std::mt19937_64 rng(seed);
    ConfigTable table{Eigen::MatrixXd::Ones(1, probs.cols()), true};
    std::vector<char> taken(static_cast<std::size_t>(m), 0);

    BatchBaldResult result;
    double mi_prev = 0.0;
    double cond_sum = 0.0;
    for (int step = 0; step < batch_size; ++step) {
        if (table.exact && step + 1 > exact_config_limit) to_sampled(table, sampled_configs, rng);

        int best = -1;
        double best_mi = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (taken[static_cast<std::size_t>(i)]) continue;
            const double mi =
                joint_entropy_with(table, probs, static_cast<int>(i)) - (cond_sum + cond(i));
            if (best < 0 || mi > best_mi) {
                best = static_cast<int>(i);
                best_mi = mi;
            }
        }
        taken[static_cast<std::size_t>(best)] = 1;
        result.selected.push_back(best);
        result.joint_mi.push_back(best_mi);
        result.marginal_gains.push_back(best_mi - mi_prev);
        mi_prev = best_mi;
        cond_sum += cond(best);

        if (step + 1 < batch_size) {
            const Eigen::RowVectorXd p_sel = probs.row(best);
            if (table.exact)
                extend_exact(table, p_sel);
            else
                extend_sampled(table, p_sel, rng);
        }
    }
    return result;
}

BatchBaldResult batchbald_select(const std::vector<LabeledExample>& candidates,
                                 const GaussianBelief& posterior, const MLPArch& arch,
                                 const AcquisitionConfig& cfg) {
    cfg.validate();
    if (cfg.batch_size > static_cast<int>(candidates.size()))
        throw std::invalid_argument("batchbald_select: batch size exceeds candidate count");
    std::mt19937_64 rng(cfg.seed);
    const Eigen::MatrixXd P =
        candidate_prob_matrix(candidates, posterior, arch, cfg.mc_samples, rng);
    return batchbald_select_from_probs(P, cfg.batch_size, cfg.exact_config_limit,
                                       cfg.sampled_configs, derive_seed(cfg.seed, 0xBA7C4));
}

std::vector<LabeledExample> subsample_then_select(const std::vector<LabeledExample>& demo_data,
                                                  const GaussianBelief& posterior,
                                                  const MLPArch& arch,
                                                  const AcquisitionConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(demo_data.size());
    const bool subsampling = cfg.method == AcquisitionMethod::BatchBaldSubsample ||
                             cfg.method == AcquisitionMethod::Uniform ||
                             cfg.method == AcquisitionMethod::Bald;
    const int m = subsampling ? cfg.subsample : n;
    if (m > n)
        throw std::invalid_argument("subsample_then_select: subsample size exceeds pool");
    if (cfg.batch_size > m)
        throw std::invalid_argument("subsample_then_select: batch size exceeds subsample");

    std::mt19937_64 rng(derive_seed(cfg.seed, 0x5B5A17));
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    if (m < n) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(m));
        std::sort(idx.begin(), idx.end());
    }
    std::vector<LabeledExample> pool;
    pool.reserve(idx.size());
    for (int i : idx) pool.push_back(demo_data[static_cast<std::size_t>(i)]);

    std::vector<int> chosen;
    switch (cfg.method) {
        case AcquisitionMethod::Uniform: {
            std::vector<int> order(pool.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            chosen.assign(order.begin(), order.begin() + cfg.batch_size);
            std::sort(chosen.begin(), chosen.end());
            break;
        }
        case AcquisitionMethod::Bald: {
            std::mt19937_64 score_rng(cfg.seed);
            const Eigen::VectorXd scores =
                bald_scores(pool, posterior, arch, cfg.mc_samples, score_rng);
            std::vector<int> order(pool.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return scores(a) > scores(b); });
            chosen.assign(order.begin(), order.begin() + cfg.batch_size);
            break;
        }
        case AcquisitionMethod::BatchBald:
        case AcquisitionMethod::BatchBaldSubsample: {
            AcquisitionConfig inner = cfg;
            inner.method = AcquisitionMethod::BatchBald;
            chosen = batchbald_select(pool, posterior, arch, inner).selected;
            break;
        }
    }

    std::vector<LabeledExample> out;
    out.reserve(chosen.size());
    for (int i : chosen) out.push_back(pool[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace streamal
