// Multi-head classifier: one Bayesian binary head per class, argmax
// combination, head creation with isotropic priors, and per-head task
// updates chaining Laplace posteriors into priors with PAC-Bayes-selected
// tempering.
#pragma once

#include "streamal/belief.hpp"
#include "streamal/datagen.hpp"
#include "streamal/pacbayes.hpp"
#include "streamal/train.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace streamal {

// Ablation variants of the update rule.
//   Full:     prior = previous posterior (mean and precision), Eq.-style chain
//   MeanOnly: prior mean chains, precision reset to isotropic each task
//   Vanilla:  fresh isotropic prior, delta posterior, no tempering search
enum class PriorMode { Full, MeanOnly, Vanilla };

const char* to_string(PriorMode mode);
PriorMode prior_mode_from_string(const std::string& s);

struct HeadUpdateRecord {
    int task = 0;
    int n_used = 0;
    std::optional<BoundReport> report;  // absent for Vanilla updates
    double train_seconds = 0.0;
};

struct Head {
    int class_id = 0;
    int task_counter = 0;  // completed updates; the next update is task t
    double gamma = 1.0;
    GaussianBelief prior;  // staged for the next update
    std::optional<GaussianBelief> posterior;
    std::vector<HeadUpdateRecord> update_log;
    // Posterior draws refreshed after each update; streaming predictions
    // reuse them so per-frame marginalization stays cheap and deterministic.
    std::vector<ParamVector> sample_cache;

    bool trained() const { return posterior.has_value(); }
};

struct ClassifierConfig {
    MLPArch arch;
    double gamma = 1.0;
    TrainConfig train;
    PriorMode prior_mode = PriorMode::Full;
    int predict_samples = 32;
    std::uint64_t seed = 0;
};

struct UpdateResult {
    std::optional<BoundReport> report;
    double train_seconds = 0.0;
    int n_used = 0;
};

class MultiHeadClassifier {
  public:
    explicit MultiHeadClassifier(ClassifierConfig cfg);

    const ClassifierConfig& config() const { return cfg_; }

    // New head with a zero-mean isotropic prior N(0, gamma I); no posterior
    // yet. Throws on duplicate class ids.
    Head& add_head(int class_id);
    Head& add_head(int class_id, double gamma);

    bool has_head(int class_id) const { return heads_.count(class_id) != 0; }
    const Head& head(int class_id) const;
    std::vector<int> class_ids() const;
    std::vector<int> trained_class_ids() const;
    std::size_t size() const { return heads_.size(); }

    // Per-class probabilities from all trained heads, ordered by class id.
    // The vector is deliberately unnormalized. Untrained heads are skipped;
    // throws when no head is trained.
    std::vector<std::pair<int, double>> predict_all(const FeatureVector& x) const;

    // argmax over predict_all; ties go to the smallest class id. Returns the
    // winning class and its own calibrated binary probability.
    std::pair<int, double> predict(const FeatureVector& x) const;

    // One task update for one head: MAP training from the staged prior,
    // likelihood curvature, tempering selection, posterior assembly, and
    // staging of the next prior. Data must contain both labels. All other
    // heads are untouched.
    UpdateResult update_head(int class_id, const std::vector<LabeledExample>& data,
                             const BoundConfig& bound_cfg);

    // Checkpoint directory: manifest.json plus one belief file per trained
    // head. Byte-stable for unchanged heads.
    void save_checkpoint(const std::string& dir) const;
    static MultiHeadClassifier load_checkpoint(const std::string& dir);

  private:
    ClassifierConfig cfg_;
    std::map<int, Head> heads_;

    void refresh_sample_cache(Head& head);
};

}  // namespace streamal
