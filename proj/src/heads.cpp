#include "streamal/heads.hpp"

#include "streamal/checkpoint.hpp"
#include "streamal/laplace.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace streamal {

const char* to_string(PriorMode mode) {
    switch (mode) {
        case PriorMode::Full: return "full";
        case PriorMode::MeanOnly: return "mean-only";
        case PriorMode::Vanilla: return "vanilla";
    }
    return "full";
}

PriorMode prior_mode_from_string(const std::string& s) {
    if (s == "full") return PriorMode::Full;
    if (s == "mean-only" || s == "mean_only") return PriorMode::MeanOnly;
    if (s == "vanilla") return PriorMode::Vanilla;
    throw std::invalid_argument("unknown prior mode '" + s + "'");
}

MultiHeadClassifier::MultiHeadClassifier(ClassifierConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.arch.validate();
    if (cfg_.gamma <= 0) throw std::invalid_argument("ClassifierConfig: gamma must be > 0");
    if (cfg_.predict_samples < 1)
        throw std::invalid_argument("ClassifierConfig: predict_samples must be >= 1");
}

Head& MultiHeadClassifier::add_head(int class_id) { return add_head(class_id, cfg_.gamma); }

Head& MultiHeadClassifier::add_head(int class_id, double gamma) {
    if (heads_.count(class_id))
        throw std::invalid_argument("add_head: duplicate class id " +
                                    std::to_string(class_id));
    Head head;
    head.class_id = class_id;
    head.gamma = gamma;
    head.prior = GaussianBelief::isotropic_prior(cfg_.arch, gamma);
    return heads_.emplace(class_id, std::move(head)).first->second;
}

const Head& MultiHeadClassifier::head(int class_id) const {
    auto it = heads_.find(class_id);
    if (it == heads_.end())
        throw std::invalid_argument("head: unknown class id " + std::to_string(class_id));
    return it->second;
}

std::vector<int> MultiHeadClassifier::class_ids() const {
    std::vector<int> ids;
    for (const auto& [id, _] : heads_) ids.push_back(id);
    return ids;
}

std::vector<int> MultiHeadClassifier::trained_class_ids() const {
    std::vector<int> ids;
    for (const auto& [id, h] : heads_)
        if (h.trained()) ids.push_back(id);
    return ids;
}

std::vector<std::pair<int, double>> MultiHeadClassifier::predict_all(
    const FeatureVector& x) const {
    std::vector<std::pair<int, double>> probs;
    for (const auto& [id, h] : heads_) {
        if (!h.trained()) continue;  // untrained heads do not vote
        probs.emplace_back(id, predictive_over(x, h.sample_cache, cfg_.arch));
    }
    if (probs.empty()) throw std::runtime_error("predict_all: no trained heads");
    return probs;
}

std::pair<int, double> MultiHeadClassifier::predict(const FeatureVector& x) const {
    const auto probs = predict_all(x);
    // Map iteration is id-ascending, so keeping strict improvements breaks
    // ties toward the smallest class id.
    std::pair<int, double> best = probs.front();
    for (const auto& p : probs)
        if (p.second > best.second) best = p;
    return best;
}

void MultiHeadClassifier::refresh_sample_cache(Head& head) {
    head.sample_cache.clear();
    const GaussianBelief& post = *head.posterior;
    if (post.kind == BeliefKind::Delta) {
        head.sample_cache.push_back(post.mean);
        return;
    }
    std::mt19937_64 rng(derive_seed(cfg_.seed, 0xCAC4E,
                                    static_cast<std::uint64_t>(head.class_id),
                                    static_cast<std::uint64_t>(head.task_counter)));
    head.sample_cache = sample_params(post, cfg_.predict_samples, rng);
}

UpdateResult MultiHeadClassifier::update_head(int class_id,
                                              const std::vector<LabeledExample>& data,
                                              const BoundConfig& bound_cfg) {
    auto it = heads_.find(class_id);
    if (it == heads_.end())
        throw std::invalid_argument("update_head: unknown class id " +
                                    std::to_string(class_id));
    Head& head = it->second;

    bool has_pos = false, has_neg = false;
    for (const auto& ex : data) {
        has_pos |= ex.binary_label == 1;
        has_neg |= ex.binary_label == 0;
    }
    if (!has_pos || !has_neg)
        throw std::invalid_argument(
            "update_head: training data must contain positive and negative examples");

    const auto t0 = std::chrono::steady_clock::now();

    GaussianBelief prior = head.prior;
    switch (cfg_.prior_mode) {
        case PriorMode::Full:
            break;
        case PriorMode::MeanOnly: {
            GaussianBelief iso = GaussianBelief::isotropic_prior(cfg_.arch, head.gamma);
            iso.mean = prior.mean;  // chained mean, reset covariance
            prior = std::move(iso);
            break;
        }
        case PriorMode::Vanilla:
            prior = GaussianBelief::isotropic_prior(cfg_.arch, head.gamma);
            break;
    }

    TrainConfig tcfg = cfg_.train;
    tcfg.seed = derive_seed(cfg_.seed, 0x7121A, static_cast<std::uint64_t>(class_id),
                            static_cast<std::uint64_t>(head.task_counter));
    const TrainResult trained = train_map(data, prior, tcfg);

    UpdateResult result;
    result.n_used = static_cast<int>(data.size());

    if (cfg_.prior_mode == PriorMode::Vanilla) {
        GaussianBelief post;
        post.mean = trained.theta;
        post.kind = BeliefKind::Delta;
        head.posterior = std::move(post);
        head.prior = GaussianBelief::isotropic_prior(cfg_.arch, head.gamma);
    } else {
        const auto h_lik = likelihood_curvature(data, trained.theta, cfg_.arch);
        const OptimizeResult opt =
            optimize_hyperparams(trained.theta, h_lik, prior, data, bound_cfg);
        head.posterior = assemble_posterior(trained.theta, h_lik, prior, opt.tau, opt.alpha,
                                            opt.beta);
        head.prior = posterior_to_prior(*head.posterior);
        result.report = opt.report;
    }

    head.task_counter += 1;
    refresh_sample_cache(head);

    result.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    head.update_log.push_back(
        {head.task_counter - 1, result.n_used, result.report, result.train_seconds});
    return result;
}

void MultiHeadClassifier::save_checkpoint(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["gamma"] = cfg_.gamma;
    manifest["prior_mode"] = to_string(cfg_.prior_mode);
    manifest["predict_samples"] = cfg_.predict_samples;
    manifest["seed"] = cfg_.seed;
    manifest["arch"] = cfg_.arch.layer_sizes;
    manifest["heads"] = nlohmann::json::array();
    for (const auto& [id, h] : heads_) {
        nlohmann::json j;
        j["class_id"] = id;
        j["task_counter"] = h.task_counter;
        j["gamma"] = h.gamma;
        j["trained"] = h.trained();
        if (h.trained()) {
            const std::string file = "head_" + std::to_string(id) + ".blf";
            j["file"] = file;
            j["tau"] = h.posterior->tau;
            j["alpha"] = h.posterior->alpha;
            j["beta"] = h.posterior->beta;
            save_belief(*h.posterior, (fs::path(dir) / file).string());
        }
        manifest["heads"].push_back(std::move(j));
    }
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw std::runtime_error("save_checkpoint: cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

MultiHeadClassifier MultiHeadClassifier::load_checkpoint(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("load_checkpoint: missing manifest in " + dir);
    nlohmann::json manifest;
    in >> manifest;

    ClassifierConfig cfg;
    cfg.arch.layer_sizes = manifest.at("arch").get<std::vector<int>>();
    cfg.gamma = manifest.at("gamma").get<double>();
    cfg.prior_mode = prior_mode_from_string(manifest.at("prior_mode").get<std::string>());
    cfg.predict_samples = manifest.at("predict_samples").get<int>();
    cfg.seed = manifest.at("seed").get<std::uint64_t>();

    MultiHeadClassifier clf(cfg);
    for (const auto& j : manifest.at("heads")) {
        Head& h = clf.add_head(j.at("class_id").get<int>(), j.at("gamma").get<double>());
        h.task_counter = j.at("task_counter").get<int>();
        if (j.at("trained").get<bool>()) {
            h.posterior =
                load_belief((fs::path(dir) / j.at("file").get<std::string>()).string());
            h.prior = posterior_to_prior(*h.posterior);
            if (h.posterior->kind == BeliefKind::Delta)
                h.prior = GaussianBelief::isotropic_prior(cfg.arch, h.gamma);
            clf.refresh_sample_cache(h);
        }
    }
    return clf;
}

}  // namespace streamal
