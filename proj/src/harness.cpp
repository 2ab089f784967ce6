#include "streamal/harness.hpp"

#include "streamal/checkpoint.hpp"
#include "streamal/laplace.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace streamal {

namespace fs = std::filesystem;

// Documented predicate for scoring query decisions (also written to the run
// manifest).
static const char* kQueryPredicate =
    "a query is correct when the raw argmax prediction was wrong or its raw "
    "confidence was below the query threshold; a no-query is correct when the "
    "raw argmax prediction was right";

OracleScript::OracleScript(const ScenarioConfig& scenario,
                           const std::vector<Demonstration>& demos, int pool_size,
                           int test_frames_per_class, int test_background_frames,
                           std::uint64_t seed)
    : pool_size_(pool_size), seed_(seed) {
    for (const auto& demo : demos) {
        n_tasks_ = std::max(n_tasks_, demo.task_id + 1);
        auto key = std::make_pair(demo.class_id, demo.task_id);
        for (const auto& f : demo.frames)
            (f.binary_label == 1 ? positives_ : negatives_)[key].push_back(f);
    }

    // Held-out test pools, disjoint from the demonstrations by construction
    // (fresh draws from the scenario distributions on a separate substream).
    test_sets_.resize(static_cast<std::size_t>(n_tasks_));
    for (int t = 0; t < n_tasks_; ++t) {
        auto& pool = test_sets_[static_cast<std::size_t>(t)];
        for (const auto& spec : scenario.classes) {
            if (t < spec.first_task) continue;
            std::mt19937_64 rng(derive_seed(seed, 0x7E57, static_cast<std::uint64_t>(t),
                                            static_cast<std::uint64_t>(spec.class_id)));
            for (int i = 0; i < test_frames_per_class; ++i)
                pool.push_back({sample_class_point(spec, t, scenario.noise_scale, rng),
                                spec.class_id});
        }
        std::mt19937_64 rng(derive_seed(seed, 0x7E57B6, static_cast<std::uint64_t>(t)));
        for (int i = 0; i < test_background_frames; ++i)
            pool.push_back({sample_background_point(scenario.d, scenario.background_scale,
                                                    scenario.noise_scale, rng),
                            -1});
    }
}

std::vector<LabeledExample> OracleScript::demo_pool(int class_id, int task) const {
    auto it = positives_.find({class_id, task});
    if (it == positives_.end() || it->second.empty())
        throw std::runtime_error("oracle: no demonstration pool for class " +
                                 std::to_string(class_id) + " task " + std::to_string(task));
    const auto& all = it->second;
    if (static_cast<int>(all.size()) <= pool_size_) return all;
    std::mt19937_64 rng(derive_seed(seed_, 0x9001, static_cast<std::uint64_t>(class_id),
                                    static_cast<std::uint64_t>(task)));
    std::vector<LabeledExample> pool;
    std::sample(all.begin(), all.end(), std::back_inserter(pool),
                static_cast<std::size_t>(pool_size_), rng);
    return pool;
}

std::vector<LabeledExample> OracleScript::negative_pool(int class_id, int task) const {
    std::vector<LabeledExample> out;
    for (const auto& [key, frames] : positives_) {
        if (key.first == class_id || key.second > task) continue;
        for (const auto& f : frames) out.push_back({f.x, class_id, 0});
    }
    for (const auto& [key, frames] : negatives_) {
        if (key.first != class_id || key.second > task) continue;
        for (const auto& f : frames) out.push_back({f.x, class_id, 0});
    }
    if (out.empty())
        throw std::runtime_error("oracle: no negative examples available for class " +
                                 std::to_string(class_id));
    return out;
}

const std::vector<TestFrame>& OracleScript::test_set(int task) const {
    return test_sets_.at(static_cast<std::size_t>(task));
}

void RunConfig::validate() const {
    if (stream_csv.empty()) scenario.validate();
    if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0))
        throw std::invalid_argument("RunConfig: confidence threshold must lie in (0,1)");
    if (!(theta_new > 0.0 && theta_new < 1.0))
        throw std::invalid_argument("RunConfig: theta_new must lie in (0,1)");
    if (!(class_prior_p > 0.0 && class_prior_p < 1.0))
        throw std::invalid_argument("RunConfig: class prior must lie in (0,1)");
    if (warmup_frames < 1) throw std::invalid_argument("RunConfig: warmup_frames must be >= 1");
    if (max_queries_per_episode < 0)
        throw std::invalid_argument("RunConfig: max_queries_per_episode must be >= 0");
    if (oracle_pool_size < 1 || test_frames_per_class < 1)
        throw std::invalid_argument("RunConfig: pool sizes must be >= 1");
    if (gamma <= 0) throw std::invalid_argument("RunConfig: gamma must be > 0");
    bound.validate();
}

RunConfig default_run_config(std::uint64_t seed) {
    RunConfig cfg;
    cfg.scenario = make_default_scenario(3, 32, 5, derive_seed(seed, 0xDA7A));
    cfg.arch = default_arch(cfg.scenario.d);
    cfg.bound = default_bound_config();
    cfg.seed = seed;
    return cfg;
}

namespace {

struct TaskEval {
    std::vector<CellMetrics> cells;
    double accuracy = 1.0;
    std::vector<PredictionRecord> winner_records;
};

TaskEval evaluate_task(const MultiHeadClassifier& clf, int task,
                       const std::vector<TestFrame>& test, int bins = 15) {
    TaskEval eval;
    const auto trained = clf.trained_class_ids();
    if (trained.empty() || test.empty()) return eval;

    std::vector<std::vector<std::pair<int, double>>> probs;
    probs.reserve(test.size());
    for (const auto& f : test) probs.push_back(clf.predict_all(f.x));

    int acc_num = 0, acc_den = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        int winner = probs[i].front().first;
        double wp = probs[i].front().second;
        for (const auto& [cid, p] : probs[i])
            if (p > wp) {
                winner = cid;
                wp = p;
            }
        if (test[i].true_class >= 0) {
            acc_den += 1;
            acc_num += winner == test[i].true_class ? 1 : 0;
            eval.winner_records.push_back({wp, winner == test[i].true_class});
        }
    }
    eval.accuracy = acc_den > 0 ? static_cast<double>(acc_num) / acc_den : 1.0;

    for (std::size_t ci = 0; ci < trained.size(); ++ci) {
        const int cid = trained[ci];
        CellMetrics cell;
        cell.class_id = cid;
        cell.task_id = task;

        std::vector<PredictionRecord> records;
        std::vector<double> scores;
        std::vector<int> labels;
        int tp = 0, fp = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            double p_c = 0.0;
            int winner = probs[i].front().first;
            double wp = probs[i].front().second;
            for (const auto& [id, p] : probs[i]) {
                if (id == cid) p_c = p;
                if (p > wp) {
                    winner = id;
                    wp = p;
                }
            }
            const bool is_c = test[i].true_class == cid;
            scores.push_back(p_c);
            labels.push_back(is_c ? 1 : 0);
            const bool pred_c = p_c >= 0.5;
            records.push_back({pred_c ? p_c : 1.0 - p_c, pred_c == is_c});
            if (winner == cid) (is_c ? tp : fp) += 1;
        }
        cell.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0;
        cell.ece = ece(records, bins);
        const bool both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                          std::count(labels.begin(), labels.end(), 0) > 0;
        cell.auc = both ? auc(scores, labels) : 1.0;
        eval.cells.push_back(std::move(cell));
    }
    return eval;
}

std::vector<LabeledExample> sample_negatives(const std::vector<LabeledExample>& pool, int n,
                                             std::mt19937_64& rng) {
    std::vector<LabeledExample> out;
    if (static_cast<int>(pool.size()) <= n) {
        out = pool;
        return out;
    }
    std::sample(pool.begin(), pool.end(), std::back_inserter(out),
                static_cast<std::size_t>(n), rng);
    return out;
}

// Selection step of one query: model-informed when the head has a sampled
// posterior, uniform otherwise (new heads and the deterministic ablation).
std::vector<LabeledExample> select_training_data(const MultiHeadClassifier& clf, int class_id,
                                                 const std::vector<LabeledExample>& pool,
                                                 const AcquisitionConfig& base,
                                                 std::uint64_t seed) {
    AcquisitionConfig acq = base;
    acq.seed = seed;
    acq.subsample = std::min<int>(acq.subsample, static_cast<int>(pool.size()));
    acq.batch_size = std::min(acq.batch_size, acq.subsample);
    const bool model_informed = clf.has_head(class_id) && clf.head(class_id).trained() &&
                                clf.head(class_id).posterior->kind != BeliefKind::Delta;
    if (!model_informed) acq.method = AcquisitionMethod::Uniform;
    const GaussianBelief* post = model_informed ? &*clf.head(class_id).posterior : nullptr;
    GaussianBelief dummy;
    if (!model_informed) {
        dummy.mean = ParamVector(clf.config().arch);
        dummy.kind = BeliefKind::Delta;
    }
    return subsample_then_select(pool, model_informed ? *post : dummy, clf.config().arch, acq);
}

}  // namespace

MultiHeadClassifier pretrain(const RunConfig& cfg, const OracleScript& oracle,
                             const std::vector<Demonstration>& demos,
                             std::vector<EventRecord>* events,
                             std::vector<CellMetrics>* cells) {
    ClassifierConfig ccfg;
    ccfg.arch = cfg.arch;
    ccfg.gamma = cfg.gamma;
    ccfg.train = cfg.train;
    ccfg.prior_mode = cfg.prior_mode;
    ccfg.seed = derive_seed(cfg.seed, 0xC1F);
    MultiHeadClassifier clf(ccfg);

    BoundConfig bound = cfg.bound;
    bound.risk_seed = derive_seed(cfg.seed, 0xB0);

    std::vector<int> task0_classes;
    for (const auto& d : demos)
        if (d.task_id == 0) task0_classes.push_back(d.class_id);
    std::sort(task0_classes.begin(), task0_classes.end());

    for (int cid : task0_classes) {
        clf.add_head(cid);
        if (events) events->push_back({EventRecord::Type::AddHead, 0, cid, 0});
        auto pool = oracle.demo_pool(cid, 0);
        // No posterior exists yet, so initialization selects uniformly.
        AcquisitionConfig acq = cfg.acquisition;
        acq.method = AcquisitionMethod::Uniform;
        acq.seed = derive_seed(cfg.seed, 0x1417, static_cast<std::uint64_t>(cid));
        acq.subsample = std::min<int>(acq.subsample, static_cast<int>(pool.size()));
        acq.batch_size = std::min(acq.batch_size, acq.subsample);
        GaussianBelief dummy;
        dummy.mean = ParamVector(cfg.arch);
        dummy.kind = BeliefKind::Delta;
        auto selected = subsample_then_select(pool, dummy, cfg.arch, acq);

        std::mt19937_64 neg_rng(derive_seed(cfg.seed, 0x9E6, static_cast<std::uint64_t>(cid)));
        auto negs = sample_negatives(oracle.negative_pool(cid, 0),
                                     static_cast<int>(selected.size()), neg_rng);
        selected.insert(selected.end(), negs.begin(), negs.end());

        const UpdateResult r = clf.update_head(cid, selected, bound);
        if (events) events->push_back({EventRecord::Type::Update, 0, cid, 0});
        if (cells) {
            CellMetrics cell;
            cell.class_id = cid;
            cell.task_id = 0;
            cell.train_seconds = r.train_seconds;
            if (r.report) cell.bounds.push_back(*r.report);
            cells->push_back(std::move(cell));
        }
    }
    return clf;
}

RunResult run_stream(const RunConfig& cfg) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    std::vector<Demonstration> demos;
    ScenarioConfig scenario = cfg.scenario;
    if (!cfg.stream_csv.empty()) {
        demos = load_stream(cfg.stream_csv);
        scenario.d = static_cast<int>(demos.front().frames.front().x.size());
    } else {
        demos = generate_scenario(scenario);
    }
    MLPArch arch = cfg.arch;
    if (arch.layer_sizes.empty()) arch = default_arch(scenario.d);
    RunConfig rcfg = cfg;
    rcfg.arch = arch;

    OracleScript oracle(scenario, demos, cfg.oracle_pool_size, cfg.test_frames_per_class,
                        cfg.test_background_frames, derive_seed(cfg.seed, 0x04AC1E));

    RunResult result;
    std::vector<CellMetrics> pending_cells;
    MultiHeadClassifier clf = pretrain(rcfg, oracle, demos, &result.events, &pending_cells);

    BoundConfig bound = cfg.bound;
    bound.risk_seed = derive_seed(cfg.seed, 0xB0);

    std::map<std::pair<int, int>, CellMetrics> cell_stats;  // (class, task) -> counters
    for (auto& c : pending_cells) cell_stats[{c.class_id, c.task_id}] = std::move(c);

    std::map<int, int> queries_per_class;
    std::map<int, bool> pending_confidence;  // classes added mid-run
    std::map<int, int> episodes_per_class;   // online episodes (t >= 1)
    std::vector<QueryDecision> all_decisions;
    std::map<std::pair<int, int>, std::vector<QueryDecision>> cell_decisions;

    const std::string ckpt_root =
        cfg.out_dir.empty() ? std::string{} : (fs::path(cfg.out_dir) / "checkpoints").string();

    // Task-0 offline evaluation.
    {
        const TaskEval eval = evaluate_task(clf, 0, oracle.test_set(0));
        for (const auto& cell : eval.cells) {
            auto& dst = cell_stats[{cell.class_id, 0}];
            const auto bounds = dst.bounds;
            const double secs = dst.train_seconds;
            dst = cell;
            dst.bounds = bounds;
            dst.train_seconds = secs;
        }
        if (!ckpt_root.empty()) clf.save_checkpoint((fs::path(ckpt_root) / "task_0").string());
    }

    const int n_tasks = oracle.n_tasks();
    for (int t = 1; t < n_tasks; ++t) {
        // Episodes of this task, in class order.
        std::vector<const Demonstration*> episodes;
        for (const auto& d : demos)
            if (d.task_id == t) episodes.push_back(&d);
        std::sort(episodes.begin(), episodes.end(),
                  [](const Demonstration* a, const Demonstration* b) {
                      return a->class_id < b->class_id;
                  });

        for (const Demonstration* episode : episodes) {
            const int true_class = episode->class_id;
            episodes_per_class[true_class] += 1;
            std::map<int, FilterState> filters;  // reset at episode start
            int queries_this_episode = 0;
            int last_update_frame = 0;
            int k = 0;

            for (const auto& frame : episode->frames) {
                ++k;
                const auto probs = clf.predict_all(frame.x);

                int raw_winner = probs.front().first;
                double raw_wp = probs.front().second;
                for (const auto& [cid, p] : probs)
                    if (p > raw_wp) {
                        raw_winner = cid;
                        raw_wp = p;
                    }

                int filt_winner = -1;
                double filt_wp = 0.0;
                for (const auto& [cid, p] : probs) {
                    auto [it, inserted] =
                        filters.try_emplace(cid, FilterState::with_prior(cfg.class_prior_p));
                    filter_update(it->second, p);
                    const double fp = it->second.probability();
                    result.decisions.push_back({t, true_class, k, cid, p, fp,
                                                normalized_entropy(fp), false});
                    if (filt_winner < 0 || fp > filt_wp) {
                        filt_winner = cid;
                        filt_wp = fp;
                    }
                }

                // Confidence bookkeeping for classes added mid-run.
                if (auto it = pending_confidence.find(true_class);
                    it != pending_confidence.end() && it->second) {
                    auto f = filters.find(true_class);
                    if (f != filters.end() && f->second.probability() >= 0.85) {
                        result.queries_until_confident[true_class] =
                            queries_per_class[true_class];
                        it->second = false;
                    }
                }

                const bool may_decide = k >= cfg.warmup_frames &&
                                        (k - last_update_frame) >= cfg.warmup_frames;
                if (!may_decide) continue;
                const bool wants_query = should_query(filt_wp, cfg.confidence_threshold);
                const bool can_query =
                    wants_query && queries_this_episode < cfg.max_queries_per_episode;

                // Decision record against ground truth: positive frames carry
                // the episode class, negatives are "not this class".
                const bool pred_correct = frame.binary_label == 1
                                              ? raw_winner == true_class
                                              : raw_winner != true_class;
                QueryDecision qd{can_query, pred_correct,
                                 raw_wp >= cfg.confidence_threshold};
                all_decisions.push_back(qd);
                cell_decisions[{true_class, t}].push_back(qd);

                if (!can_query) continue;

                // Query: the oracle names the true class and hands over the
                // demonstration pool; an unknown class gets a new head first.
                queries_this_episode += 1;
                queries_per_class[true_class] += 1;
                result.decisions.back().queried = true;
                result.events.push_back({EventRecord::Type::Query, t, true_class, k});
                cell_stats[{true_class, t}].query_count += 1;

                if (!clf.has_head(true_class)) {
                    clf.add_head(true_class);
                    result.events.push_back({EventRecord::Type::AddHead, t, true_class, k});
                    pending_confidence[true_class] = true;
                }

                const auto pool = oracle.demo_pool(true_class, t);
                const auto q_index =
                    static_cast<std::uint64_t>(queries_per_class[true_class]);
                auto selected = select_training_data(
                    clf, true_class, pool, cfg.acquisition,
                    derive_seed(derive_seed(cfg.seed, 0xACC,
                                            static_cast<std::uint64_t>(true_class),
                                            static_cast<std::uint64_t>(t)),
                                q_index));
                std::mt19937_64 neg_rng(derive_seed(
                    derive_seed(cfg.seed, 0x9E6, static_cast<std::uint64_t>(true_class),
                                static_cast<std::uint64_t>(t)),
                    q_index));
                auto negs = sample_negatives(oracle.negative_pool(true_class, t),
                                             static_cast<int>(selected.size()), neg_rng);
                selected.insert(selected.end(), negs.begin(), negs.end());

                const UpdateResult r = clf.update_head(true_class, selected, bound);
                result.events.push_back({EventRecord::Type::Update, t, true_class, k});
                auto& cell = cell_stats[{true_class, t}];
                cell.train_seconds += r.train_seconds;
                if (r.report) cell.bounds.push_back(*r.report);
                result.metrics.max_update_seconds =
                    std::max(result.metrics.max_update_seconds, r.train_seconds);

                // New model: evidence accumulated for this class restarts.
                filters[true_class] = FilterState::with_prior(cfg.class_prior_p);
                last_update_frame = k;
            }
        }

        const TaskEval eval = evaluate_task(clf, t, oracle.test_set(t));
        for (const auto& cell : eval.cells) {
            auto& dst = cell_stats[{cell.class_id, t}];
            const auto bounds = dst.bounds;
            const double secs = dst.train_seconds;
            const int queries = dst.query_count;
            dst = cell;
            dst.bounds = bounds;
            dst.train_seconds = secs;
            dst.query_count = queries;
        }
        if (!ckpt_root.empty())
            clf.save_checkpoint((fs::path(ckpt_root) / ("task_" + std::to_string(t))).string());
    }

    // Assemble the report.
    MetricsReport& m = result.metrics;
    for (auto& [key, cell] : cell_stats) {
        auto it = cell_decisions.find(key);
        cell.query_success_rate =
            it == cell_decisions.end() ? 1.0 : query_success_rate(it->second);
        m.cells.push_back(cell);
    }

    double sum_p = 0, sum_e = 0, sum_a = 0;
    int n_online = 0;
    for (const auto& cell : m.cells) {
        if (cell.task_id == 0) continue;
        sum_p += cell.precision;
        sum_e += cell.ece;
        sum_a += cell.auc;
        n_online += 1;
        m.total_queries += cell.query_count;
    }
    if (n_online > 0) {
        m.mean_precision = sum_p / n_online;
        m.mean_ece = sum_e / n_online;
        m.mean_auc = sum_a / n_online;
    }
    m.query_success_rate = query_success_rate(all_decisions);
    for (const auto& e : result.events)
        if (e.type == EventRecord::Type::AddHead && e.task > 0) m.add_head_events += 1;

    // Winner accuracy over online test pools.
    {
        double acc = 0;
        int n = 0;
        for (int t = 1; t < n_tasks; ++t) {
            const TaskEval eval = evaluate_task(clf, t, oracle.test_set(t));
            acc += eval.accuracy;
            n += 1;
        }
        m.mean_accuracy = n > 0 ? acc / n : 1.0;
    }

    // Queries to reach 85% precision, per class; unreached classes are
    // charged their full query budget.
    {
        std::map<int, std::map<int, const CellMetrics*>> by_class;
        for (const auto& cell : m.cells) by_class[cell.class_id][cell.task_id] = &cell;
        double total = 0;
        int n = 0;
        for (const auto& [cid, cells] : by_class) {
            int cumulative = 0;
            bool reached = false;
            for (const auto& [t, cell] : cells) {
                cumulative += cell->query_count;
                if (cell->precision >= 0.85) {
                    reached = true;
                    break;
                }
            }
            const int budget =
                std::max(1, episodes_per_class[cid]) * cfg.max_queries_per_episode;
            total += reached ? cumulative : std::max(cumulative, budget);
            n += 1;
        }
        m.queries_to_85 = n > 0 ? total / n : 0.0;
    }

    m.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    if (!cfg.out_dir.empty()) report(rcfg, result, cfg.out_dir);
    return result;
}

CellMetrics evaluate_head(const MultiHeadClassifier& clf, int class_id, int task,
                          const std::vector<TestFrame>& test) {
    const TaskEval eval = evaluate_task(clf, task, test);
    for (const auto& cell : eval.cells)
        if (cell.class_id == class_id) return cell;
    throw std::invalid_argument("evaluate_head: class " + std::to_string(class_id) +
                                " has no trained head");
}

namespace {

nlohmann::json bound_to_json(const BoundReport& r, int class_id, int task_id) {
    return {{"emp_risk", r.empirical_risk}, {"kl", r.kl},       {"bound", r.bound},
            {"tau", r.tau},                 {"alpha", r.alpha}, {"beta", r.beta},
            {"class_id", class_id},         {"task_id", task_id}};
}

}  // namespace

void report(const RunConfig& cfg, const RunResult& result, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const MetricsReport& m = result.metrics;

    nlohmann::json j;
    j["schema"] = "streamal-metrics-v1";
    j["config"] = {{"prior_mode", to_string(cfg.prior_mode)},
                   {"seed", cfg.seed},
                   {"confidence_threshold", cfg.confidence_threshold},
                   {"theta_new", cfg.theta_new},
                   {"gamma", cfg.gamma},
                   {"batch_size", cfg.acquisition.batch_size},
                   {"d", cfg.scenario.d}};
    j["cells"] = nlohmann::json::array();
    nlohmann::json cell_secs = nlohmann::json::array();
    for (const auto& cell : m.cells) {
        nlohmann::json c;
        c["class_id"] = cell.class_id;
        c["task_id"] = cell.task_id;
        c["precision"] = cell.precision;
        c["ece"] = cell.ece;
        c["auc"] = cell.auc;
        c["query_count"] = cell.query_count;
        c["query_success_rate"] = cell.query_success_rate;
        c["bounds"] = nlohmann::json::array();
        for (const auto& b : cell.bounds)
            c["bounds"].push_back(bound_to_json(b, cell.class_id, cell.task_id));
        j["cells"].push_back(std::move(c));
        cell_secs.push_back({{"class_id", cell.class_id},
                             {"task_id", cell.task_id},
                             {"seconds", cell.train_seconds}});
    }
    j["aggregates"] = {{"mean_precision", m.mean_precision},
                       {"mean_ece", m.mean_ece},
                       {"mean_auc", m.mean_auc},
                       {"mean_accuracy", m.mean_accuracy},
                       {"query_success_rate", m.query_success_rate},
                       {"total_queries", m.total_queries},
                       {"add_head_events", m.add_head_events},
                       {"queries_to_85", m.queries_to_85}};
    // Wall-clock lives apart so reruns compare equal outside "timing".
    j["timing"] = {{"total_seconds", m.total_seconds},
                   {"max_update_seconds", m.max_update_seconds},
                   {"cell_train_seconds", std::move(cell_secs)}};
    {
        std::ofstream out(fs::path(out_dir) / "metrics.json");
        if (!out) throw std::runtime_error("report: cannot write metrics.json");
        out << j.dump(2) << "\n";
    }

    {
        std::ofstream out(fs::path(out_dir) / "decisions.csv");
        out << "k,class_id,raw_p,filtered_p,norm_entropy,queried\n";
        char buf[160];
        for (const auto& r : result.decisions) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%.12g,%.12g,%.12g,%d\n", r.frame,
                          r.class_id, r.raw_p, r.filtered_p, r.norm_entropy,
                          r.queried ? 1 : 0);
            out << buf;
        }
    }

    {
        std::ofstream out(fs::path(out_dir) / "events.csv");
        out << "type,task,class_id,frame\n";
        for (const auto& e : result.events) {
            const char* type = e.type == EventRecord::Type::Query     ? "query"
                               : e.type == EventRecord::Type::AddHead ? "add_head"
                                                                      : "update";
            out << type << ',' << e.task << ',' << e.class_id << ',' << e.frame << "\n";
        }
    }

    {
        std::ofstream out(fs::path(out_dir) / "curves.csv");
        out << "task_id,class_id,precision,ece,auc,query_count\n";
        for (const auto& cell : m.cells)
            out << cell.task_id << ',' << cell.class_id << ',' << cell.precision << ','
                << cell.ece << ',' << cell.auc << ',' << cell.query_count << "\n";
    }

    {
        nlohmann::json manifest;
        manifest["query_success_predicate"] = kQueryPredicate;
        manifest["prior_mode"] = to_string(cfg.prior_mode);
        manifest["seed"] = cfg.seed;
        manifest["n_tasks"] = cfg.scenario.demos_per_class;
        std::ofstream out(fs::path(out_dir) / "manifest.json");
        out << manifest.dump(2) << "\n";
    }
}

MetricsReport load_metrics_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_metrics_json: cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    if (!j.contains("schema") || j.at("schema").get<std::string>() != "streamal-metrics-v1")
        throw std::runtime_error("load_metrics_json: unknown or missing schema");

    MetricsReport m;
    const auto& agg = j.at("aggregates");
    m.mean_precision = agg.at("mean_precision").get<double>();
    m.mean_ece = agg.at("mean_ece").get<double>();
    m.mean_auc = agg.at("mean_auc").get<double>();
    m.mean_accuracy = agg.at("mean_accuracy").get<double>();
    m.query_success_rate = agg.at("query_success_rate").get<double>();
    m.total_queries = agg.at("total_queries").get<int>();
    m.add_head_events = agg.at("add_head_events").get<int>();
    m.queries_to_85 = agg.at("queries_to_85").get<double>();
    for (const auto& c : j.at("cells")) {
        CellMetrics cell;
        cell.class_id = c.at("class_id").get<int>();
        cell.task_id = c.at("task_id").get<int>();
        cell.precision = c.at("precision").get<double>();
        cell.ece = c.at("ece").get<double>();
        cell.auc = c.at("auc").get<double>();
        cell.query_count = c.at("query_count").get<int>();
        cell.query_success_rate = c.at("query_success_rate").get<double>();
        for (const auto& b : c.at("bounds")) {
            BoundReport r;
            r.empirical_risk = b.at("emp_risk").get<double>();
            r.kl = b.at("kl").get<double>();
            r.bound = b.at("bound").get<double>();
            r.tau = b.at("tau").get<double>();
            r.alpha = b.at("alpha").get<double>();
            r.beta = b.at("beta").get<double>();
            cell.bounds.push_back(r);
        }
        m.cells.push_back(std::move(cell));
    }
    if (j.contains("timing")) {
        m.total_seconds = j.at("timing").at("total_seconds").get<double>();
        m.max_update_seconds = j.at("timing").at("max_update_seconds").get<double>();
    }
    return m;
}

}  // namespace streamal
