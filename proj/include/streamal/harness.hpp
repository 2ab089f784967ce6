// End-to-end stream loop: playback, temporal filtering, query decisions
// against a scripted oracle, data selection, head updates, and metrics.
#pragma once

#include "streamal/active.hpp"
#include "streamal/datagen.hpp"
#include "streamal/heads.hpp"
#include "streamal/metrics.hpp"
#include "streamal/pacbayes.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace streamal {

// Labeled frame of a held-out evaluation pool; class_id -1 marks background.
struct TestFrame {
    FeatureVector x;
    int true_class = -1;
};

// Simulated human: knows each episode's true class, supplies the
// demonstration pool when queried, and owns the held-out test pools.
// Pools are disjoint from test sets by construction (separate substreams).
class OracleScript {
  public:
    OracleScript(const ScenarioConfig& scenario, const std::vector<Demonstration>& demos,
                 int pool_size, int test_frames_per_class, int test_background_frames,
                 std::uint64_t seed);

    // Demonstration pool for (class, task): the episode's positive frames,
    // capped at pool_size by a seeded subsample.
    std::vector<LabeledExample> demo_pool(int class_id, int task) const;

    // Negatives certified not to be class_id: positives of other classes'
    // demonstrations up to the given task, plus the class's own demo
    // negatives (other clusters and background).
    std::vector<LabeledExample> negative_pool(int class_id, int task) const;

    const std::vector<TestFrame>& test_set(int task) const;

    int n_tasks() const { return n_tasks_; }

  private:
    int n_tasks_ = 0;
    int pool_size_ = 80;
    std::uint64_t seed_ = 0;
    std::map<std::pair<int, int>, std::vector<LabeledExample>> positives_;  // (c,t)
    std::map<std::pair<int, int>, std::vector<LabeledExample>> negatives_;
    std::vector<std::vector<TestFrame>> test_sets_;  // per task
};

struct RunConfig {
    ScenarioConfig scenario;
    std::string stream_csv;  // when nonempty, overrides scenario generation
    std::string test_csv;    // held-out pools for the CSV path

    MLPArch arch;  // empty layer_sizes = default_arch(d)
    double gamma = 1.0;
    PriorMode prior_mode = PriorMode::Full;
    TrainConfig train;
    BoundConfig bound;
    AcquisitionConfig acquisition;

    double confidence_threshold = 0.85;
    double theta_new = 0.5;     // unknown-object threshold on filtered probs
    double class_prior_p = 0.5; // filter prior, l_0 = logit of this
    int warmup_frames = 5;      // frames before the first decision
    int max_queries_per_episode = 3;

    int oracle_pool_size = 80;
    int test_frames_per_class = 50;
    int test_background_frames = 50;

    std::uint64_t seed = 0;
    std::string out_dir;  // empty = no artifacts written

    void validate() const;
};

RunConfig default_run_config(std::uint64_t seed = 0);

struct EventRecord {
    enum class Type { Query, AddHead, Update };
    Type type;
    int task = 0;
    int class_id = 0;  // queried / added / updated class
    int frame = 0;     // stream index within the episode, 0 for updates
};

struct DecisionRow {
    int task = 0;
    int episode_class = 0;
    int frame = 0;  // k
    int class_id = 0;
    double raw_p = 0.0;
    double filtered_p = 0.0;
    double norm_entropy = 0.0;
    bool queried = false;
};

struct CellMetrics {
    int class_id = 0;
    int task_id = 0;
    double precision = 0.0;  // TP/(TP+FP) over the task's test set
    double ece = 0.0;        // binary calibration of this head
    double auc = 0.0;
    int query_count = 0;
    double query_success_rate = 1.0;
    double train_seconds = 0.0;
    std::vector<BoundReport> bounds;
};

struct MetricsReport {
    std::vector<CellMetrics> cells;
    // Aggregates over online tasks (t >= 1).
    double mean_precision = 0.0;
    double mean_ece = 0.0;
    double mean_auc = 0.0;
    double mean_accuracy = 0.0;  // winner accuracy over test frames
    double query_success_rate = 0.0;
    int total_queries = 0;
    int add_head_events = 0;
    // Mean over classes of queries issued until that class's per-task
    // precision first reaches 0.85; classes that never reach it are charged
    // the full per-class query budget.
    double queries_to_85 = 0.0;
    double max_update_seconds = 0.0;
    double total_seconds = 0.0;
};

struct RunResult {
    MetricsReport metrics;
    std::vector<EventRecord> events;
    std::vector<DecisionRow> decisions;
    // Filtered confidence reached on each class added mid-run, plus the
    // number of queries it took (unknown-object bookkeeping).
    std::map<int, int> queries_until_confident;
};

// Alg.-style main loop. Task 0 demonstrations bootstrap the priors offline;
// tasks >= 1 stream episode by episode with per-frame filtering, query
// decisions, selection, and single-head updates. Deterministic given seeds.
RunResult run_stream(const RunConfig& cfg);

// Task-0 initialization only (pretraining); used by the `pretrain` command.
MultiHeadClassifier pretrain(const RunConfig& cfg, const OracleScript& oracle,
                             const std::vector<Demonstration>& demos,
                             std::vector<EventRecord>* events = nullptr,
                             std::vector<CellMetrics>* cells = nullptr);

// Offline evaluation of a classifier on one test pool.
CellMetrics evaluate_head(const MultiHeadClassifier& clf, int class_id, int task,
                          const std::vector<TestFrame>& test);

// Writes metrics.json, decisions.csv, events.csv, curves.csv and
// manifest.json under out_dir. Wall-clock fields live in a separate
// "timing" object so reruns compare equal outside it.
void report(const RunConfig& cfg, const RunResult& result, const std::string& out_dir);

// Parses and validates a metrics.json produced by report(); throws on
// missing fields.
MetricsReport load_metrics_json(const std::string& path);

}  // namespace streamal
