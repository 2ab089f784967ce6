// Data model for feature streams and the synthetic drifting-class scenario
// generator that stands in for recorded demonstration sequences.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace streamal {

using FeatureVector = Eigen::VectorXd;

// One frame of a stream. class_id names the demonstration's class; the
// binary label says whether the frame is an instance of that class.
struct LabeledExample {
    FeatureVector x;
    int class_id = 0;
    int binary_label = 0;
};

// One demonstration sequence: frames indexed 1..K, all sharing dimension d.
struct Demonstration {
    int task_id = 0;
    int class_id = 0;
    std::vector<LabeledExample> frames;
};

// Gaussian cluster with a per-task linear drift schedule: at task t the
// cluster is N(mean + t*drift, sigma_t^2 I) with
// sigma_t = cov_scale * (1 + t * cov_inflation).
struct ClassSpec {
    int class_id = 0;
    Eigen::VectorXd mean;
    double cov_scale = 1.0;
    Eigen::VectorXd drift;     // per-task mean translation
    double cov_inflation = 0.0;
    int first_task = 0;        // class absent from earlier tasks
};

struct ScenarioConfig {
    int d = 32;
    std::vector<ClassSpec> classes;
    int demos_per_class = 5;     // one demonstration per class per task
    int frames_per_demo = 100;
    double pos_fraction = 0.8;   // remaining frames are negatives
    double noise_scale = 1.0;    // global multiplier on all cluster scales
    double background_scale = 2.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Default benchmark scenario: class means on random directions at the given
// separation from the origin, each class drifting along a random direction
// by drift_step per task.
ScenarioConfig make_default_scenario(int n_classes, int d, int tasks,
                                     std::uint64_t seed, double separation = 6.0,
                                     double drift_step = 1.5,
                                     double cov_inflation = 0.0);

// Deterministic in cfg.seed. Demonstrations ordered by (task_id, class_id).
// Each demonstration holds positive frames from the class cluster at its
// task and negative frames from the other classes' clusters plus a
// background cluster at the origin.
std::vector<Demonstration> generate_scenario(const ScenarioConfig& cfg);

// Single positive draw from class `spec` at task t. Used by the harness to
// build oracle pools and held-out test sets from the same distributions.
FeatureVector sample_class_point(const ClassSpec& spec, int task, double noise_scale,
                                 std::mt19937_64& rng);
FeatureVector sample_background_point(int d, double background_scale,
                                      double noise_scale, std::mt19937_64& rng);

// Stream CSV: header `task_id,class_id,frame_idx,binary_label,f0,...,f{d-1}`,
// rows sorted by (task_id, class_id, frame_idx), '.' decimal separator.
// Doubles are written with enough digits to round-trip exactly.
void save_stream(const std::vector<Demonstration>& demos, const std::string& path);
std::vector<Demonstration> load_stream(const std::string& path);

// Seed derivation for independent substreams (splitmix64 over mixed words).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace streamal
