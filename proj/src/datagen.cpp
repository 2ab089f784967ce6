#include "streamal/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace streamal {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(mix(seed) ^ a) ^ b) ^ c);
}

void ScenarioConfig::validate() const {
    if (d <= 0) throw std::invalid_argument("ScenarioConfig: d must be positive");
    if (classes.empty()) throw std::invalid_argument("ScenarioConfig: class list is empty");
    if (frames_per_demo < 1)
        throw std::invalid_argument("ScenarioConfig: frames_per_demo must be >= 1");
    if (demos_per_class < 1)
        throw std::invalid_argument("ScenarioConfig: demos_per_class must be >= 1");
    if (!(pos_fraction > 0.0 && pos_fraction <= 1.0))
        throw std::invalid_argument("ScenarioConfig: pos_fraction must lie in (0,1]");
    if (!(noise_scale > 0.0) || !(background_scale > 0.0))
        throw std::invalid_argument("ScenarioConfig: scales must be positive");
    for (const auto& c : classes) {
        if (c.mean.size() != d || (c.drift.size() != 0 && c.drift.size() != d))
            throw std::invalid_argument("ScenarioConfig: class spec dimension mismatch");
        if (!(c.cov_scale > 0.0))
            throw std::invalid_argument("ScenarioConfig: covariance scales must be > 0");
        if (c.first_task < 0 || c.first_task >= demos_per_class)
            throw std::invalid_argument("ScenarioConfig: first_task out of range");
    }
}

ScenarioConfig make_default_scenario(int n_classes, int d, int tasks, std::uint64_t seed,
                                     double separation, double drift_step,
                                     double cov_inflation) {
    if (n_classes < 1) throw std::invalid_argument("make_default_scenario: need >= 1 class");
    ScenarioConfig cfg;
    cfg.d = d;
    cfg.demos_per_class = tasks;
    cfg.seed = seed;
    std::mt19937_64 rng(derive_seed(seed, 0xC1A55E5ULL));
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int c = 0; c < n_classes; ++c) {
        ClassSpec spec;
        spec.class_id = c;
        spec.mean.resize(d);
        for (int i = 0; i < d; ++i) spec.mean(i) = dist(rng);
        spec.mean *= separation / spec.mean.norm();
        spec.drift.resize(d);
        for (int i = 0; i < d; ++i) spec.drift(i) = dist(rng);
        spec.drift *= drift_step / spec.drift.norm();
        spec.cov_scale = 1.0;
        spec.cov_inflation = cov_inflation;
        cfg.classes.push_back(std::move(spec));
    }
    return cfg;
}

FeatureVector sample_class_point(const ClassSpec& spec, int task, double noise_scale,
                                 std::mt19937_64& rng) {
    const int d = static_cast<int>(spec.mean.size());
    const double sigma =
        spec.cov_scale * noise_scale * (1.0 + task * spec.cov_inflation);
    std::normal_distribution<double> dist(0.0, 1.0);
    FeatureVector x(d);
    for (int i = 0; i < d; ++i) x(i) = dist(rng) * sigma;
    x += spec.mean;
    if (spec.drift.size() == d) x += static_cast<double>(task) * spec.drift;
    return x;
}

FeatureVector sample_background_point(int d, double background_scale, double noise_scale,
                                      std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    FeatureVector x(d);
    for (int i = 0; i < d; ++i) x(i) = dist(rng) * background_scale * noise_scale;
    return x;
}

std::vector<Demonstration> generate_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    std::vector<Demonstration> demos;
    for (int t = 0; t < cfg.demos_per_class; ++t) {
        for (const auto& spec : cfg.classes) {
            if (t < spec.first_task) continue;
            std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t),
                                            static_cast<std::uint64_t>(spec.class_id)));
            Demonstration demo;
            demo.task_id = t;
            demo.class_id = spec.class_id;

            const int n_pos = std::max(
                1, static_cast<int>(std::lround(cfg.frames_per_demo * cfg.pos_fraction)));
            const int n_neg = cfg.frames_per_demo - n_pos;

            std::vector<LabeledExample> frames;
            frames.reserve(static_cast<std::size_t>(cfg.frames_per_demo));
            for (int i = 0; i < n_pos; ++i)
                frames.push_back({sample_class_point(spec, t, cfg.noise_scale, rng),
                                  spec.class_id, 1});

            // Negatives: other classes present at this task, plus one
            // background cluster at the origin.
            std::vector<const ClassSpec*> others;
            for (const auto& o : cfg.classes)
                if (o.class_id != spec.class_id && t >= o.first_task) others.push_back(&o);
            std::uniform_int_distribution<int> pick(0, static_cast<int>(others.size()));
            for (int i = 0; i < n_neg; ++i) {
                const int j = pick(rng);
                FeatureVector x =
                    (j == static_cast<int>(others.size()))
                        ? sample_background_point(cfg.d, cfg.background_scale,
                                                  cfg.noise_scale, rng)
                        : sample_class_point(*others[static_cast<std::size_t>(j)], t,
                                             cfg.noise_scale, rng);
                frames.push_back({std::move(x), spec.class_id, 0});
            }

            std::shuffle(frames.begin(), frames.end(), rng);
            demo.frames = std::move(frames);
            demos.push_back(std::move(demo));
        }
    }
    return demos;
}

namespace {

void require_finite(const FeatureVector& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x(i)))
            throw std::invalid_argument("stream: non-finite feature value");
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& cell, int line_no) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw std::runtime_error("stream line " + std::to_string(line_no) +
                                 ": non-numeric cell '" + cell + "'");
    return v;
}

int parse_int(const std::string& cell, int line_no) {
    int v = 0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw std::runtime_error("stream line " + std::to_string(line_no) +
                                 ": non-integer cell '" + cell + "'");
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) cells.push_back(cur);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

void save_stream(const std::vector<Demonstration>& demos, const std::string& path) {
    if (demos.empty()) throw std::invalid_argument("save_stream: empty stream");
    const Eigen::Index d = demos.front().frames.empty() ? 0 : demos.front().frames[0].x.size();
    if (d == 0) throw std::invalid_argument("save_stream: empty demonstration");
    for (const auto& demo : demos)
        for (const auto& f : demo.frames) {
            if (f.x.size() != d)
                throw std::invalid_argument("save_stream: inconsistent feature dimension");
            require_finite(f.x);
        }

    std::vector<const Demonstration*> order;
    for (const auto& demo : demos) order.push_back(&demo);
    std::sort(order.begin(), order.end(), [](const Demonstration* a, const Demonstration* b) {
        return std::tie(a->task_id, a->class_id) < std::tie(b->task_id, b->class_id);
    });

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_stream: cannot open '" + path + "' for writing");
    out << "task_id,class_id,frame_idx,binary_label";
    for (Eigen::Index i = 0; i < d; ++i) out << ",f" << i;
    out << "\n";
    for (const auto* demo : order) {
        int k = 1;
        for (const auto& f : demo->frames) {
            out << demo->task_id << ',' << demo->class_id << ',' << k++ << ','
                << f.binary_label;
            for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(f.x(i));
            out << "\n";
        }
    }
    if (!out.good()) throw std::runtime_error("save_stream: write failed for '" + path + "'");
}

std::vector<Demonstration> load_stream(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_stream: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_stream: empty stream file");

    const auto header = split_csv(line);
    if (header.size() < 5 || header[0] != "task_id" || header[1] != "class_id" ||
        header[2] != "frame_idx" || header[3] != "binary_label")
        throw std::runtime_error("load_stream: malformed header");
    const int d = static_cast<int>(header.size()) - 4;
    for (int i = 0; i < d; ++i)
        if (header[static_cast<std::size_t>(4 + i)] != "f" + std::to_string(i))
            throw std::runtime_error("load_stream: malformed header (feature columns)");

    std::vector<Demonstration> demos;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (static_cast<int>(cells.size()) != 4 + d)
            throw std::runtime_error("stream line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(4 + d) + " cells, got " +
                                     std::to_string(cells.size()));
        LabeledExample ex;
        const int task = parse_int(cells[0], line_no);
        ex.class_id = parse_int(cells[1], line_no);
        const int frame_idx = parse_int(cells[2], line_no);
        ex.binary_label = parse_int(cells[3], line_no);
        if (ex.binary_label != 0 && ex.binary_label != 1)
            throw std::runtime_error("stream line " + std::to_string(line_no) +
                                     ": binary_label must be 0 or 1");
        ex.x.resize(d);
        for (int i = 0; i < d; ++i)
            ex.x(i) = parse_double(cells[static_cast<std::size_t>(4 + i)], line_no);
        require_finite(ex.x);

        if (demos.empty() || demos.back().task_id != task ||
            demos.back().class_id != ex.class_id) {
            if (frame_idx != 1)
                throw std::runtime_error("stream line " + std::to_string(line_no) +
                                         ": demonstration must start at frame_idx 1");
            demos.push_back({task, ex.class_id, {}});
        } else if (frame_idx != static_cast<int>(demos.back().frames.size()) + 1) {
            throw std::runtime_error("stream line " + std::to_string(line_no) +
                                     ": frame_idx must increase by 1");
        }
        demos.back().frames.push_back(std::move(ex));
    }
    if (demos.empty()) throw std::runtime_error("load_stream: empty stream file");
    return demos;
}

}  // namespace streamal
