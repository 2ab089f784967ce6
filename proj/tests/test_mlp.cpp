#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "streamal/mlp.hpp"
#include "streamal/train.hpp"

#include <chrono>
#include <cmath>
#include <random>

using namespace streamal;

namespace {

ParamVector random_params(const MLPArch& arch, std::mt19937_64& rng, double scale = 0.5) {
    ParamVector theta(arch);
    std::normal_distribution<double> dist(0.0, scale);
    for (Eigen::Index i = 0; i < theta.flat().size(); ++i) theta.flat()(i) = dist(rng);
    return theta;
}

// Independent re-implementation: explicit per-layer loops, no shared code
// with forward().
double naive_forward(const FeatureVector& x, const ParamVector& theta, const MLPArch& arch) {
    std::vector<double> a(x.data(), x.data() + x.size());
    for (int l = 0; l < arch.n_weight_layers(); ++l) {
        auto W = theta.layer(l);
        std::vector<double> s(static_cast<std::size_t>(arch.fan_out(l)), 0.0);
        for (int o = 0; o < arch.fan_out(l); ++o) {
            double acc = W(o, arch.fan_in(l));  // bias
            for (int i = 0; i < arch.fan_in(l); ++i) acc += W(o, i) * a[static_cast<std::size_t>(i)];
            s[static_cast<std::size_t>(o)] = acc;
        }
        if (l + 1 < arch.n_weight_layers())
            for (auto& v : s) v = v > 0 ? v : 0.0;
        a = std::move(s);
    }
    return a[0];
}

std::vector<LabeledExample> two_cluster_data(int n_per, int d, double gap, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<LabeledExample> data;
    for (int i = 0; i < 2 * n_per; ++i) {
        const int label = i < n_per ? 1 : 0;
        FeatureVector x(d);
        for (int j = 0; j < d; ++j) x(j) = dist(rng) + (label ? gap : -gap);
        data.push_back({x, 0, label});
    }
    return data;
}

}  // namespace

TEST_CASE("flatten/unflatten round trip and parameter count") {
    MLPArch arch{{4, 3, 2, 1}};
    CHECK(arch.param_count() == 3 * 5 + 2 * 4 + 1 * 3);
    std::mt19937_64 rng(1);
    ParamVector theta = random_params(arch, rng);
    ParamVector back(arch, theta.flat());
    CHECK(back == theta);
    CHECK(back.layer(1)(1, 2) == theta.layer(1)(1, 2));
}

TEST_CASE("zero network outputs logit zero, probability one half") {
    MLPArch arch{{5, 8, 4, 1}};
    ParamVector theta(arch);
    FeatureVector x = FeatureVector::Random(5);
    CHECK(forward(x, theta, arch) == 0.0);
    CHECK(sigmoid(forward(x, theta, arch)) == 0.5);
}

TEST_CASE("output layer is linear in its weight row") {
    MLPArch arch{{3, 4, 1}};
    std::mt19937_64 rng(7);
    ParamVector theta = random_params(arch, rng);
    theta.layer(1).col(4).setZero();  // zero output bias
    FeatureVector x = FeatureVector::Random(3);
    const double base = forward(x, theta, arch);
    ParamVector scaled = theta;
    scaled.layer(1) *= 3.5;
    scaled.layer(1).col(4).setZero();
    CHECK(forward(x, scaled, arch) == doctest::Approx(3.5 * base).epsilon(1e-12));
}

TEST_CASE("forward matches an independent matrix-chain evaluation") {
    MLPArch arch{{6, 5, 3, 1}};
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 10; ++rep) {
        ParamVector theta = random_params(arch, rng);
        FeatureVector x = FeatureVector::Random(6);
        CHECK(forward(x, theta, arch) ==
              doctest::Approx(naive_forward(x, theta, arch)).epsilon(1e-12));
    }
}

TEST_CASE("forward rejects dimension mismatch") {
    MLPArch arch{{4, 3, 1}};
    ParamVector theta(arch);
    CHECK_THROWS_AS(forward(FeatureVector::Zero(5), theta, arch), std::invalid_argument);
}

TEST_CASE("batched forward equals per-example forward") {
    MLPArch arch{{4, 6, 1}};
    std::mt19937_64 rng(3);
    ParamVector theta = random_params(arch, rng);
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(7, 4);
    const Eigen::VectorXd z = forward_batch(X, theta, arch);
    for (int i = 0; i < 7; ++i)
        CHECK(z(i) == doctest::Approx(forward(X.row(i).transpose(), theta, arch)).epsilon(1e-12));
}

TEST_CASE("loss reduces to plain BCE when prior precision is zero") {
    MLPArch arch{{3, 4, 1}};
    std::mt19937_64 rng(5);
    ParamVector theta = random_params(arch, rng);
    GaussianBelief prior = GaussianBelief::isotropic_prior(arch, 1.0);
    prior.iso_precision = 0.0;
    const auto data = two_cluster_data(5, 3, 1.0, 9);
    double bce = 0.0;
    for (const auto& ex : data) bce += bce_with_logit(forward(ex.x, theta, arch), ex.binary_label);
    CHECK(nll_map_loss(data, theta, prior) == doctest::Approx(bce).epsilon(1e-12));
}

TEST_CASE("prior quadratic vanishes at the prior mean") {
    MLPArch arch{{3, 4, 1}};
    std::mt19937_64 rng(6);
    GaussianBelief prior = GaussianBelief::isotropic_prior(arch, 0.5);
    prior.mean = random_params(arch, rng);
    const auto data = two_cluster_data(4, 3, 1.0, 10);

    GaussianBelief no_prior = prior;
    no_prior.iso_precision = 0.0;
    CHECK(nll_map_loss(data, prior.mean, prior) ==
          doctest::Approx(nll_map_loss(data, prior.mean, no_prior)).epsilon(1e-14));

    // Gradient of the centered quadratic is exactly zero at the mean.
    const ParamVector g_with = gradient(data, prior.mean, prior);
    const ParamVector g_without = gradient(data, prior.mean, no_prior);
    CHECK((g_with.flat() - g_without.flat()).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("single prediction at one half costs ln 2") {
    MLPArch arch{{2, 2, 1}};
    ParamVector theta(arch);  // zero net -> p = 0.5
    GaussianBelief prior = GaussianBelief::isotropic_prior(arch, 1.0);
    prior.iso_precision = 0.0;
    std::vector<LabeledExample> one = {{FeatureVector::Zero(2), 0, 1}};
    CHECK(nll_map_loss(one, theta, prior) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("backprop matches central finite differences") {
    MLPArch arch{{4, 4, 3, 1}};
    std::mt19937_64 rng(2024);
    const double h = 1e-5;
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        ParamVector theta = random_params(arch, rng);
        GaussianBelief prior = GaussianBelief::isotropic_prior(arch, 2.0);
        prior.mean = random_params(arch, rng, 0.2);
        const auto data = two_cluster_data(6, 4, 0.8, 100 + static_cast<std::uint64_t>(rep));
        const ParamVector g = gradient(data, theta, prior);
        for (Eigen::Index i = 0; i < theta.size(); i += 7) {
            ParamVector lo = theta, hi = theta;
            lo.flat()(i) -= h;
            hi.flat()(i) += h;
            const double fd =
                (nll_map_loss(data, hi, prior) - nll_map_loss(data, lo, prior)) / (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(g.flat()(i)), 1e-8});
            worst = std::max(worst, std::abs(fd - g.flat()(i)) / denom);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("training separates a linearly separable toy set") {
    MLPArch arch{{4, 8, 4, 1}};
    const auto data = two_cluster_data(20, 4, 2.0, 77);
    GaussianBelief prior = GaussianBelief::isotropic_prior(arch, 1.0);
    TrainConfig cfg;
    cfg.seed = 3;
    const TrainResult r = train_map(data, prior, cfg);
    CHECK(r.final_loss <= r.initial_loss);
    int correct = 0;
    for (const auto& ex : data)
        correct += (sigmoid(forward(ex.x, r.theta, arch)) >= 0.5 ? 1 : 0) == ex.binary_label;
    CHECK(static_cast<double>(correct) / static_cast<double>(data.size()) >= 0.99);

    // Gradient norm is small at the found optimum relative to start.
    const ParamVector g = gradient(data, r.theta, prior);
    CHECK(g.flat().norm() < 1.0);
}

TEST_CASE("an overwhelming prior pins training to the prior mean") {
    MLPArch arch{{3, 4, 1}};
    std::mt19937_64 rng(11);
    GaussianBelief prior = GaussianBelief::isotropic_prior(arch, 1e-12);  // gamma -> 0
    prior.mean = random_params(arch, rng);
    const auto data = two_cluster_data(10, 3, 1.0, 12);
    TrainConfig cfg;
    cfg.seed = 4;
    const TrainResult r = train_map(data, prior, cfg);
    CHECK((r.theta.flat() - prior.mean.flat()).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("training is deterministic given the seed") {
    MLPArch arch{{4, 8, 1}};
    const auto data = two_cluster_data(10, 4, 1.0, 5);
    GaussianBelief prior = GaussianBelief::isotropic_prior(arch, 1.0);
    TrainConfig cfg;
    cfg.seed = 99;
    const TrainResult a = train_map(data, prior, cfg);
    const TrainResult b = train_map(data, prior, cfg);
    CHECK(a.theta.flat() == b.theta.flat());
}

TEST_CASE("full-batch descent with a small step never increases the loss") {
    MLPArch arch{{3, 5, 1}};
    const auto data = two_cluster_data(10, 3, 1.0, 21);
    GaussianBelief prior = GaussianBelief::isotropic_prior(arch, 1.0);
    TrainConfig cfg;
    cfg.adaptive = false;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 120;
    cfg.seed = 8;
    cfg.record_history = true;
    const TrainResult r = train_map(data, prior, cfg);
    for (std::size_t i = 1; i < r.loss_history.size(); ++i)
        CHECK(r.loss_history[i] <= r.loss_history[i - 1] + 1e-10);
}

TEST_CASE("stronger priors pull the MAP estimate closer to the prior mean") {
    MLPArch arch{{3, 5, 1}};
    const auto data = two_cluster_data(12, 3, 1.0, 31);
    std::mt19937_64 rng(14);
    ParamVector mu = random_params(arch, rng, 0.3);
    double prev = -1.0;
    for (double gamma : {1e3, 1e1, 1e-1, 1e-3, 1e-5}) {
        GaussianBelief prior = GaussianBelief::isotropic_prior(arch, gamma);
        prior.mean = mu;
        TrainConfig cfg;
        cfg.seed = 5;
        const TrainResult r = train_map(data, prior, cfg);
        const double dist = (r.theta.flat() - mu.flat()).norm();
        if (prev >= 0) CHECK(dist <= prev + 1e-9);
        prev = dist;
    }
}

TEST_CASE("default-scale training stays far under the time budget") {
    MLPArch arch = default_arch(32);
    const auto data = two_cluster_data(20, 32, 1.0, 41);  // 40 points
    GaussianBelief prior = GaussianBelief::isotropic_prior(arch, 1.0);
    TrainConfig cfg;
    cfg.seed = 1;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r = train_map(data, prior, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(r.final_loss <= r.initial_loss);
    CHECK(secs < 60.0);
}

TEST_CASE("config validation rejects degenerate architectures") {
    const MLPArch no_hidden{{4, 1}};
    const MLPArch wide_output{{4, 3, 2}};
    CHECK_THROWS_AS(no_hidden.validate(), std::invalid_argument);
    CHECK_THROWS_AS(wide_output.validate(), std::invalid_argument);
    CHECK_THROWS_AS(default_arch(0), std::invalid_argument);
    CHECK_NOTHROW(default_arch(16).validate());
}

TEST_CASE("training rejects empty data") {
    MLPArch arch{{3, 4, 1}};
    GaussianBelief prior = GaussianBelief::isotropic_prior(arch, 1.0);
    CHECK_THROWS_AS(train_map({}, prior, TrainConfig{}), std::invalid_argument);
    CHECK_THROWS_AS(nll_map_loss({}, prior.mean, prior), std::invalid_argument);
}
