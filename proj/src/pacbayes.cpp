#include "streamal/pacbayes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace streamal {

void BoundConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("BoundConfig: epsilon must lie in (0,1)");
    if (mc_samples < 1) throw std::invalid_argument("BoundConfig: mc_samples must be >= 1");
    if (tau_grid.empty() || alpha_grid.empty() || beta_grid.empty())
        throw std::invalid_argument("BoundConfig: grids must be nonempty");
    for (double t : tau_grid)
        if (!(t > 0)) throw std::invalid_argument("BoundConfig: tau grid values must be > 0");
    for (double a : alpha_grid)
        if (!(a > 0)) throw std::invalid_argument("BoundConfig: alpha grid values must be > 0");
    for (double b : beta_grid)
        if (!(b > 0)) throw std::invalid_argument("BoundConfig: beta grid values must be > 0");
}

std::vector<double> log_grid(double lo, double hi, int n) {
    if (n < 1 || lo <= 0 || hi < lo) throw std::invalid_argument("log_grid: bad range");
    std::vector<double> g(static_cast<std::size_t>(n));
    if (n == 1) {
        g[0] = lo;
        return g;
    }
    const double step = (std::log10(hi) - std::log10(lo)) / (n - 1);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = std::pow(10.0, std::log10(lo) + i * step);
    return g;
}

BoundConfig default_bound_config(std::uint64_t risk_seed) {
    BoundConfig cfg;
    cfg.tau_grid = log_grid(1e-2, 1e2, 5);
    cfg.alpha_grid = log_grid(1e-2, 1e2, 5);
    cfg.beta_grid = log_grid(1e-2, 1e2, 5);
    cfg.risk_seed = risk_seed;
    return cfg;
}

namespace {

struct LayerChol {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double logdet = 0.0;
};

LayerChol chol_of(const Eigen::MatrixXd& m, const char* what) {
    LayerChol c{Eigen::LLT<Eigen::MatrixXd>(m), 0.0};
    if (c.llt.info() != Eigen::Success)
        throw std::runtime_error(std::string("kl_gaussians: matrix not positive definite (") +
                                 what + ")");
    c.logdet = 2.0 * Eigen::MatrixXd(c.llt.matrixL()).diagonal().array().log().sum();
    return c;
}

// Pieces of the Gaussian KL that depend on the posterior only through a
// global precision scale: KL(tau) = 0.5 * (trace/tau + quad - P
//                                          + P ln tau + logdet_rho1 - logdet_pi).
struct KlParts {
    double trace = 0.0;       // tr(Lambda_pi Sigma_rho) at tau = 1
    double quad = 0.0;        // (mu_rho - mu_pi)' Lambda_pi (mu_rho - mu_pi)
    double logdet_rho = 0.0;  // at tau = 1
    double logdet_pi = 0.0;
    double dim = 0.0;
};

double kl_from_parts(const KlParts& k, double tau) {
    const double kl = 0.5 * (k.trace / tau + k.quad - k.dim + k.dim * std::log(tau) +
                             k.logdet_rho - k.logdet_pi);
    return std::max(0.0, kl);  // clamp float noise at the KL(rho||rho) = 0 edge
}

KlParts compute_kl_parts(const GaussianBelief& rho, const GaussianBelief& pi) {
    if (rho.kind == BeliefKind::Delta || pi.kind == BeliefKind::Delta)
        throw std::invalid_argument("kl_gaussians: KL undefined for delta beliefs");
    const MLPArch& arch = rho.mean.arch();
    if (!(pi.mean.arch() == arch))
        throw std::invalid_argument("kl_gaussians: architecture mismatch");

    KlParts k;
    k.dim = static_cast<double>(arch.param_count());
    for (int l = 0; l < arch.n_weight_layers(); ++l) {
        const Eigen::Index na = arch.fan_in(l) + 1;
        const Eigen::Index ng = arch.fan_out(l);
        const double pl = static_cast<double>(na * ng);
        const Eigen::MatrixXd delta = rho.mean.layer(l) - pi.mean.layer(l);

        if (rho.kind == BeliefKind::Kronecker) {
            const auto& rf = rho.factors[static_cast<std::size_t>(l)];
            const LayerChol ca = chol_of(rf.A, "posterior input factor");
            const LayerChol cg = chol_of(rf.G, "posterior output factor");
            k.logdet_rho += static_cast<double>(ng) * ca.logdet +
                            static_cast<double>(na) * cg.logdet;
            if (pi.kind == BeliefKind::Kronecker) {
                const auto& pf = pi.factors[static_cast<std::size_t>(l)];
                const Eigen::MatrixXd a_inv =
                    ca.llt.solve(Eigen::MatrixXd::Identity(na, na));
                const Eigen::MatrixXd g_inv =
                    cg.llt.solve(Eigen::MatrixXd::Identity(ng, ng));
                k.trace += pf.A.cwiseProduct(a_inv).sum() * pf.G.cwiseProduct(g_inv).sum();
            } else {
                const Eigen::MatrixXd a_inv =
                    ca.llt.solve(Eigen::MatrixXd::Identity(na, na));
                const Eigen::MatrixXd g_inv =
                    cg.llt.solve(Eigen::MatrixXd::Identity(ng, ng));
                k.trace += pi.iso_precision * a_inv.trace() * g_inv.trace();
            }
        } else {
            if (!(rho.iso_precision > 0))
                throw std::invalid_argument("kl_gaussians: posterior precision must be > 0");
            k.logdet_rho += pl * std::log(rho.iso_precision);
            if (pi.kind == BeliefKind::Kronecker) {
                const auto& pf = pi.factors[static_cast<std::size_t>(l)];
                k.trace += pf.A.trace() * pf.G.trace() / rho.iso_precision;
            } else {
                k.trace += pl * pi.iso_precision / rho.iso_precision;
            }
        }

        if (pi.kind == BeliefKind::Kronecker) {
            const auto& pf = pi.factors[static_cast<std::size_t>(l)];
            const LayerChol pa = chol_of(pf.A, "prior input factor");
            const LayerChol pg = chol_of(pf.G, "prior output factor");
            k.quad += delta.cwiseProduct(pf.G * delta * pf.A).sum();
            k.logdet_pi += static_cast<double>(ng) * pa.logdet +
                           static_cast<double>(na) * pg.logdet;
        } else {
            if (!(pi.iso_precision > 0))
                throw std::invalid_argument("kl_gaussians: prior not positive definite");
            k.quad += pi.iso_precision * delta.squaredNorm();
            k.logdet_pi += pl * std::log(pi.iso_precision);
        }
    }
    return k;
}

}  // namespace

double kl_gaussians(const GaussianBelief& rho, const GaussianBelief& pi) {
    return kl_from_parts(compute_kl_parts(rho, pi), 1.0);
}

double kl_gaussians_dense(const GaussianBelief& rho, const GaussianBelief& pi,
                          const MLPArch& arch) {
    double kl = 0.0;
    for (int l = 0; l < arch.n_weight_layers(); ++l) {
        const Eigen::MatrixXd lam_rho = dense_layer_precision(rho, l, arch);
        const Eigen::MatrixXd lam_pi = dense_layer_precision(pi, l, arch);
        const Eigen::Index p = lam_rho.rows();
        const Eigen::VectorXd delta_v = [&] {
            Eigen::MatrixXd d = rho.mean.layer(l) - pi.mean.layer(l);
            return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(d.data(), d.size()));
        }();
        const LayerChol cr = chol_of(lam_rho, "dense posterior");
        const LayerChol cp = chol_of(lam_pi, "dense prior");
        const Eigen::MatrixXd sigma_rho = cr.llt.solve(Eigen::MatrixXd::Identity(p, p));
        kl += 0.5 * ((lam_pi.cwiseProduct(sigma_rho)).sum() +
                     delta_v.dot(lam_pi * delta_v) - static_cast<double>(p) + cr.logdet -
                     cp.logdet);
    }
    return std::max(0.0, kl);
}

double empirical_risk_from_logits(const Eigen::MatrixXd& logits, const Eigen::VectorXd& labels) {
    if (logits.rows() != labels.size() || logits.size() == 0)
        throw std::invalid_argument("empirical_risk_from_logits: shape mismatch");
    std::int64_t wrong = 0;
    for (Eigen::Index s = 0; s < logits.cols(); ++s)
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const int pred = logits(i, s) >= 0.0 ? 1 : 0;  // p >= 0.5 ties to class 1
            wrong += (pred != static_cast<int>(labels(i)));
        }
    return static_cast<double>(wrong) /
           (static_cast<double>(logits.rows()) * static_cast<double>(logits.cols()));
}

double empirical_risk(const GaussianBelief& posterior, const std::vector<LabeledExample>& data,
                      const MLPArch& arch, int mc_samples, std::mt19937_64& rng) {
    if (data.empty()) throw std::invalid_argument("empirical_risk: empty data");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), arch.input_dim());
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        X.row(static_cast<Eigen::Index>(i)) = data[i].x.transpose();
        y(static_cast<Eigen::Index>(i)) = data[i].binary_label;
    }
    if (posterior.kind == BeliefKind::Delta) {
        const Eigen::MatrixXd logits = forward_batch(X, posterior.mean, arch);
        return empirical_risk_from_logits(logits, y);
    }
    const auto samples = sample_params(posterior, mc_samples, rng);
    Eigen::MatrixXd logits(X.rows(), mc_samples);
    for (int s = 0; s < mc_samples; ++s)
        logits.col(s) = forward_batch(X, samples[static_cast<std::size_t>(s)], arch);
    return empirical_risk_from_logits(logits, y);
}

double mcallester_bound(double emp_risk, double kl, std::int64_t n, double epsilon) {
    if (n < 1) throw std::invalid_argument("mcallester_bound: n must be >= 1");
    if (kl < 0) throw std::invalid_argument("mcallester_bound: kl must be >= 0");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("mcallester_bound: epsilon must lie in (0,1)");
    const double nn = static_cast<double>(n);
    return emp_risk + std::sqrt((kl + std::log(2.0 * std::sqrt(nn) / epsilon)) / (2.0 * nn));
}

OptimizeResult optimize_hyperparams(const ParamVector& theta_hat,
                                    const std::vector<KroneckerFactorPair>& h_lik,
                                    const GaussianBelief& prior,
                                    const std::vector<LabeledExample>& data,
                                    const BoundConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("optimize_hyperparams: empty data");
    const MLPArch& arch = theta_hat.arch();
    const std::int64_t n = static_cast<std::int64_t>(data.size());

    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), arch.input_dim());
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        X.row(static_cast<Eigen::Index>(i)) = data[i].x.transpose();
        y(static_cast<Eigen::Index>(i)) = data[i].binary_label;
    }

    struct Combo {
        double alpha;
        double beta;
        std::vector<BoundReport> reports;  // one per tau
        bool valid = false;
    };
    std::vector<Combo> combos;
    for (double a : cfg.alpha_grid)
        for (double b : cfg.beta_grid) combos.push_back({a, b, {}, false});

    // Each (alpha, beta) pair is assembled once at tau = 1; precision scales
    // linearly in tau, so posterior offsets rescale by 1/sqrt(tau) and the
    // KL follows in closed form. One fixed risk seed pairs every grid point.
    auto eval_combo = [&](Combo& c) {
        GaussianBelief rho1;
        try {
            rho1 = assemble_posterior(theta_hat, h_lik, prior, 1.0, c.alpha, c.beta);
        } catch (const std::runtime_error&) {
            return;  // non-PD at this grid point
        }
        const KlParts parts = compute_kl_parts(rho1, prior);
        PosteriorSampler sampler(rho1);
        std::mt19937_64 rng(cfg.risk_seed);
        std::vector<ParamVector> offsets;
        offsets.reserve(static_cast<std::size_t>(cfg.mc_samples));
        for (int s = 0; s < cfg.mc_samples; ++s) offsets.push_back(sampler.draw_offset(rng));

        for (double tau : cfg.tau_grid) {
            const double scale = 1.0 / std::sqrt(tau);
            Eigen::MatrixXd logits(X.rows(), cfg.mc_samples);
            ParamVector theta_s(arch);
            for (int s = 0; s < cfg.mc_samples; ++s) {
                theta_s.flat() =
                    theta_hat.flat() + scale * offsets[static_cast<std::size_t>(s)].flat();
                logits.col(s) = forward_batch(X, theta_s, arch);
            }
            BoundReport r;
            r.tau = tau;
            r.alpha = c.alpha;
            r.beta = c.beta;
            r.empirical_risk = empirical_risk_from_logits(logits, y);
            r.kl = kl_from_parts(parts, tau);
            r.bound = mcallester_bound(r.empirical_risk, r.kl, n, cfg.epsilon);
            c.reports.push_back(r);
        }
        c.valid = true;
    };

    int n_threads = cfg.threads > 0 ? cfg.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(combos.size())));
    if (n_threads == 1) {
        for (auto& c : combos) eval_combo(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < combos.size();
                     i = next.fetch_add(1))
                    eval_combo(combos[i]);
            });
        for (auto& th : pool) th.join();
    }

    OptimizeResult out;
    bool found = false;
    auto better = [](const BoundReport& a, const BoundReport& b) {
        return std::tie(a.bound, a.tau, a.beta, a.alpha) <
               std::tie(b.bound, b.tau, b.beta, b.alpha);
    };
    for (const auto& c : combos) {
        if (!c.valid) continue;
        for (const auto& r : c.reports) {
            out.all_points.push_back(r);
            if (!found || better(r, out.report)) {
                out.report = r;
                found = true;
            }
        }
    }
    if (!found)
        throw std::runtime_error(
            "optimize_hyperparams: every grid point produced a non-PD posterior");
    out.tau = out.report.tau;
    out.alpha = out.report.alpha;
    out.beta = out.report.beta;
    return out;
}

}  // namespace streamal
