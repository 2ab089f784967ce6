#include "streamal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace streamal {

double ece(const std::vector<PredictionRecord>& predictions, int bins) {
    if (predictions.empty()) throw std::invalid_argument("ece: empty prediction list");
    if (bins < 1) throw std::invalid_argument("ece: bins must be >= 1");
    std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> acc_sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<int> count(static_cast<std::size_t>(bins), 0);
    for (const auto& p : predictions) {
        if (p.prob < 0.0 || p.prob > 1.0)
            throw std::invalid_argument("ece: probability outside [0,1]");
        int b = std::min(bins - 1, static_cast<int>(p.prob * bins));
        conf_sum[static_cast<std::size_t>(b)] += p.prob;
        acc_sum[static_cast<std::size_t>(b)] += p.correct ? 1.0 : 0.0;
        count[static_cast<std::size_t>(b)] += 1;
    }
    const double n = static_cast<double>(predictions.size());
    double e = 0.0;
    for (int b = 0; b < bins; ++b) {
        const auto i = static_cast<std::size_t>(b);
        if (count[i] == 0) continue;
        const double nb = static_cast<double>(count[i]);
        e += (nb / n) * std::abs(acc_sum[i] / nb - conf_sum[i] / nb);
    }
    return e;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("auc: scores and labels must be nonempty and equal length");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 1)
            pos.push_back(scores[i]);
        else if (labels[i] == 0)
            neg.push_back(scores[i]);
        else
            throw std::invalid_argument("auc: labels must be 0 or 1");
    }
    if (pos.empty() || neg.empty())
        throw std::invalid_argument("auc: both label values must be present");
    double u = 0.0;
    for (double p : pos)
        for (double q : neg) u += (p > q) ? 1.0 : (p == q ? 0.5 : 0.0);
    return u / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double query_success_rate(const std::vector<QueryDecision>& decisions) {
    if (decisions.empty()) return 1.0;  // no decisions, nothing judged wrong
    int correct = 0;
    for (const auto& d : decisions) {
        const bool ok = d.queried ? (!d.pred_correct || !d.confident_raw) : d.pred_correct;
        correct += ok ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(decisions.size());
}

}  // namespace streamal
