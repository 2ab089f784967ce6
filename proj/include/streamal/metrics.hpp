// Evaluation metrics: expected calibration error, ROC AUC, and the query
// success rate over logged decisions.
#pragma once

#include <vector>

namespace streamal {

struct PredictionRecord {
    double prob = 0.0;  // winner's confidence
    bool correct = false;
};

// Sum_b (n_b/N) |acc_b - conf_b| with equal-width confidence bins.
double ece(const std::vector<PredictionRecord>& predictions, int bins);

// Mann-Whitney U / (n+ n-), ties credited 0.5. Throws when only one label
// value is present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// One per-frame decision. The decision predicate (documented in the run
// manifest): a query is correct when the raw prediction was wrong or under
// the confidence threshold; a no-query is correct when the raw prediction
// was right.
struct QueryDecision {
    bool queried = false;
    bool pred_correct = false;
    bool confident_raw = false;  // raw winner probability >= threshold
};

double query_success_rate(const std::vector<QueryDecision>& decisions);

}  // namespace streamal
