#ifndef COMBO_METRICS_HPP
#define COMBO_METRICS_HPP

#include "combo/booster.hpp"
#include "combo/confusion.hpp"
#include "combo/dataset.hpp"

#include <vector>

namespace combo {

// Geometric mean of per-class recalls; 0 as soon as one class is never
// recognized.
Scalar g_mean(const ConfusionMatrix& probabilistic);

// Hand-and-Till multi-class AUC: average over class pairs of the
// probability that column-l scores rank class-l examples above class-j
// ones, ties counting one half. Pairs with an absent class are skipped and
// reported through `skipped_pairs`.
Scalar mauc(const RowMatrix& scores, const std::vector<int>& labels, int num_classes,
            int* skipped_pairs = nullptr);

struct EvaluationReport {
    Scalar accuracy = 0;
    Vector per_class_recall;
    Scalar g_mean = 0;
    Scalar mauc = 0;
    Scalar operator_norm = 0; // of the error-focused confusion matrix
    Scalar l1_risk = 0;       // against the test-split empirical priors
    ConfusionMatrix probabilistic;
    ConfusionMatrix error_focused;
    int mauc_pairs_skipped = 0;
};

// Full imbalance-aware evaluation of an ensemble on a held-out split. The
// accuracy/l1-risk identity is re-checked on every call.
EvaluationReport evaluate(const BoostedEnsemble& ensemble, const Dataset& test);

} // namespace combo

#endif // COMBO_METRICS_HPP
