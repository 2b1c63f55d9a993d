#include "combo/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace combo {

Scalar g_mean(const ConfusionMatrix& probabilistic) {
    if (probabilistic.form != ConfusionForm::Probabilistic)
        throw DataError(std::string("g_mean: expected probabilistic form, got ") +
                        confusion_form_name(probabilistic.form));
    const int k = probabilistic.classes();
    Scalar product = 1.0;
    for (int l = 0; l < k; ++l) product *= probabilistic.values(l, l);
    return std::pow(product, 1.0 / static_cast<Scalar>(k));
}

namespace {

// P(score of a class-l example > score of a class-j example) on one score
// column, ties as 1/2; computed from tie-averaged ranks.
Scalar pairwise_ranking_prob(const std::vector<Scalar>& l_scores,
                             const std::vector<Scalar>& j_scores) {
    const std::size_t nl = l_scores.size();
    const std::size_t nj = j_scores.size();
    std::vector<std::pair<Scalar, int>> pool; // (score, is_l)
    pool.reserve(nl + nj);
    for (Scalar s : l_scores) pool.emplace_back(s, 1);
    for (Scalar s : j_scores) pool.emplace_back(s, 0);
    std::sort(pool.begin(), pool.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    Scalar rank_sum_l = 0;
    std::size_t i = 0;
    while (i < pool.size()) {
        std::size_t j = i;
        while (j < pool.size() && pool[j].first == pool[i].first) ++j;
        const Scalar avg_rank = (static_cast<Scalar>(i + 1) + static_cast<Scalar>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t)
            if (pool[t].second) rank_sum_l += avg_rank;
        i = j;
    }
    const Scalar u = rank_sum_l - static_cast<Scalar>(nl) * (static_cast<Scalar>(nl) + 1) / 2.0;
    return u / (static_cast<Scalar>(nl) * static_cast<Scalar>(nj));
}

} // namespace

Scalar mauc(const RowMatrix& scores, const std::vector<int>& labels, int num_classes,
            int* skipped_pairs) {
    const Eigen::Index m = scores.rows();
    if (m < 2) throw DataError("mauc: need at least two examples");
    if (static_cast<Eigen::Index>(labels.size()) != m) throw DataError("mauc: length mismatch");
    if (scores.cols() != num_classes) throw DataError("mauc: score column count mismatch");

    std::vector<std::vector<int>> members(num_classes);
    for (Eigen::Index i = 0; i < m; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= num_classes) throw DataError("mauc: label out of range");
        members[y].push_back(static_cast<int>(i));
    }

    int used = 0, skipped = 0;
    KahanSum<> total;
    for (int l = 0; l < num_classes; ++l) {
        for (int j = l + 1; j < num_classes; ++j) {
            if (members[l].empty() || members[j].empty()) {
                ++skipped;
                continue;
            }
            std::vector<Scalar> sl, sj;
            sl.reserve(members[l].size());
            sj.reserve(members[j].size());
            // A(l|j): rank by class-l scores
            for (int i : members[l]) sl.push_back(scores(i, l));
            for (int i : members[j]) sj.push_back(scores(i, l));
            const Scalar a_lj = pairwise_ranking_prob(sl, sj);
            // A(j|l): rank by class-j scores
            sl.clear();
            sj.clear();
            for (int i : members[j]) sj.push_back(scores(i, j));
            for (int i : members[l]) sl.push_back(scores(i, j));
            const Scalar a_jl = pairwise_ranking_prob(sj, sl);
            total.add((a_lj + a_jl) / 2.0);
            ++used;
        }
    }
    if (skipped_pairs) *skipped_pairs = skipped;
    if (used == 0) throw DataError("mauc: fewer than two classes present");
    return total.value() / static_cast<Scalar>(used);
}

EvaluationReport evaluate(const BoostedEnsemble& ensemble, const Dataset& test) {
    if (ensemble.schema_hash != test.schema.hash())
        throw DataError("evaluate: dataset schema does not match the ensemble's");
    const int k = test.num_classes();
    const int m = test.rows();
    for (int y = 0; y < k; ++y)
        if (test.class_counts[y] < 1)
            throw DataError("evaluate: class '" + test.schema.class_names[y] +
                            "' absent from the evaluation split; the run is invalid");

    RowMatrix scores(m, k);
    std::vector<int> predictions(m);
    for (int i = 0; i < m; ++i) {
        const Vector s = ensemble.predict_scores(test.features.row(i));
        scores.row(i) = s.transpose();
        int best = 0;
        for (int l = 1; l < k; ++l)
            if (s[l] > s[best]) best = l;
        predictions[i] = best;
    }

    EvaluationReport report;
    report.probabilistic = build_confusion(test.labels, predictions, test.class_counts);
    report.error_focused = error_focus(report.probabilistic);
    report.per_class_recall = report.probabilistic.values.diagonal();
    report.g_mean = g_mean(report.probabilistic);
    report.mauc = mauc(scores, test.labels, k, &report.mauc_pairs_skipped);
    report.operator_norm = operator_norm(report.error_focused);
    report.l1_risk = l1_risk(report.error_focused, test.priors);

    int correct = 0;
    for (int i = 0; i < m; ++i)
        if (predictions[i] == test.labels[i]) ++correct;
    report.accuracy = static_cast<Scalar>(correct) / static_cast<Scalar>(m);

    // accuracy and the l1 risk of the error-focused matrix are two routes
    // to the same misclassification rate
    if (std::abs(report.accuracy - (1.0 - report.l1_risk)) > 1e-12)
        throw InvariantViolation("evaluate: accuracy != 1 - l1_risk");
    return report;
}

} // namespace combo
