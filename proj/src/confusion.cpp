#include "combo/confusion.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace combo {

const char* confusion_form_name(ConfusionForm form) {
    switch (form) {
        case ConfusionForm::RawCounts: return "rawCounts";
        case ConfusionForm::Probabilistic: return "probabilistic";
        case ConfusionForm::ErrorFocused: return "errorFocused";
    }
    return "?";
}

ConfusionMatrix build_confusion_counts(const std::vector<int>& labels,
                                       const std::vector<int>& predictions,
                                       const std::vector<int>& class_counts) {
    if (labels.size() != predictions.size())
        throw DataError("build_confusion: labels and predictions differ in length");
    if (labels.empty()) throw DataError("build_confusion: empty input");
    const int k = static_cast<int>(class_counts.size());
    for (int y = 0; y < k; ++y)
        if (class_counts[y] < 1)
            throw DataError("build_confusion: class " + std::to_string(y) + " has no examples");

    ConfusionMatrix c;
    c.values = Matrix::Zero(k, k);
    c.form = ConfusionForm::RawCounts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int l = labels[i];
        const int j = predictions[i];
        if (l < 0 || l >= k || j < 0 || j >= k)
            throw DataError("build_confusion: class index out of range at row " +
                            std::to_string(i));
        c.values(l, j) += 1.0;
    }
    return c;
}

ConfusionMatrix build_confusion(const std::vector<int>& labels,
                                const std::vector<int>& predictions,
                                const std::vector<int>& class_counts) {
    ConfusionMatrix c = build_confusion_counts(labels, predictions, class_counts);
    const int k = c.classes();
    for (int l = 0; l < k; ++l) c.values.row(l) /= static_cast<Scalar>(class_counts[l]);
    c.form = ConfusionForm::Probabilistic;
    return c;
}

ConfusionMatrix error_focus(const ConfusionMatrix& a) {
    if (a.form != ConfusionForm::Probabilistic)
        throw DataError(std::string("error_focus: expected probabilistic form, got ") +
                        confusion_form_name(a.form));
    ConfusionMatrix c;
    c.values = a.values;
    c.values.diagonal().setZero();
    c.form = ConfusionForm::ErrorFocused;
    return c;
}

Scalar operator_norm(const ConfusionMatrix& c) { return spectral_norm(c.values); }

Scalar l1_risk(const ConfusionMatrix& c, const Vector& priors) {
    if (c.form != ConfusionForm::ErrorFocused)
        throw DataError(std::string("l1_risk: expected errorFocused form, got ") +
                        confusion_form_name(c.form));
    if (priors.size() != c.values.rows())
        throw DataError("l1_risk: priors dimension mismatch");
    if (std::abs(priors.sum() - 1.0) > 1e-9)
        throw DataError("l1_risk: priors do not sum to 1");
    return (priors.transpose() * c.values).template lpNorm<1>();
}

std::pair<Scalar, Scalar> trace_bound(const ConfusionMatrix& c) {
    if (c.form != ConfusionForm::ErrorFocused)
        throw DataError(std::string("trace_bound: expected errorFocused form, got ") +
                        confusion_form_name(c.form));
    const Scalar trace = (c.values.transpose() * c.values).trace();
    const Scalar off_sum = c.values.sum(); // diagonal is zero in this form
    const Scalar norm2 = spectral_norm(c.values);
    const Scalar tol = 1e-12 * std::max(Scalar(1), off_sum);
    if (norm2 * norm2 > trace + tol || trace > off_sum + tol)
        throw InvariantViolation("trace_bound: norm^2 <= trace <= off-diagonal sum violated");
    return {trace, off_sum};
}

Scalar generalization_gap(int num_classes, const std::vector<int>& class_counts, Scalar delta) {
    if (num_classes < 2) throw ConfigError("generalization_gap: K >= 2 required");
    if (static_cast<int>(class_counts.size()) != num_classes)
        throw DataError("generalization_gap: class_counts size mismatch");
    if (!(delta > 0.0 && delta <= 1.0))
        throw ConfigError("generalization_gap: delta must lie in (0, 1]");
    KahanSum<> inv;
    for (int m_k : class_counts) {
        if (m_k < 1) throw DataError("generalization_gap: all m_k must be >= 1");
        inv.add(1.0 / static_cast<Scalar>(m_k));
    }
    return std::sqrt(2.0 * num_classes * inv.value() * std::log(num_classes / delta));
}

bool sqrt_k_bound_holds(const ConfusionMatrix& c, const Vector& priors) {
    const Scalar risk = l1_risk(c, priors);
    const Scalar bound = std::sqrt(static_cast<Scalar>(c.classes())) * operator_norm(c);
    return risk <= bound + 1e-10;
}

std::string confusion_to_csv(const ConfusionMatrix& c) {
    std::ostringstream out;
    char buf[48];
    for (int l = 0; l < c.classes(); ++l) {
        for (int j = 0; j < c.classes(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", c.values(l, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
    return out.str();
}

} // namespace combo
