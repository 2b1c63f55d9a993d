#ifndef COMBO_CONFUSION_HPP
#define COMBO_CONFUSION_HPP

#include "combo/types.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace combo {

enum class ConfusionForm { RawCounts, Probabilistic, ErrorFocused };

const char* confusion_form_name(ConfusionForm form);

// K x K confusion matrix. Probabilistic rows sum to 1 (entry (l,j) is the
// fraction of class-l examples predicted as j); the error-focused form is
// the same with the diagonal zeroed, so only mistakes remain.
struct ConfusionMatrix {
    Matrix values;
    ConfusionForm form = ConfusionForm::RawCounts;

    int classes() const { return static_cast<int>(values.rows()); }
};

ConfusionMatrix build_confusion_counts(const std::vector<int>& labels,
                                       const std::vector<int>& predictions,
                                       const std::vector<int>& class_counts);

ConfusionMatrix build_confusion(const std::vector<int>& labels,
                                const std::vector<int>& predictions,
                                const std::vector<int>& class_counts);

ConfusionMatrix error_focus(const ConfusionMatrix& a);

namespace detail {

// Largest eigenvalue of a symmetric PSD matrix by cyclic Jacobi rotations.
// Small K only; used as the fallback when power iteration stalls.
template <typename Scalar_>
Scalar_ jacobi_largest_eigenvalue(Eigen::Matrix<Scalar_, Eigen::Dynamic, Eigen::Dynamic> a) {
    const Eigen::Index n = a.rows();
    if (n == 1) return a(0, 0);
    const Scalar_ scale = a.cwiseAbs().maxCoeff();
    if (scale == Scalar_(0)) return Scalar_(0);
    for (int sweep = 0; sweep < 64; ++sweep) {
        Scalar_ off = Scalar_(0);
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= Scalar_(1e-15) * scale * static_cast<Scalar_>(n)) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) == Scalar_(0)) continue;
                const Scalar_ theta = (a(q, q) - a(p, p)) / (Scalar_(2) * a(p, q));
                const Scalar_ t = (theta >= Scalar_(0) ? Scalar_(1) : Scalar_(-1)) /
                                  (std::abs(theta) + std::sqrt(theta * theta + Scalar_(1)));
                const Scalar_ c = Scalar_(1) / std::sqrt(t * t + Scalar_(1));
                const Scalar_ s = t * c;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const Scalar_ aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (Eigen::Index i = 0; i < n; ++i) {
                    const Scalar_ api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
            }
        }
    }
    return a.diagonal().maxCoeff();
}

} // namespace detail

// Spectral norm sqrt(lambda_max(C^T C)): power iteration on the symmetric
// product with a deterministic all-ones start, 1e-12 relative convergence
// on the Rayleigh quotient, 10000-iteration cap, Jacobi fallback for small
// matrices that stall.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& c) {
    using S = typename Derived::Scalar;
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    const Mat m = c.derived();
    if (!m.allFinite()) throw DataError("spectral_norm: non-finite entries");
    if (m.size() == 0) return S(0);

    const Mat b = m.transpose() * m;
    const S scale = b.cwiseAbs().maxCoeff();
    if (scale == S(0)) return S(0);

    // The all-ones start provably overlaps the dominant eigenvector when b
    // is entrywise nonnegative (the confusion-matrix case). Sign-indefinite
    // inputs go straight to the dense fallback when small.
    const bool nonnegative = (b.array() >= S(0)).all();

    Vec v = Vec::Ones(b.rows());
    v /= v.norm();
    S lambda = v.dot(b * v);
    bool converged = false;
    for (int it = 0; it < 10000; ++it) {
        Vec w = b * v;
        const S wn = w.norm();
        if (wn == S(0)) return S(0); // start vector in the null space of a PSD matrix
        v = w / wn;
        const S next = v.dot(b * v);
        if (std::abs(next - lambda) <= S(1e-12) * std::max(std::abs(next), scale * S(1e-3))) {
            lambda = next;
            converged = true;
            break;
        }
        lambda = next;
    }
    if ((!converged || !nonnegative) && b.rows() <= 16)
        lambda = detail::jacobi_largest_eigenvalue<S>(b);
    return std::sqrt(std::max(lambda, S(0)));
}

Scalar operator_norm(const ConfusionMatrix& c);

// l1 norm of the row vector p C (equals the misclassification rate when C
// is the error-focused empirical matrix and p the empirical priors).
Scalar l1_risk(const ConfusionMatrix& c, const Vector& priors);

// (Tr(C^T C), sum of off-diagonal entries); the chain
// operator_norm^2 <= Tr <= off-diagonal sum is checked before returning.
std::pair<Scalar, Scalar> trace_bound(const ConfusionMatrix& c);

// sqrt(2 K sum_k 1/m_k log(K/delta)): the sample-size term separating the
// true confusion norm from the empirical one with probability 1-delta.
Scalar generalization_gap(int num_classes, const std::vector<int>& class_counts, Scalar delta);

// l1_risk <= sqrt(K) * operator_norm, up to 1e-10.
bool sqrt_k_bound_holds(const ConfusionMatrix& c, const Vector& priors);

std::string confusion_to_csv(const ConfusionMatrix& c);

} // namespace combo

#endif // COMBO_CONFUSION_HPP
