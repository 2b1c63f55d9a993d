#include "combo/booster.hpp"

#include <algorithm>
#include <cmath>

namespace combo {

namespace {
constexpr Scalar kEdgeClamp = 1.0 - 1e-12;
constexpr Scalar kExpGuard = 700.0; // exp() overflows just above 709
} // namespace

WeightScheme WeightScheme::pairwise_costs(Matrix costs) {
    WeightScheme s;
    s.kind = Kind::PairwiseCosts;
    s.pairwise = std::move(costs);
    return s;
}

const char* WeightScheme::name() const {
    switch (kind) {
        case Kind::InverseClassFrequency: return "combo";
        case Kind::Uniform: return "adamm";
        case Kind::PairwiseCosts: return "pairwise";
    }
    return "?";
}

WeightScheme WeightScheme::from_name(const std::string& name) {
    if (name == "combo") return inverse_class_frequency();
    if (name == "adamm") return uniform();
    if (name == "pairwise") return {Kind::PairwiseCosts, {}};
    throw ConfigError("unknown algorithm '" + name + "' (expected combo|adamm|pairwise)");
}

void WeightScheme::validate(int num_classes) const {
    if (kind != Kind::PairwiseCosts) return;
    if (pairwise.rows() != num_classes || pairwise.cols() != num_classes)
        throw ConfigError("pairwise cost matrix must be K x K");
    for (int l = 0; l < num_classes; ++l) {
        if (pairwise(l, l) != 0.0)
            throw ConfigError("pairwise cost matrix must have a zero diagonal");
        for (int j = 0; j < num_classes; ++j)
            if (j != l && pairwise(l, j) < 1.0)
                throw ConfigError("pairwise costs must be >= 1 off the diagonal so the "
                                  "loss dominates the misclassification indicator");
    }
}

Scalar WeightScheme::weight(const Dataset& d, int y, int l) const {
    switch (kind) {
        case Kind::InverseClassFrequency: return 1.0 / static_cast<Scalar>(d.class_counts[y]);
        case Kind::Uniform: return 1.0;
        case Kind::PairwiseCosts: return l == y ? 0.0 : pairwise(y, l);
    }
    return 0.0;
}

Scalar alpha_from_edge(Scalar delta) {
    const Scalar d = std::min(delta, kEdgeClamp);
    return 0.5 * std::log((1.0 + d) / (1.0 - d));
}

RowMatrix init_cost_matrix(const Dataset& d, const WeightScheme& scheme) {
    scheme.validate(d.num_classes());
    const int m = d.rows();
    const int k = d.num_classes();
    RowMatrix cost(m, k);
    for (int i = 0; i < m; ++i) {
        const int y = d.labels[i];
        Scalar diag = 0;
        for (int l = 0; l < k; ++l) {
            if (l == y) continue;
            const Scalar w = scheme.weight(d, y, l);
            cost(i, l) = w;
            diag += w;
        }
        cost(i, y) = -diag;
    }
    return cost;
}

RowMatrix update_cost_matrix(const RowMatrix& scores, const Dataset& d,
                             const WeightScheme& scheme, Scalar* log_scale) {
    scheme.validate(d.num_classes());
    const int m = d.rows();
    const int k = d.num_classes();
    if (scores.rows() != m || scores.cols() != k)
        throw DataError("update_cost_matrix: score table shape mismatch");

    Scalar max_exponent = -std::numeric_limits<Scalar>::infinity();
    for (int i = 0; i < m; ++i) {
        const int y = d.labels[i];
        const Scalar fy = scores(i, y);
        for (int l = 0; l < k; ++l)
            if (l != y) max_exponent = std::max(max_exponent, scores(i, l) - fy);
    }
    const Scalar shift = std::max(Scalar(0), max_exponent - kExpGuard);
    if (log_scale) *log_scale = shift;

    RowMatrix cost(m, k);
    for (int i = 0; i < m; ++i) {
        const int y = d.labels[i];
        const Scalar fy = scores(i, y);
        Scalar diag = 0;
        for (int l = 0; l < k; ++l) {
            if (l == y) continue;
            const Scalar v = scheme.weight(d, y, l) * std::exp(scores(i, l) - fy - shift);
            cost(i, l) = v;
            diag += v;
        }
        cost(i, y) = -diag;
    }
    return cost;
}

Scalar exponential_loss(const RowMatrix& scores, const Dataset& d, const WeightScheme& scheme) {
    const int m = d.rows();
    const int k = d.num_classes();
    if (scores.rows() != m || scores.cols() != k)
        throw DataError("exponential_loss: score table shape mismatch");
    KahanSum<> loss;
    for (int i = 0; i < m; ++i) {
        const int y = d.labels[i];
        const Scalar fy = scores(i, y);
        for (int l = 0; l < k; ++l)
            if (l != y) loss.add(scheme.weight(d, y, l) * std::exp(scores(i, l) - fy));
    }
    return loss.value();
}

const char* halt_reason_name(HaltReason reason) {
    switch (reason) {
        case HaltReason::None: return "none";
        case HaltReason::NonPositiveEdge: return "non-positive-edge";
        case HaltReason::LossVanished: return "loss-vanished";
    }
    return "?";
}

Vector BoostedEnsemble::predict_scores(const Eigen::Ref<const RowVector>& row) const {
    if (row.size() != num_features)
        throw DataError("predict_scores: row has " + std::to_string(row.size()) +
                        " features, ensemble expects " + std::to_string(num_features));
    Vector scores = Vector::Zero(num_classes);
    for (const RoundRecord& r : rounds) scores[r.tree.predict(row)] += r.alpha;
    return scores;
}

int BoostedEnsemble::predict(const Eigen::Ref<const RowVector>& row) const {
    const Vector scores = predict_scores(row);
    int best = 0;
    for (int l = 1; l < num_classes; ++l)
        if (scores[l] > scores[best]) best = l; // ties keep the lowest class
    return best;
}

std::vector<int> BoostedEnsemble::predict_all(const RowMatrix& features) const {
    std::vector<int> out(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        out[static_cast<std::size_t>(i)] = predict(features.row(i));
    return out;
}

Scalar BoostedEnsemble::alpha_sum() const {
    KahanSum<> s;
    for (const RoundRecord& r : rounds) s.add(r.alpha);
    return s.value();
}

TrainState init_train_state(const Dataset& d, const WeightScheme& scheme) {
    TrainState state;
    state.scores = RowMatrix::Zero(d.rows(), d.num_classes());
    state.cost = init_cost_matrix(d, scheme);
    state.loss = exponential_loss(state.scores, d, scheme);
    return state;
}

bool boosting_round(const Dataset& d, const WeightScheme& scheme, const WeakLearnerConfig& weak,
                    TrainState& state, RoundRecord& record, HaltReason& halt) {
    halt = HaltReason::None;
    if (!(state.loss > 0) || !std::isfinite(state.loss)) {
        halt = HaltReason::LossVanished;
        return false;
    }

    WeakTree tree = train_tree(d, state.cost, weak);
    const std::vector<int> predictions = predict_all(tree, d.features);

    Scalar delta;
    try {
        delta = edge(state.cost, d.labels, predictions);
    } catch (const DataError&) {
        halt = HaltReason::LossVanished; // off-diagonal mass underflowed to zero
        return false;
    }
    if (!(delta > 0) || !std::isfinite(delta)) {
        halt = HaltReason::NonPositiveEdge;
        return false;
    }
    delta = std::min(delta, kEdgeClamp);
    const Scalar alpha = alpha_from_edge(delta);

    for (int i = 0; i < d.rows(); ++i) state.scores(i, predictions[i]) += alpha;
    const Scalar prev_loss = state.loss;
    const Scalar loss = exponential_loss(state.scores, d, scheme);

    // per-round drop guarantee: the loss shrinks at least by sqrt(1-delta^2)
    if (loss > (std::sqrt(1.0 - delta * delta) + 1e-9) * prev_loss)
        throw InvariantViolation("boosting round: loss drop factor exceeded sqrt(1-delta^2)");

    Scalar shift = 0;
    state.cost = update_cost_matrix(state.scores, d, scheme, &shift);
    state.cost_log_scale += shift;
    state.loss = loss;

    record.tree = std::move(tree);
    record.alpha = alpha;
    record.delta = delta;
    record.loss = loss;
    return true;
}

BoostedEnsemble train(const Dataset& d, const TrainOptions& opts) {
    if (opts.rounds < 1) throw ConfigError("rounds must be >= 1");
    opts.weak.validate();
    opts.scheme.validate(d.num_classes());
    d.validate();

    const int k = d.num_classes();
    TrainState state = init_train_state(d, opts.scheme);
    const Scalar initial_loss = state.loss;
    if (opts.scheme.kind == WeightScheme::Kind::InverseClassFrequency) {
        const Scalar expected = static_cast<Scalar>(k) * (k - 1);
        if (std::abs(initial_loss - expected) > 1e-12 * expected)
            throw InvariantViolation("initial loss is not K(K-1)");
    }

    BoostedEnsemble ensemble;
    ensemble.scheme = opts.scheme;
    ensemble.schema_hash = d.schema.hash();
    ensemble.num_features = d.num_features();
    ensemble.num_classes = k;

    for (int t = 0; t < opts.rounds; ++t) {
        RoundRecord record;
        HaltReason halt;
        if (!boosting_round(d, opts.scheme, opts.weak, state, record, halt)) {
            ensemble.halt = halt;
            ensemble.halted_at = t;
            break;
        }
        ensemble.rounds.push_back(std::move(record));
    }

    // telemetry-level guarantees: product form and exponential form of the
    // final loss bound, then the weighted training error against the loss
    Scalar product_bound = initial_loss;
    KahanSum<> delta_sq;
    for (const RoundRecord& r : ensemble.rounds) {
        product_bound *= std::sqrt(1.0 - r.delta * r.delta);
        delta_sq.add(r.delta * r.delta);
    }
    const Scalar exp_bound = initial_loss * std::exp(-0.5 * delta_sq.value());
    if (!ensemble.rounds.empty()) {
        const Scalar final_loss = ensemble.rounds.back().loss;
        if (final_loss > product_bound * (1.0 + 1e-9) ||
            product_bound > exp_bound * (1.0 + 1e-9))
            throw InvariantViolation("final loss exceeds the telescoped round bound");
        KahanSum<> weighted_error;
        for (int i = 0; i < d.rows(); ++i) {
            const int p = ensemble.predict(d.features.row(i));
            if (p != d.labels[i])
                weighted_error.add(opts.scheme.weight(d, d.labels[i], p));
        }
        if (weighted_error.value() > final_loss * (1.0 + 1e-9) + 1e-12)
            throw InvariantViolation("weighted training error exceeds the exponential loss");
    }
    return ensemble;
}

} // namespace combo
