#ifndef COMBO_BOOSTER_HPP
#define COMBO_BOOSTER_HPP

#include "combo/dataset.hpp"
#include "combo/tree.hpp"
#include "combo/types.hpp"

#include <string>
#include <vector>

namespace combo {

// Per-example weighting of the exponential loss. Inverse class frequency
// is CoMBo, uniform weights recover AdaBoost.MM, and pairwise costs plug a
// K x K penalization prior into the same loop.
struct WeightScheme {
    enum class Kind { InverseClassFrequency, Uniform, PairwiseCosts };
    Kind kind = Kind::InverseClassFrequency;
    Matrix pairwise; // K x K, zero diagonal, off-diagonal >= 1

    static WeightScheme inverse_class_frequency() { return {Kind::InverseClassFrequency, {}}; }
    static WeightScheme uniform() { return {Kind::Uniform, {}}; }
    static WeightScheme pairwise_costs(Matrix costs);

    const char* name() const;
    static WeightScheme from_name(const std::string& name);

    void validate(int num_classes) const;
    // weight of (example with true class y, label l)
    Scalar weight(const Dataset& d, int y, int l) const;
};

Scalar alpha_from_edge(Scalar delta);

RowMatrix init_cost_matrix(const Dataset& d, const WeightScheme& scheme);

// Rebuild D from the score table: entry (i,l) = w(i,l) exp(f(i,l)-f(i,y_i))
// off the true label, diagonal the negated row sum. When an exponent would
// overflow, every entry is scaled by exp(-shift); the accumulated shift is
// reported so callers can keep track (tree selection and the edge are
// scale-invariant).
RowMatrix update_cost_matrix(const RowMatrix& scores, const Dataset& d,
                             const WeightScheme& scheme, Scalar* log_scale = nullptr);

// Exponential loss of a score table (the quantity the boosting loop drives
// down), summed with compensation.
Scalar exponential_loss(const RowMatrix& scores, const Dataset& d, const WeightScheme& scheme);

enum class HaltReason { None, NonPositiveEdge, LossVanished };
const char* halt_reason_name(HaltReason reason);

struct RoundRecord {
    WeakTree tree;
    Scalar alpha = 0;
    Scalar delta = 0;
    Scalar loss = 0; // loss after this round
};

struct BoostedEnsemble {
    std::vector<RoundRecord> rounds;
    WeightScheme scheme;
    std::uint64_t schema_hash = 0;
    int num_features = 0;
    int num_classes = 0;
    HaltReason halt = HaltReason::None;
    int halted_at = -1; // round index at which training stopped early

    Vector predict_scores(const Eigen::Ref<const RowVector>& row) const;
    int predict(const Eigen::Ref<const RowVector>& row) const;
    std::vector<int> predict_all(const RowMatrix& features) const;
    Scalar alpha_sum() const;
};

struct TrainOptions {
    int rounds = 200;
    WeightScheme scheme = WeightScheme::inverse_class_frequency();
    WeakLearnerConfig weak;
};

struct TrainState {
    RowMatrix cost;
    RowMatrix scores;
    Scalar loss = 0;
    Scalar cost_log_scale = 0; // accumulated log of the overflow rescale
};

TrainState init_train_state(const Dataset& d, const WeightScheme& scheme);

// One boosting round: fit a tree on D, weight it by its edge, fold it into
// the scores, rebuild D. Returns false (and the reason) when boosting must
// halt; the state is left untouched in that case.
bool boosting_round(const Dataset& d, const WeightScheme& scheme, const WeakLearnerConfig& weak,
                    TrainState& state, RoundRecord& record, HaltReason& halt);

BoostedEnsemble train(const Dataset& d, const TrainOptions& opts);

} // namespace combo

#endif // COMBO_BOOSTER_HPP
