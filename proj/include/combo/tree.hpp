#ifndef COMBO_TREE_HPP
#define COMBO_TREE_HPP

#include "combo/dataset.hpp"
#include "combo/types.hpp"

#include <iosfwd>
#include <vector>

namespace combo {

using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct WeakLearnerConfig {
    int max_depth = 2;
    int min_leaf_size = 1;
    enum class ThresholdPolicy { Midpoint };
    ThresholdPolicy threshold_policy = ThresholdPolicy::Midpoint;
    // cost: leaves and splits minimize the summed per-label costs directly.
    // gini: the classical reduction — examples weighted by their positive
    // cost mass -D(i,y_i), Gini-impurity splits, weighted-majority leaves.
    // The direct criterion is a stronger learner; the reduction mirrors how
    // off-the-shelf trees are usually plugged into cost-matrix boosting.
    enum class Criterion { CostMinimizing, WeightedGini };
    Criterion criterion = Criterion::CostMinimizing;

    void validate() const {
        if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
        if (min_leaf_size < 1) throw ConfigError("min_leaf_size must be >= 1");
    }
};

const char* criterion_name(WeakLearnerConfig::Criterion criterion);
WeakLearnerConfig::Criterion criterion_from_name(const std::string& name);

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    bool categorical = false;
    Scalar threshold = 0.0; // numeric test: x[feature] < threshold goes left
    int category = -1;      // categorical test: x[feature] == category goes left
    int left = -1;
    int right = -1;
    int label = -1; // leaf class

    bool is_leaf() const { return feature < 0; }
};

// Shallow axis-aligned decision tree trained against an example/label cost
// matrix: leaves carry the class of least summed cost, splits greedily
// minimize the summed leaf costs.
struct WeakTree {
    std::vector<TreeNode> nodes;
    int num_features = 0;
    int num_classes = 0;

    int predict(const Eigen::Ref<const RowVector>& row) const;
    int depth() const;
};

// Rows of a valid cost matrix sum to zero, put the least cost on the true
// label, and are nonnegative off the true label.
void validate_cost_matrix(const RowMatrix& cost, const std::vector<int>& labels);

WeakTree train_tree(const Dataset& d, const RowMatrix& cost, const WeakLearnerConfig& cfg);

std::vector<int> predict_all(const WeakTree& tree, const RowMatrix& features);

// delta = -sum_i D(i, h(x_i)) / sum_i sum_{l != y_i} D(i, l)
Scalar edge(const RowMatrix& cost, const std::vector<int>& labels,
            const std::vector<int>& predictions);

// D . 1_h <= D . U_gamma, with U_gamma putting (1-gamma)/K on wrong labels
// and (1-gamma)/K + gamma on the true one.
bool check_weak_condition(const RowMatrix& cost, const std::vector<int>& labels,
                          const std::vector<int>& predictions, Scalar gamma);

// Nested plain-text records, one node per line; children of a split follow
// it depth-first (left subtree first).
void write_tree(std::ostream& out, const WeakTree& tree, int indent = 0);
WeakTree read_tree(std::istream& in, int num_features, int num_classes);

} // namespace combo

#endif // COMBO_TREE_HPP
