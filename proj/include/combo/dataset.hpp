#ifndef COMBO_DATASET_HPP
#define COMBO_DATASET_HPP

#include "combo/types.hpp"

#include <string>
#include <vector>

namespace combo {

enum class ColumnKind { Numeric, Categorical, Label };

// Column layout of a CSV file plus the encodings frozen at load time:
// category codes are dense integers in first-seen order, class indices
// follow the lexicographic order of class names.
struct FeatureSchema {
    std::vector<ColumnKind> columns;
    int label_column = -1;
    std::vector<std::string> class_names;
    std::vector<std::vector<std::string>> categories; // per column; empty for numeric/label
    bool closed = false; // frozen: unseen categories/classes are rejected

    int num_columns() const { return static_cast<int>(columns.size()); }
    int num_features() const { return num_columns() - 1; }
    int num_classes() const { return static_cast<int>(class_names.size()); }

    // Column indices of the feature columns, in file order.
    std::vector<int> feature_columns() const;
    // Feature index (0..d-1) -> kind of its source column.
    std::vector<ColumnKind> feature_kinds() const;

    std::uint64_t hash() const;
    void validate() const;
};

FeatureSchema parse_schema(const std::string& text);
FeatureSchema load_schema(const std::string& path);
std::string schema_to_text(const FeatureSchema& schema);

// Encoded tabular sample: rows are feature vectors (categorical values as
// dense integer codes), labels are class indices in 0..K-1.
struct Dataset {
    Matrix features; // m x d
    std::vector<int> labels;
    std::vector<int> class_counts; // m_y
    Vector priors;                 // m_y / m
    FeatureSchema schema;

    int rows() const { return static_cast<int>(features.rows()); }
    int num_features() const { return static_cast<int>(features.cols()); }
    int num_classes() const { return static_cast<int>(class_counts.size()); }

    Dataset subset(const std::vector<int>& indices) const;
    void validate() const;
};

// Build a Dataset from already-encoded arrays (toy data in tests, subsets).
Dataset make_dataset(Matrix features, std::vector<int> labels, FeatureSchema schema);

Dataset parse_csv(const std::string& text, FeatureSchema schema);
Dataset load_csv(const std::string& path, FeatureSchema schema);

// max_y m_y / min_y m_y
Scalar imbalance_ratio(const Dataset& d);

// Stratified cross-validation plan: R independent runs of F disjoint folds,
// per-class counts across the folds of a run differing by at most one.
struct FoldPlan {
    int folds = 0;
    int runs = 0;
    std::uint64_t base_seed = 0;
    // assignments[run][fold] = sorted row indices held out in that fold
    std::vector<std::vector<std::vector<int>>> assignments;

    const std::vector<int>& test_indices(int run, int fold) const;
    std::vector<int> train_indices(int run, int fold) const;
};

FoldPlan stratified_folds(const Dataset& d, int folds, int runs, std::uint64_t seed);

} // namespace combo

#endif // COMBO_DATASET_HPP
