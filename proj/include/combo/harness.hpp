#ifndef COMBO_HARNESS_HPP
#define COMBO_HARNESS_HPP

#include "combo/booster.hpp"
#include "combo/dataset.hpp"
#include "combo/metrics.hpp"

#include <string>
#include <utility>
#include <vector>

namespace combo {

struct ExperimentConfig {
    std::string dataset_path;
    std::string schema_path;
    std::string algo = "combo"; // combo | adamm | pairwise
    int rounds = 200;
    int depth = 2;
    int min_leaf = 1;
    std::string tree_criterion = "cost"; // cost | gini
    int folds = 5;
    int runs = 10;
    std::uint64_t seed = 1;
    std::string pairwise_cost_path;
    std::string out_dir;
    double subsample = 1.0; // stratified training-size fraction
    int jobs = 0;           // 0 = hardware concurrency

    void validate() const;
};

// key=value file; '#' starts a comment. Keys match the CLI flag names.
ExperimentConfig load_config(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct FoldOutcome {
    int run = 0;
    int fold = 0;
    EvaluationReport report;
    std::vector<Scalar> deltas; // per boosting round
    std::vector<Scalar> losses;
    HaltReason halt = HaltReason::None;
    int halted_at = -1;
};

struct MetricAggregate {
    Scalar mean = 0;
    Scalar stddev = 0; // population style, over all runs x folds values
};

// Names of the per-fold scalar metrics, in report order.
const std::vector<std::string>& metric_names();
Scalar metric_value(const FoldOutcome& fold, const std::string& metric);

struct ExperimentResult {
    int version = 1;
    ExperimentConfig config;
    std::vector<std::string> class_names;
    std::vector<FoldOutcome> folds; // ordered by (run, fold)
    std::vector<std::pair<std::string, MetricAggregate>> aggregates;
    Matrix mean_confusion_probabilistic;
    Matrix mean_confusion_error_focused;

    std::vector<Scalar> metric_values(const std::string& metric) const;
    MetricAggregate aggregate(const std::string& metric) const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);
// Same driver on an already-loaded dataset (paths in cfg are ignored).
ExperimentResult run_experiment_on(const Dataset& d, const ExperimentConfig& cfg);

// Two-sample Student t-test over the per-fold metric values.
struct ComparisonVerdict {
    std::string metric;
    Scalar mean_a = 0, mean_b = 0;
    Scalar t_stat = 0;
    Scalar degrees_of_freedom = 0;
    Scalar p_value = 1;
    Scalar confidence = 0.95;
    bool significant = false;
    int higher = 0; // +1: a higher, -1: b higher, 0: equal means
};

ComparisonVerdict compare(const ExperimentResult& a, const ExperimentResult& b,
                          const std::string& metric, Scalar confidence = 0.95);

Scalar regularized_incomplete_beta(Scalar a, Scalar b, Scalar x);
Scalar student_t_two_sided_p(Scalar t, Scalar degrees_of_freedom);

// Serialization. The JSON document is versioned and byte-deterministic for
// a fixed (config, seed); file-system specific fields (out, jobs) stay out
// of it.
std::string result_to_json(const ExperimentResult& r);
ExperimentResult result_from_json(const std::string& text);
ExperimentResult load_result(const std::string& path);

// format: json | csv | table. Returns the paths written.
std::vector<std::string> emit_report(const ExperimentResult& r, const std::string& format,
                                     const std::string& out_dir);
std::string render_table(const ExperimentResult& r);

struct SavedModel {
    BoostedEnsemble ensemble;
    FeatureSchema schema;
};

void save_model(const BoostedEnsemble& ensemble, const FeatureSchema& schema,
                const std::string& path);
SavedModel load_model(const std::string& path);

Matrix load_matrix_csv(const std::string& path);

} // namespace combo

#endif // COMBO_HARNESS_HPP
