#include "combo/datagen.hpp"
#include "combo/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace {

using namespace combo;

void add_experiment_flags(CLI::App* cmd, ExperimentConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "key=value config file (flags override it)");
    cmd->add_option("--data", cfg.dataset_path, "dataset CSV path");
    cmd->add_option("--schema", cfg.schema_path, "sidecar schema path");
    cmd->add_option("--algo", cfg.algo, "combo | adamm | pairwise");
    cmd->add_option("--rounds", cfg.rounds, "boosting rounds T");
    cmd->add_option("--depth", cfg.depth, "weak tree depth");
    cmd->add_option("--min-leaf", cfg.min_leaf, "minimum rows per leaf");
    cmd->add_option("--tree-criterion", cfg.tree_criterion, "cost | gini split criterion");
    cmd->add_option("--folds", cfg.folds, "cross-validation folds F");
    cmd->add_option("--runs", cfg.runs, "cross-validation runs R");
    cmd->add_option("--seed", cfg.seed, "base RNG seed");
    cmd->add_option("--pairwise-costs", cfg.pairwise_cost_path, "K x K cost CSV for --algo pairwise");
    cmd->add_option("--subsample", cfg.subsample, "stratified fraction of the data to keep");
    cmd->add_option("--jobs", cfg.jobs, "worker threads (0 = hardware)");
    cmd->add_option("--out", cfg.out_dir, "output directory");
}

// flags must win over the config file, so re-parse the file first and let
// CLI11's parsed values overwrite it
ExperimentConfig merged_config(const CLI::App* cmd, const ExperimentConfig& parsed,
                               const std::string& config_path) {
    if (config_path.empty()) return parsed;
    ExperimentConfig cfg = load_config(config_path);
    auto take = [&](const char* flag, auto member) {
        if (cmd->count(flag)) cfg.*member = parsed.*member;
    };
    take("--data", &ExperimentConfig::dataset_path);
    take("--schema", &ExperimentConfig::schema_path);
    take("--algo", &ExperimentConfig::algo);
    take("--rounds", &ExperimentConfig::rounds);
    take("--depth", &ExperimentConfig::depth);
    take("--min-leaf", &ExperimentConfig::min_leaf);
    take("--tree-criterion", &ExperimentConfig::tree_criterion);
    take("--folds", &ExperimentConfig::folds);
    take("--runs", &ExperimentConfig::runs);
    take("--seed", &ExperimentConfig::seed);
    take("--pairwise-costs", &ExperimentConfig::pairwise_cost_path);
    take("--subsample", &ExperimentConfig::subsample);
    take("--jobs", &ExperimentConfig::jobs);
    take("--out", &ExperimentConfig::out_dir);
    return cfg;
}

WeightScheme scheme_from_config(const ExperimentConfig& cfg) {
    if (cfg.algo == "pairwise")
        return WeightScheme::pairwise_costs(load_matrix_csv(cfg.pairwise_cost_path));
    return WeightScheme::from_name(cfg.algo);
}

int run_train(const ExperimentConfig& cfg, const std::string& model_path) {
    cfg.validate();
    Dataset data = load_csv(cfg.dataset_path, load_schema(cfg.schema_path));
    TrainOptions opts;
    opts.rounds = cfg.rounds;
    opts.scheme = scheme_from_config(cfg);
    opts.weak.max_depth = cfg.depth;
    opts.weak.min_leaf_size = cfg.min_leaf;
    opts.weak.criterion = criterion_from_name(cfg.tree_criterion);
    BoostedEnsemble ensemble = train(data, opts);
    save_model(ensemble, data.schema, model_path);

    const EvaluationReport training = evaluate(ensemble, data);
    std::printf("trained %zu round(s), halt=%s\n", ensemble.rounds.size(),
                halt_reason_name(ensemble.halt));
    if (!ensemble.rounds.empty())
        std::printf("final training loss %.6g\n", ensemble.rounds.back().loss);
    std::printf("training accuracy %.4f  g-mean %.4f  norm %.4f\n", training.accuracy,
                training.g_mean, training.operator_norm);
    std::printf("model written to %s\n", model_path.c_str());
    return 0;
}

int run_eval(const std::string& model_path, const std::string& data_path,
             const std::string& out_dir) {
    SavedModel model = load_model(model_path);
    Dataset data = load_csv(data_path, model.schema);
    const EvaluationReport report = evaluate(model.ensemble, data);
    std::printf("accuracy       %.6f\n", report.accuracy);
    std::printf("g_mean         %.6f\n", report.g_mean);
    std::printf("mauc           %.6f\n", report.mauc);
    std::printf("operator_norm  %.6f\n", report.operator_norm);
    std::printf("l1_risk        %.6f\n", report.l1_risk);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream(out_dir + "/confusion_probabilistic.csv")
            << confusion_to_csv(report.probabilistic);
        std::ofstream(out_dir + "/confusion_error_focused.csv")
            << confusion_to_csv(report.error_focused);
        std::printf("confusion matrices written to %s\n", out_dir.c_str());
    }
    return 0;
}

int run_cv(const ExperimentConfig& cfg) {
    ExperimentResult result = run_experiment(cfg);
    std::fputs(render_table(result).c_str(), stdout);
    if (!cfg.out_dir.empty())
        std::printf("\nresult.json written to %s\n", cfg.out_dir.c_str());
    return 0;
}

int run_compare(const std::string& a_path, const std::string& b_path, const std::string& metric,
                double confidence) {
    const ExperimentResult a = load_result(a_path);
    const ExperimentResult b = load_result(b_path);
    const ComparisonVerdict v = compare(a, b, metric, confidence);
    std::printf("metric %s: a=%.6f b=%.6f t=%.4f df=%.0f p=%.6g\n", v.metric.c_str(), v.mean_a,
                v.mean_b, v.t_stat, v.degrees_of_freedom, v.p_value);
    if (!v.significant)
        std::printf("not significant at %.0f%% confidence\n", 100.0 * v.confidence);
    else
        std::printf("significant at %.0f%% confidence: %s is higher\n", 100.0 * v.confidence,
                    v.higher > 0 ? "a" : "b");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"confusion-matrix-norm boosting (CoMBo / AdaBoost.MM) benchmark tool"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string config_path, model_path = "model.txt", data_path, out_dir, result_a, result_b;
    std::string metric = "operator_norm", format = "table", dataset_name, result_path;
    double confidence = 0.95;

    CLI::App* train_cmd = app.add_subcommand("train", "train one ensemble on a full dataset");
    add_experiment_flags(train_cmd, cfg, config_path);
    train_cmd->add_option("--model", model_path, "output model path");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a dataset");
    eval_cmd->add_option("--model", model_path, "model path")->required();
    eval_cmd->add_option("--data", data_path, "dataset CSV path")->required();
    eval_cmd->add_option("--out", out_dir, "directory for confusion CSVs");

    CLI::App* cv_cmd = app.add_subcommand("cv", "runs x folds cross-validation experiment");
    add_experiment_flags(cv_cmd, cfg, config_path);

    CLI::App* compare_cmd = app.add_subcommand("compare", "t-test two result.json files");
    compare_cmd->add_option("--a", result_a, "first result.json")->required();
    compare_cmd->add_option("--b", result_b, "second result.json")->required();
    compare_cmd->add_option("--metric", metric, "metric name");
    compare_cmd->add_option("--confidence", confidence, "test confidence (default 0.95)");

    CLI::App* report_cmd = app.add_subcommand("report", "re-emit a result in another format");
    report_cmd->add_option("--result", result_path, "result.json path")->required();
    report_cmd->add_option("--format", format, "json | csv | table");
    report_cmd->add_option("--out", out_dir, "output directory")->required();

    CLI::App* data_cmd = app.add_subcommand("make-data", "write a bundled benchmark dataset");
    data_cmd->add_option("--dataset", dataset_name, "name, or 'all'")->required();
    data_cmd->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (train_cmd->parsed())
            return run_train(merged_config(train_cmd, cfg, config_path), model_path);
        if (eval_cmd->parsed()) return run_eval(model_path, data_path, out_dir);
        if (cv_cmd->parsed()) return run_cv(merged_config(cv_cmd, cfg, config_path));
        if (compare_cmd->parsed()) return run_compare(result_a, result_b, metric, confidence);
        if (report_cmd->parsed()) {
            const ExperimentResult r = load_result(result_path);
            for (const std::string& path : emit_report(r, format, out_dir))
                std::printf("wrote %s\n", path.c_str());
            if (format == "table") std::fputs(render_table(r).c_str(), stdout);
            return 0;
        }
        if (data_cmd->parsed()) {
            const auto names =
                dataset_name == "all" ? datagen::dataset_names() : std::vector<std::string>{dataset_name};
            for (const std::string& name : names)
                std::printf("wrote %s\n", datagen::write_dataset(name, out_dir).c_str());
            return 0;
        }
    } catch (const combo::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const combo::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const combo::InvariantViolation& e) {
        std::fprintf(stderr, "invariant violation: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
