#include "combo/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace combo {

using ordered_json = nlohmann::ordered_json;

void ExperimentConfig::validate() const {
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (depth < 1) throw ConfigError("depth must be >= 1");
    if (min_leaf < 1) throw ConfigError("min-leaf must be >= 1");
    criterion_from_name(tree_criterion); // throws on unknown names
    if (!(subsample > 0.0 && subsample <= 1.0))
        throw ConfigError("subsample must lie in (0, 1]");
    if (algo != "combo" && algo != "adamm" && algo != "pairwise")
        throw ConfigError("algo must be combo|adamm|pairwise");
    if (algo == "pairwise" && pairwise_cost_path.empty())
        throw ConfigError("pairwise algo requires a pairwise cost file");
}

void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto to_int = [&](const std::string& v) {
        try {
            std::size_t pos;
            int x = std::stoi(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
        }
    };
    if (key == "dataset") cfg.dataset_path = value;
    else if (key == "schema") cfg.schema_path = value;
    else if (key == "algo") cfg.algo = value;
    else if (key == "rounds") cfg.rounds = to_int(value);
    else if (key == "depth") cfg.depth = to_int(value);
    else if (key == "min-leaf") cfg.min_leaf = to_int(value);
    else if (key == "tree-criterion") cfg.tree_criterion = value;
    else if (key == "folds") cfg.folds = to_int(value);
    else if (key == "runs") cfg.runs = to_int(value);
    else if (key == "seed") cfg.seed = std::strtoull(value.c_str(), nullptr, 10);
    else if (key == "pairwise-costs") cfg.pairwise_cost_path = value;
    else if (key == "out") cfg.out_dir = value;
    else if (key == "subsample") cfg.subsample = std::strtod(value.c_str(), nullptr);
    else if (key == "jobs") cfg.jobs = to_int(value);
    else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto strip = [](std::string s) {
            auto sb = s.find_first_not_of(" \t");
            if (sb == std::string::npos) return std::string();
            auto se = s.find_last_not_of(" \t");
            return s.substr(sb, se - sb + 1);
        };
        apply_config_line(cfg, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    return cfg;
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {"accuracy", "g_mean", "mauc", "operator_norm",
                                                   "l1_risk"};
    return names;
}

Scalar metric_value(const FoldOutcome& fold, const std::string& metric) {
    if (metric == "accuracy") return fold.report.accuracy;
    if (metric == "g_mean") return fold.report.g_mean;
    if (metric == "mauc") return fold.report.mauc;
    if (metric == "operator_norm") return fold.report.operator_norm;
    if (metric == "l1_risk") return fold.report.l1_risk;
    throw ConfigError("unknown metric '" + metric + "'");
}

std::vector<Scalar> ExperimentResult::metric_values(const std::string& metric) const {
    std::vector<Scalar> values;
    values.reserve(folds.size());
    for (const FoldOutcome& f : folds) values.push_back(metric_value(f, metric));
    return values;
}

MetricAggregate ExperimentResult::aggregate(const std::string& metric) const {
    for (const auto& [name, agg] : aggregates)
        if (name == metric) return agg;
    throw ConfigError("metric '" + metric + "' not present in result");
}

namespace {

MetricAggregate aggregate_of(const std::vector<Scalar>& values) {
    MetricAggregate agg;
    if (values.empty()) return agg;
    KahanSum<> sum;
    for (Scalar v : values) sum.add(v);
    agg.mean = sum.value() / static_cast<Scalar>(values.size());
    KahanSum<> sq;
    for (Scalar v : values) sq.add((v - agg.mean) * (v - agg.mean));
    agg.stddev = std::sqrt(sq.value() / static_cast<Scalar>(values.size()));
    return agg;
}

WeightScheme scheme_for(const ExperimentConfig& cfg) {
    if (cfg.algo == "pairwise")
        return WeightScheme::pairwise_costs(load_matrix_csv(cfg.pairwise_cost_path));
    return WeightScheme::from_name(cfg.algo);
}

Dataset stratified_slice(const Dataset& d, double fraction, std::uint64_t seed) {
    const int k = d.num_classes();
    std::vector<std::vector<int>> by_class(k);
    for (int i = 0; i < d.rows(); ++i) by_class[d.labels[i]].push_back(i);
    SplitMix64 rng = SplitMix64(seed).split(0x5ab5a397ULL);
    std::vector<int> keep;
    for (int y = 0; y < k; ++y) {
        auto& members = by_class[y];
        deterministic_shuffle(members, rng);
        const auto want = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size()))));
        for (std::size_t i = 0; i < want && i < members.size(); ++i) keep.push_back(members[i]);
    }
    std::sort(keep.begin(), keep.end());
    return d.subset(keep);
}

// Re-check the per-round and telescoped loss guarantees from the recorded
// telemetry; training already enforces them, this is the harness-level gate.
void assert_loss_bounds(const Dataset& train_split, const WeightScheme& scheme,
                        const BoostedEnsemble& ensemble) {
    const int k = train_split.num_classes();
    Scalar initial = 0;
    if (scheme.kind == WeightScheme::Kind::InverseClassFrequency) {
        initial = static_cast<Scalar>(k) * (k - 1);
    } else {
        KahanSum<> sum;
        for (int i = 0; i < train_split.rows(); ++i)
            for (int l = 0; l < k; ++l)
                if (l != train_split.labels[i]) sum.add(scheme.weight(train_split, train_split.labels[i], l));
        initial = sum.value();
    }
    Scalar prev = initial;
    Scalar product = initial;
    KahanSum<> delta_sq;
    for (const RoundRecord& r : ensemble.rounds) {
        const Scalar factor = std::sqrt(1.0 - r.delta * r.delta);
        if (r.loss > (factor + 1e-9) * prev)
            throw InvariantViolation("telemetry: round loss exceeds sqrt(1-delta^2) drop");
        product *= factor;
        delta_sq.add(r.delta * r.delta);
        prev = r.loss;
    }
    if (!ensemble.rounds.empty()) {
        const Scalar final_loss = ensemble.rounds.back().loss;
        const Scalar exp_bound = initial * std::exp(-0.5 * delta_sq.value());
        if (final_loss > product * (1.0 + 1e-9) || product > exp_bound * (1.0 + 1e-9))
            throw InvariantViolation("telemetry: telescoped loss bound violated");
    }
}

} // namespace

ExperimentResult run_experiment_on(const Dataset& data, const ExperimentConfig& cfg) {
    cfg.validate();
    const WeightScheme scheme = scheme_for(cfg);
    scheme.validate(data.num_classes());

    const Dataset* active = &data;
    Dataset sliced;
    if (cfg.subsample < 1.0) {
        sliced = stratified_slice(data, cfg.subsample, cfg.seed);
        active = &sliced;
    }

    const FoldPlan plan = stratified_folds(*active, cfg.folds, cfg.runs, cfg.seed);

    TrainOptions opts;
    opts.rounds = cfg.rounds;
    opts.scheme = scheme;
    opts.weak.max_depth = cfg.depth;
    opts.weak.min_leaf_size = cfg.min_leaf;
    opts.weak.criterion = criterion_from_name(cfg.tree_criterion);

    const int total = cfg.runs * cfg.folds;
    std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(total));
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto work = [&]() {
        for (;;) {
            const int task = next.fetch_add(1);
            if (task >= total) return;
            {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (first_error) return;
            }
            try {
                const int run = task / cfg.folds;
                const int fold = task % cfg.folds;
                const Dataset train_split = active->subset(plan.train_indices(run, fold));
                const Dataset test_split = active->subset(plan.test_indices(run, fold));
                const BoostedEnsemble ensemble = train(train_split, opts);
                assert_loss_bounds(train_split, scheme, ensemble);

                FoldOutcome out;
                out.run = run;
                out.fold = fold;
                out.report = evaluate(ensemble, test_split);
                out.halt = ensemble.halt;
                out.halted_at = ensemble.halted_at;
                out.deltas.reserve(ensemble.rounds.size());
                out.losses.reserve(ensemble.rounds.size());
                for (const RoundRecord& r : ensemble.rounds) {
                    out.deltas.push_back(r.delta);
                    out.losses.push_back(r.loss);
                }
                outcomes[static_cast<std::size_t>(task)] = std::move(out);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    int jobs = cfg.jobs > 0 ? cfg.jobs : static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, total));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) workers.emplace_back(work);
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);

    ExperimentResult result;
    result.config = cfg;
    result.class_names = active->schema.class_names;
    result.folds = std::move(outcomes);

    for (const std::string& name : metric_names())
        result.aggregates.emplace_back(name, aggregate_of(result.metric_values(name)));

    const int k = active->num_classes();
    result.mean_confusion_probabilistic = Matrix::Zero(k, k);
    result.mean_confusion_error_focused = Matrix::Zero(k, k);
    for (const FoldOutcome& f : result.folds) {
        result.mean_confusion_probabilistic += f.report.probabilistic.values;
        result.mean_confusion_error_focused += f.report.error_focused.values;
    }
    result.mean_confusion_probabilistic /= static_cast<Scalar>(total);
    result.mean_confusion_error_focused /= static_cast<Scalar>(total);
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.dataset_path.empty() || cfg.schema_path.empty())
        throw ConfigError("dataset and schema paths are required");
    const Dataset data = load_csv(cfg.dataset_path, load_schema(cfg.schema_path));
    ExperimentResult result = run_experiment_on(data, cfg);
    if (!cfg.out_dir.empty()) emit_report(result, "json", cfg.out_dir);
    return result;
}

// ---------------------------------------------------------------------------
// Student t machinery

Scalar regularized_incomplete_beta(Scalar a, Scalar b, Scalar x) {
    if (x < 0.0 || x > 1.0) throw ConfigError("incomplete beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    // continued fraction (modified Lentz)
    auto betacf = [](Scalar aa, Scalar bb, Scalar xx) {
        constexpr Scalar tiny = 1e-300;
        const Scalar qab = aa + bb, qap = aa + 1.0, qam = aa - 1.0;
        Scalar c = 1.0;
        Scalar d = 1.0 - qab * xx / qap;
        if (std::abs(d) < tiny) d = tiny;
        d = 1.0 / d;
        Scalar h = d;
        for (int m = 1; m <= 300; ++m) {
            const Scalar m2 = 2.0 * m;
            Scalar num = m * (bb - m) * xx / ((qam + m2) * (aa + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + num / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            h *= d * c;
            num = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + num / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            const Scalar del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < 1e-14) break;
        }
        return h;
    };

    const Scalar ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const Scalar front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

Scalar student_t_two_sided_p(Scalar t, Scalar degrees_of_freedom) {
    if (degrees_of_freedom <= 0) throw ConfigError("t-test needs positive degrees of freedom");
    if (!std::isfinite(t)) return 0.0;
    const Scalar df = degrees_of_freedom;
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

ComparisonVerdict compare(const ExperimentResult& a, const ExperimentResult& b,
                          const std::string& metric, Scalar confidence) {
    if (!(confidence > 0.0 && confidence < 1.0))
        throw ConfigError("confidence must lie in (0,1)");
    const std::vector<Scalar> va = a.metric_values(metric);
    const std::vector<Scalar> vb = b.metric_values(metric);
    if (va.size() != vb.size())
        throw ConfigError("compare: result sets hold different fold counts (" +
                          std::to_string(va.size()) + " vs " + std::to_string(vb.size()) + ")");
    if (va.size() < 2) throw ConfigError("compare: need at least two values per side");

    const auto n = static_cast<Scalar>(va.size());
    auto mean_of = [](const std::vector<Scalar>& v) {
        KahanSum<> s;
        for (Scalar x : v) s.add(x);
        return s.value() / static_cast<Scalar>(v.size());
    };
    auto sample_var = [](const std::vector<Scalar>& v, Scalar mean) {
        KahanSum<> s;
        for (Scalar x : v) s.add((x - mean) * (x - mean));
        return s.value() / static_cast<Scalar>(v.size() - 1);
    };

    ComparisonVerdict verdict;
    verdict.metric = metric;
    verdict.confidence = confidence;
    verdict.mean_a = mean_of(va);
    verdict.mean_b = mean_of(vb);
    verdict.degrees_of_freedom = 2.0 * n - 2.0;

    const Scalar pooled =
        ((n - 1.0) * sample_var(va, verdict.mean_a) + (n - 1.0) * sample_var(vb, verdict.mean_b)) /
        verdict.degrees_of_freedom;
    const Scalar diff = verdict.mean_a - verdict.mean_b;
    verdict.higher = diff > 0 ? 1 : (diff < 0 ? -1 : 0);
    if (pooled <= 0.0) {
        verdict.t_stat = diff == 0 ? 0.0 : std::numeric_limits<Scalar>::infinity() * (diff > 0 ? 1 : -1);
        verdict.p_value = diff == 0 ? 1.0 : 0.0;
    } else {
        verdict.t_stat = diff / std::sqrt(pooled * 2.0 / n);
        verdict.p_value = student_t_two_sided_p(verdict.t_stat, verdict.degrees_of_freedom);
    }
    verdict.significant = verdict.p_value < (1.0 - confidence);
    return verdict;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ordered_json matrix_to_json(const Matrix& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const ordered_json& j) {
    const auto rows = j.size();
    if (rows == 0) return Matrix();
    const auto cols = j.at(0).size();
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j.at(i).at(c).get<Scalar>();
    return m;
}

HaltReason halt_reason_from_name(const std::string& name) {
    if (name == "none") return HaltReason::None;
    if (name == "non-positive-edge") return HaltReason::NonPositiveEdge;
    if (name == "loss-vanished") return HaltReason::LossVanished;
    throw DataError("unknown halt reason '" + name + "'");
}

} // namespace

std::string result_to_json(const ExperimentResult& r) {
    ordered_json j;
    j["version"] = r.version;
    ordered_json cfg;
    cfg["dataset"] = r.config.dataset_path;
    cfg["schema"] = r.config.schema_path;
    cfg["algo"] = r.config.algo;
    cfg["rounds"] = r.config.rounds;
    cfg["depth"] = r.config.depth;
    cfg["min_leaf"] = r.config.min_leaf;
    cfg["tree_criterion"] = r.config.tree_criterion;
    cfg["folds"] = r.config.folds;
    cfg["runs"] = r.config.runs;
    cfg["seed"] = r.config.seed;
    cfg["subsample"] = r.config.subsample;
    cfg["pairwise_costs"] = r.config.pairwise_cost_path;
    j["config"] = std::move(cfg);
    j["classes"] = r.class_names;

    ordered_json aggs;
    for (const auto& [name, agg] : r.aggregates) {
        ordered_json a;
        a["mean"] = agg.mean;
        a["std"] = agg.stddev;
        aggs[name] = std::move(a);
    }
    j["aggregates"] = std::move(aggs);
    j["mean_confusion_probabilistic"] = matrix_to_json(r.mean_confusion_probabilistic);
    j["mean_confusion_error_focused"] = matrix_to_json(r.mean_confusion_error_focused);

    ordered_json folds = ordered_json::array();
    for (const FoldOutcome& f : r.folds) {
        ordered_json jf;
        jf["run"] = f.run;
        jf["fold"] = f.fold;
        for (const std::string& name : metric_names()) jf[name] = metric_value(f, name);
        ordered_json recall = ordered_json::array();
        for (Eigen::Index l = 0; l < f.report.per_class_recall.size(); ++l)
            recall.push_back(f.report.per_class_recall[l]);
        jf["per_class_recall"] = std::move(recall);
        jf["mauc_pairs_skipped"] = f.report.mauc_pairs_skipped;
        jf["confusion_probabilistic"] = matrix_to_json(f.report.probabilistic.values);
        jf["confusion_error_focused"] = matrix_to_json(f.report.error_focused.values);
        jf["halt"] = halt_reason_name(f.halt);
        jf["halted_at"] = f.halted_at;
        jf["deltas"] = f.deltas;
        jf["losses"] = f.losses;
        folds.push_back(std::move(jf));
    }
    j["folds"] = std::move(folds);
    return j.dump(2) + "\n";
}

ExperimentResult result_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw DataError(std::string("result JSON parse error: ") + e.what());
    }
    if (!j.contains("version") || j["version"].get<int>() != 1)
        throw DataError("unsupported result version");

    ExperimentResult r;
    r.version = 1;
    const auto& cfg = j.at("config");
    r.config.dataset_path = cfg.at("dataset").get<std::string>();
    r.config.schema_path = cfg.at("schema").get<std::string>();
    r.config.algo = cfg.at("algo").get<std::string>();
    r.config.rounds = cfg.at("rounds").get<int>();
    r.config.depth = cfg.at("depth").get<int>();
    r.config.min_leaf = cfg.at("min_leaf").get<int>();
    r.config.tree_criterion = cfg.at("tree_criterion").get<std::string>();
    r.config.folds = cfg.at("folds").get<int>();
    r.config.runs = cfg.at("runs").get<int>();
    r.config.seed = cfg.at("seed").get<std::uint64_t>();
    r.config.subsample = cfg.at("subsample").get<double>();
    r.config.pairwise_cost_path = cfg.at("pairwise_costs").get<std::string>();
    r.class_names = j.at("classes").get<std::vector<std::string>>();

    for (const std::string& name : metric_names()) {
        MetricAggregate agg;
        agg.mean = j.at("aggregates").at(name).at("mean").get<Scalar>();
        agg.stddev = j.at("aggregates").at(name).at("std").get<Scalar>();
        r.aggregates.emplace_back(name, agg);
    }
    r.mean_confusion_probabilistic = matrix_from_json(j.at("mean_confusion_probabilistic"));
    r.mean_confusion_error_focused = matrix_from_json(j.at("mean_confusion_error_focused"));

    for (const auto& jf : j.at("folds")) {
        FoldOutcome f;
        f.run = jf.at("run").get<int>();
        f.fold = jf.at("fold").get<int>();
        f.report.accuracy = jf.at("accuracy").get<Scalar>();
        f.report.g_mean = jf.at("g_mean").get<Scalar>();
        f.report.mauc = jf.at("mauc").get<Scalar>();
        f.report.operator_norm = jf.at("operator_norm").get<Scalar>();
        f.report.l1_risk = jf.at("l1_risk").get<Scalar>();
        const auto recall = jf.at("per_class_recall").get<std::vector<Scalar>>();
        f.report.per_class_recall = Eigen::Map<const Vector>(recall.data(),
                                                             static_cast<Eigen::Index>(recall.size()));
        f.report.mauc_pairs_skipped = jf.at("mauc_pairs_skipped").get<int>();
        f.report.probabilistic = {matrix_from_json(jf.at("confusion_probabilistic")),
                                  ConfusionForm::Probabilistic};
        f.report.error_focused = {matrix_from_json(jf.at("confusion_error_focused")),
                                  ConfusionForm::ErrorFocused};
        f.halt = halt_reason_from_name(jf.at("halt").get<std::string>());
        f.halted_at = jf.at("halted_at").get<int>();
        f.deltas = jf.at("deltas").get<std::vector<Scalar>>();
        f.losses = jf.at("losses").get<std::vector<Scalar>>();
        r.folds.push_back(std::move(f));
    }
    return r;
}

ExperimentResult load_result(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open result file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return result_from_json(buf.str());
}

namespace {

std::string format_g17(Scalar v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write output file: " + path);
    out << content;
}

std::string matrix_csv(const Matrix& m) {
    std::ostringstream out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_g17(m(i, j));
        out << "\n";
    }
    return out.str();
}

} // namespace

std::string render_table(const ExperimentResult& r) {
    std::ostringstream out;
    out << "algo=" << r.config.algo << " dataset=" << r.config.dataset_path
        << " runs=" << r.config.runs << " folds=" << r.config.folds
        << " rounds=" << r.config.rounds << " depth=" << r.config.depth
        << " tree=" << r.config.tree_criterion
        << " seed=" << r.config.seed << "\n\n";
    char line[128];
    std::snprintf(line, sizeof(line), "%-15s %10s %10s\n", "metric", "mean", "std");
    out << line;
    for (const auto& [name, agg] : r.aggregates) {
        std::snprintf(line, sizeof(line), "%-15s %10.4f %10.4f\n", name.c_str(), agg.mean,
                      agg.stddev);
        out << line;
    }
    out << "\nmean error-focused confusion matrix (rows: true class";
    if (!r.class_names.empty()) {
        out << " [";
        for (std::size_t i = 0; i < r.class_names.size(); ++i)
            out << (i ? " " : "") << r.class_names[i];
        out << "]";
    }
    out << "):\n";
    const Matrix& c = r.mean_confusion_error_focused;
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            std::snprintf(line, sizeof(line), " %7.3f", c(i, j));
            out << line;
        }
        out << "\n";
    }
    return out.str();
}

std::vector<std::string> emit_report(const ExperimentResult& r, const std::string& format,
                                     const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    if (format == "json") {
        const std::string path = out_dir + "/result.json";
        write_file(path, result_to_json(r));
        written.push_back(path);
    } else if (format == "csv") {
        std::ostringstream folds;
        folds << "run,fold";
        for (const std::string& name : metric_names()) folds << "," << name;
        folds << ",halt,halted_at\n";
        for (const FoldOutcome& f : r.folds) {
            folds << f.run << "," << f.fold;
            for (const std::string& name : metric_names())
                folds << "," << format_g17(metric_value(f, name));
            folds << "," << halt_reason_name(f.halt) << "," << f.halted_at << "\n";
        }
        std::ostringstream curves;
        curves << "run,fold,round,delta,loss\n";
        for (const FoldOutcome& f : r.folds)
            for (std::size_t t = 0; t < f.deltas.size(); ++t)
                curves << f.run << "," << f.fold << "," << t + 1 << ","
                       << format_g17(f.deltas[t]) << "," << format_g17(f.losses[t]) << "\n";
        const std::vector<std::pair<std::string, std::string>> files = {
            {"folds.csv", folds.str()},
            {"curves.csv", curves.str()},
            {"confusion_mean_probabilistic.csv", matrix_csv(r.mean_confusion_probabilistic)},
            {"confusion_mean_error_focused.csv", matrix_csv(r.mean_confusion_error_focused)},
        };
        for (const auto& [name, content] : files) {
            const std::string path = out_dir + "/" + name;
            write_file(path, content);
            written.push_back(path);
        }
    } else if (format == "table") {
        const std::string path = out_dir + "/report.txt";
        write_file(path, render_table(r));
        written.push_back(path);
    } else {
        throw ConfigError("unknown report format '" + format + "' (expected json|csv|table)");
    }
    return written;
}

// ---------------------------------------------------------------------------
// Model persistence

namespace {

constexpr const char* kModelHeader = "combo-ensemble v1";

std::string format_hex(Scalar v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

Scalar parse_hex(const std::string& s) {
    char* end = nullptr;
    const Scalar v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw DataError("model file: bad number '" + s + "'");
    return v;
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i].find(',') != std::string::npos || names[i].find('\n') != std::string::npos)
            throw DataError("model file: names may not contain commas or newlines: '" + names[i] +
                            "'");
        if (i) out += ',';
        out += names[i];
    }
    return out;
}

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void save_model(const BoostedEnsemble& ensemble, const FeatureSchema& schema,
                const std::string& path) {
    if (schema.hash() != ensemble.schema_hash)
        throw DataError("save_model: schema does not match the ensemble");
    std::ostringstream out;
    out << kModelHeader << "\n";
    out << "scheme " << ensemble.scheme.name() << "\n";
    if (ensemble.scheme.kind == WeightScheme::Kind::PairwiseCosts)
        for (Eigen::Index l = 0; l < ensemble.scheme.pairwise.rows(); ++l) {
            out << "pairwise-row";
            for (Eigen::Index j = 0; j < ensemble.scheme.pairwise.cols(); ++j)
                out << " " << format_hex(ensemble.scheme.pairwise(l, j));
            out << "\n";
        }
    out << "features " << ensemble.num_features << "\n";
    out << "classes " << ensemble.num_classes << " " << join_names(schema.class_names) << "\n";
    std::string kinds;
    for (ColumnKind k : schema.columns)
        kinds += k == ColumnKind::Numeric ? 'n' : (k == ColumnKind::Categorical ? 'c' : 'y');
    out << "columns " << kinds << "\n";
    out << "label-column " << schema.label_column << "\n";
    for (int c = 0; c < schema.num_columns(); ++c)
        if (schema.columns[c] == ColumnKind::Categorical)
            out << "categories " << c << " " << join_names(schema.categories[c]) << "\n";
    out << "schema-hash " << std::hex << schema.hash() << std::dec << "\n";
    out << "halt " << halt_reason_name(ensemble.halt) << " " << ensemble.halted_at << "\n";
    out << "rounds " << ensemble.rounds.size() << "\n";
    for (const RoundRecord& r : ensemble.rounds) {
        out << "round " << format_hex(r.alpha) << " " << format_hex(r.delta) << " "
            << format_hex(r.loss) << "\n";
        write_tree(out, r.tree, 1);
    }
    out << "end\n";
    write_file(path, out.str());
}

SavedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("model file is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kModelHeader)
        throw DataError("unsupported model version: '" + line + "' (expected '" +
                        std::string(kModelHeader) + "')");

    SavedModel model;
    BoostedEnsemble& e = model.ensemble;
    FeatureSchema& schema = model.schema;
    schema.closed = true;
    std::uint64_t stored_hash = 0;
    long declared_rounds = -1;

    auto expect = [&](std::istringstream& tok, const char* what) -> std::string {
        std::string v;
        if (!(tok >> v)) throw DataError(std::string("model file: missing ") + what);
        return v;
    };

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream tok(line);
        std::string key;
        if (!(tok >> key)) continue;
        if (key == "scheme") {
            e.scheme = WeightScheme::from_name(expect(tok, "scheme name"));
        } else if (key == "pairwise-row") {
            std::vector<Scalar> row;
            std::string v;
            while (tok >> v) row.push_back(parse_hex(v));
            const Eigen::Index k = static_cast<Eigen::Index>(row.size());
            Matrix& p = e.scheme.pairwise;
            const Eigen::Index at = p.rows();
            Matrix grown(at + 1, k);
            if (at > 0) {
                if (p.cols() != k) throw DataError("model file: ragged pairwise matrix");
                grown.topRows(at) = p;
            }
            for (Eigen::Index j = 0; j < k; ++j) grown(at, j) = row[static_cast<std::size_t>(j)];
            p = std::move(grown);
        } else if (key == "features") {
            e.num_features = std::stoi(expect(tok, "feature count"));
        } else if (key == "classes") {
            e.num_classes = std::stoi(expect(tok, "class count"));
            schema.class_names = split_names(expect(tok, "class names"));
            if (static_cast<int>(schema.class_names.size()) != e.num_classes)
                throw DataError("model file: class name count mismatch");
        } else if (key == "columns") {
            const std::string kinds = expect(tok, "column kinds");
            schema.columns.clear();
            for (char c : kinds) {
                if (c == 'n') schema.columns.push_back(ColumnKind::Numeric);
                else if (c == 'c') schema.columns.push_back(ColumnKind::Categorical);
                else if (c == 'y') schema.columns.push_back(ColumnKind::Label);
                else throw DataError("model file: bad column kind");
            }
            schema.categories.assign(schema.columns.size(), {});
        } else if (key == "label-column") {
            schema.label_column = std::stoi(expect(tok, "label column"));
        } else if (key == "categories") {
            const int col = std::stoi(expect(tok, "column index"));
            if (col < 0 || col >= schema.num_columns())
                throw DataError("model file: category column out of range");
            schema.categories[static_cast<std::size_t>(col)] = split_names(expect(tok, "categories"));
        } else if (key == "schema-hash") {
            stored_hash = std::strtoull(expect(tok, "hash").c_str(), nullptr, 16);
        } else if (key == "halt") {
            e.halt = halt_reason_from_name(expect(tok, "halt reason"));
            e.halted_at = std::stoi(expect(tok, "halt round"));
        } else if (key == "rounds") {
            declared_rounds = std::stol(expect(tok, "round count"));
        } else if (key == "round") {
            RoundRecord r;
            r.alpha = parse_hex(expect(tok, "alpha"));
            r.delta = parse_hex(expect(tok, "delta"));
            r.loss = parse_hex(expect(tok, "loss"));
            r.tree = read_tree(in, e.num_features, e.num_classes);
            e.rounds.push_back(std::move(r));
        } else if (key == "end") {
            if (declared_rounds >= 0 && declared_rounds != static_cast<long>(e.rounds.size()))
                throw DataError("model file: round count mismatch");
            schema.validate();
            if (schema.hash() != stored_hash)
                throw DataError("model file: schema hash mismatch (corrupt file?)");
            e.schema_hash = stored_hash;
            return model;
        } else {
            throw DataError("model file: unknown record '" + key + "'");
        }
    }
    throw DataError("model file: missing end record (truncated?)");
}

Matrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open matrix file: " + path);
    std::vector<std::vector<Scalar>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<Scalar> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError("matrix file: ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()),
             rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

} // namespace combo
