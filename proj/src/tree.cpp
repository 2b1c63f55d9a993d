#include "combo/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace combo {

int WeakTree::predict(const Eigen::Ref<const RowVector>& row) const {
    if (nodes.empty()) throw DataError("predict: empty tree");
    if (row.size() != num_features)
        throw DataError("predict: row has " + std::to_string(row.size()) +
                        " features, tree expects " + std::to_string(num_features));
    int n = 0;
    while (!nodes[n].is_leaf()) {
        const TreeNode& node = nodes[n];
        const Scalar x = row[node.feature];
        const bool go_left = node.categorical ? (x == static_cast<Scalar>(node.category))
                                              : (x < node.threshold);
        n = go_left ? node.left : node.right;
    }
    return nodes[n].label;
}

int WeakTree::depth() const {
    // iterative depth over the node vector
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int best = 0;
    while (!stack.empty()) {
        auto [n, d] = stack.back();
        stack.pop_back();
        if (nodes[n].is_leaf()) {
            best = std::max(best, d);
        } else {
            stack.emplace_back(nodes[n].left, d + 1);
            stack.emplace_back(nodes[n].right, d + 1);
        }
    }
    return best;
}

std::vector<int> predict_all(const WeakTree& tree, const RowMatrix& features) {
    std::vector<int> out(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        out[static_cast<std::size_t>(i)] = tree.predict(features.row(i));
    return out;
}

void validate_cost_matrix(const RowMatrix& cost, const std::vector<int>& labels) {
    const Eigen::Index m = cost.rows();
    const Eigen::Index k = cost.cols();
    if (m != static_cast<Eigen::Index>(labels.size()))
        throw DataError("cost matrix rows do not match label count");
    for (Eigen::Index i = 0; i < m; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= k) throw DataError("cost matrix: label out of range");
        Scalar sum = 0, mass = 0;
        for (Eigen::Index l = 0; l < k; ++l) {
            const Scalar v = cost(i, l);
            if (!std::isfinite(v)) throw DataError("cost matrix: non-finite entry");
            sum += v;
            mass += std::abs(v);
            if (l != y && v < -1e-12 * mass)
                throw DataError("cost matrix: negative off-diagonal cost at row " +
                                std::to_string(i));
        }
        if (std::abs(sum) > 1e-9 * std::max(mass, Scalar(1e-300)))
            throw DataError("cost matrix: row " + std::to_string(i) + " does not sum to 0");
        if (cost(i, y) > cost.row(i).minCoeff() + 1e-12 * mass)
            throw DataError("cost matrix: true label is not the cheapest at row " +
                            std::to_string(i));
    }
}

const char* criterion_name(WeakLearnerConfig::Criterion criterion) {
    switch (criterion) {
        case WeakLearnerConfig::Criterion::CostMinimizing: return "cost";
        case WeakLearnerConfig::Criterion::WeightedGini: return "gini";
    }
    return "?";
}

WeakLearnerConfig::Criterion criterion_from_name(const std::string& name) {
    if (name == "cost") return WeakLearnerConfig::Criterion::CostMinimizing;
    if (name == "gini") return WeakLearnerConfig::Criterion::WeightedGini;
    throw ConfigError("unknown tree criterion '" + name + "' (expected cost|gini)");
}

namespace {

struct SplitChoice {
    bool found = false;
    Scalar score = std::numeric_limits<Scalar>::infinity();
    int feature = -1;
    bool categorical = false;
    Scalar threshold = 0;
    int category = -1;
};

// Both criteria reduce to the same sweep: each row contributes a K-vector
// of statistics, a node is scored by a function of the summed vector, and
// the best split minimizes the children's summed scores.
//   cost: stats row = cost row, score = min_l total[l], label = argmin.
//   gini: stats row = one-hot weight -D(i,y_i), score = W - sum_l T_l^2/W
//         (the weighted Gini mass), label = argmax.
struct TreeBuilder {
    const Dataset& data;
    const WeakLearnerConfig& cfg;
    const bool gini;
    RowMatrix gini_stats; // only filled for the gini criterion
    const RowMatrix& stats;
    std::vector<ColumnKind> kinds;
    WeakTree tree;

    static RowMatrix make_gini_stats(const Dataset& d, const RowMatrix& cost) {
        RowMatrix s = RowMatrix::Zero(cost.rows(), cost.cols());
        for (Eigen::Index i = 0; i < cost.rows(); ++i)
            s(i, d.labels[static_cast<std::size_t>(i)]) =
                -cost(i, d.labels[static_cast<std::size_t>(i)]);
        return s;
    }

    TreeBuilder(const Dataset& d, const RowMatrix& cost, const WeakLearnerConfig& w)
        : data(d),
          cfg(w),
          gini(w.criterion == WeakLearnerConfig::Criterion::WeightedGini),
          gini_stats(gini ? make_gini_stats(d, cost) : RowMatrix()),
          stats(gini ? gini_stats : cost),
          kinds(d.schema.feature_kinds()) {}

    int leaf_label(const Scalar* total, int k) const {
        int best = 0;
        for (int l = 1; l < k; ++l) {
            if (gini ? total[l] > total[best] : total[l] < total[best]) best = l;
        }
        return best;
    }

    Scalar node_score(const Scalar* total, int k) const {
        if (!gini) {
            Scalar lo = total[0];
            for (int l = 1; l < k; ++l) lo = std::min(lo, total[l]);
            return lo;
        }
        Scalar w = 0, sq = 0;
        for (int l = 0; l < k; ++l) {
            w += total[l];
            sq += total[l] * total[l];
        }
        return w > 0 ? w - sq / w : 0.0;
    }

    // Best split of `rows`, enumerated feature-ascending then test-value
    // ascending; the first candidate of minimal score wins, which pins the
    // (feature, threshold/category) tie-break.
    SplitChoice find_split(const std::vector<int>& rows, const std::vector<Scalar>& total) {
        const int k = data.num_classes();
        const int n = static_cast<int>(rows.size());
        SplitChoice best;
        std::vector<Scalar> left(k), right(k);
        auto score_pair = [&]() {
            for (int l = 0; l < k; ++l) right[l] = total[l] - left[l];
            return node_score(left.data(), k) + node_score(right.data(), k);
        };

        for (int f = 0; f < data.num_features(); ++f) {
            if (kinds[f] == ColumnKind::Numeric) {
                std::vector<std::pair<Scalar, int>> order(rows.size());
                for (int i = 0; i < n; ++i)
                    order[i] = {data.features(rows[i], f), rows[i]};
                std::sort(order.begin(), order.end());

                std::fill(left.begin(), left.end(), 0.0);
                for (int i = 0; i + 1 < n; ++i) {
                    for (int l = 0; l < k; ++l) left[l] += stats(order[i].second, l);
                    if (order[i].first == order[i + 1].first) continue; // not a boundary
                    const int n_left = i + 1;
                    if (n_left < cfg.min_leaf_size || n - n_left < cfg.min_leaf_size) continue;
                    const Scalar s = score_pair();
                    if (s < best.score) {
                        best.found = true;
                        best.score = s;
                        best.feature = f;
                        best.categorical = false;
                        best.threshold = order[i].first + (order[i + 1].first - order[i].first) / 2;
                        // degenerate midpoint (adjacent representable values)
                        if (!(best.threshold > order[i].first)) best.threshold = order[i + 1].first;
                    }
                }
            } else {
                int ncat = 0;
                for (int i = 0; i < n; ++i)
                    ncat = std::max(ncat, static_cast<int>(data.features(rows[i], f)) + 1);
                std::vector<Scalar> cat_stats(static_cast<std::size_t>(ncat) * k, 0.0);
                std::vector<int> cat_n(ncat, 0);
                for (int i = 0; i < n; ++i) {
                    const int code = static_cast<int>(data.features(rows[i], f));
                    ++cat_n[code];
                    Scalar* dst = cat_stats.data() + static_cast<std::size_t>(code) * k;
                    for (int l = 0; l < k; ++l) dst[l] += stats(rows[i], l);
                }
                for (int code = 0; code < ncat; ++code) {
                    const int n_left = cat_n[code];
                    if (n_left < cfg.min_leaf_size || n - n_left < cfg.min_leaf_size) continue;
                    const Scalar* lc = cat_stats.data() + static_cast<std::size_t>(code) * k;
                    for (int l = 0; l < k; ++l) left[l] = lc[l];
                    const Scalar s = score_pair();
                    if (s < best.score) {
                        best.found = true;
                        best.score = s;
                        best.feature = f;
                        best.categorical = true;
                        best.category = code;
                    }
                }
            }
        }
        return best;
    }

    int build(const std::vector<int>& rows, int depth) {
        const int k = data.num_classes();
        std::vector<Scalar> total(k, 0.0);
        Scalar ideal = 0, scale = 0;
        for (int r : rows) {
            Scalar row_min = stats(r, 0);
            for (int l = 0; l < k; ++l) {
                const Scalar v = stats(r, l);
                total[l] += v;
                row_min = std::min(row_min, v);
                scale += std::abs(v);
            }
            ideal += row_min;
        }
        if (gini) ideal = 0; // the Gini mass of any pure partition

        const int label = leaf_label(total.data(), k);
        const Scalar leaf_score = node_score(total.data(), k);

        // A node is expanded while it is not score-pure; zero-gain splits
        // are kept so structure like XOR stays reachable at depth 2.
        const Scalar tol = 1e-12 * scale;
        const bool pure = leaf_score <= ideal + tol;
        SplitChoice split;
        if (!pure && depth < cfg.max_depth) split = find_split(rows, total);

        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (!split.found) {
            tree.nodes[index].label = label;
            return index;
        }

        std::vector<int> left_rows, right_rows;
        for (int r : rows) {
            const Scalar x = data.features(r, split.feature);
            const bool go_left = split.categorical ? (x == static_cast<Scalar>(split.category))
                                                   : (x < split.threshold);
            (go_left ? left_rows : right_rows).push_back(r);
        }

        tree.nodes[index].feature = split.feature;
        tree.nodes[index].categorical = split.categorical;
        tree.nodes[index].threshold = split.threshold;
        tree.nodes[index].category = split.category;
        const int left = build(left_rows, depth + 1);
        const int right = build(right_rows, depth + 1);
        tree.nodes[index].left = left;
        tree.nodes[index].right = right;
        return index;
    }
};

} // namespace

WeakTree train_tree(const Dataset& d, const RowMatrix& cost, const WeakLearnerConfig& cfg) {
    cfg.validate();
    if (d.rows() == 0) throw DataError("train_tree: empty dataset");
    if (cost.rows() != d.rows() || cost.cols() != d.num_classes())
        throw DataError("train_tree: cost matrix shape mismatch");
    validate_cost_matrix(cost, d.labels);

    TreeBuilder builder(d, cost, cfg);
    std::vector<int> rows(static_cast<std::size_t>(d.rows()));
    for (int i = 0; i < d.rows(); ++i) rows[i] = i;
    builder.build(rows, 0);
    builder.tree.num_features = d.num_features();
    builder.tree.num_classes = d.num_classes();
    return builder.tree;
}

Scalar edge(const RowMatrix& cost, const std::vector<int>& labels,
            const std::vector<int>& predictions) {
    const Eigen::Index m = cost.rows();
    const Eigen::Index k = cost.cols();
    if (static_cast<Eigen::Index>(labels.size()) != m ||
        static_cast<Eigen::Index>(predictions.size()) != m)
        throw DataError("edge: length mismatch");
    KahanSum<> num, den;
    for (Eigen::Index i = 0; i < m; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        const int p = predictions[static_cast<std::size_t>(i)];
        if (p < 0 || p >= k) throw DataError("edge: prediction out of range");
        num.add(cost(i, p));
        for (Eigen::Index l = 0; l < k; ++l)
            if (l != y) den.add(cost(i, l));
    }
    if (!(den.value() > 0))
        throw DataError("edge: zero off-diagonal cost mass (loss is already 0)");
    return -num.value() / den.value();
}

bool check_weak_condition(const RowMatrix& cost, const std::vector<int>& labels,
                          const std::vector<int>& predictions, Scalar gamma) {
    const Eigen::Index m = cost.rows();
    const Eigen::Index k = cost.cols();
    if (static_cast<Eigen::Index>(labels.size()) != m ||
        static_cast<Eigen::Index>(predictions.size()) != m)
        throw DataError("check_weak_condition: length mismatch");
    KahanSum<> lhs, rhs, mass;
    const Scalar base = (1.0 - gamma) / static_cast<Scalar>(k);
    for (Eigen::Index i = 0; i < m; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        lhs.add(cost(i, predictions[static_cast<std::size_t>(i)]));
        for (Eigen::Index l = 0; l < k; ++l) {
            rhs.add(cost(i, l) * (base + (static_cast<int>(l) == y ? gamma : 0.0)));
            if (l != y) mass.add(cost(i, l));
        }
    }
    return lhs.value() <= rhs.value() + 1e-12 * std::max(Scalar(1), mass.value());
}

namespace {

std::string format_hex(Scalar v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

void write_node(std::ostream& out, const WeakTree& tree, int n, int indent) {
    for (int i = 0; i < indent; ++i) out << "  ";
    const TreeNode& node = tree.nodes[n];
    if (node.is_leaf()) {
        out << "leaf " << node.label << "\n";
        return;
    }
    if (node.categorical)
        out << "split " << node.feature << " cat " << node.category << "\n";
    else
        out << "split " << node.feature << " num " << format_hex(node.threshold) << "\n";
    write_node(out, tree, node.left, indent + 1);
    write_node(out, tree, node.right, indent + 1);
}

int read_node(std::istream& in, WeakTree& tree) {
    std::string line;
    while (std::getline(in, line)) {
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        std::istringstream tok(line.substr(b));
        std::string kind;
        tok >> kind;
        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (kind == "leaf") {
            int label;
            if (!(tok >> label)) throw DataError("tree record: bad leaf line");
            tree.nodes[index].label = label;
            return index;
        }
        if (kind != "split") throw DataError("tree record: expected leaf|split, got '" + kind + "'");
        int feature;
        std::string test, value;
        if (!(tok >> feature >> test >> value)) throw DataError("tree record: bad split line");
        tree.nodes[index].feature = feature;
        if (test == "cat") {
            tree.nodes[index].categorical = true;
            tree.nodes[index].category = std::atoi(value.c_str());
        } else if (test == "num") {
            tree.nodes[index].categorical = false;
            char* end = nullptr;
            tree.nodes[index].threshold = std::strtod(value.c_str(), &end);
            if (end == value.c_str()) throw DataError("tree record: bad threshold");
        } else {
            throw DataError("tree record: unknown test kind '" + test + "'");
        }
        const int left = read_node(in, tree);
        const int right = read_node(in, tree);
        tree.nodes[index].left = left;
        tree.nodes[index].right = right;
        return index;
    }
    throw DataError("tree record: unexpected end of input");
}

} // namespace

void write_tree(std::ostream& out, const WeakTree& tree, int indent) {
    if (tree.nodes.empty()) throw DataError("write_tree: empty tree");
    write_node(out, tree, 0, indent);
}

WeakTree read_tree(std::istream& in, int num_features, int num_classes) {
    WeakTree tree;
    tree.num_features = num_features;
    tree.num_classes = num_classes;
    read_node(in, tree);
    for (const TreeNode& n : tree.nodes) {
        if (n.is_leaf()) {
            if (n.label < 0 || n.label >= num_classes)
                throw DataError("tree record: leaf class out of range");
        } else if (n.feature < 0 || n.feature >= num_features) {
            throw DataError("tree record: feature index out of range");
        }
    }
    return tree;
}

} // namespace combo
