#include "combo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace combo {

std::vector<int> FeatureSchema::feature_columns() const {
    std::vector<int> cols;
    for (int c = 0; c < num_columns(); ++c)
        if (c != label_column) cols.push_back(c);
    return cols;
}

std::vector<ColumnKind> FeatureSchema::feature_kinds() const {
    std::vector<ColumnKind> kinds;
    for (int c : feature_columns()) kinds.push_back(columns[c]);
    return kinds;
}

std::uint64_t FeatureSchema::hash() const {
    std::uint64_t h = fnv1a("combo-schema");
    for (ColumnKind k : columns)
        h = fnv1a(k == ColumnKind::Numeric ? "n" : (k == ColumnKind::Categorical ? "c" : "y"), h);
    h = fnv1a(std::to_string(label_column), h);
    for (const auto& name : class_names) h = fnv1a(name + "\x1f", h);
    for (const auto& cats : categories)
        for (const auto& cat : cats) h = fnv1a(cat + "\x1e", h);
    return h;
}

void FeatureSchema::validate() const {
    int label_count = 0;
    for (ColumnKind k : columns)
        if (k == ColumnKind::Label) ++label_count;
    if (label_count != 1)
        throw DataError("schema must declare exactly one label column, found " +
                        std::to_string(label_count));
    if (label_column < 0 || label_column >= num_columns() ||
        columns[label_column] != ColumnKind::Label)
        throw DataError("schema label column index is inconsistent");
    if (!class_names.empty() && num_classes() < 2)
        throw DataError("K >= 2 violated: schema declares " + std::to_string(num_classes()) +
                        " class(es)");
}

FeatureSchema parse_schema(const std::string& text) {
    FeatureSchema schema;
    std::istringstream in(text);
    std::string line;
    int col = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // strip whitespace
        auto begin = line.find_first_not_of(" \t");
        if (begin == std::string::npos) continue;
        auto end = line.find_last_not_of(" \t");
        std::string word = line.substr(begin, end - begin + 1);
        if (word.empty() || word[0] == '#') continue;
        if (word == "numeric") {
            schema.columns.push_back(ColumnKind::Numeric);
        } else if (word == "categorical") {
            schema.columns.push_back(ColumnKind::Categorical);
        } else if (word == "label") {
            schema.columns.push_back(ColumnKind::Label);
            schema.label_column = col;
        } else {
            throw DataError("schema line " + std::to_string(col + 1) +
                            ": expected numeric|categorical|label, got '" + word + "'");
        }
        ++col;
    }
    schema.categories.assign(schema.columns.size(), {});
    schema.validate();
    return schema;
}

FeatureSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_schema(buf.str());
}

std::string schema_to_text(const FeatureSchema& schema) {
    std::ostringstream out;
    for (ColumnKind k : schema.columns) {
        switch (k) {
            case ColumnKind::Numeric: out << "numeric\n"; break;
            case ColumnKind::Categorical: out << "categorical\n"; break;
            case ColumnKind::Label: out << "label\n"; break;
        }
    }
    return out.str();
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell += ch;
        }
    }
    cells.push_back(cell);
    return cells;
}

std::string trimmed(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

void finalize_counts(Dataset& d) {
    const int k = d.schema.num_classes();
    d.class_counts.assign(k, 0);
    for (int y : d.labels) {
        if (y < 0 || y >= k) throw DataError("label index out of range");
        ++d.class_counts[y];
    }
    for (int y = 0; y < k; ++y)
        if (d.class_counts[y] < 1)
            throw DataError("class '" + d.schema.class_names[y] + "' has no examples");
    d.priors.resize(k);
    const Scalar m = static_cast<Scalar>(d.labels.size());
    for (int y = 0; y < k; ++y) d.priors[y] = d.class_counts[y] / m;
}

} // namespace

Dataset make_dataset(Matrix features, std::vector<int> labels, FeatureSchema schema) {
    if (features.rows() != static_cast<Eigen::Index>(labels.size()))
        throw DataError("make_dataset: feature rows and labels differ in length");
    Dataset d;
    d.features = std::move(features);
    d.labels = std::move(labels);
    d.schema = std::move(schema);
    finalize_counts(d);
    d.validate();
    return d;
}

Dataset parse_csv(const std::string& text, FeatureSchema schema) {
    schema.validate();
    if (schema.categories.empty()) schema.categories.assign(schema.columns.size(), {});

    const int ncols = schema.num_columns();
    const auto feat_cols = schema.feature_columns();
    const int d = static_cast<int>(feat_cols.size());

    std::vector<std::vector<std::string>> raw_rows;
    std::vector<std::string> raw_labels;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trimmed(line).empty()) continue;
        auto cells = split_row(line);
        if (static_cast<int>(cells.size()) != ncols)
            throw DataError("row " + std::to_string(lineno) + ": expected " +
                            std::to_string(ncols) + " columns, got " +
                            std::to_string(cells.size()));
        for (int c = 0; c < ncols; ++c) {
            cells[c] = trimmed(cells[c]);
            if (cells[c].empty() || cells[c] == "?")
                throw DataError("row " + std::to_string(lineno) + ", column " +
                                std::to_string(c + 1) + ": missing value");
        }
        raw_labels.push_back(cells[schema.label_column]);
        raw_rows.push_back(std::move(cells));
    }
    const int m = static_cast<int>(raw_rows.size());
    if (m == 0) throw DataError("dataset is empty");

    // Class index order: lexicographic by class name (discovered) or the
    // order already frozen in the schema.
    if (schema.class_names.empty()) {
        std::map<std::string, int> seen;
        for (const auto& name : raw_labels) seen.emplace(name, 0);
        for (const auto& [name, _] : seen) schema.class_names.push_back(name);
    }
    if (schema.num_classes() < 2)
        throw DataError("K >= 2 violated: file contains a single class '" +
                        schema.class_names.front() + "'");

    std::map<std::string, int> class_index;
    for (int y = 0; y < schema.num_classes(); ++y) class_index[schema.class_names[y]] = y;

    // Category codes: dense, first-seen order, then frozen.
    std::vector<std::map<std::string, int>> cat_index(ncols);
    for (int c = 0; c < ncols; ++c)
        for (int code = 0; code < static_cast<int>(schema.categories[c].size()); ++code)
            cat_index[c][schema.categories[c][code]] = code;

    Dataset ds;
    ds.features.resize(m, d);
    ds.labels.resize(m);
    for (int i = 0; i < m; ++i) {
        auto it = class_index.find(raw_labels[i]);
        if (it == class_index.end())
            throw DataError("row " + std::to_string(i + 1) + ": unknown class label '" +
                            raw_labels[i] + "'");
        ds.labels[i] = it->second;
        for (int f = 0; f < d; ++f) {
            const int c = feat_cols[f];
            const std::string& cell = raw_rows[i][c];
            if (schema.columns[c] == ColumnKind::Numeric) {
                std::size_t pos = 0;
                double value = 0;
                try {
                    value = std::stod(cell, &pos);
                } catch (const std::exception&) {
                    pos = 0;
                }
                if (pos != cell.size() || !std::isfinite(value))
                    throw DataError("row " + std::to_string(i + 1) + ", column " +
                                    std::to_string(c + 1) + ": bad numeric value '" + cell + "'");
                ds.features(i, f) = value;
            } else {
                auto cit = cat_index[c].find(cell);
                if (cit == cat_index[c].end()) {
                    if (schema.closed)
                        throw DataError("row " + std::to_string(i + 1) + ", column " +
                                        std::to_string(c + 1) + ": unknown category '" + cell +
                                        "'");
                    int code = static_cast<int>(schema.categories[c].size());
                    schema.categories[c].push_back(cell);
                    cat_index[c][cell] = code;
                    ds.features(i, f) = code;
                } else {
                    ds.features(i, f) = cit->second;
                }
            }
        }
    }

    schema.closed = true;
    ds.schema = std::move(schema);
    finalize_counts(ds);
    ds.validate();
    return ds;
}

Dataset load_csv(const std::string& path, FeatureSchema schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), std::move(schema));
}

void Dataset::validate() const {
    const int m = rows();
    const int k = num_classes();
    if (k < 2) throw DataError("K >= 2 violated");
    if (static_cast<int>(labels.size()) != m)
        throw DataError("labels/features length mismatch");
    long total = 0;
    for (int y = 0; y < k; ++y) {
        if (class_counts[y] < 1) throw DataError("empty class " + std::to_string(y));
        total += class_counts[y];
    }
    if (total != m) throw DataError("class counts do not sum to m");
    if (std::abs(priors.sum() - 1.0) > 1e-12)
        throw DataError("class priors do not sum to 1");
    for (int y : labels)
        if (y < 0 || y >= k) throw DataError("label out of range");
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
    Dataset out;
    out.schema = schema;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int r = indices[i];
        if (r < 0 || r >= rows()) throw DataError("subset index out of range");
        out.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
        out.labels[i] = labels[r];
    }
    finalize_counts(out);
    return out;
}

Scalar imbalance_ratio(const Dataset& d) {
    auto [mn, mx] = std::minmax_element(d.class_counts.begin(), d.class_counts.end());
    return static_cast<Scalar>(*mx) / static_cast<Scalar>(*mn);
}

const std::vector<int>& FoldPlan::test_indices(int run, int fold) const {
    return assignments.at(run).at(fold);
}

std::vector<int> FoldPlan::train_indices(int run, int fold) const {
    std::vector<int> idx;
    for (int f = 0; f < folds; ++f) {
        if (f == fold) continue;
        const auto& a = assignments.at(run).at(f);
        idx.insert(idx.end(), a.begin(), a.end());
    }
    std::sort(idx.begin(), idx.end());
    return idx;
}

FoldPlan stratified_folds(const Dataset& d, int folds, int runs, std::uint64_t seed) {
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (folds > d.rows())
        throw ConfigError("folds (" + std::to_string(folds) + ") exceed dataset size (" +
                          std::to_string(d.rows()) + ")");

    const int k = d.num_classes();
    std::vector<std::vector<int>> by_class(k);
    for (int i = 0; i < d.rows(); ++i) by_class[d.labels[i]].push_back(i);

    FoldPlan plan;
    plan.folds = folds;
    plan.runs = runs;
    plan.base_seed = seed;
    plan.assignments.resize(runs);

    SplitMix64 base(seed);
    for (int r = 0; r < runs; ++r) {
        SplitMix64 rng = base.split(static_cast<std::uint64_t>(r));
        auto& fold_sets = plan.assignments[r];
        fold_sets.assign(folds, {});
        for (int y = 0; y < k; ++y) {
            std::vector<int> members = by_class[y];
            deterministic_shuffle(members, rng);
            // Deal round-robin from a random offset so remainders do not
            // always land in fold 0.
            const int start = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(folds)));
            for (std::size_t j = 0; j < members.size(); ++j)
                fold_sets[(start + static_cast<int>(j)) % folds].push_back(members[j]);
        }
        for (auto& f : fold_sets) std::sort(f.begin(), f.end());
    }
    return plan;
}

} // namespace combo
