#ifndef COMBO_TEST_UTIL_HPP
#define COMBO_TEST_UTIL_HPP

#include "combo/dataset.hpp"

#include <string>
#include <vector>

namespace combo::testutil {

// Schema with `features` numeric columns followed by the label column.
inline FeatureSchema numeric_schema(int features, std::vector<std::string> class_names = {}) {
    FeatureSchema schema;
    for (int i = 0; i < features; ++i) schema.columns.push_back(ColumnKind::Numeric);
    schema.columns.push_back(ColumnKind::Label);
    schema.label_column = features;
    schema.categories.assign(schema.columns.size(), {});
    schema.class_names = std::move(class_names);
    return schema;
}

// Toy dataset straight from arrays; class names default to c0..c{K-1}.
inline Dataset toy_dataset(Matrix features, std::vector<int> labels, int num_classes) {
    std::vector<std::string> names;
    for (int k = 0; k < num_classes; ++k) names.push_back("c" + std::to_string(k));
    FeatureSchema schema = numeric_schema(static_cast<int>(features.cols()), names);
    schema.closed = true;
    return make_dataset(std::move(features), std::move(labels), std::move(schema));
}

} // namespace combo::testutil

#endif // COMBO_TEST_UTIL_HPP
