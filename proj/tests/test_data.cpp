#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "combo/datagen.hpp"
#include "combo/dataset.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <set>

using namespace combo;

TEST_CASE("new-thyroid shaped file loads with the classic class structure") {
    const auto files = datagen::make_new_thyroid();
    const Dataset d = parse_csv(files.csv, parse_schema(files.schema));
    CHECK(d.num_classes() == 3);
    CHECK(d.rows() == 215);
    CHECK(d.class_counts == std::vector<int>{150, 35, 30});
    CHECK(d.num_features() == 5);
    CHECK(imbalance_ratio(d) == doctest::Approx(5.0));
}

TEST_CASE("single-class file is rejected") {
    const std::string csv = "1.0,2.0,a\n3.0,4.0,a\n";
    CHECK_THROWS_WITH_AS(parse_csv(csv, testutil::numeric_schema(2)),
                         doctest::Contains("K >= 2"), DataError);
}

TEST_CASE("balance construction matches the classic distribution") {
    const auto files = datagen::make_balance();
    const Dataset d = parse_csv(files.csv, parse_schema(files.schema));
    CHECK(d.num_classes() == 3);
    CHECK(d.rows() == 625);
    // lexicographic class order: B, L, R
    CHECK(d.schema.class_names == std::vector<std::string>{"B", "L", "R"});
    CHECK(d.class_counts == std::vector<int>{49, 288, 288});
    CHECK(imbalance_ratio(d) == doctest::Approx(288.0 / 49.0)); // ~5.88
}

TEST_CASE("csv parsing errors carry row/column diagnostics") {
    FeatureSchema schema = testutil::numeric_schema(2);

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_csv("/nonexistent/path.csv", schema), DataError);
    }
    SUBCASE("row arity mismatch") {
        CHECK_THROWS_WITH_AS(parse_csv("1,2,a\n1,2,3,b\n", schema),
                             doctest::Contains("row 2"), DataError);
    }
    SUBCASE("missing value") {
        CHECK_THROWS_WITH_AS(parse_csv("1,,a\n1,2,b\n", schema),
                             doctest::Contains("missing value"), DataError);
    }
    SUBCASE("bad numeric cell") {
        CHECK_THROWS_WITH_AS(parse_csv("1,zap,a\n1,2,b\n", schema),
                             doctest::Contains("bad numeric value"), DataError);
    }
    SUBCASE("unknown class label under a frozen schema") {
        schema.class_names = {"a", "b"};
        CHECK_THROWS_WITH_AS(parse_csv("1,2,a\n3,4,z\n", schema),
                             doctest::Contains("unknown class label"), DataError);
    }
}

TEST_CASE("unknown category is rejected once the schema is closed") {
    FeatureSchema schema;
    schema.columns = {ColumnKind::Categorical, ColumnKind::Label};
    schema.label_column = 1;
    schema.categories.assign(2, {});

    const Dataset first = parse_csv("red,a\nblue,b\nred,b\n", schema);
    CHECK(first.schema.closed);
    CHECK(first.schema.categories[0] == std::vector<std::string>{"red", "blue"});
    // first-seen codes
    CHECK(first.features(0, 0) == 0.0);
    CHECK(first.features(1, 0) == 1.0);

    CHECK_THROWS_WITH_AS(parse_csv("green,a\nred,b\n", first.schema),
                         doctest::Contains("unknown category"), DataError);
}

TEST_CASE("reloading the same bytes yields an identical dataset") {
    const auto files = datagen::make_balance();
    const Dataset a = parse_csv(files.csv, parse_schema(files.schema));
    const Dataset b = parse_csv(files.csv, parse_schema(files.schema));
    CHECK(a.labels == b.labels);
    CHECK(a.features == b.features);
    CHECK(a.class_counts == b.class_counts);
    CHECK(a.schema.hash() == b.schema.hash());
}

TEST_CASE("imbalance ratio spot values") {
    SUBCASE("car-shaped counts give 18.62") {
        const auto files = datagen::make_car();
        const Dataset d = parse_csv(files.csv, parse_schema(files.schema));
        CHECK(d.rows() == 1728);
        std::vector<int> sorted_counts = d.class_counts;
        std::sort(sorted_counts.begin(), sorted_counts.end());
        CHECK(sorted_counts == std::vector<int>{65, 69, 384, 1210});
        CHECK(imbalance_ratio(d) == doctest::Approx(18.62).epsilon(0.001));
    }
    SUBCASE("perfect balance gives 1") {
        Matrix x(4, 1);
        x << 0, 1, 2, 3;
        const Dataset d = testutil::toy_dataset(x, {0, 0, 1, 1}, 2);
        CHECK(imbalance_ratio(d) == 1.0);
    }
    SUBCASE("yeast-shaped counts give 92.60") {
        const auto files = datagen::make_yeast();
        const Dataset d = parse_csv(files.csv, parse_schema(files.schema));
        CHECK(d.rows() == 1484);
        CHECK(*std::max_element(d.class_counts.begin(), d.class_counts.end()) == 463);
        CHECK(*std::min_element(d.class_counts.begin(), d.class_counts.end()) == 5);
        CHECK(imbalance_ratio(d) == doctest::Approx(92.60).epsilon(0.001));
    }
}

TEST_CASE("stratified folds put one example of each class in every fold when counts allow") {
    Matrix x(10, 1);
    for (int i = 0; i < 10; ++i) x(i, 0) = i;
    const Dataset d = testutil::toy_dataset(x, {0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, 2);
    const FoldPlan plan = stratified_folds(d, 5, 3, 7);
    for (int run = 0; run < plan.runs; ++run)
        for (int fold = 0; fold < plan.folds; ++fold) {
            const auto& members = plan.test_indices(run, fold);
            REQUIRE(members.size() == 2);
            int count0 = 0;
            for (int i : members)
                if (d.labels[i] == 0) ++count0;
            CHECK(count0 == 1);
        }
}

TEST_CASE("same seed reproduces the same plan, different seeds differ") {
    const auto files = datagen::make_balance();
    const Dataset d = parse_csv(files.csv, parse_schema(files.schema));
    const FoldPlan a = stratified_folds(d, 5, 4, 99);
    const FoldPlan b = stratified_folds(d, 5, 4, 99);
    CHECK(a.assignments == b.assignments);
    const FoldPlan c = stratified_folds(d, 5, 4, 100);
    CHECK(a.assignments != c.assignments);
}

TEST_CASE("a five-member minority class lands in five distinct folds") {
    // derived by enumerating fold membership after the split
    const auto files = datagen::make_yeast();
    const Dataset d = parse_csv(files.csv, parse_schema(files.schema));
    const int minority = static_cast<int>(
        std::min_element(d.class_counts.begin(), d.class_counts.end()) - d.class_counts.begin());
    REQUIRE(d.class_counts[minority] == 5);
    const FoldPlan plan = stratified_folds(d, 5, 2, 17);
    for (int run = 0; run < plan.runs; ++run) {
        for (int fold = 0; fold < plan.folds; ++fold) {
            int members = 0;
            for (int i : plan.test_indices(run, fold))
                if (d.labels[i] == minority) ++members;
            CHECK(members == 1);
        }
    }
}

TEST_CASE("fold plans partition the index range and stay stratified") {
    const auto files = datagen::make_car();
    const Dataset d = parse_csv(files.csv, parse_schema(files.schema));
    const FoldPlan plan = stratified_folds(d, 5, 3, 4242);
    for (int run = 0; run < plan.runs; ++run) {
        std::set<int> all;
        std::size_t total = 0;
        for (int fold = 0; fold < plan.folds; ++fold) {
            const auto& members = plan.test_indices(run, fold);
            total += members.size();
            all.insert(members.begin(), members.end());
        }
        CHECK(total == static_cast<std::size_t>(d.rows())); // pairwise disjoint
        CHECK(all.size() == static_cast<std::size_t>(d.rows()));
        CHECK(*all.begin() == 0);
        CHECK(*all.rbegin() == d.rows() - 1);

        for (int y = 0; y < d.num_classes(); ++y) {
            int lo = d.rows(), hi = 0;
            for (int fold = 0; fold < plan.folds; ++fold) {
                int n = 0;
                for (int i : plan.test_indices(run, fold))
                    if (d.labels[i] == y) ++n;
                lo = std::min(lo, n);
                hi = std::max(hi, n);
            }
            CHECK(hi - lo <= 1);
        }
    }
}

TEST_CASE("fold preconditions") {
    Matrix x(4, 1);
    x << 0, 1, 2, 3;
    const Dataset d = testutil::toy_dataset(x, {0, 0, 1, 1}, 2);
    CHECK_THROWS_AS(stratified_folds(d, 1, 1, 0), ConfigError);
    CHECK_THROWS_AS(stratified_folds(d, 5, 1, 0), ConfigError); // folds > m
}

TEST_CASE("train/test indices complement each other") {
    Matrix x(9, 1);
    for (int i = 0; i < 9; ++i) x(i, 0) = i % 3;
    const Dataset d = testutil::toy_dataset(x, {0, 1, 2, 0, 1, 2, 0, 1, 2}, 3);
    const FoldPlan plan = stratified_folds(d, 3, 1, 5);
    for (int fold = 0; fold < 3; ++fold) {
        const auto train = plan.train_indices(0, fold);
        const auto& test = plan.test_indices(0, fold);
        CHECK(train.size() + test.size() == 9);
        for (int i : test) CHECK(std::find(train.begin(), train.end(), i) == train.end());
    }
}

TEST_CASE("subset recomputes counts and priors") {
    const auto files = datagen::make_balance();
    const Dataset d = parse_csv(files.csv, parse_schema(files.schema));
    const Dataset s = d.subset({0, 1, 2, 5, 6, 25, 26, 27});
    CHECK(s.rows() == 8);
    CHECK(s.priors.sum() == doctest::Approx(1.0).epsilon(1e-12));
    int recount = 0;
    for (int y : s.labels)
        if (y == 0) ++recount;
    CHECK(s.class_counts[0] == recount);
}
