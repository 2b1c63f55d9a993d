#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "combo/booster.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace combo;
using combo::testutil::toy_dataset;

namespace {

// noisy two-feature three-class toy; not separable at depth 2
Dataset noisy_toy(int m, int k, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Matrix x(m, 2);
    std::vector<int> labels(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const int y = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(k)));
        labels[static_cast<std::size_t>(i)] = y;
        x(i, 0) = y + 2.0 * (static_cast<Scalar>(rng.next() >> 11) * 0x1.0p-53 - 0.5);
        x(i, 1) = static_cast<Scalar>(rng.uniform_below(4));
    }
    return toy_dataset(x, labels, k);
}

Dataset separable_toy() {
    Matrix x(6, 1);
    x << -3, -2, -1, 1, 2, 3;
    return toy_dataset(x, {0, 0, 0, 1, 1, 1}, 2);
}

// from-scratch loss oracle: rebuild the score table by running every
// recorded tree over the data, then expand the exponential loss directly
Scalar loss_oracle(const BoostedEnsemble& e, const Dataset& d) {
    Matrix f = Matrix::Zero(d.rows(), d.num_classes());
    for (const RoundRecord& r : e.rounds)
        for (int i = 0; i < d.rows(); ++i) f(i, r.tree.predict(d.features.row(i))) += r.alpha;
    Scalar loss = 0;
    for (int i = 0; i < d.rows(); ++i) {
        const int y = d.labels[i];
        for (int l = 0; l < d.num_classes(); ++l) {
            if (l == y) continue;
            const Scalar w = e.scheme.kind == WeightScheme::Kind::Uniform
                                 ? 1.0
                                 : 1.0 / static_cast<Scalar>(d.class_counts[y]);
            loss += w * std::exp(f(i, l) - f(i, y));
        }
    }
    return loss;
}

} // namespace

TEST_CASE("initial cost matrix per scheme") {
    Matrix x(15, 1);
    std::vector<int> labels(15);
    for (int i = 0; i < 15; ++i) {
        x(i, 0) = i;
        labels[static_cast<std::size_t>(i)] = i / 5; // three classes of five
    }
    const Dataset d = toy_dataset(x, labels, 3);

    SUBCASE("inverse class frequency rows") {
        const RowMatrix cost = init_cost_matrix(d, WeightScheme::inverse_class_frequency());
        CHECK(cost(0, 1) == doctest::Approx(0.2).epsilon(1e-15));
        CHECK(cost(0, 2) == doctest::Approx(0.2).epsilon(1e-15));
        CHECK(cost(0, 0) == doctest::Approx(-0.4).epsilon(1e-15));
        CHECK(cost(7, 1) == doctest::Approx(-0.4).epsilon(1e-15)); // diagonal follows the label
    }
    SUBCASE("uniform rows") {
        const RowMatrix cost = init_cost_matrix(d, WeightScheme::uniform());
        CHECK(cost(0, 1) == 1.0);
        CHECK(cost(0, 2) == 1.0);
        CHECK(cost(0, 0) == -2.0);
    }
    SUBCASE("initial loss is K(K-1) under inverse class frequency, m(K-1) under uniform") {
        const TrainState combo_state = init_train_state(d, WeightScheme::inverse_class_frequency());
        CHECK(combo_state.loss == doctest::Approx(6.0).epsilon(1e-12));
        const TrainState adamm_state = init_train_state(d, WeightScheme::uniform());
        CHECK(adamm_state.loss == doctest::Approx(30.0).epsilon(1e-12));
    }
    SUBCASE("pairwise scheme plugs the prior costs in") {
        Matrix c(3, 3);
        c << 0, 2, 1, 1, 0, 3, 1.5, 1, 0;
        const RowMatrix cost = init_cost_matrix(d, WeightScheme::pairwise_costs(c));
        CHECK(cost(0, 1) == 2.0);
        CHECK(cost(0, 2) == 1.0);
        CHECK(cost(0, 0) == -3.0);
        CHECK(cost(5, 0) == 1.0); // row of class 1
        CHECK(cost(5, 2) == 3.0);
        CHECK(cost(5, 1) == -4.0);
    }
    SUBCASE("pairwise validation rejects sub-indicator costs") {
        Matrix c = Matrix::Ones(3, 3);
        c.diagonal().setZero();
        c(0, 1) = 0.5;
        CHECK_THROWS_AS(init_cost_matrix(d, WeightScheme::pairwise_costs(c)), ConfigError);
    }
}

TEST_CASE("cost matrix update") {
    const Dataset d = separable_toy();
    const WeightScheme scheme = WeightScheme::inverse_class_frequency();

    SUBCASE("zero scores reproduce the initial matrix") {
        const RowMatrix f = RowMatrix::Zero(6, 2);
        CHECK(update_cost_matrix(f, d, scheme) == init_cost_matrix(d, scheme));
    }
    SUBCASE("a unit score on the true label scales costs by e^-1") {
        RowMatrix f = RowMatrix::Zero(6, 2);
        for (int i = 0; i < 6; ++i) f(i, d.labels[i]) = 1.0;
        const RowMatrix cost = update_cost_matrix(f, d, scheme);
        CHECK(cost(0, 1) == doctest::Approx((1.0 / 3.0) * std::exp(-1.0)).epsilon(1e-14));
    }
    SUBCASE("random score tables keep rows at zero and the true label cheapest") {
        SplitMix64 rng(3);
        for (int trial = 0; trial < 1000; ++trial) {
            RowMatrix f(6, 2);
            for (int i = 0; i < 6; ++i)
                for (int l = 0; l < 2; ++l)
                    f(i, l) = static_cast<Scalar>(rng.next() >> 11) * 0x1.0p-53 * 5.0;
            const RowMatrix cost = update_cost_matrix(f, d, scheme);
            for (int i = 0; i < 6; ++i) {
                const Scalar mass = cost.row(i).cwiseAbs().sum();
                CHECK(std::abs(cost.row(i).sum()) <= 1e-9 * std::max(mass, 1e-300));
                CHECK(cost(i, d.labels[i]) == cost.row(i).minCoeff());
            }
        }
    }
    SUBCASE("overflow guard rescales and reports the shift") {
        RowMatrix f = RowMatrix::Zero(6, 2);
        f(0, 1 - d.labels[0]) = 800.0; // raw exponent would overflow
        Scalar shift = 0;
        const RowMatrix cost = update_cost_matrix(f, d, scheme, &shift);
        CHECK(shift == doctest::Approx(100.0));
        CHECK(cost.allFinite());
        CHECK(cost(0, 1 - d.labels[0]) == doctest::Approx((1.0 / 3.0) * std::exp(700.0)));
    }
}

TEST_CASE("round weight follows the closed form") {
    CHECK(alpha_from_edge(0.6) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    // monotone increasing, vanishing at zero edge
    Scalar prev = alpha_from_edge(1e-9);
    CHECK(prev > 0);
    for (Scalar delta = 0.1; delta < 1.0; delta += 0.1) {
        const Scalar a = alpha_from_edge(delta);
        CHECK(a > prev);
        prev = a;
    }
    // perfect edge is clamped, not infinite
    CHECK(std::isfinite(alpha_from_edge(1.0)));
    CHECK(alpha_from_edge(1.0) == doctest::Approx(0.5 * std::log((2.0 - 1e-12) / 1e-12)));
}

TEST_CASE("the drop factor at the chosen weight collapses to sqrt(1-delta^2)") {
    // ((1-d)/2) e^a + ((1+d)/2) e^-a evaluated at a = alpha_from_edge(d)
    SplitMix64 rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const Scalar d = 1e-6 + 0.999 * static_cast<Scalar>(rng.next() >> 11) * 0x1.0p-53;
        const Scalar a = alpha_from_edge(d);
        const Scalar factor = 0.5 * (1.0 - d) * std::exp(a) + 0.5 * (1.0 + d) * std::exp(-a);
        CHECK(factor == doctest::Approx(std::sqrt(1.0 - d * d)).epsilon(1e-12));
    }
}

TEST_CASE("three boosting rounds match the from-scratch loss oracle") {
    const Dataset d = noisy_toy(60, 3, 21);
    TrainOptions opts;
    opts.rounds = 3;
    const BoostedEnsemble e = train(d, opts);
    REQUIRE(e.rounds.size() == 3);

    // replay the prefix ensembles independently
    for (std::size_t t = 1; t <= 3; ++t) {
        BoostedEnsemble prefix = e;
        prefix.rounds.assign(e.rounds.begin(), e.rounds.begin() + static_cast<long>(t));
        CHECK(e.rounds[t - 1].loss ==
              doctest::Approx(loss_oracle(prefix, d)).epsilon(1e-12));
    }
}

TEST_CASE("per-round telemetry obeys the loss drop factor") {
    const Dataset d = noisy_toy(80, 3, 4);
    TrainOptions opts;
    opts.rounds = 25;
    const BoostedEnsemble e = train(d, opts);
    Scalar prev = 6.0; // K(K-1)
    for (const RoundRecord& r : e.rounds) {
        CHECK(r.alpha > 0);
        CHECK(r.delta > 0);
        CHECK(r.loss <= (std::sqrt(1.0 - r.delta * r.delta) + 1e-9) * prev);
        prev = r.loss;
    }
}

TEST_CASE("separable data drives the training error to zero and halts on vanishing loss") {
    const Dataset d = separable_toy();
    TrainOptions opts;
    opts.rounds = 5000;
    const BoostedEnsemble e = train(d, opts);
    CHECK(e.halt == HaltReason::LossVanished);
    CHECK(!e.rounds.empty());
    for (int i = 0; i < d.rows(); ++i) CHECK(e.predict(d.features.row(i)) == d.labels[i]);
    // the first perfect tree got the clamped edge
    CHECK(e.rounds.front().delta == doctest::Approx(1.0 - 1e-12));
}

TEST_CASE("edge bounded away from gamma gives the exponential loss bound") {
    const Dataset d = noisy_toy(100, 3, 9);
    TrainOptions opts;
    opts.rounds = 40;
    const BoostedEnsemble e = train(d, opts);
    REQUIRE(!e.rounds.empty());
    Scalar gamma = 1.0;
    for (const RoundRecord& r : e.rounds) gamma = std::min(gamma, r.delta);
    CHECK(gamma > 0);
    const Scalar bound = 6.0 * std::exp(-0.5 * static_cast<Scalar>(e.rounds.size()) * gamma * gamma);
    CHECK(e.rounds.back().loss <= bound * (1 + 1e-9));
}

TEST_CASE("boosting halts when no tree beats random guessing") {
    // constant features with balanced labels: every tree is a constant
    // prediction with zero edge
    Matrix x(4, 1);
    x << 7, 7, 7, 7;
    const Dataset d = toy_dataset(x, {0, 0, 1, 1}, 2);
    TrainOptions opts;
    opts.rounds = 10;
    const BoostedEnsemble e = train(d, opts);
    CHECK(e.halt == HaltReason::NonPositiveEdge);
    CHECK(e.halted_at == 0);
    CHECK(e.rounds.empty());
}

TEST_CASE("prediction surface") {
    const Dataset d = separable_toy();

    SUBCASE("single round one-hot scores") {
        TrainOptions opts;
        opts.rounds = 1;
        BoostedEnsemble e = train(d, opts);
        REQUIRE(e.rounds.size() == 1);
        e.rounds[0].alpha = 0.7; // fix the weight to probe the accumulation
        RowVector row(1);
        row << 3.0;
        const Vector scores = e.predict_scores(row);
        const int predicted = e.rounds[0].tree.predict(row);
        CHECK(scores[predicted] == doctest::Approx(0.7));
        CHECK(scores.sum() == doctest::Approx(0.7));
    }
    SUBCASE("empty ensemble scores zero and predicts the first class") {
        BoostedEnsemble e;
        e.num_features = 1;
        e.num_classes = 3;
        RowVector row(1);
        row << 0.0;
        CHECK(e.predict_scores(row).isZero());
        CHECK(e.predict(row) == 0);
    }
    SUBCASE("scores are the sum of per-tree one-hot contributions") {
        TrainOptions opts;
        opts.rounds = 4;
        const Dataset noisy = noisy_toy(50, 3, 31);
        const BoostedEnsemble e = train(noisy, opts);
        SplitMix64 rng(8);
        for (int trial = 0; trial < 50; ++trial) {
            RowVector row(2);
            row << static_cast<Scalar>(rng.uniform_below(40)) / 10.0 - 1.0,
                static_cast<Scalar>(rng.uniform_below(4));
            Vector expected = Vector::Zero(3);
            for (const RoundRecord& r : e.rounds) expected[r.tree.predict(row)] += r.alpha;
            CHECK(e.predict_scores(row) == expected);
        }
    }
    SUBCASE("argmax ties break to the lowest class") {
        BoostedEnsemble e;
        e.num_features = 1;
        e.num_classes = 3;
        WeakTree to2;
        to2.num_features = 1;
        to2.num_classes = 3;
        to2.nodes.push_back({-1, false, 0, -1, -1, -1, 2});
        WeakTree to1 = to2;
        to1.nodes[0].label = 1;
        e.rounds.push_back({to1, 0.5, 0.1, 1.0});
        e.rounds.push_back({to2, 0.5, 0.1, 1.0});
        RowVector row(1);
        row << 0.0;
        CHECK(e.predict(row) == 1); // classes 1 and 2 tie at 0.5
    }
}

TEST_CASE("balanced training error is bounded by the final loss") {
    const Dataset d = noisy_toy(120, 3, 55);
    TrainOptions opts;
    opts.rounds = 15;
    const BoostedEnsemble e = train(d, opts);
    REQUIRE(!e.rounds.empty());
    Scalar balanced_error = 0;
    for (int i = 0; i < d.rows(); ++i)
        if (e.predict(d.features.row(i)) != d.labels[i])
            balanced_error += 1.0 / static_cast<Scalar>(d.class_counts[d.labels[i]]);
    CHECK(balanced_error <= e.rounds.back().loss * (1 + 1e-9));
}

TEST_CASE("on balanced data the uniform and inverse-frequency schemes pick the same trees") {
    // equal class sizes make the two cost matrices proportional, so tree
    // selection and edges coincide
    SplitMix64 rng(13);
    Matrix x(60, 2);
    std::vector<int> labels(60);
    for (int i = 0; i < 60; ++i) {
        labels[static_cast<std::size_t>(i)] = i % 3;
        x(i, 0) = (i % 3) + 3.0 * (static_cast<Scalar>(rng.next() >> 11) * 0x1.0p-53 - 0.5);
        x(i, 1) = static_cast<Scalar>(rng.uniform_below(5));
    }
    const Dataset d = toy_dataset(x, labels, 3);

    const RowMatrix combo_init = init_cost_matrix(d, WeightScheme::inverse_class_frequency());
    const RowMatrix uniform_init = init_cost_matrix(d, WeightScheme::uniform());
    CHECK((combo_init * 20.0).isApprox(uniform_init, 1e-12));

    TrainOptions a, b;
    a.rounds = b.rounds = 10;
    a.scheme = WeightScheme::inverse_class_frequency();
    b.scheme = WeightScheme::uniform();
    const BoostedEnsemble ea = train(d, a);
    const BoostedEnsemble eb = train(d, b);
    REQUIRE(ea.rounds.size() == eb.rounds.size());
    for (std::size_t t = 0; t < ea.rounds.size(); ++t) {
        CHECK(ea.rounds[t].delta == doctest::Approx(eb.rounds[t].delta).epsilon(1e-9));
        CHECK(predict_all(ea.rounds[t].tree, d.features) ==
              predict_all(eb.rounds[t].tree, d.features));
    }
}

TEST_CASE("pairwise scheme trains with the same guarantees") {
    const Dataset d = noisy_toy(60, 3, 77);
    Matrix c(3, 3);
    c << 0, 2, 1, 1, 0, 3, 1.5, 1, 0;
    TrainOptions opts;
    opts.rounds = 10;
    opts.scheme = WeightScheme::pairwise_costs(c);
    const BoostedEnsemble e = train(d, opts);
    CHECK(!e.rounds.empty());
    Scalar prev = exponential_loss(RowMatrix::Zero(d.rows(), 3), d, opts.scheme);
    for (const RoundRecord& r : e.rounds) {
        CHECK(r.loss <= (std::sqrt(1.0 - r.delta * r.delta) + 1e-9) * prev);
        prev = r.loss;
    }
}
