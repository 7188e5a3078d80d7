#include <doctest.h>

#include <cmath>

#include "csforest/error.hpp"
#include "csforest/tree.hpp"

using namespace csforest;

TEST_SUITE("tree") {

TEST_CASE("bootstrap of one") {
    Rng rng(1);
    auto b = bootstrap_indices(1, rng);
    CHECK(b.draws == std::vector<std::size_t>{0});
    CHECK(b.out_of_bag.empty());
    CHECK(b.in_bag.count() == 1);
}

TEST_CASE("bootstrap out-of-bag fraction") {
    Rng rng(2);
    double oob = 0.0;
    const int reps = 4000;
    for (int r = 0; r < reps; ++r) oob += static_cast<double>(bootstrap_indices(100, rng).out_of_bag.size());
    CHECK(oob / (100.0 * reps) == doctest::Approx(std::pow(0.99, 100)).epsilon(0.01));
}

TEST_CASE("bootstrap determinism and consistency") {
    Rng a(5), b(5);
    auto x = bootstrap_indices(50, a);
    auto y = bootstrap_indices(50, b);
    CHECK(x.draws == y.draws);
    for (std::size_t i = 0; i < 50; ++i) {
        const bool drawn = std::find(x.draws.begin(), x.draws.end(), i) != x.draws.end();
        CHECK(x.in_bag.test(i) == drawn);
        CHECK((std::find(x.out_of_bag.begin(), x.out_of_bag.end(), i) != x.out_of_bag.end()) == !drawn);
    }
}

struct Toy {
    Matrix x;
    std::vector<std::size_t> rows;
    std::vector<int> labels;
};

Toy separable(std::size_t n) {
    Toy t;
    Rng rng(3);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        double v[3] = {rng.normal(), y == 0 ? rng.uniform() : 2.0 + rng.uniform(), rng.normal()};
        t.x.append_row(v);
        t.rows.push_back(i);
        t.labels.push_back(y);
    }
    return t;
}

TEST_CASE("fit_tree separates separable data") {
    auto t = separable(60);
    TreeParams p;
    p.features_per_split = 3;
    Rng rng(4);
    auto tree = fit_tree(t.x, t.rows, t.labels, 2, p, rng);
    for (std::size_t i = 0; i < 60; ++i) CHECK(tree.predict_fraction(t.x.row(i), t.labels[i]) == 1.0);
    CHECK(tree.depth() == 1);
}

TEST_CASE("leaf fractions sum to one") {
    auto t = separable(40);
    // Shuffle labels so that leaves are mixed under a depth limit.
    for (std::size_t i = 0; i < t.labels.size(); i += 3) t.labels[i] = 2;
    TreeParams p;
    p.max_depth = 2;
    Rng rng(9);
    auto tree = fit_tree(t.x, t.rows, t.labels, 3, p, rng);
    CHECK(tree.depth() <= 2);
    for (std::size_t i = 0; i < 40; ++i) {
        auto f = tree.leaf_fractions(t.x.row(i));
        double s = 0.0;
        for (double v : f) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("min_leaf bounds leaf sizes") {
    auto t = separable(40);
    TreeParams p;
    p.min_leaf = 25;
    Rng rng(1);
    auto tree = fit_tree(t.x, t.rows, t.labels, 2, p, rng);
    CHECK(tree.node_count() == 1);  // no split can leave 25 rows on both sides
}

TEST_CASE("fit_tree is deterministic under a fixed stream") {
    auto t = separable(50);
    for (std::size_t i = 0; i < 50; i += 4) t.labels[i] ^= 1;
    TreeParams p;
    Rng a(8), b(8);
    CHECK(fit_tree(t.x, t.rows, t.labels, 2, p, a) == fit_tree(t.x, t.rows, t.labels, 2, p, b));
}

TEST_CASE("tree parameter validation") {
    TreeParams p;
    CHECK(p.resolved_features(50) == 8);
    CHECK(p.resolved_features(1) == 1);
    p.features_per_split = 0;
    CHECK_THROWS_AS(p.validate(4), ConfigError);
    p.features_per_split = 5;
    CHECK_THROWS_AS(p.validate(4), ConfigError);
    TreeParams q;
    q.min_leaf = 0;
    CHECK_THROWS_AS(q.validate(4), ConfigError);
}

TEST_CASE("prediction errors") {
    auto t = separable(20);
    Rng rng(1);
    auto tree = fit_tree(t.x, t.rows, t.labels, 2, TreeParams{}, rng);
    const double short_row[2] = {0.0, 0.0};
    CHECK_THROWS_AS(tree.predict_fraction(short_row, 0), DataError);
    CHECK_THROWS_AS(tree.predict_fraction(t.x.row(0), 2), DataError);
}

TEST_CASE("json round trip") {
    auto t = separable(30);
    for (std::size_t i = 0; i < 30; i += 5) t.labels[i] ^= 1;
    Rng rng(6);
    auto tree = fit_tree(t.x, t.rows, t.labels, 2, TreeParams{}, rng);
    auto back = TreeModel::from_json(tree.to_json());
    CHECK(back == tree);
    CHECK_THROWS(TreeModel::from_json("{\"format\":\"other\"}"));
}

TEST_CASE("forest is thread-count independent") {
    auto t = separable(40);
    for (std::size_t i = 0; i < 40; i += 3) t.labels[i] ^= 1;
    auto a = fit_forest(t.x, t.rows, t.labels, 2, 30, TreeParams{}, 17, 1);
    auto b = fit_forest(t.x, t.rows, t.labels, 2, 30, TreeParams{}, 17, 4);
    CHECK(a.trees() == b.trees());
    auto p = a.predict_proba(t.x.row(0));
    CHECK(p[0] + p[1] == doctest::Approx(1.0));
}

}
