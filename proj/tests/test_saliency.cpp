#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "esprit/saliency.hpp"

using namespace esprit;

namespace {

FeatureVector13 random_vec(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1, 1);
    FeatureVector13 f;
    for (auto& x : f) x = d(rng);
    return f;
}

// separable on feature 0 with a wide margin
void separable_set(int n, uint64_t seed, std::vector<FeatureVector13>& x,
                   std::vector<int>& y) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int i = 0; i < n; ++i) {
        FeatureVector13 f = random_vec(rng);
        const bool pos = i % 2 == 0;
        f[0] = pos ? 0.5 + 0.4 * d(rng) : -0.5 + 0.4 * d(rng);
        x.push_back(f);
        y.push_back(pos);
    }
}

}  // namespace

TEST_CASE("evaluate_prf: exact cases") {
    PRF all = evaluate_prf({1, 0, 1}, {1, 0, 1});
    CHECK(all.precision == 1.0);
    CHECK(all.recall == 1.0);
    CHECK(all.f1 == 1.0);

    // all-positive baseline on 893 positives out of 6893
    std::vector<int> labels(6893, 0), preds(6893, 1);
    for (int i = 0; i < 893; ++i) labels[i] = 1;
    PRF base = evaluate_prf(preds, labels);
    CHECK(base.recall == 1.0);
    CHECK(base.precision == doctest::Approx(893.0 / 6893.0).epsilon(1e-12));
    CHECK(base.precision == doctest::Approx(0.1296).epsilon(1e-3));

    PRF none = evaluate_prf({0, 0, 0}, {1, 0, 1});
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
}

TEST_CASE("tree: separable single feature gives a perfect stump") {
    std::vector<FeatureVector13> x;
    std::vector<int> y;
    separable_set(100, 1, x, y);
    DecisionTree t = train_tree(x, y);
    REQUIRE(t.nodes.size() == 3);  // root + two leaves
    CHECK(t.nodes[0].feature == 0);
    std::vector<int> preds;
    for (const auto& f : x) preds.push_back(t.predict(f) ? 1 : 0);
    CHECK(evaluate_prf(preds, y).f1 == 1.0);

    auto imp = feature_importance(t);
    CHECK(imp[0] == doctest::Approx(1.0));
    double sum = 0;
    for (double v : imp) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tree: identical labels raise DegenerateData") {
    std::vector<FeatureVector13> x(10);
    CHECK_THROWS_AS(train_tree(x, std::vector<int>(10, 1)), DegenerateData);
    CHECK_THROWS_AS(train_tree(x, std::vector<int>(10, 0)), DegenerateData);
}

TEST_CASE("tree importances sum to 1 on noisy data") {
    std::mt19937_64 rng(7);
    std::vector<FeatureVector13> x;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
        auto f = random_vec(rng);
        x.push_back(f);
        // noisy rule over two features
        y.push_back((f[1] + 0.5 * f[4] + 0.1 * random_vec(rng)[0]) > 0);
    }
    DecisionTree t = train_tree(x, y);
    double sum = 0;
    for (double v : feature_importance(t)) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tree prediction equals brute-force path evaluation") {
    std::mt19937_64 rng(17);
    std::vector<FeatureVector13> x;
    std::vector<int> y;
    for (int i = 0; i < 500; ++i) {
        auto f = random_vec(rng);
        x.push_back(f);
        y.push_back(f[2] * f[5] > 0);
    }
    DecisionTree t = train_tree(x, y);
    for (int i = 0; i < 1000; ++i) {
        auto f = random_vec(rng);
        // independent walk over the node array
        int node = 0;
        while (t.nodes[node].feature >= 0) {
            const auto& n = t.nodes[node];
            node = f[n.feature] <= n.threshold ? n.left : n.right;
        }
        CHECK(t.predict_proba(f) == t.nodes[node].prob);
    }
}

TEST_CASE("tree json round-trip preserves predictions") {
    std::vector<FeatureVector13> x;
    std::vector<int> y;
    separable_set(60, 5, x, y);
    DecisionTree t = train_tree(x, y);
    DecisionTree u = tree_from_json(to_json(t));
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        auto f = random_vec(rng);
        CHECK(t.predict_proba(f) == u.predict_proba(f));
    }
}

TEST_CASE("mlp: fits a separable toy set to F1 = 1.0") {
    std::vector<FeatureVector13> x;
    std::vector<int> y;
    separable_set(200, 3, x, y);
    MlpConfig cfg;  // default 128/128/32 architecture
    cfg.max_epochs = 200;
    cfg.seed = 1;
    Mlp m = Mlp::train(x, y, {}, {}, cfg);
    std::vector<int> preds;
    for (const auto& f : x) preds.push_back(m.predict(f) ? 1 : 0);
    CHECK(evaluate_prf(preds, y).f1 == 1.0);

    // probabilities strictly inside (0,1) and deterministic
    for (int i = 0; i < 10; ++i) {
        const double p = m.predict_proba(x[i]);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        CHECK(m.predict_proba(x[i]) == p);
    }
}

TEST_CASE("mlp gradient check: inference-mode loss vs finite differences") {
    std::vector<FeatureVector13> x;
    std::vector<int> y;
    separable_set(5, 11, x, y);
    MlpConfig cfg;
    cfg.widths = {6, 4};
    cfg.max_epochs = 2;
    cfg.seed = 2;
    Mlp m = Mlp::train(x, y, {}, {}, cfg);
    const double err = ag::gradient_check(
        m.parameters(), [&] { return m.inference_loss(x, y); });
    CHECK(err < 1e-4);
}

TEST_CASE("mlp json round-trip preserves probabilities") {
    std::vector<FeatureVector13> x;
    std::vector<int> y;
    separable_set(60, 21, x, y);
    MlpConfig cfg;
    cfg.widths = {8, 4};
    cfg.max_epochs = 30;
    cfg.seed = 4;
    Mlp m = Mlp::train(x, y, {}, {}, cfg);
    Mlp u = Mlp::from_json(m.to_json());
    for (int i = 0; i < 20; ++i)
        CHECK(m.predict_proba(x[i]) == doctest::Approx(u.predict_proba(x[i]))
                                           .epsilon(1e-12));
}

TEST_CASE("mlp early stopping returns the best validation checkpoint") {
    std::vector<FeatureVector13> x, vx;
    std::vector<int> y, vy;
    separable_set(160, 31, x, y);
    separable_set(40, 32, vx, vy);
    MlpConfig cfg;
    cfg.max_epochs = 60;
    cfg.patience = 10;
    cfg.seed = 6;
    Mlp m = Mlp::train(x, y, vx, vy, cfg);
    std::vector<int> preds;
    for (const auto& f : vx) preds.push_back(m.predict(f) ? 1 : 0);
    CHECK(evaluate_prf(preds, vy).f1 >= 0.95);
}
