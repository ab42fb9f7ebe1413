#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "taxograph/losses.hpp"
#include "test_util.hpp"

using namespace taxograph;

TEST_CASE("cluster_loss closed forms") {
    SUBCASE("p = 0.5 everywhere gives ln 2 per level") {
        std::vector<std::vector<SupervisedPair>> pairs(1);
        std::vector<PairProbTable> probs(1);
        pairs[0] = {{0, 1, 1.0}, {1, 2, 0.0}, {0, 2, 1.0}};
        for (const auto& sp : pairs[0]) probs[0].set(sp.u, sp.v, 0.5);
        CHECK(cluster_loss(pairs, probs) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("single edge, q = 1, p = 0.9") {
        std::vector<std::vector<SupervisedPair>> pairs(1);
        std::vector<PairProbTable> probs(1);
        pairs[0] = {{0, 1, 1.0}};
        probs[0].set(0, 1, 0.9);
        CHECK(cluster_loss(pairs, probs) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
    }
    SUBCASE("perfect predictions stay below the clamping floor") {
        std::vector<std::vector<SupervisedPair>> pairs(1);
        std::vector<PairProbTable> probs(1);
        pairs[0] = {{0, 1, 1.0}, {1, 2, 0.0}};
        probs[0].set(0, 1, 1.0);
        probs[0].set(1, 2, 0.0);
        CHECK(cluster_loss(pairs, probs) <= -std::log(1.0 - 1e-12) + 1e-15);
        CHECK(cluster_loss(pairs, probs) >= 0.0);
    }
    SUBCASE("missing pair raises") {
        std::vector<std::vector<SupervisedPair>> pairs(1);
        std::vector<PairProbTable> probs(1);
        pairs[0] = {{0, 1, 1.0}};
        CHECK_THROWS_AS(cluster_loss(pairs, probs), std::runtime_error);
    }
    SUBCASE("two levels at p = 0.5 give 2 ln 2 regardless of labels") {
        std::vector<std::vector<SupervisedPair>> pairs(2);
        std::vector<PairProbTable> probs(2);
        pairs[0] = {{0, 1, 1.0}, {0, 2, 0.0}};
        pairs[1] = {{0, 1, 0.0}};
        probs[0].set(0, 1, 0.5);
        probs[0].set(0, 2, 0.5);
        probs[1].set(0, 1, 0.5);
        CHECK(cluster_loss(pairs, probs) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    }
}

namespace {

GoldHierarchyLabels two_level_labels(const std::vector<std::vector<int>>& l1, const std::vector<int>& l2) {
    GoldHierarchyLabels g;
    g.assign.resize(2);
    for (const auto& ids : l1) g.assign[0].push_back(ids);
    for (int id : l2) g.assign[1].push_back({id});
    return g;
}

}  // namespace

TEST_CASE("multilevel_contrastive_loss closed forms") {
    TrainConfig cfg;
    cfg.tau = 1.0;

    SUBCASE("uniform similarities give log(N-1) per labeled node, N = 3") {
        Matrix h(3, 2, 1.0);  // identical rows: all cosines equal
        GoldHierarchyLabels labels;
        labels.assign = {{{0}, {0}, {1}}};  // nodes 0, 1 have one positive; node 2 contributes 0
        CHECK(multilevel_contrastive_loss(h, positives_from_labels(labels), cfg) ==
              doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-10));

        labels.assign = {{{0}, {0}, {0}}};  // every node labeled: total 3 ln 2
        CHECK(multilevel_contrastive_loss(h, positives_from_labels(labels), cfg) ==
              doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-10));
    }
    SUBCASE("N = 2 with a single positive collapses to zero") {
        Matrix h(2, 3);
        h(0, 0) = 1.0;
        h(1, 1) = 1.0;
        GoldHierarchyLabels labels;
        labels.assign = {{{0}, {0}}};
        CHECK(multilevel_contrastive_loss(h, positives_from_labels(labels), cfg) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("fewer than two nodes is an error") {
        Matrix h(1, 3, 1.0);
        CHECK_THROWS_AS(multilevel_contrastive_loss(h, {{{}}}, cfg), std::invalid_argument);
    }
}

TEST_CASE("multilevel_contrastive_loss matches the scalar oracle on random instances") {
    RngStream rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 4;
        Matrix h = random_matrix(n, 5, 1.0, rng);
        auto labels = two_level_labels({{0}, {0}, {1}, {1}}, {0, 0, 0, 1});
        auto pos = positives_from_labels(labels);
        TrainConfig cfg;
        cfg.tau = 1.0;
        cfg.delta = {1.0, 0.7};
        const double expected = oracles::contrastive_oracle(h, pos, cfg.delta, cfg.tau);
        CHECK(multilevel_contrastive_loss(h, pos, cfg) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("multilevel_contrastive_loss is invariant under positive rescaling") {
    RngStream rng(99);
    Matrix h = random_matrix(5, 4, 1.0, rng);
    auto labels = two_level_labels({{0}, {0}, {1}, {1}, {2}}, {0, 0, 1, 1, 1});
    auto pos = positives_from_labels(labels);
    TrainConfig cfg;
    const double base = multilevel_contrastive_loss(h, pos, cfg);
    for (double scale : {0.01, 3.0, 250.0}) {
        Matrix hs = h;
        for (auto& v : hs.data()) v *= scale;
        CHECK(multilevel_contrastive_loss(hs, pos, cfg) == doctest::Approx(base).epsilon(1e-10));
    }
}

TEST_CASE("multilevel_contrastive_loss closed form with empty positive sets") {
    // all similarities equal; nodes with positives contribute log(N-1), others 0
    const int n = 5;
    Matrix h(n, 2, 2.0);
    GoldHierarchyLabels labels;
    labels.assign = {{{0}, {0}, {1}, {2}, {3}}};  // only nodes 0, 1 have positives
    auto pos = positives_from_labels(labels);
    TrainConfig cfg;
    cfg.delta = {0.8};
    const double expected = 0.8 * 2.0 * std::log(static_cast<double>(n - 1));
    CHECK(multilevel_contrastive_loss(h, pos, cfg) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("combined_clustering_loss is affine in alpha") {
    RngStream rng(123);
    Matrix h = random_matrix(4, 4, 1.0, rng);
    auto labels = two_level_labels({{0}, {0}, {1}, {1}}, {0, 0, 0, 0});
    auto pos = positives_from_labels(labels);
    std::vector<std::vector<SupervisedPair>> pairs(1);
    std::vector<PairProbTable> probs(1);
    pairs[0] = {{0, 1, 1.0}, {2, 3, 1.0}, {1, 2, 0.0}};
    for (const auto& sp : pairs[0]) probs[0].set(sp.u, sp.v, 0.3 + 0.1 * sp.u);

    TrainConfig cfg;
    cfg.alpha = 0.0;
    const double at0 = combined_clustering_loss(pairs, probs, h, pos, cfg);
    CHECK(at0 == doctest::Approx(cluster_loss(pairs, probs)).epsilon(1e-12));

    cfg.alpha = 1.0;
    const double at1 = combined_clustering_loss(pairs, probs, h, pos, cfg);
    const double him = multilevel_contrastive_loss(h, pos, cfg);
    CHECK(at1 == doctest::Approx(at0 + him).epsilon(1e-12));

    cfg.alpha = 2.0;
    CHECK(combined_clustering_loss(pairs, probs, h, pos, cfg) - at1 == doctest::Approx(him).epsilon(1e-10));
}

TEST_CASE("generation_loss sums token log-probabilities") {
    SUBCASE("probability-one tokens give zero") {
        std::vector<std::optional<std::vector<double>>> lp = {std::vector<double>{0.0, 0.0}};
        CHECK(generation_loss(lp) == 0.0);
    }
    SUBCASE("two tokens -1 and -2 give -3") {
        std::vector<std::optional<std::vector<double>>> lp = {std::vector<double>{-1.0, -2.0}};
        CHECK(generation_loss(lp) == doctest::Approx(-3.0).epsilon(1e-15));
    }
    SUBCASE("a cluster without scores makes the whole value unavailable") {
        std::vector<std::optional<std::vector<double>>> lp = {std::vector<double>{-1.0}, std::nullopt};
        CHECK_FALSE(generation_loss(lp).has_value());
    }
}

TEST_CASE("joint_objective combines or passes through unavailability") {
    CHECK(joint_objective(-3.0, 2.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(joint_objective(-3.0, 2.0, 0.0) == doctest::Approx(-3.0).epsilon(1e-15));
    CHECK_FALSE(joint_objective(std::nullopt, 2.0, 1.0).has_value());
}

TEST_CASE("TrainConfig rejects out-of-range weights") {
    TrainConfig cfg;
    cfg.alpha = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.delta = {1.0, -2.0};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("labels io round-trips and validates") {
    testutil::TempDir dir;
    CitationGraph g;
    for (int i = 0; i < 4; ++i) g.nodes.push_back({"p" + std::to_string(i), "t", "a"});
    g.rebuild_index();

    auto labels = two_level_labels({{0, 1}, {0}, {2}, {2}}, {0, 0, 1, 1});
    save_labels(labels, g, dir.file("labels.tsv"));
    auto loaded = load_labels(dir.file("labels.tsv"), g);
    CHECK(loaded.assign == labels.assign);

    SUBCASE("missing level is rejected") {
        testutil::write_file(dir.file("bad.tsv"), "2\tp0\t0\n");
        CHECK_THROWS_AS(load_labels(dir.file("bad.tsv"), g), std::runtime_error);
    }
    SUBCASE("multi-cluster assignment above level 1 is rejected") {
        testutil::write_file(dir.file("bad2.tsv"),
                             "1\tp0\t0\n1\tp1\t0\n1\tp2\t1\n1\tp3\t1\n"
                             "2\tp0\t0,1\n2\tp1\t0\n2\tp2\t1\n2\tp3\t1\n");
        CHECK_THROWS_AS(load_labels(dir.file("bad2.tsv"), g), std::runtime_error);
    }
    SUBCASE("unlabeled node is rejected") {
        testutil::write_file(dir.file("bad3.tsv"), "1\tp0\t0\n");
        CHECK_THROWS_AS(load_labels(dir.file("bad3.tsv"), g), std::runtime_error);
    }
}
