#include <doctest.h>

#include <cmath>
#include <set>

#include "taxograph/cli.hpp"
#include "taxograph/eval.hpp"
#include "taxograph/synth.hpp"
#include "test_util.hpp"

using namespace taxograph;

namespace {

ClusterSet clusters(std::vector<std::vector<int>> cs, bool overlap = false) {
    ClusterSet out;
    out.clusters = std::move(cs);
    out.overlap_allowed = overlap;
    detail::canonicalize(out);
    return out;
}

std::vector<std::vector<int>> gold_of(const std::vector<int>& ids) {
    std::vector<std::vector<int>> out;
    for (int id : ids) out.push_back({id});
    return out;
}

}  // namespace

TEST_CASE("pairwise_accuracy closed forms") {
    SUBCASE("prediction equal to gold scores 1") {
        auto pred = clusters({{0, 1}, {2, 3}});
        CHECK(pairwise_accuracy(pred, gold_of({7, 7, 9, 9})) == doctest::Approx(1.0));
    }
    SUBCASE("all singletons against one bonded pair scores 5/6") {
        auto pred = clusters({{0}, {1}, {2}, {3}});
        CHECK(pairwise_accuracy(pred, gold_of({0, 0, 1, 2})) == doctest::Approx(5.0 / 6.0));
    }
    SUBCASE("universe mismatch is rejected") {
        auto pred = clusters({{0, 1}});
        CHECK_THROWS_AS(pairwise_accuracy(pred, gold_of({0, 0, 1})), std::invalid_argument);
        auto oob = clusters({{0, 5}});
        CHECK_THROWS_AS(pairwise_accuracy(oob, gold_of({0, 0})), std::invalid_argument);
    }
    SUBCASE("overlap uses the any-shared rule on both sides") {
        auto pred = clusters({{0, 1}, {1, 2}}, true);
        std::vector<std::vector<int>> gold = {{0}, {0, 1}, {1}};
        CHECK(pairwise_accuracy(pred, gold) == doctest::Approx(1.0));
    }
}

TEST_CASE("pairwise_accuracy is symmetric and exact at 1 iff relations match") {
    RngStream rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 4 + rng.uniform_int(5);
        std::vector<int> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = rng.uniform_int(3);
            b[i] = rng.uniform_int(3);
        }
        ClusterSet ca, cb;
        ca.clusters.assign(3, {});
        cb.clusters.assign(3, {});
        for (int i = 0; i < n; ++i) {
            ca.clusters[a[i]].push_back(i);
            cb.clusters[b[i]].push_back(i);
        }
        ca.clusters.erase(std::remove_if(ca.clusters.begin(), ca.clusters.end(),
                                         [](const auto& c) { return c.empty(); }),
                          ca.clusters.end());
        cb.clusters.erase(std::remove_if(cb.clusters.begin(), cb.clusters.end(),
                                         [](const auto& c) { return c.empty(); }),
                          cb.clusters.end());
        const double ab = pairwise_accuracy(ca, gold_of(b));
        const double ba = pairwise_accuracy(cb, gold_of(a));
        CHECK(ab == doctest::Approx(ba));
        bool same_relation = true;
        for (int i = 0; i < n && same_relation; ++i)
            for (int j = i + 1; j < n; ++j)
                if ((a[i] == a[j]) != (b[i] == b[j])) {
                    same_relation = false;
                    break;
                }
        CHECK((ab == 1.0) == same_relation);
    }
}

TEST_CASE("kmeans_baseline degenerate ks") {
    RngStream rng(5);
    Matrix x = random_matrix(6, 3, 1.0, rng);
    SUBCASE("k = n puts every point alone") {
        auto cs = kmeans_baseline(x, 6, 1);
        CHECK(cs.size() == 6);
    }
    SUBCASE("k = 1 groups everything") {
        auto cs = kmeans_baseline(x, 1, 1);
        REQUIRE(cs.size() == 1);
        CHECK(cs.clusters[0].size() == 6);
    }
    SUBCASE("k out of range") {
        CHECK_THROWS_AS(kmeans_baseline(x, 0, 1), std::invalid_argument);
        CHECK_THROWS_AS(kmeans_baseline(x, 7, 1), std::invalid_argument);
    }
}

TEST_CASE("kmeans recovers well-separated blobs") {
    RngStream rng(9);
    Matrix x(40, 4);
    std::vector<int> gold(40);
    for (int i = 0; i < 40; ++i) {
        const int blob = i < 20 ? 0 : 1;
        gold[i] = blob;
        for (int j = 0; j < 4; ++j) x(i, j) = (blob ? 10.0 : -10.0) + 0.5 * rng.gaussian();
    }
    auto cs = kmeans_baseline(x, 2, 3);
    CHECK(pairwise_accuracy(cs, gold_of(gold)) == doctest::Approx(1.0));
}

TEST_CASE("kmeans is deterministic per seed") {
    RngStream rng(11);
    Matrix x = random_matrix(30, 4, 1.0, rng);
    auto a = kmeans_baseline(x, 4, 42);
    auto b = kmeans_baseline(x, 4, 42);
    CHECK(a.clusters == b.clusters);
}

TEST_CASE("synth_graph plants the advertised structure") {
    SUBCASE("zero noise copies block centroids") {
        SynthConfig cfg;
        cfg.blocks = 4;
        cfg.block_size = 5;
        cfg.intra_prob = 0.9;
        cfg.inter_prob = 0.05;
        cfg.noise_scale = 0.0;
        cfg.seed = 3;
        auto inst = synth_graph(cfg);
        CHECK(inst.graph.size() == 20);
        for (int b = 0; b < 4; ++b)
            for (int i = 1; i < 5; ++i)
                for (int j = 0; j < cfg.dim; ++j)
                    CHECK(inst.embeddings(b * 5 + i, j) == inst.embeddings(b * 5, j));
    }
    SUBCASE("same seed reproduces identical files") {
        testutil::TempDir dir;
        SynthConfig cfg;
        cfg.seed = 17;
        for (int run = 0; run < 2; ++run) {
            auto inst = synth_graph(cfg);
            const std::string tag = std::to_string(run);
            save_citation_graph(inst.graph, dir.file("n" + tag), dir.file("e" + tag));
            save_embeddings(inst.embeddings, inst.graph, dir.file("x" + tag));
            save_labels(inst.labels, inst.graph, dir.file("l" + tag));
        }
        CHECK(testutil::read_file(dir.file("n0")) == testutil::read_file(dir.file("n1")));
        CHECK(testutil::read_file(dir.file("e0")) == testutil::read_file(dir.file("e1")));
        CHECK(testutil::read_file(dir.file("x0")) == testutil::read_file(dir.file("x1")));
        CHECK(testutil::read_file(dir.file("l0")) == testutil::read_file(dir.file("l1")));
    }
    SUBCASE("intra-block edge count is binomial within 3 sigma over 50 seeds") {
        SynthConfig cfg;
        cfg.blocks = 4;
        cfg.block_size = 5;
        cfg.intra_prob = 0.9;
        cfg.inter_prob = 0.05;
        long long intra = 0;
        for (uint64_t seed = 1; seed <= 50; ++seed) {
            cfg.seed = seed;
            auto inst = synth_graph(cfg);
            for (const auto& [u, v] : inst.graph.edges)
                if (u / 5 == v / 5) ++intra;
        }
        const double trials = 50.0 * 4.0 * 10.0;  // 50 seeds, 4 blocks, C(5,2) pairs
        const double mean = trials * 0.9;
        const double sigma = std::sqrt(trials * 0.9 * 0.1);
        CHECK(std::abs(static_cast<double>(intra) - mean) <= 3.0 * sigma);
    }
    SUBCASE("degenerate config is rejected") {
        SynthConfig cfg;
        cfg.blocks = 0;
        CHECK_THROWS_AS(synth_graph(cfg), std::invalid_argument);
    }
}

TEST_CASE("EvalReport averages match the rows") {
    EvalReport r;
    r.rows = {{1, 0.8, 0.4, 4}, {2, 0.6, 0.5, 2}};
    r.finalize();
    CHECK(r.model_average == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(r.kmeans_average == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("run_pipeline rejects unknown subcommands with usage") {
    CHECK(run_pipeline({"definitely-not-a-subcommand"}) != 0);
    CHECK(run_pipeline({}) != 0);
}

TEST_CASE("run_pipeline reads options from a key-value config file") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("cfg.ini"),
                         "[synth]\nblocks=2\nblock-size=3\ngroups=1\nseed=9\nout-prefix=" + dir.file("inst") + "\n");
    REQUIRE(run_pipeline({"synth", "--config", dir.file("cfg.ini")}) == 0);
    auto g = load_citation_graph(dir.file("inst.nodes.tsv"), dir.file("inst.edges.tsv"));
    CHECK(g.size() == 6);
}

TEST_CASE("pipeline: synth, oracle cluster, eval reaches accuracy 1.0") {
    testutil::TempDir dir;
    const std::string prefix = dir.file("inst");
    REQUIRE(run_pipeline({"synth", "--blocks", "4", "--block-size", "5", "--groups", "2", "--intra", "0.95",
                          "--inter", "0.05", "--noise", "0.05", "--seed", "21", "--out-prefix", prefix}) == 0);
    REQUIRE(run_pipeline({"cluster", "--nodes", prefix + ".nodes.tsv", "--edges", prefix + ".edges.tsv",
                          "--embeddings", prefix + ".embeddings.tsv", "--oracle-labels", prefix + ".labels.tsv",
                          "--scope", "all_pairs", "--root-size", "1", "--out", dir.file("hier.json")}) == 0);
    REQUIRE(run_pipeline({"eval", "--nodes", prefix + ".nodes.tsv", "--edges", prefix + ".edges.tsv",
                          "--embeddings", prefix + ".embeddings.tsv", "--hierarchy", dir.file("hier.json"),
                          "--labels", prefix + ".labels.tsv", "--seed", "7", "--out", dir.file("report.json")}) == 0);
    auto j = nlohmann::json::parse(testutil::read_file(dir.file("report.json")));
    REQUIRE(j.at("levels").size() == 2);
    CHECK(j.at("levels")[0].at("model_accuracy").get<double>() == doctest::Approx(1.0));
    CHECK(j.at("levels")[1].at("model_accuracy").get<double>() == doctest::Approx(1.0));
    const double avg = (j.at("levels")[0].at("model_accuracy").get<double>() +
                        j.at("levels")[1].at("model_accuracy").get<double>()) / 2.0;
    CHECK(j.at("model_average").get<double>() == doctest::Approx(avg).epsilon(1e-12));
}

TEST_CASE("pipeline: verbalize with the stub produces a valid taxonomy") {
    testutil::TempDir dir;
    const std::string prefix = dir.file("inst");
    REQUIRE(run_pipeline({"synth", "--blocks", "2", "--block-size", "4", "--groups", "1", "--intra", "0.95",
                          "--inter", "0.05", "--seed", "5", "--out-prefix", prefix}) == 0);
    REQUIRE(run_pipeline({"cluster", "--nodes", prefix + ".nodes.tsv", "--edges", prefix + ".edges.tsv",
                          "--embeddings", prefix + ".embeddings.tsv", "--oracle-labels", prefix + ".labels.tsv",
                          "--scope", "all_pairs", "--out", dir.file("hier.json")}) == 0);
    REQUIRE(run_pipeline({"verbalize", "--nodes", prefix + ".nodes.tsv", "--edges", prefix + ".edges.tsv",
                          "--hierarchy", dir.file("hier.json"), "--instruction", "synthetic survey", "--client",
                          "stub", "--out", dir.file("labels.json")}) == 0);
    REQUIRE(run_pipeline({"export", "--hierarchy", dir.file("hier.json"), "--labels", dir.file("labels.json"),
                          "--instruction", "synthetic survey", "--out", dir.file("tax.json"), "--dot",
                          dir.file("tax.dot")}) == 0);
    auto tree = load_taxonomy(dir.file("tax.json"));
    CHECK(validate(tree).ok());
    CHECK(tree.nodes.size() >= 2);
}

TEST_CASE("pipeline: ingest and embed round-trip") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("n.tsv"), "a\tAlpha paper\tgraphs\nb\tBeta paper\ttrees\n");
    testutil::write_file(dir.file("e.tsv"), "a\tb\na\ta\n");
    REQUIRE(run_pipeline({"ingest", "--nodes", dir.file("n.tsv"), "--edges", dir.file("e.tsv"), "--out-nodes",
                          dir.file("n2.tsv"), "--out-edges", dir.file("e2.tsv")}) == 0);
    CHECK(testutil::read_file(dir.file("e2.tsv")) == "a\tb\n");
    REQUIRE(run_pipeline({"embed", "--nodes", dir.file("n2.tsv"), "--edges", dir.file("e2.tsv"), "--dim", "8",
                          "--seed", "3", "--out", dir.file("x.tsv")}) == 0);
    auto g = load_citation_graph(dir.file("n2.tsv"), dir.file("e2.tsv"));
    auto x = load_embeddings(dir.file("x.tsv"), g);
    CHECK(x.cols() == 8);
    CHECK(run_pipeline({"embed", "--nodes", dir.file("n2.tsv"), "--edges", dir.file("e2.tsv"), "--fields", "bogus",
                        "--out", dir.file("x2.tsv")}) != 0);
}
