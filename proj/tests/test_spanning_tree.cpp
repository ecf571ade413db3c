#include "test_helpers.hpp"

using namespace subsparse;
using namespace subsparse::testing;

TEST_CASE("tree input returns the unique spanning tree", "[spanning_tree]") {
    WeightedGraph p = gen_path(6);
    for (std::uint64_t s = 0; s < 5; ++s) {
        SpanningTree t = sample_ust(p, RngSeed{s});
        REQUIRE(t.size() == 5);
        for (const Edge& e : p.edges()) CHECK(t.contains(e.id));
    }
    WeightedGraph star = gen_star(7);
    SpanningTree t = sample_ust(star, RngSeed{9});
    CHECK(t.size() == 6);
}

TEST_CASE("sampler frequencies match leverage scores", "[spanning_tree]") {
    WeightedGraph tri = triangle();
    double lev = pinned(tri, "edge0_leverage", DenseOracle(tri).leverage(EdgeId{0}));
    const int samples = 30000;
    Rng seeder(RngSeed{1001});
    int hits = 0;
    for (int i = 0; i < samples; ++i)
        if (sample_ust(tri, seeder.fork_seed(i)).contains(EdgeId{0})) ++hits;
    CHECK(std::abs(double(hits) / samples - lev) < 0.02);
}

TEST_CASE("weighted parallel pair favors the heavy edge", "[spanning_tree]") {
    WeightedGraph pp = parallel_pair();
    double expected = pinned(pp, "heavy_tree_fraction",
                             tree_inclusion_fraction(enumerate_spanning_trees(pp), EdgeId{1}));
    CHECK(expected == Catch::Approx(0.75));
    const int samples = 30000;
    Rng seeder(RngSeed{1002});
    int hits = 0;
    for (int i = 0; i < samples; ++i)
        if (sample_ust(pp, seeder.fork_seed(i)).contains(EdgeId{1})) ++hits;
    CHECK(std::abs(double(hits) / samples - expected) < 0.02);
}

TEST_CASE("empirical frequencies stay in a 3-sigma envelope", "[spanning_tree]") {
    std::vector<WeightedGraph> graphs{triangle(), gen_cycle(5), gen_complete(4),
                                      parallel_pair()};
    const int samples = 4000;
    for (std::uint64_t seed : {101ULL, 202ULL, 303ULL}) {
        for (const WeightedGraph& g : graphs) {
            DenseOracle oracle(g);
            std::vector<int> hits(g.edge_count(), 0);
            Rng seeder(RngSeed{seed});
            for (int i = 0; i < samples; ++i) {
                SpanningTree t = sample_ust(g, seeder.fork_seed(i));
                for (std::size_t j = 0; j < g.edge_count(); ++j)
                    if (t.contains(g.edges()[j].id)) ++hits[j];
            }
            for (std::size_t j = 0; j < g.edge_count(); ++j) {
                double lev = oracle.leverage(g.edges()[j].id);
                double sigma = std::sqrt(std::max(lev * (1 - lev), 1e-9) / samples);
                CHECK(std::abs(double(hits[j]) / samples - lev) <= 3 * sigma + 1.0 / samples);
            }
        }
    }
}

TEST_CASE("edge decisions follow tree membership", "[spanning_tree]") {
    WeightedGraph p3 = path3();  // both edges are bridges
    SpanningTree t = sample_ust(p3, RngSeed{5});
    CHECK(edge_decision(p3, EdgeId{0}, t) == EdgeDecision::Contract);
    CHECK(edge_decision(p3, EdgeId{1}, t) == EdgeDecision::Contract);

    WeightedGraph pp = parallel_pair();
    SpanningTree tp = sample_ust(pp, RngSeed{6});
    int in_tree = tp.contains(EdgeId{0}) + tp.contains(EdgeId{1});
    CHECK(in_tree == 1);  // exactly one of a parallel pair; the twin is deleted
    EdgeId out = tp.contains(EdgeId{0}) ? EdgeId{1} : EdgeId{0};
    CHECK(edge_decision(pp, out, tp) == EdgeDecision::Delete);

    WeightedGraph tri = triangle();
    Rng seeder(RngSeed{7});
    int contracts = 0;
    const int samples = 20000;
    for (int i = 0; i < samples; ++i)
        if (edge_decision(tri, EdgeId{0}, sample_ust(tri, seeder.fork_seed(i))) ==
            EdgeDecision::Contract)
            ++contracts;
    CHECK(std::abs(double(contracts) / samples - 2.0 / 3.0) < 0.02);
}

TEST_CASE("enumeration oracle", "[spanning_tree]") {
    auto tri_trees = enumerate_spanning_trees(triangle());
    REQUIRE(tri_trees.size() == 3);
    for (const auto& t : tri_trees) CHECK(t.weight == 1.0);

    CHECK(enumerate_spanning_trees(path3()).size() == 1);

    auto pp_trees = enumerate_spanning_trees(parallel_pair());
    REQUIRE(pp_trees.size() == 2);
    CHECK(pp_trees[0].weight + pp_trees[1].weight ==
          pinned(parallel_pair(), "total_tree_weight", 4.0));

    CHECK_THROWS_AS(enumerate_spanning_trees(gen_star(12)), ValidationError);
    CHECK_THROWS_AS(enumerate_spanning_trees(gen_complete(7)), ValidationError);  // m = 21
}

TEST_CASE("kirchhoff: leverage equals weighted tree fraction", "[spanning_tree]") {
    auto corpus = small_corpus();
    int checked = 0;
    for (std::size_t i = 0; i < corpus.size(); i += 7) {
        const WeightedGraph& g = corpus[i];
        if (!g.is_connected() || g.vertex_count() > 7 || g.edge_count() > 20) continue;
        DenseOracle oracle(g);
        auto trees = enumerate_spanning_trees(g);
        for (const Edge& e : g.edges()) {
            CHECK(std::abs(oracle.leverage(e.id) - tree_inclusion_fraction(trees, e.id)) <= 1e-9);
            ++checked;
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("matrix-tree: total tree weight equals a cofactor", "[spanning_tree]") {
    auto corpus = small_corpus();
    for (std::size_t i = 0; i < corpus.size(); i += 13) {
        const WeightedGraph& g = corpus[i];
        if (g.vertex_count() < 2 || g.edge_count() > 20) continue;
        double total = total_tree_weight(enumerate_spanning_trees(g));
        Matrix l = laplacian_dense(g);
        Matrix minor = l.bottomRightCorner(l.rows() - 1, l.cols() - 1);
        double cofactor = minor.determinant();
        CHECK(std::abs(total - cofactor) <= 1e-6 * std::max(1.0, std::abs(cofactor)));
    }
}

TEST_CASE("identical seeds give identical samples", "[spanning_tree]") {
    Rng rng(RngSeed{77});
    WeightedGraph g = gen_erdos_renyi(30, rng, true);
    SpanningTree a = sample_ust(g, RngSeed{123});
    SpanningTree b = sample_ust(g, RngSeed{123});
    CHECK(a.edges() == b.edges());
    CHECK_THROWS_AS(sample_ust(make_graph(3, {{0, 1, 1.0}}), RngSeed{1}), ValidationError);
}
