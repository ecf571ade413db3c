#include "test_helpers.hpp"

using namespace subsparse;
using namespace subsparse::testing;

TEST_CASE("error schedule telescopes below 1 + eps", "[resapx]") {
    for (double eps : {0.05, 0.1, 0.2, 0.5, 0.9}) {
        for (std::size_t p = 1; p <= (1u << 20); p = p * 2 + 1) {
            CHECK(resapx_schedule_product(p, eps) <= 1.0 + eps + 1e-12);
        }
        CHECK(resapx_schedule_product(1u << 20, eps) <= 1.0 + eps + 1e-12);
    }
}

TEST_CASE("single pair on a path", "[resapx]") {
    WeightedGraph p = gen_path(50);
    std::vector<VertexPair> pairs{{0, 49}};
    auto est = res_apx(p, pairs, 0.2, RngSeed{23});
    REQUIRE(est.size() == 1);
    CHECK(est[0] >= 0.8 * 49.0);
    CHECK(est[0] <= 1.2 * 49.0);
}

TEST_CASE("duplicates and orientations share estimates", "[resapx]") {
    Rng rng(RngSeed{24});
    WeightedGraph g = gen_erdos_renyi(30, rng, false);
    std::vector<VertexPair> pairs{{2, 9}, {9, 2}, {2, 9}, {4, 17}};
    auto est = res_apx(g, pairs, 0.3, RngSeed{25});
    REQUIRE(est.size() == 4);
    CHECK(est[0] == est[1]);
    CHECK(est[0] == est[2]);
    CHECK(est[3] > 0.0);
}

TEST_CASE("identity mode reproduces exact resistances", "[resapx]") {
    Rng rng(RngSeed{26});
    WeightedGraph g = gen_erdos_renyi(80, rng, true);
    DenseOracle oracle(g);
    std::vector<VertexPair> pairs;
    for (int i = 0; i < 20; ++i)
        pairs.emplace_back(static_cast<VertexId>(rng.below(80)),
                           static_cast<VertexId>(rng.below(80)));
    ResApxConfig cfg;
    cfg.mode = ScApproxMode::Identity;
    auto est = res_apx(g, pairs, 0.2, RngSeed{27}, cfg);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        double exact = oracle.resistance(pairs[i].first, pairs[i].second);
        CHECK(est[i] == Catch::Approx(exact).margin(1e-8).epsilon(1e-8));
    }
}

TEST_CASE("exact schur mode reproduces exact resistances", "[resapx]") {
    Rng rng(RngSeed{28});
    WeightedGraph g = gen_erdos_renyi(40, rng, false);
    DenseOracle oracle(g);
    std::vector<VertexPair> pairs;
    for (int i = 0; i < 8; ++i)
        pairs.emplace_back(static_cast<VertexId>(rng.below(40)),
                           static_cast<VertexId>(rng.below(40)));
    ResApxConfig cfg;
    cfg.mode = ScApproxMode::ExactSchur;
    auto est = res_apx(g, pairs, 0.2, RngSeed{29}, cfg);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        double exact = oracle.resistance(pairs[i].first, pairs[i].second);
        CHECK(est[i] == Catch::Approx(exact).margin(1e-7).epsilon(1e-7));
    }
}

TEST_CASE("sparsifying recursion stays within the error budget", "[resapx]") {
    Rng rng(RngSeed{30});
    WeightedGraph g = gen_erdos_renyi(60, rng, false);
    DenseOracle oracle(g);
    std::vector<VertexPair> pairs;
    while (pairs.size() < 10) {
        VertexId u = static_cast<VertexId>(rng.below(60));
        VertexId v = static_cast<VertexId>(rng.below(60));
        if (u != v) pairs.emplace_back(u, v);
    }
    ResApxConfig cfg;
    cfg.sparsify.c_term = 1.0;  // force real sparsification at the leaves
    auto est = res_apx(g, pairs, 0.5, RngSeed{31}, cfg);
    int ok = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        double exact = oracle.resistance(pairs[i].first, pairs[i].second);
        if (est[i] >= (1 - 0.5) * exact && est[i] <= (1 + 0.5) * exact) ++ok;
    }
    CHECK(ok >= 9);
}

TEST_CASE("input validation and trivial inputs", "[resapx]") {
    WeightedGraph tri = triangle();
    CHECK(res_apx(tri, std::vector<VertexPair>{}, 0.2, RngSeed{1}).empty());
    CHECK_THROWS_AS(
        res_apx(tri, std::vector<VertexPair>{{0, 9}}, 0.2, RngSeed{1}),
        ValidationError);
    CHECK_THROWS_AS(
        res_apx(tri, std::vector<VertexPair>{{0, 1}}, 0.0, RngSeed{1}),
        ValidationError);
    // u == u pairs resolve to zero resistance
    auto est = res_apx(tri, std::vector<VertexPair>{{1, 1}}, 0.2, RngSeed{1});
    CHECK(est[0] == 0.0);
}
