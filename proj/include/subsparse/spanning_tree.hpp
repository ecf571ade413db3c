#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "subsparse/graph.hpp"
#include "subsparse/rng.hpp"

namespace subsparse {

/// Edge subset forming a spanning tree of its host graph.
class SpanningTree {
public:
    SpanningTree() = default;
    explicit SpanningTree(std::vector<EdgeId> edges) : edges_(std::move(edges)) {
        std::sort(edges_.begin(), edges_.end());
    }

    const std::vector<EdgeId>& edges() const { return edges_; }
    std::size_t size() const { return edges_.size(); }

    bool contains(EdgeId id) const {
        return std::binary_search(edges_.begin(), edges_.end(), id);
    }

private:
    std::vector<EdgeId> edges_;
};

enum class EdgeDecision { Contract, Delete };

/// Contract iff the edge is in the tree.
inline EdgeDecision edge_decision(const WeightedGraph& g, EdgeId e, const SpanningTree& t) {
    (void)g.edge(e);  // existence check
    return t.contains(e) ? EdgeDecision::Contract : EdgeDecision::Delete;
}

/// Exact weighted uniform spanning tree via Wilson's loop-erased random
/// walk, transitions proportional to edge weights, rooted at vertex 0.
inline SpanningTree sample_ust(const WeightedGraph& g, RngSeed seed) {
    if (!g.is_connected())
        throw ValidationError("spanning tree sampling requires a connected graph");
    const std::uint32_t n = g.vertex_count();
    if (n == 1) return SpanningTree(std::vector<EdgeId>{});

    // per-vertex cumulative incident weights for weighted transitions
    std::vector<std::vector<double>> cumulative(n);
    for (VertexId v = 0; v < n; ++v) {
        auto inc = g.incident(v);
        cumulative[v].reserve(inc.size());
        double s = 0;
        for (std::uint32_t idx : inc) {
            s += g.edges()[idx].weight;
            cumulative[v].push_back(s);
        }
    }

    Rng rng(seed);
    auto random_step = [&](VertexId u) -> std::uint32_t {
        const auto& cum = cumulative[u];
        double r = rng.uniform() * cum.back();
        std::size_t k = std::lower_bound(cum.begin(), cum.end(), r) - cum.begin();
        if (k >= cum.size()) k = cum.size() - 1;
        return g.incident(u)[k];
    };

    std::vector<char> in_tree(n, 0);
    std::vector<std::uint32_t> next_edge(n, 0);
    in_tree[0] = 1;
    for (VertexId start = 1; start < n; ++start) {
        VertexId u = start;
        while (!in_tree[u]) {
            std::uint32_t idx = random_step(u);
            next_edge[u] = idx;
            u = g.edges()[idx].other(u);
        }
        u = start;
        while (!in_tree[u]) {
            in_tree[u] = 1;
            u = g.edges()[next_edge[u]].other(u);
        }
    }

    std::vector<EdgeId> tree;
    tree.reserve(n - 1);
    for (VertexId v = 1; v < n; ++v) tree.push_back(g.edges()[next_edge[v]].id);
    return SpanningTree(std::move(tree));
}

struct WeightedTree {
    SpanningTree tree;
    double weight = 0.0;  // product of edge weights
};

/// Brute-force enumeration oracle. Hard caps n <= 10, m <= 20.
inline std::vector<WeightedTree> enumerate_spanning_trees(const WeightedGraph& g) {
    const std::uint32_t n = g.vertex_count();
    const std::size_t m = g.edge_count();
    if (n > 10 || m > 20) throw ValidationError("enumeration caps exceeded (n <= 10, m <= 20)");
    std::vector<WeightedTree> out;
    if (n <= 1) return out;
    if (m < n - 1) return out;

    std::vector<std::uint32_t> comb(n - 1);
    std::iota(comb.begin(), comb.end(), 0);
    auto edges = g.edges();

    std::vector<VertexId> parent(n);
    auto find = [&](VertexId x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };

    for (;;) {
        std::iota(parent.begin(), parent.end(), 0);
        bool acyclic = true;
        double weight = 1.0;
        std::vector<EdgeId> ids;
        ids.reserve(n - 1);
        for (std::uint32_t idx : comb) {
            VertexId a = find(edges[idx].u), b = find(edges[idx].v);
            if (a == b) {
                acyclic = false;
                break;
            }
            parent[a] = b;
            weight *= edges[idx].weight;
            ids.push_back(edges[idx].id);
        }
        if (acyclic) out.push_back({SpanningTree(std::move(ids)), weight});

        // next (n-1)-combination of [0, m)
        std::size_t i = comb.size();
        while (i > 0 && comb[i - 1] == m - (comb.size() - (i - 1))) --i;
        if (i == 0) break;
        ++comb[i - 1];
        for (std::size_t j = i; j < comb.size(); ++j) comb[j] = comb[j - 1] + 1;
    }
    return out;
}

inline double total_tree_weight(const std::vector<WeightedTree>& trees) {
    double s = 0;
    for (const auto& t : trees) s += t.weight;
    return s;
}

/// Pr[e in T] under the weighted UST distribution, by enumeration.
inline double tree_inclusion_fraction(const std::vector<WeightedTree>& trees, EdgeId e) {
    double total = 0, with = 0;
    for (const auto& t : trees) {
        total += t.weight;
        if (t.tree.contains(e)) with += t.weight;
    }
    if (total == 0) throw ValidationError("graph has no spanning tree");
    return with / total;
}

}  // namespace subsparse
