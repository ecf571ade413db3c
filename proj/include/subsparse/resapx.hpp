#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "subsparse/graph.hpp"
#include "subsparse/resistance.hpp"
#include "subsparse/rng.hpp"
#include "subsparse/solver.hpp"
#include "subsparse/sparsify.hpp"

namespace subsparse {

using VertexPair = std::pair<VertexId, VertexId>;

enum class ScApproxMode {
    Sparsify,    // subspace sparsifier onto the vertex set (the real algorithm)
    ExactSchur,  // dense Schur complement, for debugging below the dense cap
    Identity,    // no reduction; isolates the recursion bookkeeping
};

struct ResApxConfig {
    ScApproxMode mode = ScApproxMode::Sparsify;
    OracleSpec oracle = OracleSpec::slow();
    SparsifyConfig sparsify{};
    std::uint32_t dense_cap = 500;
    SolverOptions solver{};
};

/// Error-schedule product for a batch of p pairs: the factor by which leaf
/// estimates can exceed the true resistance. Stays at or below 1 + eps.
inline double resapx_schedule_product(std::size_t p, double eps) {
    double factor = 1.0;
    double e = eps;
    while (p > 1) {
        double lg = std::log2(static_cast<double>(p));
        factor *= 1.0 + e / (2.0 * lg);
        e *= 1.0 - 1.0 / lg;
        p = (p + 1) / 2;
    }
    return factor * (1.0 + e);
}

namespace detail {

struct ScApprox {
    WeightedGraph graph;
    std::vector<VertexId> vertex_map;  // old vertex id -> new vertex id (meaningful on the target set)
};

inline ScApprox sc_approx(const WeightedGraph& g, std::span<const VertexId> target, double eps,
                          RngSeed seed, const ResApxConfig& cfg) {
    std::vector<VertexId> identity(g.vertex_count());
    for (VertexId v = 0; v < g.vertex_count(); ++v) identity[v] = v;

    if (cfg.mode == ScApproxMode::Identity || eps <= 0.0 || target.size() < 2 ||
        target.size() >= g.vertex_count())
        return {g, std::move(identity)};

    if (cfg.mode == ScApproxMode::ExactSchur) {
        std::vector<VertexId> sv(target.begin(), target.end());
        std::sort(sv.begin(), sv.end());
        Matrix sc = schur_complement_dense(g, sv, cfg.dense_cap);
        std::vector<std::tuple<VertexId, VertexId, double>> edges;
        double scale = sc.diagonal().cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < sc.rows(); ++i)
            for (Eigen::Index j = i + 1; j < sc.cols(); ++j)
                if (-sc(i, j) > 1e-12 * scale)
                    edges.emplace_back(static_cast<VertexId>(i), static_cast<VertexId>(j),
                                       -sc(i, j));
        ScApprox out;
        out.graph = WeightedGraph::from_edges(static_cast<std::uint32_t>(sv.size()), edges);
        out.vertex_map.assign(g.vertex_count(), 0);
        for (std::size_t i = 0; i < sv.size(); ++i)
            out.vertex_map[sv[i]] = static_cast<VertexId>(i);
        return out;
    }

    SparsifyConfig scfg = cfg.sparsify;
    scfg.solver = cfg.solver;
    scfg.dense_cap = cfg.dense_cap;
    SparsifierResult res = subspace_sparsifier(g, target, eps, cfg.oracle, seed, scfg);

    // relative vertex map: route any lineage-root preimage through both maps
    ScApprox out;
    out.vertex_map.assign(g.vertex_count(), 0);
    const auto& phi_in = g.certificate().phi;
    const auto& phi_out = res.output.certificate().phi;
    for (std::uint32_t r = 0; r < g.certificate().original_vertex_count; ++r)
        out.vertex_map[phi_in[r]] = phi_out[r];
    out.graph = std::move(res.output);
    return out;
}

inline void res_apx_node(const WeightedGraph& g, std::vector<VertexPair> pairs,
                         std::vector<std::size_t> slots, double eps, Rng& rng,
                         const ResApxConfig& cfg, std::vector<double>& out) {
    if (pairs.empty()) return;
    if (pairs.size() == 1) {
        auto [u, v] = pairs[0];
        if (u == v) {
            out[slots[0]] = 0.0;
            return;
        }
        std::vector<VertexId> target{u, v};
        std::sort(target.begin(), target.end());
        ScApprox leaf = sc_approx(g, target, eps, rng.fork_seed(slots[0] + 1), cfg);
        VertexId a = leaf.vertex_map[u], b = leaf.vertex_map[v];
        out[slots[0]] =
            a == b ? 0.0 : effective_resistance_exact(leaf.graph, a, b, cfg.dense_cap, cfg.solver);
        return;
    }

    double lg = std::log2(static_cast<double>(pairs.size()));
    double eps1 = eps / (2.0 * lg);
    double eps2 = eps * (1.0 - 1.0 / lg);
    std::size_t half = (pairs.size() + 1) / 2;

    for (int side = 0; side < 2; ++side) {
        std::size_t lo = side == 0 ? 0 : half;
        std::size_t hi = side == 0 ? half : pairs.size();
        std::vector<VertexPair> sub(pairs.begin() + lo, pairs.begin() + hi);
        std::vector<std::size_t> sub_slots(slots.begin() + lo, slots.begin() + hi);
        std::vector<VertexId> verts;
        for (auto [u, v] : sub) {
            verts.push_back(u);
            verts.push_back(v);
        }
        std::sort(verts.begin(), verts.end());
        verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
        ScApprox reduced =
            sc_approx(g, verts, eps1, rng.fork_seed(slots[lo] * 2 + side + 17), cfg);
        for (auto& [u, v] : sub) {
            u = reduced.vertex_map[u];
            v = reduced.vertex_map[v];
        }
        res_apx_node(reduced.graph, std::move(sub), std::move(sub_slots), eps2, rng, cfg, out);
    }
}

}  // namespace detail

/// Batch effective-resistance estimates, (1 +- eps)-multiplicative per pair:
/// splits the pair set in half, reduces the graph onto each half's vertex
/// set with error eps/(2 log2 |P|), and recurses with eps (1 - 1/log2 |P|).
/// Estimates are aligned with the input; duplicate pairs (in either
/// orientation) share one computation.
inline std::vector<double> res_apx(const WeightedGraph& g, std::span<const VertexPair> pairs,
                                   double eps, RngSeed seed, ResApxConfig cfg = {}) {
    if (!g.is_connected()) throw ValidationError("res_apx requires a connected graph");
    if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("eps must be in (0,1)");
    for (auto [u, v] : pairs)
        if (u >= g.vertex_count() || v >= g.vertex_count())
            throw ValidationError("pair endpoint out of range");

    // canonical orientation + dedup
    std::vector<VertexPair> canonical;
    std::vector<std::size_t> slot_of_input(pairs.size());
    {
        std::vector<VertexPair> sorted;
        sorted.reserve(pairs.size());
        for (auto [u, v] : pairs) sorted.emplace_back(std::min(u, v), std::max(u, v));
        std::vector<VertexPair> uniq = sorted;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        canonical = uniq;
        for (std::size_t i = 0; i < sorted.size(); ++i)
            slot_of_input[i] = static_cast<std::size_t>(
                std::lower_bound(uniq.begin(), uniq.end(), sorted[i]) - uniq.begin());
    }
    if (canonical.empty()) return {};

    std::vector<double> canonical_out(canonical.size(), 0.0);
    std::vector<std::size_t> slots(canonical.size());
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    Rng rng(seed);
    detail::res_apx_node(g, canonical, slots, eps, rng, cfg, canonical_out);

    std::vector<double> out(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = canonical_out[slot_of_input[i]];
    return out;
}

}  // namespace subsparse
