#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "subsparse/graph.hpp"
#include "subsparse/rng.hpp"
#include "subsparse/solver.hpp"
#include "subsparse/testkit.hpp"

namespace subsparse {

enum class EstimateKind { Leverage, Nu, Energy, ColumnNorm };

/// Per-edge scalar map keyed by the current edges of its graph, with the
/// accuracy parameters that produced it.
struct EdgeEstimates {
    EstimateKind kind = EstimateKind::Leverage;
    RngSeed seed{};
    double eps = 0.0;      // multiplicative accuracy parameter (delta0 for nu)
    double delta1 = 0.0;   // additive slack (nu only)
    Eigen::Index jl_rows = 0;
    double solver_eps_symbolic = 0.0;  // the paper-form accuracy demand, logged
    double solver_eps_used = 0.0;
    std::vector<std::pair<EdgeId, double>> values;  // ascending EdgeId

    double at(EdgeId id) const {
        auto it = std::lower_bound(values.begin(), values.end(), id,
                                   [](const auto& p, EdgeId key) { return p.first < key; });
        if (it == values.end() || it->first != id)
            throw ValidationError("no estimate for edge id " + std::to_string(id.value));
        return it->second;
    }
};

/// JL projection parameters: rows >= 24 ln(n) / eps^2, entries +-1/sqrt(rows).
struct JlConfig {
    double eps = 0.25;
    Eigen::Index rows = 0;
    RngSeed seed{};

    static JlConfig make(std::size_t vector_count, double eps, RngSeed seed) {
        if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("JL distortion must be in (0,1)");
        double n = static_cast<double>(std::max<std::size_t>(vector_count, 2));
        JlConfig cfg;
        cfg.eps = eps;
        cfg.rows = static_cast<Eigen::Index>(std::ceil(24.0 * std::log(n) / (eps * eps)));
        cfg.seed = seed;
        return cfg;
    }
};

namespace detail {

// Rows of Q W^{1/2} B as dense vectors on V: row i = sum_e q_ie sqrt(w_e) b_e.
inline Matrix sketch_rhs(const WeightedGraph& g, const JlConfig& jl, Rng& rng) {
    const Eigen::Index n = g.vertex_count();
    Matrix z = Matrix::Zero(n, jl.rows);
    const double scale = 1.0 / std::sqrt(static_cast<double>(jl.rows));
    for (const Edge& e : g.edges()) {
        double s = std::sqrt(e.weight) * scale;
        for (Eigen::Index i = 0; i < jl.rows; ++i) {
            double q = rng.sign() * s;
            z(e.u, i) += q;
            z(e.v, i) -= q;
        }
    }
    return z;
}

}  // namespace detail

/// (1 +- eps) multiplicative leverage-score estimates for all edges, by
/// sketching rows of Q W^{1/2} B L^+ with ceil(24 ln n / eps^2) solves.
inline EdgeEstimates leverage_apx(const WeightedGraph& g, double eps, RngSeed seed,
                                  SolverOptions opts = {}) {
    if (!g.is_connected()) throw ValidationError("leverage estimation requires a connected graph");
    if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("eps must be in (0,1)");
    JlConfig jl = JlConfig::make(std::max(g.edge_count(), static_cast<std::size_t>(g.vertex_count())),
                                 eps, seed);
    Rng rng(seed);
    LaplacianSolver solver(g, opts);
    Matrix x = solver.solve_many(detail::sketch_rhs(g, jl, rng), 1e-10);
    EdgeEstimates est;
    est.kind = EstimateKind::Leverage;
    est.seed = seed;
    est.eps = eps;
    est.jl_rows = jl.rows;
    est.values.reserve(g.edge_count());
    for (const Edge& e : g.edges())
        est.values.emplace_back(e.id, (x.row(e.u) - x.row(e.v)).squaredNorm() * e.weight);
    return est;
}

/// b_uv^T L^+ b_uv. Returns 0 for u == v by convention. Uses the dense path
/// under the cap, a tight solve above it.
inline double effective_resistance_exact(const WeightedGraph& g, VertexId u, VertexId v,
                                         std::uint32_t dense_cap = 500, SolverOptions opts = {}) {
    if (u >= g.vertex_count() || v >= g.vertex_count())
        throw ValidationError("vertex out of range");
    if (u == v) return 0.0;
    if (g.vertex_count() <= dense_cap) return DenseOracle(g, dense_cap).resistance(u, v);
    Vector b = pair_vector(g.vertex_count(), u, v);
    return LaplacianSolver(g, opts).quadform(b, b, 1e-10);
}

/// DiffApx: estimates nu_e of the leverage-score decrease
/// b_e^T L_G^+ b_e / r_e - b_e^T L_{G/S}^+ b_e / r_e caused by identifying S,
/// with (1 - d0) nu_e - d1 <= gap <= (1 + d0) nu_e + d1 whp.
inline EdgeEstimates diff_apx(const WeightedGraph& g, std::span<const VertexId> s, double delta0,
                              double delta1, RngSeed seed, SolverOptions opts = {}) {
    if (!g.is_connected()) throw ValidationError("diff_apx requires a connected graph");
    if (!(delta0 > 0.0 && delta0 < 1.0) || !(delta1 > 0.0 && delta1 < 1.0))
        throw ValidationError("delta0, delta1 must be in (0,1)");
    std::vector<VertexId> sv(s.begin(), s.end());
    std::sort(sv.begin(), sv.end());
    sv.erase(std::unique(sv.begin(), sv.end()), sv.end());
    if (sv.size() < 2) throw ValidationError("diff_apx needs |S| >= 2");
    if (sv.size() >= g.vertex_count()) throw ValidationError("diff_apx needs S to be a proper subset");
    for (VertexId v : sv)
        if (v >= g.vertex_count()) throw ValidationError("vertex out of range");

    const Eigen::Index n = g.vertex_count();
    const Eigen::Index k = static_cast<Eigen::Index>(sv.size());

    // JL distortion eps0/(1+eps0): makes both sides of the bracket hold.
    JlConfig jl = JlConfig::make(
        std::max(g.edge_count(), static_cast<std::size_t>(g.vertex_count())),
        delta0 / (1.0 + delta0), seed);

    WeightBounds wb = weight_bounds(g);
    double nn = static_cast<double>(n);
    double eps_symbolic = delta1 /
                          (48.0 * std::sqrt(static_cast<double>(jl.rows)) * std::pow(nn, 8.5) *
                           std::pow(wb.wmax, 2.5) * std::pow(wb.wmin, -3.0));
    double eps_used = std::max(eps_symbolic, 1e-300);  // direct mode honors it at machine precision

    Rng rng(seed);
    LaplacianSolver solver(g, opts);
    std::vector<VertexId> t = complement_vertices(g, sv);

    // sparse blocks of L over the S/T split
    const SparseMatrix& L = solver.laplacian();
    std::vector<std::int64_t> pos_s(n, -1), pos_t(n, -1);
    for (Eigen::Index i = 0; i < k; ++i) pos_s[sv[i]] = i;
    for (std::size_t i = 0; i < t.size(); ++i) pos_t[t[i]] = static_cast<std::int64_t>(i);
    std::vector<Eigen::Triplet<double>> ss, st, ts;
    for (Eigen::Index col = 0; col < n; ++col) {
        for (SparseMatrix::InnerIterator it(L, col); it; ++it) {
            std::int64_t rs = pos_s[it.row()], cs = pos_s[col];
            std::int64_t rt = pos_t[it.row()], ct = pos_t[col];
            if (rs >= 0 && cs >= 0) ss.emplace_back(rs, cs, it.value());
            if (rs >= 0 && ct >= 0) st.emplace_back(rs, ct, it.value());
            if (rt >= 0 && cs >= 0) ts.emplace_back(rt, cs, it.value());
        }
    }
    SparseMatrix lss(k, k), lst(k, static_cast<Eigen::Index>(t.size())),
        lts(static_cast<Eigen::Index>(t.size()), k);
    lss.setFromTriplets(ss.begin(), ss.end());
    lst.setFromTriplets(st.begin(), st.end());
    lts.setFromTriplets(ts.begin(), ts.end());

    // Y^T = L^+ C SC(L,S) C^T L^+ B^T W^{1/2} Q^T, built columnwise:
    Matrix x2 = solver.solve_many(detail::sketch_rhs(g, jl, rng), eps_used);  // L^+ B^T W^{1/2} Q^T
    Matrix c2(k, jl.rows);  // C^T x2: extract S rows, center over S
    for (Eigen::Index i = 0; i < k; ++i) c2.row(i) = x2.row(sv[i]);
    c2.rowwise() -= c2.colwise().mean();
    Matrix x1 = lss * c2 - lst * solver.solve_submatrix_many(t, lts * c2, eps_used);  // SC * c2
    Matrix cx = Matrix::Zero(n, jl.rows);  // C x1: center over S, inject
    x1.rowwise() -= x1.colwise().mean();
    for (Eigen::Index i = 0; i < k; ++i) cx.row(sv[i]) = x1.row(i);
    Matrix y = solver.solve_many(cx, eps_used);

    EdgeEstimates est;
    est.kind = EstimateKind::Nu;
    est.seed = seed;
    est.eps = delta0;
    est.delta1 = delta1;
    est.jl_rows = jl.rows;
    est.solver_eps_symbolic = eps_symbolic;
    est.solver_eps_used = eps_used;
    est.values.reserve(g.edge_count());
    for (const Edge& e : g.edges())
        est.values.emplace_back(e.id, (y.row(e.u) - y.row(e.v)).squaredNorm() * e.weight);
    return est;
}

}  // namespace subsparse
