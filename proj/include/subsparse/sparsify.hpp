#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "subsparse/basis.hpp"
#include "subsparse/graph.hpp"
#include "subsparse/resistance.hpp"
#include "subsparse/rng.hpp"
#include "subsparse/sketch.hpp"
#include "subsparse/solver.hpp"
#include "subsparse/spanning_tree.hpp"
#include "subsparse/testkit.hpp"

namespace subsparse {

// ---------------------------------------------------------------------------
// Split / Unsplit

enum class SplitKind { Parallel, Series };

struct SplitPair {
    EdgeId source;
    double source_weight = 0.0;
    VertexId source_u = 0, source_v = 0;
    SplitKind kind = SplitKind::Parallel;
    EdgeId half0, half1;
    VertexId fresh = 0;  // series splits only
};

/// Split graph I plus the pairing P back to the source graph H. Every edge
/// of I is in exactly one pair; V(H) keeps its vertex ids, fresh mid-vertices
/// are appended after them.
struct SplitPairing {
    WeightedGraph split_graph;
    std::vector<SplitPair> pairs;

    const SplitPair& pair_of_half(EdgeId half) const {
        std::size_t idx = static_cast<std::size_t>(half.value / 2);
        if (idx >= pairs.size()) throw ValidationError("edge id is not a split half");
        return pairs[idx];
    }
};

struct SplitConfig {
    std::uint32_t dense_cap = 500;  // exact leverages at or below, JL above
    double jl_eps = 1.0 / 16.0;
    RngSeed seed{};
    SolverOptions solver{};
};

/// Replaces each edge by two parallel halves (resistance 2r each) when its
/// leverage estimate is >= 1/2, and by two series halves (r/2 each) through
/// a fresh vertex otherwise. Forces all leverage scores into [3/16, 13/16]
/// while preserving the quadratic form on vectors supported on V(H).
inline SplitPairing split(const WeightedGraph& h, SplitConfig cfg = {}) {
    if (!h.is_connected()) throw ValidationError("split requires a connected graph");
    std::vector<double> lev;
    lev.reserve(h.edge_count());
    if (h.vertex_count() <= cfg.dense_cap) {
        // exact leverages from one cached factorization, a strict
        // strengthening of the (1 +- 1/16) estimate
        LaplacianSolver solver(h, cfg.solver);
        Matrix b(h.vertex_count(), h.edge_count());
        b.setZero();
        Eigen::Index j = 0;
        for (const Edge& e : h.edges()) {
            b(e.u, j) = 1.0;
            b(e.v, j) = -1.0;
            ++j;
        }
        Matrix x = solver.solve_many(b, 1e-10);
        j = 0;
        for (const Edge& e : h.edges()) {
            lev.push_back(e.weight * (x(e.u, j) - x(e.v, j)));
            ++j;
        }
    } else {
        EdgeEstimates est = leverage_apx(h, cfg.jl_eps, cfg.seed, cfg.solver);
        for (const Edge& e : h.edges()) lev.push_back(est.at(e.id));
    }

    SplitPairing out;
    out.pairs.reserve(h.edge_count());
    std::vector<std::tuple<VertexId, VertexId, double>> edges;
    edges.reserve(2 * h.edge_count());
    VertexId next_fresh = h.vertex_count();
    std::uint64_t next_id = 0;
    for (std::size_t i = 0; i < h.edge_count(); ++i) {
        const Edge& e = h.edges()[i];
        SplitPair p;
        p.source = e.id;
        p.source_weight = e.weight;
        p.source_u = e.u;
        p.source_v = e.v;
        p.half0 = EdgeId{next_id++};
        p.half1 = EdgeId{next_id++};
        if (lev[i] >= 0.5) {
            p.kind = SplitKind::Parallel;
            edges.emplace_back(e.u, e.v, e.weight / 2.0);
            edges.emplace_back(e.u, e.v, e.weight / 2.0);
        } else {
            p.kind = SplitKind::Series;
            p.fresh = next_fresh++;
            edges.emplace_back(e.u, p.fresh, 2.0 * e.weight);
            edges.emplace_back(p.fresh, e.v, 2.0 * e.weight);
        }
        out.pairs.push_back(p);
    }
    out.split_graph = WeightedGraph::from_edges(next_fresh, edges);
    return out;
}

/// Merges surviving pairs back: parallel halves add weights, series halves
/// at a still-degree-2 fresh vertex add resistances. Everything else is
/// left as it stands. Electrical equivalence holds on vectors supported on
/// the unsplit vertex set.
inline WeightedGraph unsplit(const WeightedGraph& iprime, const SplitPairing& pairing) {
    std::vector<char> consumed_vertex(iprime.vertex_count(), 0);
    std::vector<char> merged_half(iprime.edge_count(), 0);

    struct Merged {
        VertexId u, v;
        double w;
    };
    std::vector<Merged> merged;
    auto degree = [&](VertexId x) { return iprime.incident(x).size(); };

    for (const SplitPair& p : pairing.pairs) {
        if (!iprime.has_edge(p.half0) || !iprime.has_edge(p.half1)) continue;
        const Edge& e0 = iprime.edge(p.half0);
        const Edge& e1 = iprime.edge(p.half1);
        if (p.kind == SplitKind::Parallel) {
            bool same = (std::min(e0.u, e0.v) == std::min(e1.u, e1.v)) &&
                        (std::max(e0.u, e0.v) == std::max(e1.u, e1.v));
            if (!same) continue;
            merged.push_back({e0.u, e0.v, e0.weight + e1.weight});
        } else {
            VertexId mid;
            if (e0.u == e1.u || e0.u == e1.v) mid = e0.u;
            else if (e0.v == e1.u || e0.v == e1.v) mid = e0.v;
            else continue;
            if (degree(mid) != 2) continue;
            VertexId a = e0.other(mid), b = e1.other(mid);
            consumed_vertex[mid] = 1;
            if (a == b) continue;  // pendant cycle carries no current
            double w = (e0.weight == e1.weight)
                           ? e0.weight / 2.0
                           : (e0.weight * e1.weight) / (e0.weight + e1.weight);
            merged.push_back({a, b, w});
        }
        auto mark = [&](EdgeId id) {
            for (std::size_t i = 0; i < iprime.edge_count(); ++i)
                if (iprime.edges()[i].id == id) merged_half[i] = 1;
        };
        mark(p.half0);
        mark(p.half1);
    }

    // order-preserving compaction over surviving vertices
    std::vector<VertexId> remap(iprime.vertex_count());
    VertexId next = 0;
    for (VertexId x = 0; x < iprime.vertex_count(); ++x)
        remap[x] = consumed_vertex[x] ? 0 : next++;
    std::vector<std::tuple<VertexId, VertexId, double>> edges;
    for (std::size_t i = 0; i < iprime.edge_count(); ++i) {
        if (merged_half[i]) continue;
        const Edge& e = iprime.edges()[i];
        edges.emplace_back(remap[e.u], remap[e.v], e.weight);
    }
    for (const Merged& m : merged) edges.emplace_back(remap[m.u], remap[m.v], m.w);
    return WeightedGraph::from_edges(next, edges);
}

// ---------------------------------------------------------------------------
// Steady oracles

struct OracleSpec {
    enum class Kind { Slow, Fast };
    Kind kind = Kind::Slow;
    double rho = 2.0;         // steadiness factor used in the termination bound
    double batch_beta = 0.0;  // 0: one edge per batch; else K(z) = max(1, floor(z / (beta ln^3 n)))
    double gamma = 0.0;       // fast subsampling rate; 0 selects the paper formula
    SketchConfig sketch{};

    static OracleSpec slow() { return {}; }
    static OracleSpec fast(double c_local = 1.0) {
        OracleSpec o;
        o.kind = Kind::Fast;
        o.batch_beta = 1.0;
        o.sketch.c_local = c_local;
        return o;
    }

    std::size_t batch_size(std::size_t z, std::uint32_t n) const {
        if (z == 0) return 0;
        if (batch_beta <= 0.0) return 1;
        double ln = std::log(std::max<double>(n, 2));
        auto k = static_cast<std::size_t>(z / (batch_beta * ln * ln * ln));
        return std::clamp<std::size_t>(k, 1, z);
    }

    double effective_gamma(const WeightedGraph& i) const {
        if (gamma > 0.0) return gamma;
        double ln = std::log(std::max<double>(i.vertex_count(), 2));
        return 1.0 / (1e8 * sketch.c_local * ln * ln * ln);
    }
};

struct OracleResult {
    std::vector<EdgeId> z;      // ascending
    EdgeEstimates scores;       // energies (slow) or nu estimates (fast)
    double threshold = 0.0;
    bool fell_back_to_slow = false;
    std::optional<LocalizedSet> localized;  // fast only
};

/// Keeps every edge whose subspace energy fraction is at most 2d/|E(I)|.
/// The basis is orthonormalized against L_I^+ internally, so the energy
/// fractions sum to exactly dim(S) and Markov guarantees |Z| >= |E(I)|/2.
inline OracleResult slow_oracle(const WeightedGraph& i, const Matrix& basis_columns,
                                SolverOptions opts = {}) {
    SubspaceBasis normalized = SubspaceBasis::orthonormalized(i, basis_columns, opts);
    LaplacianSolver solver(i, opts);
    Matrix u = solver.solve_many(normalized.columns(), 1e-12);
    const double d = static_cast<double>(normalized.dim());
    const double m = static_cast<double>(i.edge_count());
    OracleResult out;
    out.threshold = 2.0 * d / m;
    out.scores.kind = EstimateKind::Energy;
    out.scores.values.reserve(i.edge_count());
    for (const Edge& e : i.edges()) {
        double energy = (u.row(e.u) - u.row(e.v)).squaredNorm() * e.weight;
        out.scores.values.emplace_back(e.id, energy);
        if (energy <= out.threshold) out.z.push_back(e.id);
    }
    return out;
}

inline OracleResult slow_oracle(const WeightedGraph& i, const SubspaceBasis& basis,
                                SolverOptions opts = {}) {
    return slow_oracle(i, basis.columns(), opts);
}

/// Subsamples a localized set W, scores it with DiffApx(I, S, 1/4, 1/m^5),
/// and keeps edges with nu_e <= 4|S|/|W|. Falls back to slow selection when
/// gamma |E(I)| < 4 (infeasible subsampling at this scale).
inline OracleResult fast_oracle(const WeightedGraph& i, std::span<const VertexId> s,
                                const OracleSpec& spec, RngSeed seed, SolverOptions opts = {}) {
    double gamma = spec.effective_gamma(i);
    if (gamma * static_cast<double>(i.edge_count()) < 4.0) {
        OracleResult out = slow_oracle(i, coordinate_subspace_generators(i, s), opts);
        out.fell_back_to_slow = true;
        return out;
    }
    Rng rng(seed);
    LocalizedSet w = subsample(i, gamma, rng.fork_seed(1), spec.sketch, opts);
    double m = static_cast<double>(i.edge_count());
    double delta1 = 1.0 / std::pow(m, 5);
    // S = V(I) identifies everything: the gap degenerates to the leverage
    // score, which DiffApx's Schur route cannot express (empty complement)
    EdgeEstimates nu = s.size() >= i.vertex_count()
                           ? leverage_apx(i, 0.25, rng.fork_seed(2), opts)
                           : diff_apx(i, s, 0.25, std::min(0.5, delta1), rng.fork_seed(2), opts);
    OracleResult out;
    out.threshold = 4.0 * static_cast<double>(s.size()) / static_cast<double>(w.edges.size());
    out.scores = nu;
    for (EdgeId id : w.edges)
        if (nu.at(id) <= out.threshold) out.z.push_back(id);
    out.localized = std::move(w);
    return out;
}

// ---------------------------------------------------------------------------
// The edge-elimination driver

struct SparsifyConfig {
    double c_term = 10.0;            // termination constant (paper value 10000)
    std::uint32_t dense_cap = 500;
    bool audit = false;              // per-step steadiness records
    bool audit_distortion_each = false;  // dense distortion after every iteration
    double split_jl_eps = 1.0 / 16.0;
    SolverOptions solver{};
    std::size_t max_iterations = 0;  // 0: 50 m + 200
};

struct SparsifierResult {
    WeightedGraph output;  // certificate chains back to the input graph
    AuditTrace trace;
    std::size_t iterations = 0;
    double termination_threshold = 0.0;
};

/// Largest |eigenvalue| of Y_H^T L_H^+ Y_H - I for Y_H = P Y, measured
/// densely; the distortion of a sparsifier run against its input basis.
inline double audit_distortion(const SubspaceBasis& basis, const WeightedGraph& h,
                               std::uint32_t dense_cap = 500) {
    Matrix yh = basis.projected(h);
    DenseOracle oracle(h, dense_cap);
    Matrix m = yh.transpose() * oracle.pinv() * yh -
               Matrix::Identity(basis.dim(), basis.dim());
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace detail {

struct BatchFate {
    const SplitPair* pair;
    bool contracted;  // the conditioned half was contracted (in the tree)
};

// H-level effect of conditioning one half of a split pair: a contracted
// parallel half turns the other into a self-loop (contract the source), a
// deleted parallel half leaves a reweighted survivor, a contracted series
// half halves the source resistance, a deleted series half strands the other
// half on a leaf (delete the source).
inline MinorOp fate_op(const BatchFate& f) {
    if (f.pair->kind == SplitKind::Parallel) {
        if (f.contracted) return OpContract{f.pair->source};
        return OpReweight{f.pair->source, f.pair->source_weight, f.pair->source_weight / 2.0};
    }
    if (f.contracted)
        return OpReweight{f.pair->source, f.pair->source_weight, 2.0 * f.pair->source_weight};
    return OpDelete{f.pair->source};
}

inline double exact_leverage(const WeightedGraph& g, EdgeId id, const SolverOptions& opts) {
    const Edge& e = g.edge(id);
    Vector b = pair_vector(g.vertex_count(), e.u, e.v);
    return e.weight * LaplacianSolver(g, opts).quadform(b, b, 1e-10);
}

}  // namespace detail

/// SubspaceSparsifier: repeatedly split, ask the steady oracle for a batch,
/// condition the batch through one uniform spanning tree of the split graph,
/// and unsplit, until |E(H)| < c_term rho^2 d ln(max(d,2)) / eps^2.
/// eps = 0 disables sparsification (infinite threshold, identity output).
///
/// The general-basis entry point always routes to the slow oracle; the
/// vertex-set entry point below enables the fast one.
inline SparsifierResult subspace_sparsifier(const WeightedGraph& g, const SubspaceBasis& basis,
                                            double eps, const OracleSpec& spec, RngSeed seed,
                                            SparsifyConfig cfg = {},
                                            std::span<const VertexId> coord_set = {}) {
    if (!g.is_connected()) throw ValidationError("sparsifier requires a connected graph");
    if (!(eps >= 0.0 && eps < 1.0)) throw ValidationError("eps must be in [0,1)");
    const double d = static_cast<double>(basis.dim());
    if (d < 1) throw ValidationError("basis dimension must be at least 1");

    SparsifierResult result;
    result.termination_threshold =
        eps > 0.0 ? cfg.c_term * spec.rho * spec.rho * d * std::log(std::max(d, 2.0)) / (eps * eps)
                  : std::numeric_limits<double>::infinity();

    WeightedGraph h = g;
    Rng rng(seed);
    const bool use_fast = spec.kind == OracleSpec::Kind::Fast && !coord_set.empty();
    std::size_t max_iter = cfg.max_iterations ? cfg.max_iterations : 50 * g.edge_count() + 200;

    for (std::size_t iter = 0;; ++iter) {
        if (static_cast<double>(h.edge_count()) < result.termination_threshold) break;
        if (iter >= max_iter)
            throw NumericalError("sparsifier did not reach the termination threshold after " +
                                 std::to_string(iter) + " iterations");

        AuditIterationRecord rec;
        rec.iteration = iter;
        rec.edges_before = h.edge_count();

        SplitConfig scfg;
        scfg.dense_cap = cfg.dense_cap;
        scfg.jl_eps = cfg.split_jl_eps;
        scfg.seed = rng.fork_seed(iter * 8 + 0);
        scfg.solver = cfg.solver;
        SplitPairing pairing = split(h, scfg);
        const WeightedGraph& i = pairing.split_graph;
        rec.split_edges = i.edge_count();

        // basis pushed through the minor and padded with zeros on fresh vertices
        Matrix yh = basis.projected(h);
        Matrix yi = Matrix::Zero(i.vertex_count(), yh.cols());
        yi.topRows(yh.rows()) = yh;

        std::vector<VertexId> s_on_i;
        if (use_fast) {
            std::vector<char> seen(h.vertex_count(), 0);
            for (VertexId v : coord_set) {
                VertexId img = h.image_of(v);
                if (!seen[img]) {
                    seen[img] = 1;
                    s_on_i.push_back(img);
                }
            }
            std::sort(s_on_i.begin(), s_on_i.end());
            if (s_on_i.size() < 2)
                throw NumericalError("demand vertex set collapsed to a single vertex");
        }

        OracleResult oracle = use_fast
                                  ? fast_oracle(i, s_on_i, spec, rng.fork_seed(iter * 8 + 1),
                                                cfg.solver)
                                  : slow_oracle(i, yi, cfg.solver);
        rec.oracle_size = oracle.z.size();
        if (oracle.z.empty())
            throw NumericalError("oracle returned an empty edge set at iteration " +
                                 std::to_string(iter));

        // at most one half per pair may be conditioned (ascending id keeps
        // the first half encountered)
        std::vector<EdgeId> filtered;
        {
            std::vector<char> taken(pairing.pairs.size(), 0);
            for (EdgeId id : oracle.z) {
                std::size_t p = static_cast<std::size_t>(id.value / 2);
                if (!taken[p]) {
                    taken[p] = 1;
                    filtered.push_back(id);
                }
            }
        }

        std::size_t k = std::min(spec.batch_size(i.edge_count(), i.vertex_count()),
                                 filtered.size());
        // partial Fisher-Yates; the sampled order is the conditioning order
        Rng pick = rng.fork(iter * 8 + 2);
        std::vector<EdgeId> batch;
        batch.reserve(k);
        for (std::size_t j = 0; j < k; ++j) {
            std::size_t sel = j + static_cast<std::size_t>(pick.below(filtered.size() - j));
            std::swap(filtered[j], filtered[sel]);
            batch.push_back(filtered[j]);
        }
        rec.batch_size = batch.size();

        SpanningTree tree = sample_ust(i, rng.fork_seed(iter * 8 + 3));

        std::vector<detail::BatchFate> fates;
        fates.reserve(batch.size());
        for (EdgeId id : batch)
            fates.push_back({&pairing.pair_of_half(id), tree.contains(id)});

        if (cfg.audit) {
            // replay the batch sequentially on the split graph, recording the
            // conditioned edge's exact leverage and energy fraction
            Matrix ynorm = SubspaceBasis::orthonormalized(i, yi, cfg.solver).columns();
            double energy_threshold =
                use_fast && oracle.localized
                    ? 16.0 * static_cast<double>(s_on_i.size()) /
                          static_cast<double>(oracle.localized->edges.size())
                    : spec.rho * d / static_cast<double>(i.edge_count());
            WeightedGraph it_graph = i;
            for (std::size_t j = 0; j < fates.size(); ++j) {
                EdgeId id = batch[j];
                if (!it_graph.has_edge(id)) continue;  // vanished through a cascade
                AuditStepRecord step;
                step.conditioned_edge = id.value;
                step.split_edge_count = it_graph.edge_count();
                step.exact_leverage = detail::exact_leverage(it_graph, id, cfg.solver);
                Matrix yt = project_columns(it_graph.certificate(), it_graph.vertex_count(), ynorm);
                LaplacianSolver st(it_graph, cfg.solver);
                Matrix ut = st.solve_many(yt, 1e-10);
                const Edge& ce = it_graph.edge(id);
                step.exact_energy_fraction =
                    (ut.row(ce.u) - ut.row(ce.v)).squaredNorm() * ce.weight;
                step.energy_threshold = energy_threshold;
                step.leverage_ok = step.exact_leverage >= 1.0 / 8.0 - 1e-12 &&
                                   step.exact_leverage <= 7.0 / 8.0 + 1e-12;
                step.energy_ok = step.exact_energy_fraction <= energy_threshold * (1 + 1e-12);
                rec.steps.push_back(step);
                MinorOp op =
                    fates[j].contracted ? MinorOp(OpContract{id}) : MinorOp(OpDelete{id});
                it_graph = it_graph.apply_ops(std::span(&op, 1));
            }
        }

        // pair-level ops on H: contracts, then deletes, then reweights
        std::vector<MinorOp> ops;
        auto push_kind = [&](auto select) {
            std::vector<const detail::BatchFate*> chosen;
            for (const auto& f : fates)
                if (select(detail::fate_op(f))) chosen.push_back(&f);
            std::sort(chosen.begin(), chosen.end(), [](auto* a, auto* b) {
                return a->pair->source < b->pair->source;
            });
            for (auto* f : chosen) ops.push_back(detail::fate_op(*f));
        };
        push_kind([](const MinorOp& op) { return std::holds_alternative<OpContract>(op); });
        push_kind([](const MinorOp& op) { return std::holds_alternative<OpDelete>(op); });
        push_kind([](const MinorOp& op) { return std::holds_alternative<OpReweight>(op); });

        WeightedGraph h_next = h.apply_ops(ops);
        rec.edges_after = h_next.edge_count();
        if (cfg.audit_distortion_each && h_next.vertex_count() <= cfg.dense_cap)
            rec.distortion_after = audit_distortion(basis, h_next, cfg.dense_cap);
        result.trace.iterations.push_back(std::move(rec));
        h = h_next;
        ++result.iterations;
    }

    result.output = h;
    return result;
}

/// Coordinate-subspace entry point: builds the |S|-1 dimensional basis of
/// R^S orthogonal to all-ones and enables the fast oracle.
inline SparsifierResult subspace_sparsifier(const WeightedGraph& g,
                                            std::span<const VertexId> s, double eps,
                                            const OracleSpec& spec, RngSeed seed,
                                            SparsifyConfig cfg = {}) {
    SubspaceBasis basis = make_coordinate_subspace(g, s, cfg.solver);
    std::vector<VertexId> sv(s.begin(), s.end());
    std::sort(sv.begin(), sv.end());
    sv.erase(std::unique(sv.begin(), sv.end()), sv.end());
    return subspace_sparsifier(g, basis, eps, spec, seed, cfg, sv);
}

}  // namespace subsparse
