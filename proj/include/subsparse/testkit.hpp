#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "subsparse/basis.hpp"
#include "subsparse/graph.hpp"
#include "subsparse/rng.hpp"
#include "subsparse/solver.hpp"
#include "subsparse/spanning_tree.hpp"

namespace subsparse {

/// Eigendecomposition-backed dense oracle for graphs under the dense cap.
/// Realizes every exact quantity the rest of the suite checks against.
class DenseOracle {
public:
    explicit DenseOracle(const WeightedGraph& g, std::uint32_t dense_cap = 500) : graph_(g) {
        if (g.vertex_count() > dense_cap) throw ValidationError("dense oracle cap exceeded");
        if (!g.is_connected()) throw ValidationError("dense oracle requires a connected graph");
        laplacian_ = laplacian_dense(g);
        Eigen::SelfAdjointEigenSolver<Matrix> es(laplacian_);
        if (es.info() != Eigen::Success) throw NumericalError("dense eigendecomposition failed");
        eigenvalues_ = es.eigenvalues();
        const Matrix& u = es.eigenvectors();
        double lmax = eigenvalues_.cwiseAbs().maxCoeff();
        double cut = std::max(lmax, 1.0) * 1e-12;
        Vector inv = Vector::Zero(eigenvalues_.size());
        for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i)
            if (eigenvalues_[i] > cut) inv[i] = 1.0 / eigenvalues_[i];
        pinv_ = u * inv.asDiagonal() * u.transpose();
    }

    const WeightedGraph& graph() const { return graph_; }
    const Matrix& laplacian() const { return laplacian_; }
    const Matrix& pinv() const { return pinv_; }
    const Vector& eigenvalues() const { return eigenvalues_; }

    double quadform(const Vector& x, const Vector& y) const { return x.dot(pinv_ * y); }

    double resistance(VertexId u, VertexId v) const {
        if (u == v) return 0.0;  // convention, simplifies batch callers
        Vector b = pair_vector(graph_.vertex_count(), u, v);
        return quadform(b, b);
    }

    double leverage(EdgeId id) const {
        const Edge& e = graph_.edge(id);
        return e.weight * resistance(e.u, e.v);
    }

    std::vector<double> leverages() const {
        std::vector<double> out;
        out.reserve(graph_.edge_count());
        for (const Edge& e : graph_.edges()) out.push_back(e.weight * resistance(e.u, e.v));
        return out;
    }

    /// m x m matrix with entries b_e^T L^+ b_f / (sqrt(r_e) sqrt(r_f)).
    Matrix coupling() const {
        const auto edges = graph_.edges();
        const Eigen::Index m = static_cast<Eigen::Index>(edges.size());
        Matrix bw = Matrix::Zero(graph_.vertex_count(), m);
        for (Eigen::Index j = 0; j < m; ++j) {
            double s = std::sqrt(edges[j].weight);
            bw(edges[j].u, j) = s;
            bw(edges[j].v, j) = -s;
        }
        return bw.transpose() * pinv_ * bw;
    }

    /// Off-diagonal absolute column sums of coupling(), one per edge.
    std::vector<double> localization_column_sums() const {
        Matrix c = coupling().cwiseAbs();
        std::vector<double> out(c.rows());
        for (Eigen::Index i = 0; i < c.rows(); ++i) out[i] = c.row(i).sum() - c(i, i);
        return out;
    }

    /// Max-energy fractions b_e^T L^+ Y Y^T L^+ b_e / r_e for an
    /// L^+-orthonormal basis Y living on this graph.
    std::vector<double> energy_fractions(const Matrix& y) const {
        Matrix u = pinv_ * y;
        std::vector<double> out;
        out.reserve(graph_.edge_count());
        for (const Edge& e : graph_.edges())
            out.push_back((u.row(e.u) - u.row(e.v)).squaredNorm() * e.weight);
        return out;
    }

private:
    WeightedGraph graph_;
    Matrix laplacian_;
    Matrix pinv_;
    Vector eigenvalues_;
};

inline Matrix dense_pinv(const WeightedGraph& g, std::uint32_t dense_cap = 500) {
    return DenseOracle(g, dense_cap).pinv();
}

// ---------------------------------------------------------------------------
// Paper-identity checks

struct IdentityCheck {
    std::string name;
    double residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct IdentityReport {
    std::vector<IdentityCheck> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline Matrix centered_injection(std::uint32_t n, std::span<const VertexId> s) {
    const Eigen::Index k = static_cast<Eigen::Index>(s.size());
    Matrix c = Matrix::Zero(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        c(s[j], j) += 1.0;
        for (Eigen::Index i = 0; i < k; ++i) c(s[i], j) -= 1.0 / static_cast<double>(k);
    }
    return c;
}

inline Matrix dense_sym_pinv(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    double cut = std::max(lmax, 1.0) * 1e-12;
    Vector inv = Vector::Zero(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        if (std::abs(es.eigenvalues()[i]) > cut) inv[i] = 1.0 / es.eigenvalues()[i];
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Exact decrease of b_e^T L^+ b_e caused by identifying S, in resistance
/// units, by direct dense computation on G and G/S.
inline double identification_gap_exact(const WeightedGraph& g, std::span<const VertexId> s,
                                       EdgeId e, std::uint32_t dense_cap = 500) {
    DenseOracle before(g, dense_cap);
    const Edge& edge = g.edge(e);
    double r_before = before.resistance(edge.u, edge.v);
    std::vector<VertexId> sv(s.begin(), s.end());
    std::sort(sv.begin(), sv.end());
    sv.erase(std::unique(sv.begin(), sv.end()), sv.end());
    if (sv.size() <= 1) return 0.0;  // identification of one vertex is a no-op
    WeightedGraph quot = g.identify_vertices(sv);
    if (!quot.has_edge(e)) return r_before;  // endpoints identified; residual resistance 0
    const Edge& qe = quot.edge(e);
    DenseOracle after(quot, dense_cap);
    return r_before - after.resistance(qe.u, qe.v);
}

/// Exact identification gaps for every edge at once (resistance units),
/// from one dense oracle per side. Edges whose endpoints are identified
/// keep their full resistance as the gap.
inline std::vector<double> identification_gaps_exact(const WeightedGraph& g,
                                                     std::span<const VertexId> s,
                                                     std::uint32_t dense_cap = 500) {
    DenseOracle before(g, dense_cap);
    std::vector<VertexId> sv(s.begin(), s.end());
    std::sort(sv.begin(), sv.end());
    sv.erase(std::unique(sv.begin(), sv.end()), sv.end());
    std::vector<double> out;
    out.reserve(g.edge_count());
    if (sv.size() <= 1) {
        for (const Edge& e : g.edges()) out.push_back(0.0);
        return out;
    }
    WeightedGraph quot = g.identify_vertices(sv);
    DenseOracle after(quot, dense_cap);
    for (const Edge& e : g.edges()) {
        double r_before = before.resistance(e.u, e.v);
        if (!quot.has_edge(e.id)) {
            out.push_back(r_before);
            continue;
        }
        const Edge& qe = quot.edge(e.id);
        out.push_back(r_before - after.resistance(qe.u, qe.v));
    }
    return out;
}

/// Dense pass/fail report for the pseudoinverse/Schur/rank-one identities.
inline IdentityReport verify_identities(const WeightedGraph& g, std::span<const VertexId> s,
                                        const SubspaceBasis& basis, double tol = 1e-8,
                                        std::uint32_t dense_cap = 500, RngSeed seed = {12345}) {
    IdentityReport report;
    DenseOracle oracle(g, dense_cap);
    const Matrix& pinv = oracle.pinv();
    const std::uint32_t n = g.vertex_count();
    Rng rng(seed);

    std::vector<VertexId> sv(s.begin(), s.end());
    std::sort(sv.begin(), sv.end());
    sv.erase(std::unique(sv.begin(), sv.end()), sv.end());

    auto add = [&](std::string name, double residual, double tolerance) {
        report.checks.push_back({std::move(name), residual, tolerance, residual <= tolerance});
    };

    // Schur complement vs centered pseudoinverse block
    if (!sv.empty() && sv.size() < n) {
        const Eigen::Index k = static_cast<Eigen::Index>(sv.size());
        Matrix sub(k, k);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = pinv(sv[i], sv[j]);
        Matrix center = Matrix::Identity(k, k) - Matrix::Constant(k, k, 1.0 / static_cast<double>(k));
        Matrix lhs = center * sub * center;
        Matrix scp = detail::dense_sym_pinv(schur_complement_dense(g, sv, dense_cap));
        add("schur_inverse_block", (lhs - scp).norm(), tol * std::max(scp.norm(), 1e-30));
    } else if (sv.size() == n) {
        // P = I case: centered L^+ equals L^+ on the centered subspace
        Matrix center = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
        add("schur_inverse_block", (center * pinv * center - pinv).norm(),
            tol * std::max(pinv.norm(), 1e-30));
    }

    // random centered probes for the rank-one update identities
    Vector d1(n), d2(n);
    for (std::uint32_t i = 0; i < n; ++i) d1[i] = rng.uniform() - 0.5;
    for (std::uint32_t i = 0; i < n; ++i) d2[i] = rng.uniform() - 0.5;
    d1.array() -= d1.mean();
    d2.array() -= d2.mean();

    // Sherman-Morrison, deletion of a non-bridge edge
    const Edge* nonbridge = nullptr;
    const Edge* anyedge = nullptr;
    for (const Edge& e : g.edges()) {
        anyedge = &e;
        if (oracle.leverage(e.id) < 1.0 - 1e-7) {
            nonbridge = &e;
            break;
        }
    }
    if (nonbridge) {
        const Edge& f = *nonbridge;
        Vector bf = pair_vector(n, f.u, f.v);
        double rf = 1.0 / f.weight;
        double predicted = d1.dot(pinv * d2) +
                           (d1.dot(pinv * bf)) * (bf.dot(pinv * d2)) / (rf - bf.dot(pinv * bf));
        WeightedGraph del = g.delete_edge(f.id);
        double direct = del.is_connected() ? DenseOracle(del, dense_cap).quadform(d1, d2)
                                           : predicted;  // bridge slipped through; skip
        add("sherman_morrison_delete", std::abs(predicted - direct),
            tol * std::max({std::abs(direct), std::abs(predicted), 1e-12}));
    }

    // Sherman-Morrison, contraction
    if (anyedge) {
        const Edge& f = *anyedge;
        Vector bf = pair_vector(n, f.u, f.v);
        double denom = bf.dot(pinv * bf);
        double predicted = d1.dot(pinv * d2) - (d1.dot(pinv * bf)) * (bf.dot(pinv * d2)) / denom;
        WeightedGraph con = g.contract_edge(f.id);
        Matrix p1 = project_columns(con.certificate(), con.vertex_count(), d1);
        Matrix p2 = project_columns(con.certificate(), con.vertex_count(), d2);
        double direct = DenseOracle(con, dense_cap).quadform(p1.col(0), p2.col(0));
        add("sherman_morrison_contract", std::abs(predicted - direct),
            tol * std::max({std::abs(direct), std::abs(predicted), 1e-12}));
    }

    // Woodbury form of the identification gap, on a handful of edges
    if (sv.size() >= 2 && sv.size() < n) {
        Matrix c = detail::centered_injection(n, sv);
        Matrix core = detail::dense_sym_pinv(c.transpose() * pinv * c);
        double worst = 0.0, scale = 1e-12;
        std::size_t step = std::max<std::size_t>(1, g.edge_count() / 8);
        for (std::size_t i = 0; i < g.edge_count(); i += step) {
            const Edge& e = g.edges()[i];
            Vector be = pair_vector(n, e.u, e.v);
            Vector w = c.transpose() * (pinv * be);
            double wood = w.dot(core * w);
            double gap = identification_gap_exact(g, sv, e.id, dense_cap);
            worst = std::max(worst, std::abs(wood - gap));
            scale = std::max({scale, std::abs(gap), std::abs(wood)});
        }
        add("identification_gap_woodbury", worst, tol * scale);
    }

    // trace identity: energy fractions of an L^+-orthonormal basis sum to d
    {
        std::vector<double> energies = oracle.energy_fractions(basis.columns());
        double total = 0;
        for (double v : energies) total += v;
        double d = static_cast<double>(basis.dim());
        add("energy_sum_equals_dim", std::abs(total - d), tol * std::max(d, 1.0));
    }

    return report;
}

// ---------------------------------------------------------------------------
// Random-graph corpus

inline WeightedGraph make_graph(std::uint32_t n,
                                std::vector<std::tuple<VertexId, VertexId, double>> edges) {
    return WeightedGraph::from_edges(n, edges);
}

inline double log_uniform_weight(Rng& rng) { return std::exp2(rng.uniform() * 8.0 - 4.0); }

inline WeightedGraph gen_path(std::uint32_t n, Rng* weights = nullptr) {
    std::vector<std::tuple<VertexId, VertexId, double>> e;
    for (std::uint32_t i = 0; i + 1 < n; ++i)
        e.emplace_back(i, i + 1, weights ? log_uniform_weight(*weights) : 1.0);
    return make_graph(n, std::move(e));
}

inline WeightedGraph gen_cycle(std::uint32_t n, Rng* weights = nullptr) {
    std::vector<std::tuple<VertexId, VertexId, double>> e;
    for (std::uint32_t i = 0; i < n; ++i)
        e.emplace_back(i, (i + 1) % n, weights ? log_uniform_weight(*weights) : 1.0);
    return make_graph(n, std::move(e));
}

inline WeightedGraph gen_star(std::uint32_t n, Rng* weights = nullptr) {
    std::vector<std::tuple<VertexId, VertexId, double>> e;
    for (std::uint32_t i = 1; i < n; ++i)
        e.emplace_back(0, i, weights ? log_uniform_weight(*weights) : 1.0);
    return make_graph(n, std::move(e));
}

inline WeightedGraph gen_complete(std::uint32_t n, Rng* weights = nullptr) {
    std::vector<std::tuple<VertexId, VertexId, double>> e;
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j)
            e.emplace_back(i, j, weights ? log_uniform_weight(*weights) : 1.0);
    return make_graph(n, std::move(e));
}

/// Two cliques of size k joined by a single edge; stresses leverage extremes.
inline WeightedGraph gen_dumbbell(std::uint32_t k, Rng* weights = nullptr) {
    std::vector<std::tuple<VertexId, VertexId, double>> e;
    auto w = [&] { return weights ? log_uniform_weight(*weights) : 1.0; };
    for (std::uint32_t i = 0; i < k; ++i)
        for (std::uint32_t j = i + 1; j < k; ++j) e.emplace_back(i, j, w());
    for (std::uint32_t i = 0; i < k; ++i)
        for (std::uint32_t j = i + 1; j < k; ++j) e.emplace_back(k + i, k + j, w());
    e.emplace_back(k - 1, k, w());
    return make_graph(2 * k, std::move(e));
}

/// Cycle plus `chords` random chords: connected by construction with
/// exactly n + chords edges.
inline WeightedGraph gen_ring_chords(std::uint32_t n, std::uint32_t chords, Rng& rng,
                                     bool weighted = false) {
    std::vector<std::tuple<VertexId, VertexId, double>> e;
    for (std::uint32_t i = 0; i < n; ++i)
        e.emplace_back(i, (i + 1) % n, weighted ? log_uniform_weight(rng) : 1.0);
    std::uint32_t added = 0;
    while (added < chords) {
        VertexId a = static_cast<VertexId>(rng.below(n));
        VertexId b = static_cast<VertexId>(rng.below(n));
        if (a == b) continue;
        e.emplace_back(a, b, weighted ? log_uniform_weight(rng) : 1.0);
        ++added;
    }
    return make_graph(n, std::move(e));
}

/// G(n, min(1, c ln n / n)) conditioned on connectivity.
inline WeightedGraph gen_erdos_renyi(std::uint32_t n, Rng& rng, bool weighted = false,
                                     double density_factor = 3.0) {
    double p = std::min(1.0, density_factor * std::log(std::max<double>(n, 2)) / n);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<std::tuple<VertexId, VertexId, double>> e;
        for (std::uint32_t i = 0; i < n; ++i)
            for (std::uint32_t j = i + 1; j < n; ++j)
                if (rng.uniform() < p) e.emplace_back(i, j, weighted ? log_uniform_weight(rng) : 1.0);
        WeightedGraph g = make_graph(n, std::move(e));
        if (g.is_connected()) return g;
    }
    throw NumericalError("failed to sample a connected random graph");
}

/// Connected graphs with n <= 7 and m <= 20: structured families plus random
/// ones, unit and log-uniform weighted. At least 200 graphs.
inline std::vector<WeightedGraph> small_corpus(RngSeed seed = {20240601}) {
    std::vector<WeightedGraph> out;
    Rng rng(seed);
    for (int pass = 0; pass < 2; ++pass) {
        Rng* w = pass ? &rng : nullptr;
        for (std::uint32_t n = 2; n <= 7; ++n) out.push_back(gen_path(n, w));
        for (std::uint32_t n = 3; n <= 7; ++n) out.push_back(gen_cycle(n, w));
        for (std::uint32_t n = 3; n <= 7; ++n) out.push_back(gen_star(n, w));
        for (std::uint32_t n = 3; n <= 6; ++n) out.push_back(gen_complete(n, w));
        out.push_back(gen_dumbbell(3, w));
        // parallel-edge stress cases
        out.push_back(make_graph(2, {{0, 1, 1.0}, {0, 1, w ? log_uniform_weight(*w) : 3.0}}));
        out.push_back(make_graph(3, {{0, 1, 1.0}, {0, 1, 2.0}, {1, 2, w ? log_uniform_weight(*w) : 1.0}}));
    }
    while (out.size() < 210) {
        std::uint32_t n = 4 + static_cast<std::uint32_t>(rng.below(4));
        WeightedGraph g = gen_erdos_renyi(n, rng, rng.coin(), 3.5);
        if (g.edge_count() <= 20) out.push_back(g);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fixtures: one record per line, `sha(graph) quantity value`.

inline std::uint64_t graph_hash(const WeightedGraph& g) {
    std::ostringstream os;
    write_graph(os, g);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : os.str()) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

class FixtureStore {
public:
    FixtureStore() = default;

    static FixtureStore load(const std::string& path) {
        FixtureStore store;
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open fixtures file: " + path);
        std::string hash, quantity;
        double value;
        while (in >> hash >> quantity >> value) store.values_[{hash, quantity}] = value;
        return store;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        char buf[64];
        for (const auto& [key, value] : values_) {
            std::snprintf(buf, sizeof buf, "%.17g", value);
            out << key.first << ' ' << key.second << ' ' << buf << '\n';
        }
    }

    void set(const WeightedGraph& g, const std::string& quantity, double value) {
        values_[{hash_hex(g), quantity}] = value;
    }

    bool has(const WeightedGraph& g, const std::string& quantity) const {
        return values_.count({hash_hex(g), quantity}) > 0;
    }

    double get(const WeightedGraph& g, const std::string& quantity) const {
        auto it = values_.find({hash_hex(g), quantity});
        if (it == values_.end())
            throw ValidationError("missing fixture: " + quantity + " for graph " + hash_hex(g));
        return it->second;
    }

    std::size_t size() const { return values_.size(); }

    static std::string hash_hex(const WeightedGraph& g) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(graph_hash(g)));
        return buf;
    }

private:
    std::map<std::pair<std::string, std::string>, double> values_;
};

// ---------------------------------------------------------------------------
// Audit instrumentation shared with the sparsifier driver.

struct AuditStepRecord {
    std::uint64_t conditioned_edge = 0;  // id in the split graph
    double exact_leverage = 0.0;
    double exact_energy_fraction = 0.0;
    double energy_threshold = 0.0;
    std::size_t split_edge_count = 0;
    bool leverage_ok = false;
    bool energy_ok = false;
};

struct AuditIterationRecord {
    std::size_t iteration = 0;
    std::size_t edges_before = 0;
    std::size_t edges_after = 0;
    std::size_t split_edges = 0;
    std::size_t oracle_size = 0;
    std::size_t batch_size = 0;
    double distortion_after = -1.0;  // -1 when not measured
    std::vector<AuditStepRecord> steps;
};

struct AuditTrace {
    std::vector<AuditIterationRecord> iterations;

    std::size_t total_steps() const {
        std::size_t s = 0;
        for (const auto& it : iterations) s += it.steps.size();
        return s;
    }
    std::size_t violations() const {
        std::size_t s = 0;
        for (const auto& it : iterations)
            for (const auto& st : it.steps)
                if (!st.leverage_ok || !st.energy_ok) ++s;
        return s;
    }
};

}  // namespace subsparse
