#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace subsparse {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Malformed input files (carries a line number in the message).
struct ParseError : Error {
    using Error::Error;
};
// Contract violations: bad weights, unknown ids, disconnected input to a
// spectral operation, caps exceeded.
struct ValidationError : Error {
    using Error::Error;
};
// Solver breakdown / nonconvergence.
struct NumericalError : Error {
    using Error::Error;
};

using VertexId = std::uint32_t;

/// Stable edge identity. Unique within a graph lineage; survives every
/// surgery that keeps the edge and is never reused after deletion.
struct EdgeId {
    std::uint64_t value = 0;
    friend auto operator<=>(const EdgeId&, const EdgeId&) = default;
};

struct Edge {
    EdgeId id;
    VertexId u = 0;
    VertexId v = 0;
    double weight = 0.0;

    VertexId other(VertexId x) const { return x == u ? v : u; }
};

/// One entry of a minor certificate's operation log.
struct OpDelete {
    EdgeId edge;
};
struct OpContract {
    EdgeId edge;
};
struct OpReweight {
    EdgeId edge;
    double old_weight;
    double new_weight;
};
/// Vertex-set identification (G/S). Not a minor operation, but logged so
/// every certificate stays replayable.
struct OpIdentify {
    std::vector<VertexId> vertices;  // original-graph vertex ids
};
using MinorOp = std::variant<OpDelete, OpContract, OpReweight, OpIdentify>;

/// Contraction map phi plus the operation log that produced the current
/// graph from the lineage root. phi is total and surjective onto the
/// current vertex set; replaying op_log from the root reproduces the
/// current graph exactly.
struct MinorCertificate {
    std::uint32_t original_vertex_count = 0;
    std::vector<VertexId> phi;  // size original_vertex_count, values in [0, n_current)
    std::vector<MinorOp> op_log;
};

namespace detail {

// Build-once-read-many slot for solver-side caches attached to a graph
// snapshot. Duplicate builds are acceptable; the first stored value wins.
class CacheSlot {
public:
    template <class T, class Build>
    std::shared_ptr<const T> get_or_build(Build&& build) const {
        {
            std::lock_guard lock(mutex_);
            if (value_) return std::static_pointer_cast<const T>(value_);
        }
        std::shared_ptr<const T> built = build();
        std::lock_guard lock(mutex_);
        if (!value_) value_ = built;
        return std::static_pointer_cast<const T>(value_);
    }

private:
    mutable std::mutex mutex_;
    mutable std::shared_ptr<const void> value_;
};

struct GraphImpl {
    std::uint32_t n = 0;
    std::vector<Edge> edges;                        // ascending EdgeId
    std::vector<std::vector<std::uint32_t>> adjacency;  // vertex -> indices into edges
    bool connected = false;
    std::uint64_t next_edge_id = 0;
    MinorCertificate certificate;
    CacheSlot solver_cache;

    void rebuild_index() {
        adjacency.assign(n, {});
        for (std::uint32_t i = 0; i < edges.size(); ++i) {
            adjacency[edges[i].u].push_back(i);
            if (edges[i].v != edges[i].u) adjacency[edges[i].v].push_back(i);
        }
        connected = compute_connected();
    }

    bool compute_connected() const {
        if (n == 0) return false;
        std::vector<char> seen(n, 0);
        std::vector<VertexId> stack{0};
        seen[0] = 1;
        std::size_t found = 1;
        while (!stack.empty()) {
            VertexId x = stack.back();
            stack.pop_back();
            for (std::uint32_t idx : adjacency[x]) {
                VertexId y = edges[idx].other(x);
                if (!seen[y]) {
                    seen[y] = 1;
                    ++found;
                    stack.push_back(y);
                }
            }
        }
        return found == n;
    }
};

}  // namespace detail

/// Weighted undirected multigraph with value semantics. Surgeries return
/// new snapshots; existing snapshots are never mutated and are safe to
/// share across threads. Parallel edges are kept, self-loops never stored.
class WeightedGraph {
public:
    WeightedGraph() : impl_(std::make_shared<detail::GraphImpl>()) {}

    static WeightedGraph from_edges(std::span<const std::tuple<VertexId, VertexId, double>> list);
    static WeightedGraph from_edges(std::uint32_t n,
                                    std::span<const std::tuple<VertexId, VertexId, double>> list);

    std::uint32_t vertex_count() const { return impl_->n; }
    std::size_t edge_count() const { return impl_->edges.size(); }
    std::span<const Edge> edges() const { return impl_->edges; }
    bool is_connected() const { return impl_->connected; }

    bool has_edge(EdgeId id) const { return find_edge(id) != nullptr; }

    const Edge& edge(EdgeId id) const {
        const Edge* e = find_edge(id);
        if (!e) throw ValidationError("unknown edge id " + std::to_string(id.value));
        return *e;
    }

    /// Indices into edges() of the edges incident to x.
    std::span<const std::uint32_t> incident(VertexId x) const {
        if (x >= impl_->n) throw ValidationError("vertex out of range");
        return impl_->adjacency[x];
    }

    const MinorCertificate& certificate() const { return impl_->certificate; }

    double total_weight() const {
        double s = 0;
        for (const Edge& e : impl_->edges) s += e.weight;
        return s;
    }

    WeightedGraph delete_edge(EdgeId id) const;
    WeightedGraph contract_edge(EdgeId id) const;
    WeightedGraph identify_vertices(std::span<const VertexId> vertices) const;
    WeightedGraph reweight_edge(EdgeId id, double new_weight) const;

    /// Applies several surgeries as one snapshot step, logging each op.
    /// Ops are applied in order; targets that vanished through an earlier
    /// self-loop cascade are skipped.
    WeightedGraph apply_ops(std::span<const MinorOp> ops) const;

    /// Image of an original (lineage-root) vertex under phi.
    VertexId image_of(VertexId original) const {
        if (original >= impl_->certificate.original_vertex_count)
            throw ValidationError("vertex out of range for certificate");
        return impl_->certificate.phi[original];
    }

    detail::CacheSlot& solver_cache() const { return impl_->solver_cache; }

    /// Stable identity of the underlying snapshot (used for cache keying).
    const void* snapshot_key() const { return impl_.get(); }

private:
    const Edge* find_edge(EdgeId id) const {
        auto it = std::lower_bound(impl_->edges.begin(), impl_->edges.end(), id,
                                   [](const Edge& e, EdgeId key) { return e.id < key; });
        if (it == impl_->edges.end() || it->id != id) return nullptr;
        return &*it;
    }

    explicit WeightedGraph(std::shared_ptr<detail::GraphImpl> impl) : impl_(std::move(impl)) {}

    std::shared_ptr<detail::GraphImpl> modified_copy() const {
        auto copy = std::make_shared<detail::GraphImpl>();
        copy->n = impl_->n;
        copy->edges = impl_->edges;
        copy->next_edge_id = impl_->next_edge_id;
        copy->certificate = impl_->certificate;
        return copy;
    }

    // Merge every vertex in `group` (current ids) into min(group), then
    // compact vertex ids order-preservingly. Drops resulting self-loops.
    static void merge_group(detail::GraphImpl& g, std::vector<VertexId> group);

    std::shared_ptr<detail::GraphImpl> impl_;
};

inline WeightedGraph WeightedGraph::from_edges(
    std::uint32_t n, std::span<const std::tuple<VertexId, VertexId, double>> list) {
    auto impl = std::make_shared<detail::GraphImpl>();
    impl->n = n;
    for (auto [u, v, w] : list) {
        if (!(w > 0.0) || !std::isfinite(w))
            throw ValidationError("edge weight must be positive and finite");
        if (u >= n || v >= n) throw ValidationError("edge endpoint out of range");
        if (u == v) continue;  // self-loops never stored
        impl->edges.push_back(Edge{EdgeId{impl->next_edge_id++}, u, v, w});
    }
    impl->certificate.original_vertex_count = n;
    impl->certificate.phi.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) impl->certificate.phi[i] = i;
    impl->rebuild_index();
    return WeightedGraph(std::move(impl));
}

inline WeightedGraph WeightedGraph::from_edges(
    std::span<const std::tuple<VertexId, VertexId, double>> list) {
    std::uint32_t n = 0;
    for (auto [u, v, w] : list) n = std::max({n, u + 1, v + 1});
    return from_edges(n, list);
}

inline void WeightedGraph::merge_group(detail::GraphImpl& g, std::vector<VertexId> group) {
    std::sort(group.begin(), group.end());
    group.erase(std::unique(group.begin(), group.end()), group.end());
    for (VertexId x : group)
        if (x >= g.n) throw ValidationError("vertex out of range");
    if (group.size() <= 1 && !group.empty()) return;  // identification of one vertex is a no-op
    if (group.empty()) throw ValidationError("empty vertex set");

    VertexId target = group.front();
    std::vector<char> merged(g.n, 0);
    for (VertexId x : group) merged[x] = 1;

    // order-preserving compaction of surviving vertex ids
    std::vector<VertexId> remap(g.n);
    VertexId next = 0;
    for (VertexId x = 0; x < g.n; ++x) {
        if (merged[x] && x != target) continue;
        remap[x] = next++;
    }
    for (VertexId x = 0; x < g.n; ++x)
        if (merged[x]) remap[x] = remap[target];

    std::vector<Edge> kept;
    kept.reserve(g.edges.size());
    for (Edge e : g.edges) {
        e.u = remap[e.u];
        e.v = remap[e.v];
        if (e.u == e.v) continue;
        kept.push_back(e);
    }
    g.edges = std::move(kept);
    g.n = next;
    for (VertexId& p : g.certificate.phi) p = remap[p];
}

inline WeightedGraph WeightedGraph::delete_edge(EdgeId id) const {
    const Edge* e = find_edge(id);
    if (!e) throw ValidationError("unknown edge id " + std::to_string(id.value));
    auto impl = modified_copy();
    std::erase_if(impl->edges, [&](const Edge& x) { return x.id == id; });
    impl->certificate.op_log.push_back(OpDelete{id});
    impl->rebuild_index();
    return WeightedGraph(std::move(impl));
}

inline WeightedGraph WeightedGraph::contract_edge(EdgeId id) const {
    const Edge* e = find_edge(id);
    if (!e) throw ValidationError("unknown edge id " + std::to_string(id.value));
    auto impl = modified_copy();
    merge_group(*impl, {e->u, e->v});
    impl->certificate.op_log.push_back(OpContract{id});
    impl->rebuild_index();
    return WeightedGraph(std::move(impl));
}

inline WeightedGraph WeightedGraph::identify_vertices(std::span<const VertexId> vertices) const {
    if (vertices.empty()) throw ValidationError("empty vertex set");
    auto impl = modified_copy();
    std::vector<VertexId> group(vertices.begin(), vertices.end());
    merge_group(*impl, group);
    std::sort(group.begin(), group.end());
    group.erase(std::unique(group.begin(), group.end()), group.end());
    impl->certificate.op_log.push_back(OpIdentify{std::move(group)});
    impl->rebuild_index();
    return WeightedGraph(std::move(impl));
}

inline WeightedGraph WeightedGraph::reweight_edge(EdgeId id, double new_weight) const {
    if (!(new_weight > 0.0) || !std::isfinite(new_weight))
        throw ValidationError("edge weight must be positive and finite");
    const Edge* e = find_edge(id);
    if (!e) throw ValidationError("unknown edge id " + std::to_string(id.value));
    auto impl = modified_copy();
    for (Edge& x : impl->edges)
        if (x.id == id) {
            impl->certificate.op_log.push_back(OpReweight{id, x.weight, new_weight});
            x.weight = new_weight;
        }
    impl->rebuild_index();
    return WeightedGraph(std::move(impl));
}

inline WeightedGraph WeightedGraph::apply_ops(std::span<const MinorOp> ops) const {
    auto impl = modified_copy();
    auto alive = [&](EdgeId id) {
        return std::any_of(impl->edges.begin(), impl->edges.end(),
                           [&](const Edge& e) { return e.id == id; });
    };
    for (const MinorOp& op : ops) {
        if (const auto* d = std::get_if<OpDelete>(&op)) {
            if (!alive(d->edge)) continue;
            std::erase_if(impl->edges, [&](const Edge& x) { return x.id == d->edge; });
            impl->certificate.op_log.push_back(*d);
        } else if (const auto* c = std::get_if<OpContract>(&op)) {
            auto it = std::find_if(impl->edges.begin(), impl->edges.end(),
                                   [&](const Edge& x) { return x.id == c->edge; });
            if (it == impl->edges.end()) continue;
            merge_group(*impl, {it->u, it->v});
            impl->certificate.op_log.push_back(*c);
        } else if (const auto* r = std::get_if<OpReweight>(&op)) {
            bool found = false;
            for (Edge& x : impl->edges)
                if (x.id == r->edge) {
                    x.weight = r->new_weight;
                    found = true;
                }
            if (found) impl->certificate.op_log.push_back(*r);
        } else if (const auto* s = std::get_if<OpIdentify>(&op)) {
            // ids in the log are original-graph ids; map through phi
            std::vector<VertexId> group;
            group.reserve(s->vertices.size());
            for (VertexId x : s->vertices) group.push_back(impl->certificate.phi[x]);
            merge_group(*impl, std::move(group));
            impl->certificate.op_log.push_back(*s);
        }
    }
    impl->rebuild_index();
    return WeightedGraph(std::move(impl));
}

/// Replays a certificate's op log against the lineage root.
inline WeightedGraph replay_certificate(const WeightedGraph& root, const MinorCertificate& cert) {
    return root.apply_ops(cert.op_log);
}

inline bool same_graph(const WeightedGraph& a, const WeightedGraph& b) {
    if (a.vertex_count() != b.vertex_count() || a.edge_count() != b.edge_count()) return false;
    auto ea = a.edges();
    auto eb = b.edges();
    for (std::size_t i = 0; i < ea.size(); ++i) {
        if (ea[i].id != eb[i].id || ea[i].weight != eb[i].weight) return false;
        VertexId au = std::min(ea[i].u, ea[i].v), av = std::max(ea[i].u, ea[i].v);
        VertexId bu = std::min(eb[i].u, eb[i].v), bv = std::max(eb[i].u, eb[i].v);
        if (au != bu || av != bv) return false;
    }
    return a.certificate().phi == b.certificate().phi;
}

// ---------------------------------------------------------------------------
// Text graph format: first line "n m", then m lines "u v w". '#' comments.

WeightedGraph read_graph(std::istream& in);
void write_graph(std::ostream& out, const WeightedGraph& g);

namespace detail {
inline bool strip_comment_blank(std::string& line) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    return line.find_first_not_of(" \t\r\n") != std::string::npos;
}
}  // namespace detail

inline WeightedGraph read_graph(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next_content = [&](std::string& out) {
        while (std::getline(in, line)) {
            ++lineno;
            if (detail::strip_comment_blank(line)) {
                out = line;
                return true;
            }
        }
        return false;
    };
    std::string header;
    if (!next_content(header)) throw ParseError("empty graph file");
    std::istringstream hs(header);
    std::int64_t n = -1, m = -1;
    if (!(hs >> n >> m) || n < 0 || m < 0)
        throw ParseError("line " + std::to_string(lineno) + ": expected 'n m' header");
    std::vector<std::tuple<VertexId, VertexId, double>> list;
    list.reserve(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        std::string row;
        if (!next_content(row))
            throw ParseError("unexpected end of file: expected " + std::to_string(m) + " edges");
        std::istringstream rs(row);
        std::int64_t u, v;
        double w;
        if (!(rs >> u >> v >> w))
            throw ParseError("line " + std::to_string(lineno) + ": expected 'u v w'");
        if (u < 0 || u >= n || v < 0 || v >= n)
            throw ParseError("line " + std::to_string(lineno) + ": vertex id out of range");
        if (!(w > 0.0) || !std::isfinite(w))
            throw ParseError("line " + std::to_string(lineno) + ": weight must be positive");
        list.emplace_back(static_cast<VertexId>(u), static_cast<VertexId>(v), w);
    }
    return WeightedGraph::from_edges(static_cast<std::uint32_t>(n), list);
}

inline void write_graph(std::ostream& out, const WeightedGraph& g) {
    out << g.vertex_count() << ' ' << g.edge_count() << '\n';
    char buf[64];
    for (const Edge& e : g.edges()) {
        std::snprintf(buf, sizeof buf, "%.17g", e.weight);
        out << e.u << ' ' << e.v << ' ' << buf << '\n';
    }
}

// ---------------------------------------------------------------------------
// Certificate format: vertex map plus replayable op log.
//   minor-certificate v1
//   original <n> current <m>
//   phi <n values>
//   ops <count>
//   D <edge> | C <edge> | R <edge> <old> <new> | I <k> <vertices...>

inline void write_certificate(std::ostream& out, const MinorCertificate& cert) {
    std::uint32_t current = 0;
    for (VertexId v : cert.phi) current = std::max(current, v + 1);
    out << "minor-certificate v1\n";
    out << "original " << cert.original_vertex_count << " current " << current << '\n';
    out << "phi";
    for (VertexId v : cert.phi) out << ' ' << v;
    out << '\n';
    out << "ops " << cert.op_log.size() << '\n';
    char buf[64];
    for (const MinorOp& op : cert.op_log) {
        if (const auto* d = std::get_if<OpDelete>(&op)) {
            out << "D " << d->edge.value << '\n';
        } else if (const auto* c = std::get_if<OpContract>(&op)) {
            out << "C " << c->edge.value << '\n';
        } else if (const auto* r = std::get_if<OpReweight>(&op)) {
            out << "R " << r->edge.value;
            std::snprintf(buf, sizeof buf, " %.17g", r->old_weight);
            out << buf;
            std::snprintf(buf, sizeof buf, " %.17g", r->new_weight);
            out << buf << '\n';
        } else if (const auto* s = std::get_if<OpIdentify>(&op)) {
            out << "I " << s->vertices.size();
            for (VertexId v : s->vertices) out << ' ' << v;
            out << '\n';
        }
    }
}

inline MinorCertificate read_certificate(std::istream& in) {
    MinorCertificate cert;
    std::string word;
    if (!(in >> word) || word != "minor-certificate") throw ParseError("not a certificate file");
    in >> word;  // version
    std::uint32_t current = 0;
    if (!(in >> word >> cert.original_vertex_count >> word >> current))
        throw ParseError("certificate header malformed");
    if (!(in >> word) || word != "phi") throw ParseError("certificate phi section missing");
    cert.phi.resize(cert.original_vertex_count);
    for (auto& v : cert.phi)
        if (!(in >> v)) throw ParseError("certificate phi truncated");
    std::size_t ops = 0;
    if (!(in >> word >> ops) || word != "ops") throw ParseError("certificate ops section missing");
    for (std::size_t i = 0; i < ops; ++i) {
        std::string tag;
        if (!(in >> tag)) throw ParseError("certificate ops truncated");
        if (tag == "D" || tag == "C") {
            std::uint64_t id;
            if (!(in >> id)) throw ParseError("certificate op malformed");
            if (tag == "D") cert.op_log.push_back(OpDelete{EdgeId{id}});
            else cert.op_log.push_back(OpContract{EdgeId{id}});
        } else if (tag == "R") {
            std::uint64_t id;
            double ow, nw;
            if (!(in >> id >> ow >> nw)) throw ParseError("certificate op malformed");
            cert.op_log.push_back(OpReweight{EdgeId{id}, ow, nw});
        } else if (tag == "I") {
            std::size_t k;
            if (!(in >> k)) throw ParseError("certificate op malformed");
            OpIdentify op;
            op.vertices.resize(k);
            for (auto& v : op.vertices)
                if (!(in >> v)) throw ParseError("certificate op malformed");
            cert.op_log.push_back(std::move(op));
        } else {
            throw ParseError("unknown certificate op tag: " + tag);
        }
    }
    return cert;
}

}  // namespace subsparse
