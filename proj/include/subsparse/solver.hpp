#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "subsparse/graph.hpp"

namespace subsparse {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Paper-convention weight bounds, clamped by 1 on both sides.
struct WeightBounds {
    double wmax = 1.0;
    double wmin = 1.0;
};

inline WeightBounds weight_bounds(const WeightedGraph& g) {
    WeightBounds b;
    for (const Edge& e : g.edges()) {
        b.wmax = std::max(b.wmax, e.weight);
        b.wmin = std::min(b.wmin, e.weight);
    }
    return b;
}

struct SolveReport {
    double requested_eps = 0.0;
    double achieved_residual = 0.0;  // relative l2 residual estimate
    int iterations = 0;
    enum class Method { Direct, Iterative } method = Method::Direct;
    bool clamped = false;       // iterative accuracy clamped to the floor
    bool met_request = true;    // achieved_residual <= requested_eps
};

struct SolverOptions {
    // direct sparse Cholesky below this vertex count, PCG above
    std::uint32_t direct_threshold = 5000;
    double iterative_clamp = 1e-12;
};

inline SparseMatrix laplacian_matrix(const WeightedGraph& g) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * g.edge_count());
    for (const Edge& e : g.edges()) {
        trip.emplace_back(e.u, e.u, e.weight);
        trip.emplace_back(e.v, e.v, e.weight);
        trip.emplace_back(e.u, e.v, -e.weight);
        trip.emplace_back(e.v, e.u, -e.weight);
    }
    SparseMatrix L(g.vertex_count(), g.vertex_count());
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
}

inline Matrix laplacian_dense(const WeightedGraph& g) {
    Matrix L = Matrix::Zero(g.vertex_count(), g.vertex_count());
    for (const Edge& e : g.edges()) {
        L(e.u, e.u) += e.weight;
        L(e.v, e.v) += e.weight;
        L(e.u, e.v) -= e.weight;
        L(e.v, e.u) -= e.weight;
    }
    return L;
}

/// Signed indicator of an edge: +1 on u, -1 on v.
inline Vector edge_vector(const WeightedGraph& g, EdgeId id) {
    const Edge& e = g.edge(id);
    Vector b = Vector::Zero(g.vertex_count());
    b[e.u] = 1.0;
    b[e.v] = -1.0;
    return b;
}

inline Vector pair_vector(std::uint32_t n, VertexId u, VertexId v) {
    Vector b = Vector::Zero(n);
    b[u] += 1.0;
    b[v] -= 1.0;
    return b;
}

namespace detail {

struct SubmatrixFactor {
    std::vector<VertexId> support;  // sorted vertex set the factor covers
    SparseMatrix matrix;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
};

struct SolverCacheImpl {
    SparseMatrix laplacian;
    // factor of the Laplacian with vertex 0 pinned (row/col removed)
    mutable std::once_flag pinned_once;
    mutable std::shared_ptr<const SubmatrixFactor> pinned;
    mutable std::mutex submatrix_mutex;
    mutable std::map<std::vector<VertexId>, std::shared_ptr<const SubmatrixFactor>> submatrices;
};

inline std::shared_ptr<const SubmatrixFactor> build_submatrix_factor(const SparseMatrix& L,
                                                                     std::vector<VertexId> keep) {
    auto f = std::make_shared<SubmatrixFactor>();
    f->support = std::move(keep);
    const auto& T = f->support;
    std::vector<std::int64_t> pos(L.rows(), -1);
    for (std::size_t i = 0; i < T.size(); ++i) pos[T[i]] = static_cast<std::int64_t>(i);
    std::vector<Eigen::Triplet<double>> trip;
    for (VertexId col : T) {
        for (SparseMatrix::InnerIterator it(L, col); it; ++it) {
            std::int64_t r = pos[it.row()];
            if (r >= 0) trip.emplace_back(r, pos[col], it.value());
        }
    }
    f->matrix.resize(static_cast<Eigen::Index>(T.size()), static_cast<Eigen::Index>(T.size()));
    f->matrix.setFromTriplets(trip.begin(), trip.end());
    if (T.size() > 0) {
        f->ldlt.compute(f->matrix);
        if (f->ldlt.info() != Eigen::Success)
            throw NumericalError("sparse factorization failed (SDDM submatrix)");
    }
    return f;
}

}  // namespace detail

/// Laplacian / SDDM solves on one graph snapshot. Factorizations are cached
/// on the snapshot, so solvers constructed for the same value share work.
class LaplacianSolver {
public:
    explicit LaplacianSolver(const WeightedGraph& g, SolverOptions opts = {})
        : graph_(g), opts_(opts) {
        cache_ = g.solver_cache().get_or_build<detail::SolverCacheImpl>([&] {
            auto c = std::make_shared<detail::SolverCacheImpl>();
            c->laplacian = laplacian_matrix(g);
            return c;
        });
    }

    const WeightedGraph& graph() const { return graph_; }
    const SparseMatrix& laplacian() const { return cache_->laplacian; }

    /// x ~= L^+ b for b orthogonal to all-ones on a connected graph.
    std::pair<Vector, SolveReport> solve(const Vector& b, double eps) const {
        require_laplacian_input(b, eps);
        if (b.isZero(0.0)) return {Vector::Zero(b.size()), direct_report(eps, 0.0)};
        Vector x;
        SolveReport rep;
        if (use_direct()) {
            auto f = pinned_factor();
            Vector br = b.tail(b.size() - 1);
            Vector y = f->ldlt.solve(br);
            x = Vector::Zero(b.size());
            x.tail(b.size() - 1) = y;
            rep = direct_report(eps, relative_residual(cache_->laplacian, x, b));
        } else {
            std::tie(x, rep) = solve_cg(eps, b);
        }
        x.array() -= x.mean();  // pseudoinverse via projection against all-ones
        return {x, rep};
    }

    /// Columnwise solve; every column must satisfy the solve() contract.
    Matrix solve_many(const Matrix& B, double eps) const {
        for (Eigen::Index j = 0; j < B.cols(); ++j) require_laplacian_input(B.col(j), eps);
        Matrix X(B.rows(), B.cols());
        if (use_direct()) {
            auto f = pinned_factor();
            Matrix Y = f->ldlt.solve(B.bottomRows(B.rows() - 1));
            X.setZero();
            X.bottomRows(B.rows() - 1) = Y;
        } else {
            for (Eigen::Index j = 0; j < B.cols(); ++j) X.col(j) = solve_cg(eps, B.col(j)).first;
        }
        X.rowwise() -= X.colwise().mean();
        return X;
    }

    /// x^T L^+ y for x, y orthogonal to all-ones.
    double quadform(const Vector& x, const Vector& y, double eps) const {
        auto [sol, rep] = solve(y, eps);
        return x.dot(sol);
    }

    /// (L)_{T,T}^{-1} b for a sorted proper vertex subset T.
    Vector solve_submatrix(std::span<const VertexId> t_sorted, const Vector& b,
                           double eps) const {
        auto f = submatrix_factor(t_sorted);
        if (use_direct()) return f->ldlt.solve(b);
        Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
        double tol = eps;
        if (tol < opts_.iterative_clamp) tol = opts_.iterative_clamp;
        cg.setTolerance(tol);
        cg.compute(f->matrix);
        return cg.solve(b);
    }

    Matrix solve_submatrix_many(std::span<const VertexId> t_sorted, const Matrix& B,
                                double eps) const {
        auto f = submatrix_factor(t_sorted);
        if (use_direct()) return f->ldlt.solve(B);
        Matrix X(B.rows(), B.cols());
        for (Eigen::Index j = 0; j < B.cols(); ++j)
            X.col(j) = solve_submatrix(t_sorted, B.col(j), eps);
        return X;
    }

private:
    bool use_direct() const { return graph_.vertex_count() <= opts_.direct_threshold; }

    void require_laplacian_input(const Vector& b, double eps) const {
        if (!graph_.is_connected())
            throw ValidationError("spectral operation requires a connected graph");
        if (b.size() != static_cast<Eigen::Index>(graph_.vertex_count()))
            throw ValidationError("vector dimension does not match vertex count");
        if (!(eps > 0.0))
            throw ValidationError("solver accuracy must be positive");
        double drift = std::abs(b.sum());
        double scale = b.cwiseAbs().sum() + 1.0;
        if (drift > 1e-9 * scale)
            throw ValidationError("right-hand side not orthogonal to all-ones");
    }

    SolveReport direct_report(double eps, double res) const {
        SolveReport r;
        r.requested_eps = eps;
        r.achieved_residual = res;
        r.iterations = 1;
        r.method = SolveReport::Method::Direct;
        r.met_request = res <= eps;
        return r;
    }

    std::pair<Vector, SolveReport> solve_cg(double eps, const Vector& b) const {
        Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
        SolveReport rep;
        rep.requested_eps = eps;
        rep.method = SolveReport::Method::Iterative;
        double tol = eps;
        if (tol < opts_.iterative_clamp) {
            tol = opts_.iterative_clamp;
            rep.clamped = true;
        }
        auto f = pinned_factor();
        cg.setTolerance(tol);
        cg.compute(f->matrix);
        Vector y = cg.solve(b.tail(b.size() - 1));
        Vector x = Vector::Zero(b.size());
        x.tail(b.size() - 1) = y;
        rep.iterations = static_cast<int>(cg.iterations());
        rep.achieved_residual = cg.error();
        rep.met_request = rep.achieved_residual <= eps;
        return {x, rep};
    }

    std::shared_ptr<const detail::SubmatrixFactor> pinned_factor() const {
        std::call_once(cache_->pinned_once, [&] {
            std::vector<VertexId> keep;
            keep.reserve(graph_.vertex_count() - 1);
            for (VertexId v = 1; v < graph_.vertex_count(); ++v) keep.push_back(v);
            cache_->pinned = detail::build_submatrix_factor(cache_->laplacian, std::move(keep));
        });
        return cache_->pinned;
    }

    std::shared_ptr<const detail::SubmatrixFactor> submatrix_factor(
        std::span<const VertexId> t_sorted) const {
        std::vector<VertexId> key(t_sorted.begin(), t_sorted.end());
        {
            std::lock_guard lock(cache_->submatrix_mutex);
            auto it = cache_->submatrices.find(key);
            if (it != cache_->submatrices.end()) return it->second;
        }
        auto f = detail::build_submatrix_factor(cache_->laplacian, key);
        std::lock_guard lock(cache_->submatrix_mutex);
        auto [it, inserted] = cache_->submatrices.emplace(std::move(key), f);
        return it->second;
    }

    static double relative_residual(const SparseMatrix& L, const Vector& x, const Vector& b) {
        double nb = b.norm();
        if (nb == 0.0) return 0.0;
        return (L * x - b).norm() / nb;
    }

    WeightedGraph graph_;
    SolverOptions opts_;
    std::shared_ptr<const detail::SolverCacheImpl> cache_;
};

inline std::pair<Vector, SolveReport> lapl_solve(const WeightedGraph& g, const Vector& b,
                                                 double eps, SolverOptions opts = {}) {
    return LaplacianSolver(g, opts).solve(b, eps);
}

/// x^T L_G^+ y with x, y orthogonal to all-ones.
inline double pinv_quadform(const WeightedGraph& g, const Vector& x, const Vector& y, double eps,
                            SolverOptions opts = {}) {
    LaplacianSolver solver(g, opts);
    double drift = std::abs(x.sum());
    if (drift > 1e-9 * (x.cwiseAbs().sum() + 1.0))
        throw ValidationError("quadform input not orthogonal to all-ones");
    return solver.quadform(x, y, eps);
}

inline std::vector<VertexId> complement_vertices(const WeightedGraph& g,
                                                 std::span<const VertexId> s) {
    std::vector<char> in_s(g.vertex_count(), 0);
    for (VertexId v : s) {
        if (v >= g.vertex_count()) throw ValidationError("vertex out of range");
        in_s[v] = 1;
    }
    std::vector<VertexId> t;
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        if (!in_s[v]) t.push_back(v);
    return t;
}

/// SC(L_G, S) as a dense |S| x |S| matrix (a Laplacian of a graph on S).
/// S indexes rows in ascending vertex order.
inline Matrix schur_complement_dense(const WeightedGraph& g, std::span<const VertexId> s,
                                     std::uint32_t dense_cap = 500) {
    if (!g.is_connected()) throw ValidationError("schur complement requires a connected graph");
    std::vector<VertexId> sv(s.begin(), s.end());
    std::sort(sv.begin(), sv.end());
    sv.erase(std::unique(sv.begin(), sv.end()), sv.end());
    if (sv.size() > dense_cap)
        throw ValidationError("dense schur complement cap exceeded");
    std::vector<VertexId> t = complement_vertices(g, sv);
    if (t.empty())
        throw ValidationError("schur complement onto all vertices: complement is empty "
                              "(SC(L, V) is L itself)");
    Matrix L = laplacian_dense(g);
    Eigen::Index ns = static_cast<Eigen::Index>(sv.size());
    Eigen::Index nt = static_cast<Eigen::Index>(t.size());
    Matrix Lss(ns, ns), Lst(ns, nt), Ltt(nt, nt);
    for (Eigen::Index i = 0; i < ns; ++i)
        for (Eigen::Index j = 0; j < ns; ++j) Lss(i, j) = L(sv[i], sv[j]);
    for (Eigen::Index i = 0; i < ns; ++i)
        for (Eigen::Index j = 0; j < nt; ++j) Lst(i, j) = L(sv[i], t[j]);
    for (Eigen::Index i = 0; i < nt; ++i)
        for (Eigen::Index j = 0; j < nt; ++j) Ltt(i, j) = L(t[i], t[j]);
    return Lss - Lst * Ltt.ldlt().solve(Lst.transpose());
}

/// SC(L_G, S) b using one SDDM solve on (L_G)_{T,T}; b indexed by ascending S.
inline Vector apply_schur(const WeightedGraph& g, std::span<const VertexId> s, const Vector& b,
                          double eps, SolverOptions opts = {}) {
    if (!g.is_connected()) throw ValidationError("apply_schur requires a connected graph");
    std::vector<VertexId> sv(s.begin(), s.end());
    std::sort(sv.begin(), sv.end());
    sv.erase(std::unique(sv.begin(), sv.end()), sv.end());
    if (b.size() != static_cast<Eigen::Index>(sv.size()))
        throw ValidationError("apply_schur vector dimension mismatch");
    std::vector<VertexId> t = complement_vertices(g, sv);
    if (t.empty()) throw ValidationError("apply_schur: complement is empty");

    LaplacianSolver solver(g, opts);
    const SparseMatrix& L = solver.laplacian();
    std::vector<std::int64_t> pos_s(g.vertex_count(), -1), pos_t(g.vertex_count(), -1);
    for (std::size_t i = 0; i < sv.size(); ++i) pos_s[sv[i]] = static_cast<std::int64_t>(i);
    for (std::size_t i = 0; i < t.size(); ++i) pos_t[t[i]] = static_cast<std::int64_t>(i);

    // y_t = (L)_{T,S} b ; z = (L)_{T,T}^{-1} y_t ; out = (L)_{S,S} b - (L)_{S,T} z
    Vector yt = Vector::Zero(static_cast<Eigen::Index>(t.size()));
    Vector out = Vector::Zero(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t j = 0; j < sv.size(); ++j) {
        for (SparseMatrix::InnerIterator it(L, sv[j]); it; ++it) {
            if (std::int64_t r = pos_t[it.row()]; r >= 0) yt[r] += it.value() * b[static_cast<Eigen::Index>(j)];
            if (std::int64_t r = pos_s[it.row()]; r >= 0) out[r] += it.value() * b[static_cast<Eigen::Index>(j)];
        }
    }
    Vector z = solver.solve_submatrix(t, yt, eps);
    for (std::size_t j = 0; j < t.size(); ++j) {
        for (SparseMatrix::InnerIterator it(L, t[j]); it; ++it) {
            if (std::int64_t r = pos_s[it.row()]; r >= 0)
                out[r] -= it.value() * z[static_cast<Eigen::Index>(j)];
        }
    }
    return out;
}

struct EigenDiagnostics {
    double lambda2_lower = 0.0;   // w_min / n^2
    double lambda_max_upper = 0.0;  // n * w_max
    double trace_pinv_upper = 0.0;  // n^2 / w_min
};

inline EigenDiagnostics eigen_diagnostics(const WeightedGraph& g) {
    if (!g.is_connected()) throw ValidationError("diagnostics require a connected graph");
    WeightBounds wb = weight_bounds(g);
    double n = static_cast<double>(g.vertex_count());
    return {wb.wmin / (n * n), n * wb.wmax, n * n / wb.wmin};
}

}  // namespace subsparse
