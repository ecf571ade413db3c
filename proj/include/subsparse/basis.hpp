#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "subsparse/graph.hpp"
#include "subsparse/solver.hpp"

namespace subsparse {

/// Projects columns through a contraction map: (P y)_u = sum over the fiber
/// phi^{-1}(u) of y.
inline Matrix project_columns(const MinorCertificate& cert, std::uint32_t image_n,
                              const Matrix& y) {
    Matrix out = Matrix::Zero(image_n, y.cols());
    for (std::uint32_t v = 0; v < cert.original_vertex_count; ++v)
        out.row(cert.phi[v]) += y.row(v);
    return out;
}

/// Basis of a demand subspace, orthonormal under the host graph's L^+ inner
/// product: y_i^T L^+ y_j = delta_ij. Columns stay expressed on the host
/// vertex set and are projected (never re-orthonormalized) through minors.
class SubspaceBasis {
public:
    SubspaceBasis(WeightedGraph host, Matrix columns) : host_(std::move(host)), y_(std::move(columns)) {}

    /// Orthonormalizes a generating set under L^+ (symmetric inverse
    /// square root of the Gram matrix). Generators must be independent and
    /// orthogonal to all-ones.
    static SubspaceBasis orthonormalized(const WeightedGraph& host, const Matrix& generators,
                                         SolverOptions opts = {}) {
        LaplacianSolver solver(host, opts);
        Matrix pinv_gen = solver.solve_many(generators, 1e-12);
        Matrix gram = generators.transpose() * pinv_gen;
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
        if (es.info() != Eigen::Success) throw NumericalError("basis Gram eigensolve failed");
        if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()))
            throw ValidationError("basis generators are numerically dependent");
        Matrix inv_sqrt = es.eigenvectors() *
                          es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                          es.eigenvectors().transpose();
        return SubspaceBasis(host, generators * inv_sqrt);
    }

    const WeightedGraph& host() const { return host_; }
    const Matrix& columns() const { return y_; }
    Eigen::Index dim() const { return y_.cols(); }

    /// Columns pushed through a minor of the host.
    Matrix projected(const WeightedGraph& minor) const {
        return project_columns(minor.certificate(), minor.vertex_count(), y_);
    }

    /// Largest deviation of the L^+ Gram matrix from the identity.
    double gram_residual(SolverOptions opts = {}) const {
        LaplacianSolver solver(host_, opts);
        Matrix gram = y_.transpose() * solver.solve_many(y_, 1e-12);
        return (gram - Matrix::Identity(dim(), dim())).cwiseAbs().maxCoeff();
    }

private:
    WeightedGraph host_;
    Matrix y_;
};

/// Star-difference generators e_s - e_{s0} for the maximal subspace of
/// R^S x 0 orthogonal to all-ones; dimension |S| - 1.
inline Matrix coordinate_subspace_generators(const WeightedGraph& g,
                                             std::span<const VertexId> s) {
    std::vector<VertexId> sv(s.begin(), s.end());
    std::sort(sv.begin(), sv.end());
    sv.erase(std::unique(sv.begin(), sv.end()), sv.end());
    if (sv.size() < 2) throw ValidationError("coordinate subspace needs at least two vertices");
    for (VertexId v : sv)
        if (v >= g.vertex_count()) throw ValidationError("vertex out of range");
    Matrix gen = Matrix::Zero(g.vertex_count(), static_cast<Eigen::Index>(sv.size() - 1));
    for (std::size_t i = 1; i < sv.size(); ++i) {
        gen(sv[i], static_cast<Eigen::Index>(i - 1)) = 1.0;
        gen(sv[0], static_cast<Eigen::Index>(i - 1)) = -1.0;
    }
    return gen;
}

inline SubspaceBasis make_coordinate_subspace(const WeightedGraph& g,
                                              std::span<const VertexId> s,
                                              SolverOptions opts = {}) {
    return SubspaceBasis::orthonormalized(g, coordinate_subspace_generators(g, s), opts);
}

}  // namespace subsparse
