#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "subsparse/graph.hpp"
#include "subsparse/resistance.hpp"
#include "subsparse/rng.hpp"
#include "subsparse/solver.hpp"

namespace subsparse {

struct SketchConfig {
    double row_constant = 8.0;       // l = ceil(row_constant * ln(1/delta) / eps^2)
    double rounds_factor = 25.0;     // ColumnApx rounds K = ceil(rounds_factor * ln n)
    double c_local = 1.0;            // localization constant, calibrated
    int retry_cap = 64;              // Subsample attempts before giving up
};

/// Linear l1-norm sketch: Cauchy random projections with a median-of-rows
/// estimator. sketch(v) is linear exactly; recover_norm is (1 +- eps)‖v‖_1
/// with probability >= 1 - delta.
class L1Sketch {
public:
    static L1Sketch make(Eigen::Index dim, double delta, double eps, RngSeed seed,
                         double row_constant = 8.0) {
        if (!(delta > 0.0 && delta < 1.0) || !(eps > 0.0 && eps < 1.0))
            throw ValidationError("sketch parameters must be in (0,1)");
        L1Sketch s;
        s.eps_ = eps;
        s.delta_ = delta;
        s.seed_ = seed;
        s.rows_ = static_cast<Eigen::Index>(
            std::ceil(row_constant * std::log(1.0 / delta) / (eps * eps)));
        s.matrix_.resize(s.rows_, dim);
        Rng rng(seed);
        for (Eigen::Index i = 0; i < s.rows_; ++i)
            for (Eigen::Index j = 0; j < dim; ++j) s.matrix_(i, j) = rng.cauchy();
        return s;
    }

    Eigen::Index rows() const { return rows_; }
    Eigen::Index dim() const { return matrix_.cols(); }
    const Matrix& matrix() const { return matrix_; }

    Vector apply(const Vector& v) const {
        if (v.size() != matrix_.cols()) throw ValidationError("sketch dimension mismatch");
        return matrix_ * v;
    }

private:
    Matrix matrix_;
    Eigen::Index rows_ = 0;
    double eps_ = 0.0, delta_ = 0.0;
    RngSeed seed_{};
};

/// Median of absolute sketched coordinates; for Cauchy projections this
/// estimates ‖v‖_1.
inline double recover_norm(const Vector& sketched, const L1Sketch& sketch) {
    if (sketched.size() != sketch.rows()) throw ValidationError("sketch dimension mismatch");
    if (sketched.size() == 0) return 0.0;
    std::vector<double> a(sketched.size());
    for (Eigen::Index i = 0; i < sketched.size(); ++i) a[i] = std::abs(sketched[i]);
    std::size_t mid = a.size() / 2;
    std::nth_element(a.begin(), a.begin() + mid, a.end());
    double hi = a[mid];
    if (a.size() % 2 == 1) return hi;
    std::nth_element(a.begin(), a.begin() + (mid - 1), a.begin() + mid);
    return 0.5 * (a[mid - 1] + hi);
}

/// Estimates a_e of the off-diagonal coupling sums
/// sum_{f != e in W} |b_e^T L^+ b_f| / (sqrt(r_e) sqrt(r_f)) with
/// a_e/2 <= true <= 3 a_e/2 whp, by K rounds of random bipartitions.
inline EdgeEstimates column_apx(const WeightedGraph& g, std::span<const EdgeId> w, RngSeed seed,
                                SketchConfig cfg = {}, SolverOptions opts = {}) {
    if (!g.is_connected()) throw ValidationError("column_apx requires a connected graph");
    std::vector<EdgeId> wset(w.begin(), w.end());
    std::sort(wset.begin(), wset.end());
    wset.erase(std::unique(wset.begin(), wset.end()), wset.end());
    for (EdgeId id : wset) (void)g.edge(id);

    const double n = std::max<double>(g.vertex_count(), 2);
    const int rounds = static_cast<int>(std::ceil(cfg.rounds_factor * std::log(n)));
    const double sketch_delta =
        1.0 / std::pow(n, 6);  // per-recover failure probability target

    Rng rng(seed);
    LaplacianSolver solver(g, opts);

    std::vector<double> kappa(wset.size(), 0.0);
    std::vector<char> side(wset.size(), 0);
    std::vector<Eigen::Index> w1_index(wset.size(), 0);

    for (int round = 0; round < rounds; ++round) {
        Eigen::Index w1_count = 0;
        for (std::size_t i = 0; i < wset.size(); ++i) {
            side[i] = rng.coin() ? 1 : 0;  // 1 -> sketched half W1
            if (side[i]) w1_index[i] = w1_count++;
        }
        if (w1_count == 0) continue;

        L1Sketch sketch = L1Sketch::make(w1_count, sketch_delta, 0.25,
                                         rng.fork_seed(0x100 + static_cast<std::uint64_t>(round)),
                                         cfg.row_constant);
        // dc = D C^T with D columns b_f / sqrt(r_f) over W1
        Matrix dc = Matrix::Zero(g.vertex_count(), sketch.rows());
        for (std::size_t i = 0; i < wset.size(); ++i) {
            if (!side[i]) continue;
            const Edge& e = g.edge(wset[i]);
            double s = std::sqrt(e.weight);
            dc.row(e.u) += s * sketch.matrix().col(w1_index[i]).transpose();
            dc.row(e.v) -= s * sketch.matrix().col(w1_index[i]).transpose();
        }
        Matrix u = solver.solve_many(dc, 1e-10);  // L^+ D C^T
        for (std::size_t i = 0; i < wset.size(); ++i) {
            if (side[i]) continue;
            const Edge& e = g.edge(wset[i]);
            Vector sk = std::sqrt(e.weight) * (u.row(e.u) - u.row(e.v)).transpose();
            kappa[i] += recover_norm(sk, sketch);
        }
    }

    EdgeEstimates est;
    est.kind = EstimateKind::ColumnNorm;
    est.seed = seed;
    est.eps = 0.5;  // bracket half-width of the composite estimator
    est.values.reserve(wset.size());
    for (std::size_t i = 0; i < wset.size(); ++i)
        est.values.emplace_back(wset[i], 4.0 * kappa[i] / static_cast<double>(rounds));
    return est;
}

/// Edge subset with bounded estimated coupling sums.
struct LocalizedSet {
    std::vector<EdgeId> edges;  // ascending
    double psi = 0.0;
    double gamma = 0.0;
    EdgeEstimates column_sums;  // over the sampled candidate set
    int attempts = 0;
};

/// Subsamples a localized edge set W: |W| >= (gamma/4)|E(I)| and estimated
/// column sums <= psi/2 at selection time, psi = 100 c_local gamma ln^2 n.
inline LocalizedSet subsample(const WeightedGraph& g, double gamma, RngSeed seed,
                              SketchConfig cfg = {}, SolverOptions opts = {}) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("gamma must be in (0,1]");
    if (!g.is_connected()) throw ValidationError("subsample requires a connected graph");
    const double n = std::max<double>(g.vertex_count(), 2);
    const double log_n = std::log(n);
    const double psi = 100.0 * cfg.c_local * gamma * log_n * log_n;
    const double need = gamma / 4.0 * static_cast<double>(g.edge_count());

    Rng rng(seed);
    for (int attempt = 1; attempt <= cfg.retry_cap; ++attempt) {
        std::vector<EdgeId> candidates;
        for (const Edge& e : g.edges())
            if (rng.uniform() < 2.0 * gamma) candidates.push_back(e.id);
        if (candidates.empty()) continue;
        EdgeEstimates sums = column_apx(g, candidates,
                                        rng.fork_seed(static_cast<std::uint64_t>(attempt)), cfg, opts);
        LocalizedSet out;
        out.psi = psi;
        out.gamma = gamma;
        out.attempts = attempt;
        for (const auto& [id, a] : sums.values)
            if (a <= psi / 2.0) out.edges.push_back(id);
        if (static_cast<double>(out.edges.size()) >= need && !out.edges.empty()) {
            out.column_sums = std::move(sums);
            return out;
        }
    }
    throw NumericalError("subsample retry cap exceeded: threshold psi appears infeasible "
                         "(check c_local calibration)");
}

/// Average localization column sum (diagonal included), the per-graph
/// statistic behind c_local calibration.
inline double localization_average(const DenseOracle& oracle) {
    Matrix c = oracle.coupling().cwiseAbs();
    if (c.rows() == 0) return 0.0;
    return c.sum() / static_cast<double>(c.rows());
}

/// 90th percentile of (average localization sum / ln^2 n) over a corpus.
inline double calibrate_c_local(std::span<const WeightedGraph> corpus,
                                std::uint32_t dense_cap = 500) {
    if (corpus.empty()) throw ValidationError("calibration corpus is empty");
    std::vector<double> values;
    values.reserve(corpus.size());
    for (const WeightedGraph& g : corpus) {
        double log_n = std::log(std::max<double>(g.vertex_count(), 3));
        values.push_back(localization_average(DenseOracle(g, dense_cap)) / (log_n * log_n));
    }
    std::sort(values.begin(), values.end());
    std::size_t idx = static_cast<std::size_t>(0.9 * (values.size() - 1) + 0.5);
    return values[idx];
}

}  // namespace subsparse
