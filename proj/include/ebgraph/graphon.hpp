#pragma once

// Piecewise-constant graphon estimates built from a fitted block model.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eb_estimator.hpp"
#include "errors.hpp"
#include "graph.hpp"
#include "samplers.hpp"

namespace ebgraph {

/// W(x, y) = theta[bin(x)][bin(y)] on cells [c_{k-1}, c_k), with
/// 0 = c_0 < c_1 < ... < c_K = 1.
struct StepGraphon {
    std::vector<double> boundaries;
    Eigen::MatrixXd theta;

    int K() const { return static_cast<int>(theta.rows()); }

    double width(int k) const { return boundaries[k + 1] - boundaries[k]; }

    void validate() const {
        const auto K = static_cast<std::size_t>(theta.rows());
        if (theta.cols() != theta.rows() || K < 1) throw InputError("step graphon theta must be square and nonempty");
        if (boundaries.size() != K + 1) throw InputError("step graphon needs K+1 boundaries");
        if (std::abs(boundaries.front()) > 1e-12 || std::abs(boundaries.back() - 1.0) > 1e-12)
            throw InputError("step graphon boundaries must run from 0 to 1");
        for (std::size_t k = 0; k < K; ++k)
            if (!(boundaries[k] < boundaries[k + 1])) throw InputError("step graphon boundaries must increase");
        if ((theta - theta.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw InputError("step graphon theta must be symmetric");
    }
};

/// Boundaries from cumulative cluster proportions n_k / n, last one pinned to 1.
inline std::vector<double> boundaries_from_sizes(std::span<const int> sizes) {
    if (sizes.empty()) throw InputError("need at least one cluster");
    const double n = std::accumulate(sizes.begin(), sizes.end(), 0.0);
    std::vector<double> c{0.0};
    double acc = 0.0;
    for (int s : sizes) {
        if (s <= 0) throw DegeneratePartitionError("cluster sizes must be positive");
        acc += s;
        c.push_back(acc / n);
    }
    c.back() = 1.0;
    return c;
}

inline StepGraphon build_step_graphon(const Partition& partition, const Eigen::MatrixXd& theta) {
    if (theta.rows() != partition.K() || theta.cols() != partition.K())
        throw InputError("theta dimension does not match partition K");
    StepGraphon g{boundaries_from_sizes(partition.sizes()), theta};
    g.validate();
    return g;
}

inline StepGraphon build_step_graphon(const Partition& partition, const ConnectivityEstimate& estimate) {
    return build_step_graphon(partition, estimate.theta);
}

/// 0-based cell index k with c_k <= x < c_{k+1}. Only interior boundaries are
/// counted, so the domain is [0, 1).
inline int bin(double x, std::span<const double> boundaries) {
    if (!(x >= 0.0 && x < 1.0)) throw DomainError("bin requires x in [0, 1)");
    const auto interior = boundaries.subspan(1, boundaries.size() - 2);
    return static_cast<int>(std::upper_bound(interior.begin(), interior.end(), x) - interior.begin());
}

inline double evaluate(const StepGraphon& g, double x, double y) {
    return g.theta(bin(x, g.boundaries), bin(y, g.boundaries));
}

/// g(l) = Σ_k π_k θ_lk with π_k the cell widths.
inline Eigen::VectorXd degree_function(const StepGraphon& g) {
    Eigen::VectorXd pi(g.K());
    for (int k = 0; k < g.K(); ++k) pi[k] = g.width(k);
    return g.theta * pi;
}

struct Reordered {
    StepGraphon graphon;
    std::vector<int> permutation;  // permutation[new] = old cluster index
};

/// Relabels clusters so the degree function is nondecreasing (stable on ties).
inline Reordered reorder_identifiable(const StepGraphon& g) {
    const Eigen::VectorXd deg = degree_function(g);
    std::vector<int> perm(static_cast<std::size_t>(g.K()));
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return deg[a] < deg[b]; });

    Reordered out;
    out.permutation = perm;
    const int K = g.K();
    out.graphon.theta.resize(K, K);
    for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b) out.graphon.theta(a, b) = g.theta(perm[a], perm[b]);
    out.graphon.boundaries.assign(1, 0.0);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) out.graphon.boundaries.push_back(acc += g.width(perm[k]));
    out.graphon.boundaries.back() = 1.0;
    return out;
}

/// Wraps a step graphon as a generic graphon specification.
inline GraphonSpec to_graphon_spec(const StepGraphon& g) {
    GraphonSpec spec;
    spec.w = [g](double x, double y) { return evaluate(g, std::min(x, std::nextafter(1.0, 0.0)), std::min(y, std::nextafter(1.0, 0.0))); };
    return spec;
}

/// ∫∫ (W − Ŵ)² by midpoint rule on a G×G grid.
inline double mse_graphon_grid(const StepGraphon& estimate, const GraphonSpec& truth, int G = 2000) {
    if (!truth.w) throw InputError("truth graphon is empty");
    std::vector<int> cell(static_cast<std::size_t>(G));
    std::vector<double> mid(static_cast<std::size_t>(G));
    for (int i = 0; i < G; ++i) {
        mid[i] = (i + 0.5) / G;
        cell[i] = bin(mid[i], estimate.boundaries);
    }
    double total = 0.0;
    for (int i = 0; i < G; ++i) {
        double row = 0.0;
        for (int j = 0; j < G; ++j) {
            const double d = truth.w(mid[i], mid[j]) - estimate.theta(cell[i], cell[j]);
            row += d * d;
        }
        total += row;
    }
    return total / (static_cast<double>(G) * G);
}

/// Integrated squared error between the estimate and the truth. Exact per-cell
/// integration for constant and power-law truths, grid quadrature otherwise.
inline double mse_graphon(const StepGraphon& estimate, const GraphonSpec& truth) {
    const int K = estimate.K();
    const auto& c = estimate.boundaries;
    if (truth.constant) {
        const double p = *truth.constant;
        double total = 0.0;
        for (int a = 0; a < K; ++a)
            for (int b = 0; b < K; ++b) {
                const double d = estimate.theta(a, b) - p;
                total += estimate.width(a) * estimate.width(b) * d * d;
            }
        return total;
    }
    if (truth.power_law) {
        const double rho = truth.power_law->rho, lambda = truth.power_law->lambda;
        // Per-axis integrals of x^(λ-1)·λ and of (x^(λ-1)·λ)^2 over each cell.
        std::vector<double> lin(static_cast<std::size_t>(K)), sq(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            lin[k] = std::pow(c[k + 1], lambda) - std::pow(c[k], lambda);
            sq[k] = lambda * lambda * (std::pow(c[k + 1], 2.0 * lambda - 1.0) - std::pow(c[k], 2.0 * lambda - 1.0)) /
                    (2.0 * lambda - 1.0);
        }
        double total = 0.0;
        for (int a = 0; a < K; ++a)
            for (int b = 0; b < K; ++b) {
                const double t = estimate.theta(a, b);
                total += rho * rho * sq[a] * sq[b] - 2.0 * t * rho * lin[a] * lin[b] +
                         t * t * estimate.width(a) * estimate.width(b);
            }
        return std::max(total, 0.0);
    }
    return mse_graphon_grid(estimate, truth);
}

}  // namespace ebgraph
