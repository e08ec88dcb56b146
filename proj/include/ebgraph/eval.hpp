#pragma once

// Evaluation metrics: node-level MSE against a true block model, the K that
// minimizes the MLE's error, selection deviations, and held-out likelihood.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eb_estimator.hpp"
#include "errors.hpp"
#include "graph.hpp"
#include "rng.hpp"

namespace ebgraph {

/// Mean squared difference between the two expanded n×n connectivity
/// matrices over pairs i ≠ j. Both matrices are symmetric, so the upper
/// triangle normalized by n(n−1)/2 gives the same value.
inline double mse_sbm(const Eigen::MatrixXd& est_theta, const Partition& est_partition,
                      const Eigen::MatrixXd& true_theta, const Partition& true_partition) {
    if (est_partition.n() != true_partition.n()) throw InputError("mse_sbm: partitions cover different node counts");
    if (est_theta.rows() != est_partition.K() || est_theta.cols() != est_partition.K() ||
        true_theta.rows() != true_partition.K() || true_theta.cols() != true_partition.K())
        throw InputError("mse_sbm: theta dimension does not match its partition");
    const int n = est_partition.n();
    if (n < 2) return 0.0;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const int a = est_partition[i], s = true_partition[i];
        for (int j = i + 1; j < n; ++j) {
            const double d = est_theta(a, est_partition[j]) - true_theta(s, true_partition[j]);
            total += d * d;
        }
    }
    return total / (static_cast<double>(n) * (n - 1) / 2.0);
}

/// argmin over K of the MLE error curve; ties go to the smaller K.
inline int k_tilde(std::span<const std::pair<int, double>> curve) {
    if (curve.empty()) throw InputError("k_tilde needs a nonempty curve");
    auto best = curve.front();
    for (const auto& point : curve)
        if (point.second < best.second || (point.second == best.second && point.first < best.first)) best = point;
    return best.first;
}

struct Deviations {
    double from_k_star = 0.0;   // E_{K*}
    double from_k_tilde = 0.0;  // E_{K~}
};

inline Deviations deviation_metrics(std::span<const int> k_hats, int k_star, std::span<const int> k_tildes) {
    if (k_hats.empty() || k_hats.size() != k_tildes.size())
        throw InputError("deviation_metrics needs equal-length nonempty K lists");
    Deviations d;
    for (std::size_t t = 0; t < k_hats.size(); ++t) {
        d.from_k_star += std::abs(k_hats[t] - k_star);
        d.from_k_tilde += std::abs(k_hats[t] - k_tildes[t]);
    }
    const double M = static_cast<double>(k_hats.size());
    d.from_k_star /= M;
    d.from_k_tilde /= M;
    return d;
}

/// Block frequencies under an annotated partition (density fill for blocks
/// without pairs, as in mle_estimate).
inline ConnectivityEstimate theta_star(const Graph& graph, const Partition& truth) {
    return mle_estimate(block_stats(graph, truth));
}

struct NodeSplit {
    std::vector<int> train;
    std::vector<int> test;
};

/// Number of training nodes: round-half-up of fraction·n. The small guard
/// keeps products like 0.7·1005 = 703.4999... on the intended side.
inline int train_size(int n, double fraction) {
    return static_cast<int>(std::floor(fraction * n + 0.5 + 1e-9));
}

/// Uniform split without replacement by a seeded partial Fisher–Yates shuffle.
/// Both node lists are returned sorted.
inline NodeSplit split_nodes(int n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw InputError("split fraction must lie in (0, 1)");
    if (n < 1) throw InputError("split_nodes needs n >= 1");
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const int m = std::clamp(train_size(n, fraction), 0, n);
    Rng rng(seed);
    for (int i = 0; i < m; ++i) {
        const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(order[i], order[j]);
    }
    NodeSplit split;
    split.train.assign(order.begin(), order.begin() + m);
    split.test.assign(order.begin() + m, order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

/// Block statistics over the subgraph induced by `nodes`, indexed by the full
/// annotation's K labels. Labels absent from `nodes` leave zero-pair blocks.
inline BlockStats subset_block_stats(const Graph& graph, const Partition& labels, std::span<const int> nodes) {
    if (labels.n() != graph.n()) throw InputError("labels do not cover the graph");
    std::vector<char> inside(static_cast<std::size_t>(graph.n()), 0);
    std::vector<int> sizes(static_cast<std::size_t>(labels.K()), 0);
    for (int v : nodes) {
        if (v < 0 || v >= graph.n()) throw InputError("node index out of range");
        inside[v] = 1;
        ++sizes[labels[v]];
    }
    BlockStats stats;
    stats.K = labels.K();
    stats.edge_counts = CountMatrix::Zero(stats.K, stats.K);
    for (auto [i, j] : graph.edges()) {
        if (!inside[i] || !inside[j]) continue;
        const int a = labels[i], b = labels[j];
        ++stats.edge_counts(a, b);
        if (a != b) ++stats.edge_counts(b, a);
    }
    stats.pair_counts = pair_counts_from_sizes(sizes);
    return stats;
}

inline constexpr double kProbabilityClamp = 1e-9;

/// Held-out Bernoulli log-likelihood over train×test pairs and test-internal
/// pairs; train-internal pairs are excluded. Probabilities are clipped to
/// [1e-9, 1 − 1e-9].
inline double test_loglik(const Graph& graph, const Partition& labels, const Eigen::MatrixXd& theta_hat,
                          std::span<const int> train, std::span<const int> test) {
    if (labels.n() != graph.n()) throw InputError("labels do not cover the graph");
    if (theta_hat.rows() != labels.K() || theta_hat.cols() != labels.K())
        throw InputError("theta_hat dimension does not match the labels");
    const auto K = theta_hat.rows();
    Eigen::MatrixXd log_p(K, K), log_q(K, K);
    for (Eigen::Index a = 0; a < K; ++a)
        for (Eigen::Index b = 0; b < K; ++b) {
            const double p = std::clamp(theta_hat(a, b), kProbabilityClamp, 1.0 - kProbabilityClamp);
            log_p(a, b) = std::log(p);
            log_q(a, b) = std::log1p(-p);
        }
    auto pair_term = [&](int i, int j) {
        const int a = labels[i], b = labels[j];
        return graph.has_edge(i, j) ? log_p(a, b) : log_q(a, b);
    };
    double total = 0.0;
    for (int i : train)
        for (int j : test) total += pair_term(i, j);
    for (std::size_t x = 0; x < test.size(); ++x)
        for (std::size_t y = x + 1; y < test.size(); ++y) total += pair_term(test[x], test[y]);
    return total;
}

}  // namespace ebgraph
