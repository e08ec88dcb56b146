#pragma once

// Undirected simple graphs, node partitions, and per-block edge/pair counts.

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace ebgraph {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using Edge = std::pair<int, int>;

/// Counts of input records discarded while normalizing an edge set.
struct EdgeCleanup {
    std::size_t self_loops = 0;
    std::size_t duplicates = 0;
};

/// Undirected simple graph on nodes 0..n-1. Edges are stored once with i < j,
/// sorted and deduplicated. Immutable after construction.
class Graph {
public:
    Graph() = default;

    /// Normalizes `edges`: orientation is dropped, self-loops and repeats are
    /// removed and tallied in `cleanup` when given.
    Graph(int n, std::vector<Edge> edges, EdgeCleanup* cleanup = nullptr) : n_(n) {
        if (n < 1) throw InputError("graph must have at least one node");
        EdgeCleanup report;
        std::vector<Edge> kept;
        kept.reserve(edges.size());
        for (auto [a, b] : edges) {
            if (a < 0 || b < 0 || a >= n || b >= n)
                throw InputError("edge endpoint out of range: (" + std::to_string(a) + ", " +
                                 std::to_string(b) + ") with n = " + std::to_string(n));
            if (a == b) {
                ++report.self_loops;
                continue;
            }
            kept.emplace_back(std::min(a, b), std::max(a, b));
        }
        std::sort(kept.begin(), kept.end());
        auto last = std::unique(kept.begin(), kept.end());
        report.duplicates = static_cast<std::size_t>(kept.end() - last);
        kept.erase(last, kept.end());
        edges_ = std::move(kept);

        neighbors_.assign(static_cast<std::size_t>(n), {});
        for (auto [a, b] : edges_) {
            neighbors_[a].push_back(b);
            neighbors_[b].push_back(a);
        }
        for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
        if (cleanup) *cleanup = report;
    }

    int n() const noexcept { return n_; }
    std::size_t num_edges() const noexcept { return edges_.size(); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::span<const int> neighbors(int i) const { return neighbors_.at(static_cast<std::size_t>(i)); }
    int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

    bool has_edge(int i, int j) const {
        if (i == j) return false;
        auto nb = neighbors(i);
        return std::binary_search(nb.begin(), nb.end(), j);
    }

    /// Number of unordered node pairs, n(n-1)/2.
    std::int64_t num_pairs() const noexcept {
        return static_cast<std::int64_t>(n_) * (n_ - 1) / 2;
    }

    double density() const noexcept {
        return num_pairs() > 0 ? static_cast<double>(num_edges()) / static_cast<double>(num_pairs()) : 0.0;
    }

    /// Subgraph induced by `nodes` (relabelled 0..|nodes|-1 in the given order).
    Graph induced(std::span<const int> nodes) const {
        std::vector<int> position(static_cast<std::size_t>(n_), -1);
        for (std::size_t k = 0; k < nodes.size(); ++k) position.at(static_cast<std::size_t>(nodes[k])) = static_cast<int>(k);
        std::vector<Edge> sub;
        for (auto [a, b] : edges_)
            if (position[a] >= 0 && position[b] >= 0) sub.emplace_back(position[a], position[b]);
        return Graph(static_cast<int>(nodes.size()), std::move(sub));
    }

    friend bool operator==(const Graph& a, const Graph& b) { return a.n_ == b.n_ && a.edges_ == b.edges_; }

private:
    int n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> neighbors_;
};

/// Node-to-cluster assignment with 0-based labels 0..K-1 and no empty cluster.
class Partition {
public:
    Partition() = default;

    Partition(std::vector<int> labels, int K) : labels_(std::move(labels)), K_(K) {
        if (K < 1) throw InputError("partition needs K >= 1");
        sizes_.assign(static_cast<std::size_t>(K), 0);
        for (int z : labels_) {
            if (z < 0 || z >= K)
                throw InputError("label " + std::to_string(z) + " outside 0.." + std::to_string(K - 1));
            ++sizes_[z];
        }
        for (int k = 0; k < K; ++k)
            if (sizes_[k] == 0) throw DegeneratePartitionError("cluster " + std::to_string(k) + " is empty");
    }

    /// Relabels arbitrary nonnegative labels onto 0..K'-1, preserving the
    /// numeric order of the labels that occur. `kept`, when given, receives the
    /// original label of each compacted cluster.
    static Partition compact(std::span<const int> raw, std::vector<int>* kept = nullptr) {
        if (raw.empty()) throw InputError("cannot build a partition of zero nodes");
        std::vector<int> present(raw.begin(), raw.end());
        std::sort(present.begin(), present.end());
        present.erase(std::unique(present.begin(), present.end()), present.end());
        if (present.front() < 0) throw InputError("negative cluster label");
        std::vector<int> labels(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i)
            labels[i] = static_cast<int>(std::lower_bound(present.begin(), present.end(), raw[i]) - present.begin());
        if (kept) *kept = present;
        return Partition(std::move(labels), static_cast<int>(present.size()));
    }

    int n() const noexcept { return static_cast<int>(labels_.size()); }
    int K() const noexcept { return K_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    const std::vector<int>& sizes() const noexcept { return sizes_; }
    int operator[](int i) const { return labels_[static_cast<std::size_t>(i)]; }

    /// Partition restricted to `nodes`, compacted.
    Partition restrict(std::span<const int> nodes) const {
        std::vector<int> sub;
        sub.reserve(nodes.size());
        for (int v : nodes) sub.push_back(labels_.at(static_cast<std::size_t>(v)));
        return compact(sub);
    }

    friend bool operator==(const Partition& a, const Partition& b) { return a.K_ == b.K_ && a.labels_ == b.labels_; }

private:
    std::vector<int> labels_;
    int K_ = 0;
    std::vector<int> sizes_;
};

/// Per-block edge counts X^B_ab and pair counts n_ab (both symmetric).
struct BlockStats {
    int K = 0;
    CountMatrix edge_counts;
    CountMatrix pair_counts;

    std::int64_t total_edges() const { return edge_counts.triangularView<Eigen::Upper>().toDenseMatrix().sum(); }
    std::int64_t total_pairs() const { return pair_counts.triangularView<Eigen::Upper>().toDenseMatrix().sum(); }

    /// Edge density of the whole graph, recovered from the block sums.
    double global_density() const {
        const auto pairs = total_pairs();
        return pairs > 0 ? static_cast<double>(total_edges()) / static_cast<double>(pairs) : 0.0;
    }
};

/// Pair counts implied by cluster sizes alone.
inline CountMatrix pair_counts_from_sizes(std::span<const int> sizes) {
    const auto K = static_cast<Eigen::Index>(sizes.size());
    CountMatrix pairs(K, K);
    for (Eigen::Index a = 0; a < K; ++a)
        for (Eigen::Index b = 0; b < K; ++b) {
            const std::int64_t na = sizes[a], nb = sizes[b];
            pairs(a, b) = a == b ? na * (na - 1) / 2 : na * nb;
        }
    return pairs;
}

inline BlockStats block_stats(const Graph& graph, const Partition& partition) {
    if (partition.n() != graph.n())
        throw InputError("partition covers " + std::to_string(partition.n()) + " nodes, graph has " +
                         std::to_string(graph.n()));
    BlockStats stats;
    stats.K = partition.K();
    stats.edge_counts = CountMatrix::Zero(stats.K, stats.K);
    for (auto [i, j] : graph.edges()) {
        const int a = partition[i], b = partition[j];
        ++stats.edge_counts(a, b);
        if (a != b) ++stats.edge_counts(b, a);
    }
    stats.pair_counts = pair_counts_from_sizes(partition.sizes());
    return stats;
}

/// n×n matrix M[i][j] = theta[z_i][z_j]; the diagonal is filled the same way
/// and is ignored by every consumer.
inline Eigen::MatrixXd expand_theta(const Eigen::MatrixXd& theta, const Partition& partition) {
    const int K = partition.K();
    if (theta.rows() != K || theta.cols() != K)
        throw InputError("theta is " + std::to_string(theta.rows()) + "x" + std::to_string(theta.cols()) +
                         " but partition has K = " + std::to_string(K));
    const int n = partition.n();
    Eigen::MatrixXd out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = theta(partition[i], partition[j]);
    return out;
}

}  // namespace ebgraph
