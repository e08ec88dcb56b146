#pragma once

// Penalized marginal-likelihood selection among candidate partitions, with the
// CVRP histogram-risk rule as a baseline.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eb_estimator.hpp"
#include "errors.hpp"
#include "graph.hpp"
#include "numerics.hpp"

namespace ebgraph {

enum class Criterion { EB, CVRP };

/// CVRP variants. `Literal` sums plain proportions (always 1); `Squared` sums
/// squared proportions.
enum class CvrpMode { Literal, Squared };

struct SelectionScore {
    int K = 0;
    double j_z = 0.0;
    double penalty = 0.0;
    double total = 0.0;  // j_z - penalty
    double cvrp = 0.0;
    HyperParams hyper;
};

/// log of the Dirichlet(τ,...,τ)-multinomial marginal of the cluster sizes:
/// log Γ(Kτ) + Σ log Γ(n_k + τ) − log Γ(n + Kτ) − K log Γ(τ).
inline double log_dirichlet_marginal(std::span<const int> sizes, double tau = 0.5) {
    if (sizes.empty()) throw InputError("log_dirichlet_marginal needs at least one cluster");
    if (!(tau > 0.0)) throw DomainError("Dirichlet concentration must be positive");
    std::int64_t n = 0;
    double acc = 0.0;
    for (int s : sizes) {
        if (s < 0) throw InputError("negative cluster size");
        acc += log_rising(tau, s);
        n += s;
    }
    return acc - log_rising(static_cast<double>(sizes.size()) * tau, n);
}

struct JzResult {
    double score = 0.0;
    HyperFit fit;
};

/// J_Z: fitted marginal log-likelihood of both block kinds plus the
/// Jeffreys-Dirichlet term for the cluster sizes.
inline JzResult j_z(const BlockStats& stats, std::span<const int> sizes) {
    JzResult out;
    out.fit = fit_hyperparams(stats);
    out.score = out.fit.total_loglik() + log_dirichlet_marginal(sizes);
    return out;
}

inline JzResult j_z(const Graph& graph, const Partition& partition) {
    return j_z(block_stats(graph, partition), partition.sizes());
}

/// (1/2)[(K−1) log n + K(K+1)/2 · log(n(n−1)/2)].
inline double eb_penalty(int K, int n) {
    if (K < 1) throw InputError("eb_penalty needs K >= 1");
    if (n < 2) throw InputError("eb_penalty needs n >= 2");
    const double nn = static_cast<double>(n);
    const double kk = static_cast<double>(K);
    return 0.5 * ((kk - 1.0) * std::log(nn) + kk * (kk + 1.0) / 2.0 * std::log(nn * (nn - 1.0) / 2.0));
}

inline double cvrp_score(std::span<const int> sizes, int n, CvrpMode mode = CvrpMode::Squared) {
    if (n <= 1) throw InputError("cvrp_score needs n > 1");
    const double nn = static_cast<double>(n);
    const double K = static_cast<double>(sizes.size());
    // Sum sizes (or squared sizes) exactly in integers and divide once.
    std::int64_t acc = 0;
    for (int s : sizes) acc += mode == CvrpMode::Literal ? s : static_cast<std::int64_t>(s) * s;
    const double sum = static_cast<double>(acc) / (mode == CvrpMode::Literal ? nn : nn * nn);
    return 2.0 * K / (nn - 1.0) - (nn + 1.0) * K / (nn - 1.0) * sum;
}

inline double cvrp_score(const Partition& partition, int n, CvrpMode mode = CvrpMode::Squared) {
    return cvrp_score(partition.sizes(), n, mode);
}

/// Score from an existing hyperparameter fit, so callers that already fitted
/// the priors for estimation do not fit them twice.
inline SelectionScore score_from_fit(const HyperFit& fit, std::span<const int> sizes, int n,
                                     CvrpMode mode = CvrpMode::Squared) {
    SelectionScore s;
    s.K = static_cast<int>(sizes.size());
    s.j_z = fit.total_loglik() + log_dirichlet_marginal(sizes);
    s.hyper = fit.hyper;
    s.penalty = eb_penalty(s.K, n);
    s.total = s.j_z - s.penalty;
    s.cvrp = cvrp_score(sizes, n, mode);
    return s;
}

inline SelectionScore score_partition(const BlockStats& stats, std::span<const int> sizes, int n,
                                      CvrpMode mode = CvrpMode::Squared) {
    return score_from_fit(fit_hyperparams(stats), sizes, n, mode);
}

inline SelectionScore score_partition(const Graph& graph, const Partition& partition,
                                      CvrpMode mode = CvrpMode::Squared) {
    return score_partition(block_stats(graph, partition), partition.sizes(), graph.n(), mode);
}

/// Index of the winning score: EB maximizes `total`, CVRP minimizes `cvrp`;
/// ties go to the smaller K, then to the earlier entry.
inline std::size_t select_best(std::span<const SelectionScore> scores, Criterion criterion) {
    if (scores.empty()) throw InputError("no candidates to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        const auto& c = scores[i];
        const auto& b = scores[best];
        const double cv = criterion == Criterion::EB ? c.total : -c.cvrp;
        const double bv = criterion == Criterion::EB ? b.total : -b.cvrp;
        if (cv > bv || (cv == bv && c.K < b.K)) best = i;
    }
    return best;
}

struct SelectionResult {
    std::size_t best_index = 0;
    Partition best;
    std::vector<SelectionScore> scores;
};

inline SelectionResult select_partition(const Graph& graph, std::span<const Partition> candidates,
                                        Criterion criterion, CvrpMode mode = CvrpMode::Squared) {
    if (candidates.empty()) throw InputError("select_partition needs at least one candidate");
    SelectionResult out;
    out.scores.reserve(candidates.size());
    for (const auto& z : candidates) out.scores.push_back(score_partition(graph, z, mode));
    out.best_index = select_best(out.scores, criterion);
    out.best = candidates[out.best_index];
    return out;
}

}  // namespace ebgraph
