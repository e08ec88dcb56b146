#pragma once

// Test-only oracles and generators, independent of the library code paths
// they are used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <ebgraph/eb_estimator.hpp>
#include <ebgraph/graph.hpp>

namespace ebgraph::oracle {

/// Brute-force block counts by enumerating every node pair.
inline BlockStats enumerate_block_stats(const Graph& g, const std::vector<int>& labels, int K) {
    BlockStats s;
    s.K = K;
    s.edge_counts = CountMatrix::Zero(K, K);
    s.pair_counts = CountMatrix::Zero(K, K);
    for (int i = 0; i < g.n(); ++i)
        for (int j = i + 1; j < g.n(); ++j) {
            const int a = labels[i], b = labels[j];
            ++s.pair_counts(a, b);
            if (a != b) ++s.pair_counts(b, a);
            if (g.has_edge(i, j)) {
                ++s.edge_counts(a, b);
                if (a != b) ++s.edge_counts(b, a);
            }
        }
    return s;
}

/// Random BlockStats with K clusters of sizes in [1, max_size]; edge counts
/// uniform in [0, n_ab].
inline BlockStats random_block_stats(std::mt19937_64& gen, int K, int max_size) {
    std::uniform_int_distribution<int> size_dist(1, max_size);
    std::vector<int> sizes(static_cast<std::size_t>(K));
    for (auto& s : sizes) s = size_dist(gen);
    BlockStats st;
    st.K = K;
    st.pair_counts = pair_counts_from_sizes(sizes);
    st.edge_counts = CountMatrix::Zero(K, K);
    for (int a = 0; a < K; ++a)
        for (int b = a; b < K; ++b) {
            std::uniform_int_distribution<std::int64_t> e(0, st.pair_counts(a, b));
            st.edge_counts(a, b) = st.edge_counts(b, a) = e(gen);
        }
    return st;
}

/// BlockStats built directly from (edges, pairs) lists for the diagonal and
/// the upper off-diagonal in row-major order. Pair counts need not be
/// consistent with any cluster sizes; the estimators only read the counts.
inline BlockStats block_stats_from_counts(int K, const std::vector<std::pair<std::int64_t, std::int64_t>>& diag,
                                          const std::vector<std::pair<std::int64_t, std::int64_t>>& off) {
    BlockStats st;
    st.K = K;
    st.edge_counts = CountMatrix::Zero(K, K);
    st.pair_counts = CountMatrix::Zero(K, K);
    for (int a = 0; a < K; ++a) {
        st.edge_counts(a, a) = diag.at(static_cast<std::size_t>(a)).first;
        st.pair_counts(a, a) = diag.at(static_cast<std::size_t>(a)).second;
    }
    std::size_t k = 0;
    for (int a = 0; a < K; ++a)
        for (int b = a + 1; b < K; ++b, ++k) {
            st.edge_counts(a, b) = st.edge_counts(b, a) = off.at(k).first;
            st.pair_counts(a, b) = st.pair_counts(b, a) = off.at(k).second;
        }
    return st;
}

/// Maximum-weight assignment between two labelings (Hungarian algorithm on
/// the negated confusion matrix); returns the fraction of nodes whose labels
/// agree under the best one-to-one matching.
inline double matched_agreement(const std::vector<int>& a, int Ka, const std::vector<int>& b, int Kb) {
    const int m = std::max(Ka, Kb);
    std::vector<std::vector<double>> cost(static_cast<std::size_t>(m + 1), std::vector<double>(static_cast<std::size_t>(m + 1), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) cost[a[i] + 1][b[i] + 1] -= 1.0;
    // O(m^3) Hungarian (e-maxx formulation), 1-based.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= m; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j)
                if (!used[j]) {
                    const double cur = cost[i0][j] - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double matched = 0.0;
    for (int j = 1; j <= m; ++j)
        if (p[j] > 0) matched -= cost[p[j]][j];
    return matched / static_cast<double>(a.size());
}

namespace detail {

/// ∫_0^{1/2} t^p (1−t)^q dt for p > −1 and q < 0 or p < 0. A singular t^p
/// is removed with s = t^(p+1), leaving a bounded integrand; without it a
/// visible share of the mass can sit below the smallest double.
inline double half_beta_integral(double p, double q) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    if (p < 0.0) {
        const double r = 1.0 / (p + 1.0);
        auto f = [&](double s) { return std::exp(q * std::log1p(-std::pow(s, r))); };
        return r * integrator.integrate(f, 0.0, std::pow(0.5, p + 1.0), 1e-14);
    }
    auto f = [&](double t) { return t <= 0.0 ? (p == 0.0 ? 1.0 : 0.0) : std::exp(p * std::log(t) + q * std::log1p(-t)); };
    return integrator.integrate(f, 0.0, 0.5, 1e-14);
}

}  // namespace detail

// Per-block marginal ∫ θ^X (1−θ)^(n−X) Beta(θ; α, β) dθ by tanh-sinh quadrature.
inline double quadrature_block_log_marginal(std::int64_t x, std::int64_t n, double alpha, double beta) {
    double a = alpha + static_cast<double>(x) - 1.0, b = beta + static_cast<double>(n - x) - 1.0;
    const double log_prior = std::log(boost::math::beta(alpha, beta));
    if (a < 0.0 || b < 0.0) {
        // Singular endpoint: split at 1/2 and regularize each half.
        return std::log(detail::half_beta_integral(a, b) + detail::half_beta_integral(b, a)) - log_prior;
    }
    boost::math::quadrature::tanh_sinh<double> integrator;
    // B(a+1, b+1) is symmetric; keep the smaller exponent at t = 0, where t
    // itself is exact.
    if (b < a) std::swap(a, b);
    // Scale by the integrand's peak so tiny values keep full relative precision.
    const double mode = a + b > 0.0 ? std::clamp(a / (a + b), 0.05, 0.95) : 0.5;
    const double log_peak = a * std::log(mode) + b * std::log1p(-mode);
    // Two-argument form: tc is the signed distance to the nearer endpoint,
    // positive on the right, which keeps (1 − t) exact near 1.
    auto f = [&](double t, double tc) {
        if (t <= 0.0 || t >= 1.0) return 0.0;
        const double lc = tc > 0.0 ? std::log(tc) : std::log1p(-t);
        return std::exp(a * std::log(t) + b * lc - log_peak);
    };
    const double integral = integrator.integrate(f, 0.0, 1.0, 1e-14);
    return std::log(integral) + log_peak - log_prior;
}

/// Best marginal log-likelihood on a 100x100 log-spaced grid over [1e-4, 1e6]^2.
inline double grid_oracle_max(const BlockStats& stats, BlockSet which) {
    std::vector<std::pair<std::int64_t, std::int64_t>> blocks;
    for (int a = 0; a < stats.K; ++a)
        for (int b = a; b < stats.K; ++b) {
            if ((a == b) != (which == BlockSet::Diagonal)) continue;
            if (stats.pair_counts(a, b) > 0) blocks.emplace_back(stats.edge_counts(a, b), stats.pair_counts(a, b));
        }
    double best = -std::numeric_limits<double>::infinity();
    const int G = 100;
    for (int i = 0; i < G; ++i)
        for (int j = 0; j < G; ++j) {
            const double al = std::pow(10.0, -4.0 + 10.0 * i / (G - 1));
            const double be = std::pow(10.0, -4.0 + 10.0 * j / (G - 1));
            double v = 0.0;
            for (auto [x, n] : blocks)
                v += boost::math::lgamma(al + x) + boost::math::lgamma(be + n - x) - boost::math::lgamma(al + be + n) -
                     boost::math::lgamma(al) - boost::math::lgamma(be) + boost::math::lgamma(al + be);
            best = std::max(best, v);
        }
    return best;
}


}  // namespace ebgraph::oracle
