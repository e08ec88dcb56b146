#pragma once

// Partition providers: regularized spectral clustering and variational EM for
// the Bernoulli stochastic block model.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "graph.hpp"
#include "numerics.hpp"
#include "rng.hpp"

namespace ebgraph {

struct DetectionResult {
    Partition partition;
    std::optional<Eigen::MatrixXd> responsibilities;  // n x K', rows sum to 1
    bool converged = false;
    int iterations = 0;
};

// ---------------------------------------------------------------------------
// Spectral clustering

/// Eigen-decomposition of D^{-1/2} (A + (d̄/n) 11ᵀ) D^{-1/2}, columns ordered by
/// decreasing |eigenvalue|. Computed once per graph and shared across K.
class SpectralEmbedding {
public:
    explicit SpectralEmbedding(const Graph& graph) : n_(graph.n()) {
        const int n = graph.n();
        double mean_degree = 2.0 * static_cast<double>(graph.num_edges()) / n;
        if (mean_degree == 0.0) mean_degree = 1.0;  // edgeless graph: any constant works
        const double reg = mean_degree / n;

        Eigen::VectorXd inv_sqrt_deg(n);
        for (int i = 0; i < n; ++i) inv_sqrt_deg[i] = 1.0 / std::sqrt(graph.degree(i) + mean_degree);

        Eigen::MatrixXd L = Eigen::MatrixXd::Constant(n, n, reg);
        for (auto [i, j] : graph.edges()) {
            L(i, j) += 1.0;
            L(j, i) += 1.0;
        }
        L = inv_sqrt_deg.asDiagonal() * L * inv_sqrt_deg.asDiagonal();

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L);
        if (solver.info() != Eigen::Success) throw NumericalError("spectral embedding: eigensolver failed");
        const Eigen::VectorXd& values = solver.eigenvalues();
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return std::abs(values[a]) > std::abs(values[b]); });
        vectors_.resize(n, n);
        values_.resize(n);
        for (int k = 0; k < n; ++k) {
            vectors_.col(k) = solver.eigenvectors().col(order[k]);
            values_[k] = values[order[k]];
            // Fix the sign so the largest-magnitude entry is positive.
            Eigen::Index arg;
            vectors_.col(k).cwiseAbs().maxCoeff(&arg);
            if (vectors_(arg, k) < 0.0) vectors_.col(k) *= -1.0;
        }
    }

    int n() const { return n_; }
    const Eigen::VectorXd& eigenvalues() const { return values_; }

    /// Leading K eigenvectors with rows scaled to unit length.
    Eigen::MatrixXd rows(int K) const {
        Eigen::MatrixXd Y = vectors_.leftCols(K);
        for (int i = 0; i < n_; ++i) {
            const double norm = Y.row(i).norm();
            if (norm > 0.0) Y.row(i) /= norm;
        }
        return Y;
    }

private:
    int n_;
    Eigen::MatrixXd vectors_;
    Eigen::VectorXd values_;
};

struct KMeansResult {
    std::vector<int> labels;
    double inertia = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

namespace detail {

inline std::uint64_t restart_seed(std::uint64_t seed, int restart) {
    // splitmix64 finalizer over (seed, restart)
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(restart + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline KMeansResult kmeans_once(const Eigen::MatrixXd& points, int K, Rng& rng, int max_iter) {
    const auto n = static_cast<int>(points.rows());
    Eigen::MatrixXd centers(K, points.cols());

    // k-means++ seeding
    std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    centers.row(0) = points.row(first);
    for (int k = 1; k < K; ++k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            dist[i] = std::min(dist[i], (points.row(i) - centers.row(k - 1)).squaredNorm());
            total += dist[i];
        }
        int pick = n - 1;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            for (int i = 0; i < n; ++i) {
                u -= dist[i];
                if (u < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        }
        centers.row(k) = points.row(pick);
    }

    KMeansResult r;
    r.labels.assign(static_cast<std::size_t>(n), -1);
    std::vector<double> best_dist(static_cast<std::size_t>(n));
    for (int it = 1; it <= max_iter; ++it) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int arg = 0;
            double best = std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k) {
                const double d = (points.row(i) - centers.row(k)).squaredNorm();
                if (d < best) {
                    best = d;
                    arg = k;
                }
            }
            best_dist[i] = best;
            if (r.labels[i] != arg) {
                r.labels[i] = arg;
                changed = true;
            }
        }
        r.iterations = it;
        if (!changed) {
            r.converged = true;
            break;
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, points.cols());
        std::vector<int> counts(static_cast<std::size_t>(K), 0);
        for (int i = 0; i < n; ++i) {
            sums.row(r.labels[i]) += points.row(i);
            ++counts[r.labels[i]];
        }
        for (int k = 0; k < K; ++k) {
            if (counts[k] > 0) {
                centers.row(k) = sums.row(k) / counts[k];
            } else {
                // Re-seed an empty center at the point farthest from its center.
                const auto far = static_cast<int>(std::max_element(best_dist.begin(), best_dist.end()) - best_dist.begin());
                centers.row(k) = points.row(far);
                best_dist[far] = 0.0;
            }
        }
    }
    r.inertia = 0.0;
    for (int i = 0; i < n; ++i) r.inertia += (points.row(i) - centers.row(r.labels[i])).squaredNorm();
    return r;
}

}  // namespace detail

/// Lloyd k-means with k-means++ seeding; the restart with the lowest
/// within-cluster sum of squares wins, earlier restarts on ties.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, int K, std::uint64_t seed, int restarts = 10,
                           int max_iter = 300) {
    if (K < 1 || K > points.rows()) throw InputError("kmeans needs 1 <= K <= number of points");
    KMeansResult best;
    for (int r = 0; r < restarts; ++r) {
        Rng rng(detail::restart_seed(seed, r));
        auto cand = detail::kmeans_once(points, K, rng, max_iter);
        if (cand.inertia < best.inertia) best = std::move(cand);
    }
    return best;
}

inline DetectionResult spectral_partition(const SpectralEmbedding& embedding, int K, std::uint64_t seed) {
    if (K < 1) throw InputError("spectral_partition needs K >= 1");
    if (K > embedding.n()) throw InputError("spectral_partition: K exceeds the number of nodes");
    DetectionResult out;
    if (K == 1) {
        out.partition = Partition(std::vector<int>(static_cast<std::size_t>(embedding.n()), 0), 1);
        out.converged = true;
        return out;
    }
    const auto km = kmeans(embedding.rows(K), K, seed);
    out.partition = Partition::compact(km.labels);
    out.converged = km.converged;
    out.iterations = km.iterations;
    return out;
}

inline DetectionResult spectral_partition(const Graph& graph, int K, std::uint64_t seed) {
    if (K > graph.n()) throw InputError("spectral_partition: K exceeds the number of nodes");
    return spectral_partition(SpectralEmbedding(graph), K, seed);
}

// ---------------------------------------------------------------------------
// Variational EM for the Bernoulli SBM

struct VariationalOptions {
    int max_iter = 100;
    double tol = 1e-6;
    double theta_prior = 0.5;  // Beta(a, a) on every block
    double pi_prior = 0.5;     // Dirichlet(a, ..., a) on proportions
};

struct VariationalResult {
    DetectionResult detection;
    Eigen::VectorXd pi_hat;              // posterior mean proportions (kept clusters)
    Eigen::MatrixXd theta_vb;            // posterior mean connectivity (kept clusters)
    std::vector<double> objective_trace; // lower bound after every parameter update
    bool monotone = true;                // lower bound never decreased beyond rounding
};

namespace detail {

struct VariationalPosterior {
    Eigen::VectorXd dir;    // Dirichlet parameters
    Eigen::MatrixXd eta;    // Beta "success" parameters
    Eigen::MatrixXd zeta;   // Beta "failure" parameters
};

inline VariationalPosterior variational_update(const Graph& graph, const Eigen::MatrixXd& tau,
                                               const VariationalOptions& opt) {
    const auto K = tau.cols();
    const Eigen::VectorXd mass = tau.colwise().sum().transpose();
    Eigen::MatrixXd edge_mass = Eigen::MatrixXd::Zero(K, K);
    for (auto [i, j] : graph.edges()) edge_mass.noalias() += tau.row(i).transpose() * tau.row(j);
    const Eigen::MatrixXd self = tau.transpose() * tau;

    VariationalPosterior post;
    post.dir = mass.array() + opt.pi_prior;
    post.eta.resize(K, K);
    post.zeta.resize(K, K);
    for (Eigen::Index q = 0; q < K; ++q)
        for (Eigen::Index l = q; l < K; ++l) {
            double edges, pairs;
            if (q == l) {
                edges = edge_mass(q, q);
                pairs = 0.5 * (mass[q] * mass[q] - self(q, q));
            } else {
                edges = edge_mass(q, l) + edge_mass(l, q);
                pairs = mass[q] * mass[l] - self(q, l);
            }
            const double non_edges = std::max(pairs - edges, 0.0);
            post.eta(q, l) = post.eta(l, q) = opt.theta_prior + edges;
            post.zeta(q, l) = post.zeta(l, q) = opt.theta_prior + non_edges;
        }
    return post;
}

inline double variational_bound(const VariationalPosterior& post, const Eigen::MatrixXd& tau,
                                const VariationalOptions& opt) {
    const auto K = tau.cols();
    double bound = log_gamma(K * opt.pi_prior) - K * log_gamma(opt.pi_prior) - log_gamma(post.dir.sum());
    for (Eigen::Index q = 0; q < K; ++q) bound += log_gamma(post.dir[q]);
    const double prior_beta = log_beta(opt.theta_prior, opt.theta_prior);
    for (Eigen::Index q = 0; q < K; ++q)
        for (Eigen::Index l = q; l < K; ++l) bound += log_beta(post.eta(q, l), post.zeta(q, l)) - prior_beta;
    for (Eigen::Index i = 0; i < tau.rows(); ++i)
        for (Eigen::Index q = 0; q < K; ++q)
            if (tau(i, q) > 0.0) bound -= tau(i, q) * std::log(tau(i, q));
    return bound;
}

/// One sequential sweep of exact coordinate updates of every node's
/// responsibilities given the current posterior.
inline void variational_sweep(const Graph& graph, Eigen::MatrixXd& tau, const VariationalPosterior& post) {
    const auto K = tau.cols();
    Eigen::MatrixXd on_edge(K, K), off_edge(K, K);
    for (Eigen::Index q = 0; q < K; ++q)
        for (Eigen::Index l = 0; l < K; ++l) {
            const double total = digamma(post.eta(q, l) + post.zeta(q, l));
            on_edge(q, l) = digamma(post.eta(q, l)) - total;
            off_edge(q, l) = digamma(post.zeta(q, l)) - total;
        }
    Eigen::VectorXd prior_term(K);
    const double dir_total = digamma(post.dir.sum());
    for (Eigen::Index q = 0; q < K; ++q) prior_term[q] = digamma(post.dir[q]) - dir_total;

    Eigen::RowVectorXd mass = tau.colwise().sum();
    Eigen::RowVectorXd nbr(K);
    Eigen::VectorXd logit(K);
    for (int i = 0; i < graph.n(); ++i) {
        nbr.setZero();
        for (int j : graph.neighbors(i)) nbr += tau.row(j);
        const Eigen::RowVectorXd others = mass - tau.row(i);
        const Eigen::RowVectorXd non_nbr = (others - nbr).cwiseMax(0.0);
        logit = prior_term + on_edge * nbr.transpose() + off_edge * non_nbr.transpose();
        const double top = logit.maxCoeff();
        Eigen::RowVectorXd updated = (logit.array() - top).exp().transpose();
        updated /= updated.sum();
        mass += updated - tau.row(i);
        tau.row(i) = updated;
    }
}

}  // namespace detail

/// Coordinate-ascent variational Bayes for the Bernoulli SBM with Beta and
/// Dirichlet priors. Starts from the hard (or soft) assignment in `init`,
/// alternates a posterior update with a sequential responsibility sweep, and
/// stops when the lower bound improves by less than `tol`.
inline VariationalResult variational_em(const Graph& graph, const DetectionResult& init,
                                        const VariationalOptions& options = {}) {
    if (init.partition.n() != graph.n()) throw InputError("variational_em: init does not cover the graph");
    const int n = graph.n();
    Eigen::MatrixXd tau;
    if (init.responsibilities) {
        tau = *init.responsibilities;
        if (tau.rows() != n) throw InputError("variational_em: responsibilities have the wrong row count");
    } else {
        tau = Eigen::MatrixXd::Zero(n, init.partition.K());
        for (int i = 0; i < n; ++i) tau(i, init.partition[i]) = 1.0;
    }

    VariationalResult out;
    auto post = detail::variational_update(graph, tau, options);
    double bound = detail::variational_bound(post, tau, options);
    if (!std::isfinite(bound)) throw NumericalError("variational_em: non-finite lower bound at iteration 0");
    out.objective_trace.push_back(bound);

    int iter = 0;
    bool converged = false;
    while (iter < options.max_iter) {
        ++iter;
        detail::variational_sweep(graph, tau, post);
        post = detail::variational_update(graph, tau, options);
        const double next = detail::variational_bound(post, tau, options);
        if (!std::isfinite(next))
            throw NumericalError("variational_em: non-finite lower bound at iteration " + std::to_string(iter));
        const double slack = 1e-9 * std::max(1.0, std::abs(bound));
        if (next < bound - slack) out.monotone = false;
        assert(next >= bound - slack && "variational lower bound decreased");
        out.objective_trace.push_back(next);
        const double gain = next - bound;
        bound = next;
        if (gain < options.tol) {
            converged = true;
            break;
        }
    }

    // Hard assignment, then drop clusters that lost every node.
    std::vector<int> raw(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Eigen::Index arg;
        tau.row(i).maxCoeff(&arg);
        raw[i] = static_cast<int>(arg);
    }
    std::vector<int> kept;
    auto& det = out.detection;
    det.partition = Partition::compact(raw, &kept);
    det.converged = converged;
    det.iterations = iter;

    const auto Kp = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXd resp(n, Kp);
    for (Eigen::Index k = 0; k < Kp; ++k) resp.col(k) = tau.col(kept[k]);
    for (int i = 0; i < n; ++i) resp.row(i) /= resp.row(i).sum();
    det.responsibilities = std::move(resp);

    out.pi_hat.resize(Kp);
    out.theta_vb.resize(Kp, Kp);
    for (Eigen::Index a = 0; a < Kp; ++a) {
        out.pi_hat[a] = post.dir[kept[a]];
        for (Eigen::Index b = 0; b < Kp; ++b) {
            const double e = post.eta(kept[a], kept[b]), z = post.zeta(kept[a], kept[b]);
            out.theta_vb(a, b) = e / (e + z);
        }
    }
    out.pi_hat /= out.pi_hat.sum();
    return out;
}

/// Spectral initialization refined by variational EM; the EM's hard assignment
/// is the partition handed to the estimators.
struct Detection {
    Partition partition;
    Eigen::MatrixXd theta_vb;
    Eigen::VectorXd pi_hat;
    double lower_bound = 0.0;
    bool converged = false;
    int iterations = 0;
};

inline Detection detect_communities(const Graph& graph, const SpectralEmbedding& embedding, int K,
                                     std::uint64_t seed, const VariationalOptions& options = {}) {
    const auto init = spectral_partition(embedding, K, seed);
    auto vem = variational_em(graph, init, options);
    Detection d;
    d.partition = std::move(vem.detection.partition);
    d.theta_vb = std::move(vem.theta_vb);
    d.pi_hat = std::move(vem.pi_hat);
    d.lower_bound = vem.objective_trace.back();
    d.converged = vem.detection.converged;
    d.iterations = vem.detection.iterations;
    return d;
}

}  // namespace ebgraph
