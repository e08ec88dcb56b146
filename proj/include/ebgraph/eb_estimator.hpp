#pragma once

// Connectivity estimates for a fixed partition: the block MLE, fixed-prior
// Beta posterior means, and the empirical-Bayes estimate whose two Beta
// priors (diagonal and off-diagonal blocks) are fitted by maximizing the
// Beta-Binomial marginal likelihood.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "graph.hpp"
#include "numerics.hpp"

namespace ebgraph {

enum class BlockSet { Diagonal, OffDiagonal };

enum class Method { MLE, EB, VBEM, FixedPrior };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::MLE: return "MLE";
        case Method::EB: return "EB";
        case Method::VBEM: return "VBEM";
        case Method::FixedPrior: return "fixed-prior";
    }
    return "?";
}

/// Beta(alpha0, beta0) prior for diagonal blocks, Beta(alpha1, beta1) for the rest.
struct HyperParams {
    double alpha0 = 1.0;
    double beta0 = 1.0;
    double alpha1 = 1.0;
    double beta1 = 1.0;

    std::pair<double, double> pair(BlockSet which) const {
        return which == BlockSet::Diagonal ? std::pair{alpha0, beta0} : std::pair{alpha1, beta1};
    }
    friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct ConnectivityEstimate {
    Eigen::MatrixXd theta;
    Method method = Method::MLE;
    std::optional<HyperParams> hyper;
    std::optional<Eigen::MatrixXd> shrinkage;
    /// Human-readable notes such as density-filled blocks or unfitted priors.
    std::vector<std::string> flags;

    int K() const { return static_cast<int>(theta.rows()); }
};

/// Box for each Beta hyperparameter.
inline constexpr double kHyperLower = 1e-4;
inline constexpr double kHyperUpper = 1e6;

namespace detail {

struct BlockCount {
    std::int64_t edges;
    std::int64_t pairs;
};

/// Blocks of the requested kind with at least one pair; empty blocks
/// contribute nothing to the marginal likelihood.
inline std::vector<BlockCount> nonempty_blocks(const BlockStats& stats, BlockSet which) {
    std::vector<BlockCount> out;
    for (int a = 0; a < stats.K; ++a) {
        if (which == BlockSet::Diagonal) {
            if (stats.pair_counts(a, a) > 0) out.push_back({stats.edge_counts(a, a), stats.pair_counts(a, a)});
        } else {
            for (int b = a + 1; b < stats.K; ++b)
                if (stats.pair_counts(a, b) > 0) out.push_back({stats.edge_counts(a, b), stats.pair_counts(a, b)});
        }
    }
    return out;
}

inline void require_hyper(double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
        throw DomainError("Beta hyperparameters must be positive and finite");
}

inline double marginal_loglik(const std::vector<BlockCount>& blocks, double alpha, double beta) {
    double total = 0.0;
    for (const auto& [x, n] : blocks)
        total += log_rising(alpha, x) + log_rising(beta, n - x) - log_rising(alpha + beta, n);
    return total;
}

inline std::array<double, 2> loglik_gradient(const std::vector<BlockCount>& blocks, double alpha, double beta) {
    double da = 0.0, db = 0.0;
    for (const auto& [x, n] : blocks) {
        const double common = digamma_rising(alpha + beta, n);
        da += digamma_rising(alpha, x) - common;
        db += digamma_rising(beta, n - x) - common;
    }
    return {da, db};
}

}  // namespace detail

/// Block frequencies X^B_ab / n_ab. Blocks without pairs (singleton clusters on
/// the diagonal) take the global edge density and are flagged.
inline ConnectivityEstimate mle_estimate(const BlockStats& stats) {
    ConnectivityEstimate est;
    est.method = Method::MLE;
    est.theta.resize(stats.K, stats.K);
    const double density = stats.global_density();
    for (int a = 0; a < stats.K; ++a)
        for (int b = a; b < stats.K; ++b) {
            double v;
            if (stats.pair_counts(a, b) > 0) {
                v = static_cast<double>(stats.edge_counts(a, b)) / static_cast<double>(stats.pair_counts(a, b));
            } else {
                v = density;
                est.flags.push_back("density-fill(" + std::to_string(a) + "," + std::to_string(b) + ")");
            }
            est.theta(a, b) = est.theta(b, a) = v;
        }
    return est;
}

/// Beta-Binomial marginal log-likelihood summed over the selected blocks:
/// Σ log B(α + X, β + n − X) − log B(α, β). Blocks with n = 0 add exactly 0.
inline double marginal_loglik(const BlockStats& stats, double alpha, double beta, BlockSet which) {
    detail::require_hyper(alpha, beta);
    return detail::marginal_loglik(detail::nonempty_blocks(stats, which), alpha, beta);
}

/// (∂/∂α, ∂/∂β) of marginal_loglik.
inline std::array<double, 2> loglik_gradient(const BlockStats& stats, double alpha, double beta, BlockSet which) {
    detail::require_hyper(alpha, beta);
    return detail::loglik_gradient(detail::nonempty_blocks(stats, which), alpha, beta);
}

/// Outcome of fitting one (alpha, beta) pair.
struct PairFit {
    double alpha = 1.0;
    double beta = 1.0;
    double loglik = 0.0;      // objective at the fitted pair (0 when unfitted)
    double init_loglik = 0.0; // objective at the method-of-moments start
    bool fitted = false;      // false: no blocks of this kind, defaulted to (1, 1)
    bool converged = true;    // optimizer reached the gradient tolerance
    int iterations = 0;
};

struct HyperFit {
    HyperParams hyper;
    PairFit diagonal;
    PairFit offdiagonal;

    double total_loglik() const { return diagonal.loglik + offdiagonal.loglik; }
};

namespace detail {

/// Method of moments on block frequencies, clamped into the box interior.
inline std::pair<double, double> moment_start(const std::vector<BlockCount>& blocks) {
    const double lo = kHyperLower * 1.01, hi = kHyperUpper / 1.01;
    if (blocks.size() < 2) return {1.0, 1.0};
    double mean = 0.0;
    for (const auto& b : blocks) mean += static_cast<double>(b.edges) / static_cast<double>(b.pairs);
    mean /= static_cast<double>(blocks.size());
    double var = 0.0;
    for (const auto& b : blocks) {
        const double dev = static_cast<double>(b.edges) / static_cast<double>(b.pairs) - mean;
        var += dev * dev;
    }
    var /= static_cast<double>(blocks.size());
    if (!(var > 0.0) || !(mean > 0.0) || !(mean < 1.0)) return {1.0, 1.0};
    const double scale = mean * (1.0 - mean) / var - 1.0;
    if (!(scale > 0.0)) return {1.0, 1.0};
    return {std::clamp(mean * scale, lo, hi), std::clamp((1.0 - mean) * scale, lo, hi)};
}

inline PairFit fit_pair(const std::vector<BlockCount>& blocks) {
    PairFit fit;
    if (blocks.empty()) return fit;
    fit.fitted = true;

    auto objective = [&blocks](const Eigen::VectorXd& u, Eigen::VectorXd& grad) {
        const double a = std::exp(u[0]), b = std::exp(u[1]);
        const auto [ga, gb] = loglik_gradient(blocks, a, b);
        grad.resize(2);
        grad << a * ga, b * gb;
        return marginal_loglik(blocks, a, b);
    };
    const Bounds box(Eigen::Vector2d::Constant(std::log(kHyperLower)), Eigen::Vector2d::Constant(std::log(kHyperUpper)));

    const auto [a0, b0] = moment_start(blocks);
    fit.init_loglik = marginal_loglik(blocks, a0, b0);

    // The method-of-moments point plus the best cell of a coarse log grid,
    // so a poor moment estimate cannot strand the local search.
    std::vector<Eigen::Vector2d> starts{Eigen::Vector2d(std::log(a0), std::log(b0))};
    {
        constexpr int G = 13;
        const double lo = box.lower[0], width = box.upper[0] - box.lower[0];
        double best = -std::numeric_limits<double>::infinity();
        Eigen::Vector2d arg;
        for (int i = 0; i < G; ++i)
            for (int j = 0; j < G; ++j) {
                const double u = lo + (i + 0.5) * width / G, v = lo + (j + 0.5) * width / G;
                const double val = marginal_loglik(blocks, std::exp(u), std::exp(v));
                if (val > best) {
                    best = val;
                    arg = {u, v};
                }
            }
        starts.push_back(arg);
    }

    bool first = true;
    for (const auto& s : starts) {
        const auto r = maximize_box(objective, box, s);
        if (first || r.value > fit.loglik) {
            fit.alpha = std::exp(r.argmax[0]);
            fit.beta = std::exp(r.argmax[1]);
            fit.loglik = r.value;
            fit.converged = r.converged;
            fit.iterations = r.iterations;
            first = false;
        }
    }
    // exp(log(x)) can step a hair outside the box.
    fit.alpha = std::clamp(fit.alpha, kHyperLower, kHyperUpper);
    fit.beta = std::clamp(fit.beta, kHyperLower, kHyperUpper);
    fit.loglik = marginal_loglik(blocks, fit.alpha, fit.beta);
    return fit;
}

}  // namespace detail

/// Maximum marginal-likelihood hyperparameters, fitted separately for the
/// diagonal and off-diagonal blocks in log-space over [1e-4, 1e6]^2. A block
/// kind with no nonempty block keeps (1, 1) and is marked unfitted.
inline HyperFit fit_hyperparams(const BlockStats& stats) {
    HyperFit out;
    out.diagonal = detail::fit_pair(detail::nonempty_blocks(stats, BlockSet::Diagonal));
    out.offdiagonal = detail::fit_pair(detail::nonempty_blocks(stats, BlockSet::OffDiagonal));
    out.hyper = {out.diagonal.alpha, out.diagonal.beta, out.offdiagonal.alpha, out.offdiagonal.beta};
    return out;
}

namespace detail {

inline ConnectivityEstimate posterior_mean(const BlockStats& stats, const HyperParams& hyper, Method method) {
    detail::require_hyper(hyper.alpha0, hyper.beta0);
    detail::require_hyper(hyper.alpha1, hyper.beta1);
    ConnectivityEstimate est;
    est.method = method;
    est.hyper = hyper;
    est.theta.resize(stats.K, stats.K);
    Eigen::MatrixXd eta(stats.K, stats.K);
    for (int a = 0; a < stats.K; ++a)
        for (int b = a; b < stats.K; ++b) {
            const auto [alpha, beta] = hyper.pair(a == b ? BlockSet::Diagonal : BlockSet::OffDiagonal);
            const double x = static_cast<double>(stats.edge_counts(a, b));
            const double n = static_cast<double>(stats.pair_counts(a, b));
            est.theta(a, b) = est.theta(b, a) = (alpha + x) / (alpha + beta + n);
            eta(a, b) = eta(b, a) = (alpha + beta) / (alpha + beta + n);
        }
    est.shrinkage = std::move(eta);
    return est;
}

}  // namespace detail

/// Posterior means (α_d + X) / (α_d + β_d + n) with shrinkage factors
/// η = (α_d + β_d) / (α_d + β_d + n); d = 0 on the diagonal.
inline ConnectivityEstimate eb_estimate(const BlockStats& stats, const HyperParams& hyper) {
    return detail::posterior_mean(stats, hyper, Method::EB);
}

/// Convenience: fit the hyperparameters, then form the EB estimate.
inline ConnectivityEstimate eb_estimate(const BlockStats& stats) {
    const auto fit = fit_hyperparams(stats);
    auto est = eb_estimate(stats, fit.hyper);
    if (!fit.diagonal.fitted) est.flags.emplace_back("diagonal-prior-unfitted");
    if (!fit.offdiagonal.fitted) est.flags.emplace_back("offdiagonal-prior-unfitted");
    if (!fit.diagonal.converged || !fit.offdiagonal.converged) est.flags.emplace_back("optimizer-not-converged");
    return est;
}

/// Same posterior mean as EB but every block uses the fixed Beta(a0, b0) prior.
inline ConnectivityEstimate fixed_prior_estimate(const BlockStats& stats, double a0 = 0.5, double b0 = 0.5) {
    auto est = detail::posterior_mean(stats, HyperParams{a0, b0, a0, b0}, Method::FixedPrior);
    return est;
}

}  // namespace ebgraph
