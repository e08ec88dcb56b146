#pragma once

// Seeded generators for stochastic block models and graphons.
//
// Draw order is part of the reproducibility contract: node latents (labels or
// uniforms) first, in node order, then one Bernoulli draw per pair (i, j),
// i < j, row by row.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "graph.hpp"
#include "rng.hpp"

namespace ebgraph {

struct SbmSpec {
    Eigen::VectorXd pi;
    Eigen::MatrixXd theta;

    SbmSpec() = default;
    SbmSpec(Eigen::VectorXd p, Eigen::MatrixXd t) : pi(std::move(p)), theta(std::move(t)) { validate(); }

    int K() const { return static_cast<int>(pi.size()); }

    void validate() const {
        const auto K = pi.size();
        if (K < 1) throw InputError("SBM needs at least one block");
        if (theta.rows() != K || theta.cols() != K) throw InputError("theta must be KxK with K = |pi|");
        if ((pi.array() < 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-12)
            throw InputError("pi must be a probability vector");
        for (Eigen::Index a = 0; a < K; ++a)
            for (Eigen::Index b = 0; b < K; ++b) {
                if (!(theta(a, b) >= 0.0 && theta(a, b) <= 1.0)) throw InputError("theta entries must lie in [0,1]");
                if (theta(a, b) != theta(b, a)) throw InputError("theta must be symmetric");
            }
    }
};

/// Parameters of the power-law graphon W(x, y) = rho * lambda^2 * (x y)^(lambda - 1).
struct PowerLawParams {
    double rho = 0.1;
    double lambda = 2.0;
};

struct GraphonSpec {
    std::function<double(double, double)> w;
    std::optional<PowerLawParams> power_law;
    std::optional<double> constant;

    /// Checks range and symmetry on a 100x100 midpoint grid.
    void validate() const {
        if (!w) throw InputError("graphon function is empty");
        constexpr int G = 100;
        for (int i = 0; i < G; ++i)
            for (int j = 0; j <= i; ++j) {
                const double x = (i + 0.5) / G, y = (j + 0.5) / G;
                const double v = w(x, y);
                if (!(v >= 0.0 && v <= 1.0))
                    throw InputError("graphon value " + std::to_string(v) + " outside [0,1] at (" + std::to_string(x) +
                                     ", " + std::to_string(y) + ")");
                if (std::abs(v - w(y, x)) > 1e-12) throw InputError("graphon is not symmetric");
            }
    }

    static GraphonSpec make_power_law(double rho, double lambda) {
        if (!(rho > 0.0 && rho <= 1.0)) throw InputError("power-law graphon needs 0 < rho <= 1");
        if (!(lambda >= 1.0) || rho * lambda * lambda > 1.0)
            throw InputError("power-law graphon needs 1 <= lambda <= 1/sqrt(rho)");
        GraphonSpec spec;
        spec.w = [rho, lambda](double x, double y) { return rho * lambda * lambda * std::pow(x * y, lambda - 1.0); };
        spec.power_law = PowerLawParams{rho, lambda};
        spec.validate();
        return spec;
    }

    static GraphonSpec make_constant(double p) {
        if (!(p >= 0.0 && p <= 1.0)) throw InputError("constant graphon needs p in [0,1]");
        GraphonSpec spec;
        spec.w = [p](double, double) { return p; };
        spec.constant = p;
        return spec;
    }

    static GraphonSpec make_function(std::function<double(double, double)> fn) {
        GraphonSpec spec;
        spec.w = std::move(fn);
        spec.validate();
        return spec;
    }
};

/// Affiliation model: rho*lambda on the diagonal, rho*epsilon elsewhere, uniform pi.
inline SbmSpec affiliation_theta(int K, double lambda, double epsilon, double rho) {
    if (K < 1) throw InputError("affiliation model needs K >= 1");
    if (!(epsilon >= 0.0 && epsilon < lambda && lambda <= 1.0))
        throw InputError("affiliation model needs 0 <= epsilon < lambda <= 1");
    if (!(rho > 0.0 && rho <= 1.0)) throw InputError("affiliation model needs 0 < rho <= 1");
    Eigen::MatrixXd theta = Eigen::MatrixXd::Constant(K, K, rho * epsilon);
    theta.diagonal().setConstant(rho * lambda);
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(K, 1.0 / K);
    // 1/K may not sum to exactly 1; absorb the rounding into the last entry.
    pi[K - 1] = 1.0 - pi.head(K - 1).sum();
    return SbmSpec(std::move(pi), std::move(theta));
}

struct SbmSample {
    Graph graph;
    Partition partition;          // compacted: empty blocks removed
    std::vector<int> kept_blocks; // original block index of each compacted cluster
    Eigen::MatrixXd theta;        // true connectivity restricted to kept blocks
};

inline SbmSample sample_sbm(const SbmSpec& spec, int n, std::uint64_t seed) {
    if (n < 1) throw InputError("sample_sbm needs n >= 1");
    spec.validate();
    Rng rng(seed);
    const int K = spec.K();
    std::vector<double> cdf(static_cast<std::size_t>(K));
    double acc = 0.0;
    for (int k = 0; k < K; ++k) cdf[k] = (acc += spec.pi[k]);

    std::vector<int> raw(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform() * acc;
        int k = 0;
        while (k < K - 1 && !(u < cdf[k])) ++k;
        while (k > 0 && spec.pi[k] == 0.0) --k;
        raw[i] = k;
    }

    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.bernoulli(spec.theta(raw[i], raw[j]))) edges.emplace_back(i, j);

    SbmSample out;
    out.graph = Graph(n, std::move(edges));
    out.partition = Partition::compact(raw, &out.kept_blocks);
    const auto Kp = static_cast<Eigen::Index>(out.kept_blocks.size());
    out.theta.resize(Kp, Kp);
    for (Eigen::Index a = 0; a < Kp; ++a)
        for (Eigen::Index b = 0; b < Kp; ++b) out.theta(a, b) = spec.theta(out.kept_blocks[a], out.kept_blocks[b]);
    return out;
}

struct GraphonSample {
    Graph graph;
    std::vector<double> latent;
};

inline GraphonSample sample_graphon(const GraphonSpec& spec, int n, std::uint64_t seed) {
    if (n < 1) throw InputError("sample_graphon needs n >= 1");
    if (!spec.w) throw InputError("graphon function is empty");
    Rng rng(seed);
    GraphonSample out;
    out.latent.resize(static_cast<std::size_t>(n));
    for (auto& u : out.latent) u = rng.uniform();
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double p = spec.w(out.latent[i], out.latent[j]);
            if (!(p >= 0.0 && p <= 1.0))
                throw InputError("graphon value " + std::to_string(p) + " outside [0,1] at a sampled point");
            if (rng.bernoulli(p)) edges.emplace_back(i, j);
        }
    out.graph = Graph(n, std::move(edges));
    return out;
}

}  // namespace ebgraph
