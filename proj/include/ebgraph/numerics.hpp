#pragma once

// Special functions on the positive reals and a box-constrained maximizer.

#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace ebgraph {

namespace detail {

inline void require_positive(double x, const char* fn) {
    if (!(x > 0.0) || !std::isfinite(x))
        throw DomainError(std::string(fn) + " requires a positive finite argument, got " + std::to_string(x));
}

// Arguments are shifted up to this point before the asymptotic series apply.
inline constexpr double kLogGammaShift = 15.0;
inline constexpr double kDigammaShift = 10.0;

// Direct summation is used for rising-factorial differences up to this length.
inline constexpr long kDirectSumLimit = 32;

}  // namespace detail

/// Natural log of Γ(x) for x > 0.
inline double log_gamma(double x) {
    detail::require_positive(x, "log_gamma");
    double shift_log = 0.0;
    if (x < detail::kLogGammaShift) {
        double prod = 1.0;
        while (x < detail::kLogGammaShift) {
            prod *= x;
            x += 1.0;
        }
        shift_log = std::log(prod);
    }
    // Stirling series with Bernoulli terms through x^-13.
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv * (1.0 / 12.0 +
               inv2 * (-1.0 / 360.0 +
                       inv2 * (1.0 / 1260.0 +
                               inv2 * (-1.0 / 1680.0 +
                                       inv2 * (1.0 / 1188.0 +
                                               inv2 * (-691.0 / 360360.0 + inv2 * (1.0 / 156.0)))))));
    const double half_log_two_pi = 0.91893853320467274178;
    return (x - 0.5) * std::log(x) - x + half_log_two_pi + series - shift_log;
}

/// log B(a, b) = log Γ(a) + log Γ(b) − log Γ(a + b).
inline double log_beta(double a, double b) {
    detail::require_positive(a, "log_beta");
    detail::require_positive(b, "log_beta");
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

/// ψ(x) = d/dx log Γ(x) for x > 0.
inline double digamma(double x) {
    detail::require_positive(x, "digamma");
    double acc = 0.0;
    while (x < detail::kDigammaShift) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv2 = 1.0 / (x * x);
    const double series =
        inv2 * (1.0 / 12.0 -
                inv2 * (1.0 / 120.0 -
                        inv2 * (1.0 / 252.0 -
                                inv2 * (1.0 / 240.0 -
                                        inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    return acc + std::log(x) - 0.5 / x - series;
}

/// log Γ(x + m) − log Γ(x) for integer m ≥ 0, summed directly for short runs
/// so that large x does not cancel catastrophically.
inline double log_rising(double x, std::int64_t m) {
    detail::require_positive(x, "log_rising");
    if (m <= 0) return 0.0;
    if (m <= detail::kDirectSumLimit) {
        double s = 0.0;
        for (std::int64_t k = 0; k < m; ++k) s += std::log(x + static_cast<double>(k));
        return s;
    }
    return log_gamma(x + static_cast<double>(m)) - log_gamma(x);
}

/// ψ(x + m) − ψ(x) for integer m ≥ 0.
inline double digamma_rising(double x, std::int64_t m) {
    detail::require_positive(x, "digamma_rising");
    if (m <= 0) return 0.0;
    if (m <= detail::kDirectSumLimit) {
        double s = 0.0;
        for (std::int64_t k = 0; k < m; ++k) s += 1.0 / (x + static_cast<double>(k));
        return s;
    }
    return digamma(x + static_cast<double>(m)) - digamma(x);
}

// ---------------------------------------------------------------------------
// Box-constrained maximization

struct Bounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Bounds() = default;
    Bounds(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
        if (lower.size() != upper.size()) throw InputError("bounds dimension mismatch");
        for (Eigen::Index i = 0; i < lower.size(); ++i)
            if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i]))
                throw InputError("bounds require finite lower < upper in every coordinate");
    }

    Eigen::Index dim() const { return lower.size(); }

    Eigen::VectorXd project(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

    bool strictly_contains(const Eigen::VectorXd& x) const {
        return x.size() == dim() && (x.array() > lower.array()).all() && (x.array() < upper.array()).all();
    }
};

struct MaximizeOptions {
    double gradient_tolerance = 1e-6;
    int max_iterations = 500;
    int memory = 10;
};

struct MaximizeResult {
    Eigen::VectorXd argmax;
    double value = 0.0;
    int iterations = 0;
    double projected_gradient_norm = 0.0;
    bool converged = false;       // projected gradient fell below tolerance
    bool iteration_cap = false;   // warning: stopped at max_iterations
    bool stalled = false;         // line search could not make representable progress
};

/// Maximizes `objective` over the box. `objective(x, grad)` returns f(x) and
/// writes ∇f(x) into `grad`. Projected limited-memory BFGS: variables pinned at
/// a bound by the gradient are frozen for the step, the rest follow the
/// two-loop direction, and an Armijo backtrack runs along the projection arc.
/// The returned value is never below the value at `init`.
template <class Objective>
MaximizeResult maximize_box(Objective&& objective, const Bounds& bounds, const Eigen::VectorXd& init,
                            const MaximizeOptions& options = {}) {
    if (!bounds.strictly_contains(init)) throw InputError("maximize_box: init must lie strictly inside the bounds");
    const Eigen::Index d = bounds.dim();

    // Minimize phi = -f throughout.
    Eigen::VectorXd x = init;
    Eigen::VectorXd grad(d);
    double phi = -objective(x, grad);
    Eigen::VectorXd g = -grad;
    if (!std::isfinite(phi) || !g.allFinite()) throw InputError("maximize_box: objective is not finite at init");

    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;
    MaximizeResult result;

    auto projected_gradient = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& gr) {
        return (bounds.project(at - gr) - at).norm();
    };

    int iter = 0;
    for (;; ++iter) {
        const double pg = projected_gradient(x, g);
        result.projected_gradient_norm = pg;
        if (pg <= options.gradient_tolerance) {
            result.converged = true;
            break;
        }
        if (iter >= options.max_iterations) {
            result.iteration_cap = true;
            break;
        }

        Eigen::Array<bool, Eigen::Dynamic, 1> active(d);
        for (Eigen::Index i = 0; i < d; ++i)
            active[i] = (x[i] <= bounds.lower[i] && g[i] > 0.0) || (x[i] >= bounds.upper[i] && g[i] < 0.0);

        auto restrict_free = [&](Eigen::VectorXd v) {
            for (Eigen::Index i = 0; i < d; ++i)
                if (active[i]) v[i] = 0.0;
            return v;
        };

        // Two-loop recursion on the free coordinates.
        Eigen::VectorXd q = restrict_free(g);
        std::vector<double> alpha(memory.size());
        for (std::size_t k = memory.size(); k-- > 0;) {
            const auto& [s, y] = memory[k];
            alpha[k] = s.dot(q) / y.dot(s);
            q -= alpha[k] * restrict_free(y);
        }
        if (!memory.empty()) {
            const auto& [s, y] = memory.back();
            q *= s.dot(y) / y.dot(y);
        } else {
            q /= std::max(1.0, g.norm());
        }
        for (std::size_t k = 0; k < memory.size(); ++k) {
            const auto& [s, y] = memory[k];
            const double beta = y.dot(q) / y.dot(s);
            q += (alpha[k] - beta) * restrict_free(s);
        }
        Eigen::VectorXd dir = -restrict_free(q);
        if (!(dir.dot(g) < 0.0)) {
            memory.clear();
            dir = -restrict_free(g) / std::max(1.0, g.norm());
        }

        // Armijo backtracking along the projected arc.
        constexpr double c1 = 1e-4;
        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd x_new, g_new(d);
        double phi_new = phi;
        for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
            x_new = bounds.project(x + step * dir);
            if (x_new == x) break;
            phi_new = -objective(x_new, grad);
            if (!std::isfinite(phi_new)) continue;
            const double predicted = g.dot(x_new - x);
            if (phi_new < phi && phi_new <= phi + c1 * std::min(predicted, 0.0)) {
                g_new = -grad;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!memory.empty()) {
                // Retry once from steepest descent before giving up.
                memory.clear();
                continue;
            }
            result.stalled = true;
            break;
        }

        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd y = g_new - g;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            memory.emplace_back(std::move(s), std::move(y));
            if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
        }
        x = std::move(x_new);
        g = std::move(g_new);
        phi = phi_new;
    }

    result.argmax = x;
    result.value = -phi;
    result.iterations = iter;
    return result;
}

}  // namespace ebgraph
