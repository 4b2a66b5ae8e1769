#pragma once

// Stationary distributions and exact total-variation mixing times of finite
// Markov chains, plus validation of the exploration assumption on a
// behavior policy.

#include "dtl/error.hpp"
#include "dtl/mdp.hpp"

#include <numeric>
#include <queue>
#include <string>
#include <vector>

namespace dtl {

namespace detail {

inline std::vector<int> bfs_levels(const Mat& p, bool transpose) {
    const int n = static_cast<int>(p.rows());
    std::vector<int> level(n, -1);
    std::queue<int> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v = 0; v < n; ++v) {
            const double w = transpose ? p(v, u) : p(u, v);
            if (w > 0.0 && level[v] < 0) {
                level[v] = level[u] + 1;
                frontier.push(v);
            }
        }
    }
    return level;
}

inline void check_square_stochastic(const Mat& p) {
    require(p.rows() == p.cols() && p.rows() > 0, "transition matrix must be square and non-empty");
    for (int s = 0; s < p.rows(); ++s)
        if (std::abs(p.row(s).sum() - 1.0) > 1e-10 || (p.row(s).array() < 0.0).any())
            throw UsageError("transition matrix row " + std::to_string(s) + " is not a distribution");
}

} // namespace detail

/// Strong connectivity of the positive-entry graph.
inline bool is_irreducible(const Mat& p) {
    for (bool transpose : {false, true}) {
        const auto level = detail::bfs_levels(p, transpose);
        for (int l : level)
            if (l < 0)
                return false;
    }
    return true;
}

/// Period of an irreducible chain: gcd over edges u->v of level(u) + 1 - level(v).
inline int chain_period(const Mat& p) {
    const auto level = detail::bfs_levels(p, false);
    int g = 0;
    for (int u = 0; u < p.rows(); ++u)
        for (int v = 0; v < p.cols(); ++v)
            if (p(u, v) > 0.0 && level[u] >= 0 && level[v] >= 0)
                g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
    return g;
}

inline void require_ergodic(const Mat& p) {
    if (!is_irreducible(p))
        throw AssumptionViolation(
            "exploration assumption violated: the behavior chain is reducible (it must be irreducible and aperiodic)");
    if (chain_period(p) != 1)
        throw AssumptionViolation("exploration assumption violated: the behavior chain is periodic with period " +
                                  std::to_string(chain_period(p)));
}

/// Unique μ with μᵀP = μᵀ, Σμ = 1. Requires an irreducible aperiodic chain.
inline Vec stationary_distribution(const Mat& p, double tol = 1e-12) {
    detail::check_square_stochastic(p);
    require_ergodic(p);
    const int n = static_cast<int>(p.rows());
    // (Pᵀ - I) μ = 0 with the last equation replaced by Σμ = 1.
    Mat a = p.transpose() - Mat::Identity(n, n);
    a.row(n - 1).setOnes();
    Vec b = Vec::Zero(n);
    b[n - 1] = 1.0;
    Vec mu = a.fullPivLu().solve(b);
    mu = mu.cwiseMax(0.0);
    mu /= mu.sum();
    const double residual = (p.transpose() * mu - mu).lpNorm<1>();
    if (residual > tol)
        throw NonConvergence("stationary_distribution: residual " + std::to_string(residual) +
                             " exceeds tolerance");
    return mu;
}

/// max_s ‖P^k(s,·) − μ‖_TV, TV being half the ℓ1 distance.
inline double worst_tv_distance(const Mat& pk, const Vec& mu) {
    double worst = 0.0;
    for (int s = 0; s < pk.rows(); ++s)
        worst = std::max(worst, 0.5 * (pk.row(s).transpose() - mu).lpNorm<1>());
    return worst;
}

/// Smallest k >= 0 with max_s ‖P^k(s,·) − μ‖_TV <= δ, by explicit powering.
inline int mixing_time(const Mat& p, const Vec& mu, double delta, int cap = 1000000) {
    detail::require(delta > 0.0 && delta < 1.0, "mixing_time: delta must lie in (0,1)");
    detail::require(mu.size() == p.rows(), "mixing_time: distribution size mismatch");
    Mat pk = Mat::Identity(p.rows(), p.cols());
    for (int k = 0; k <= cap; ++k) {
        if (worst_tv_distance(pk, mu) <= delta)
            return k;
        pk = pk * p;
    }
    throw NonConvergence("mixing_time: exceeded " + std::to_string(cap) +
                         " steps; the chain is (nearly) periodic");
}

/// Behavior policy must put positive mass on every action and induce an
/// irreducible, aperiodic state chain.
inline void require_exploring(const Mdp& mdp, const Policy& behavior) {
    check_conforms(mdp, behavior);
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < mdp.n_actions(); ++a)
            if (!(behavior(s, a) > 0.0))
                throw AssumptionViolation("exploration assumption violated: behavior policy gives zero "
                                          "probability to action " +
                                          std::to_string(a) + " in state " + std::to_string(s));
    require_ergodic(policy_transition(mdp, behavior));
}

inline bool is_exploring(const Mdp& mdp, const Policy& behavior) {
    try {
        require_exploring(mdp, behavior);
        return true;
    } catch (const AssumptionViolation&) {
        return false;
    }
}

} // namespace dtl
