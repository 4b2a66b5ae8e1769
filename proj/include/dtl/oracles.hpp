#pragma once

// Deterministic counterparts of the stochastic algorithms: the projected
// Bellman map H_Φ, its truncated version, plain fixed-point iteration with a
// divergence guard, sampled contraction moduli, the negative-drift
// feasibility check, and the fixed points of two modified-Bellman baselines.

#include "dtl/envs.hpp"
#include "dtl/linear_fa.hpp"
#include "dtl/mdp.hpp"
#include "dtl/random.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dtl {

/// H_Φ(θ) = (ΦᵀDΦ)⁻¹ΦᵀD H(Φθ).
inline Theta h_phi_map(const Theta& theta, const Projector& proj, const Mdp& mdp) {
    return proj.coefficients(bellman_opt(mdp, proj.features().apply(theta)));
}

/// Closed form of H_Φ on the two-state example:
/// 1 + (9γ/10)θ + (3γ/10)θ·sign(θ), sign(0) = +1.
inline double example1_map(double theta, double gamma) {
    const double sign = theta >= 0.0 ? 1.0 : -1.0;
    return 1.0 + 0.9 * gamma * theta + 0.3 * gamma * theta * sign;
}

/// Q ↦ ⌈Proj_W H(Q)⌉.
inline QVector truncated_pbe_map(const QVector& q, const Projector& proj, const Mdp& mdp, double r) {
    return truncate(proj.project(bellman_opt(mdp, q)), r);
}

/// θ ↦ (ΦᵀDΦ)⁻¹ΦᵀD H(⌈Φθ⌉): the deterministic map that the truncated
/// target-network algorithm runs in expectation.
inline Theta truncated_theta_map(const Theta& theta, const Projector& proj, const Mdp& mdp, double r) {
    return proj.coefficients(bellman_opt(mdp, truncate(proj.features().apply(theta), r)));
}

namespace detail {
inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const Vec& x) { return x.lpNorm<Eigen::Infinity>(); }
inline double distance(double x, double y) { return std::abs(x - y); }
inline double distance(const Vec& x, const Vec& y) { return (x - y).lpNorm<Eigen::Infinity>(); }
} // namespace detail

template <class X> struct Orbit {
    std::vector<X> iterates; ///< x_0, x_1, ...
    bool diverged = false;   ///< magnitude exceeded the guard (or went non-finite)
    bool converged = false;  ///< successive iterates within tol (when tol > 0)

    const X& last() const { return iterates.back(); }
};

/// Plain iteration x_{t+1} = map(x_t) for up to T steps. Stops early when
/// ‖x‖∞ exceeds `guard` or, if tol > 0, when ‖x_{t+1} − x_t‖∞ <= tol.
template <class X, class Map>
Orbit<X> iterate_map(Map&& map, X x0, int T, double guard = 1e8, double tol = 0.0) {
    Orbit<X> orbit;
    orbit.iterates.push_back(std::move(x0));
    for (int t = 0; t < T; ++t) {
        X next = map(orbit.iterates.back());
        const double size = detail::magnitude(next);
        const bool close = tol > 0.0 && detail::distance(next, orbit.iterates.back()) <= tol;
        orbit.iterates.push_back(std::move(next));
        if (!std::isfinite(size) || size > guard) {
            orbit.diverged = true;
            break;
        }
        if (close) {
            orbit.converged = true;
            break;
        }
    }
    return orbit;
}

/// A norm on the domain of a map, named for reporting.
struct NormSpec {
    enum class Tag { sup, phi_sup, d } tag = Tag::sup;
    std::function<double(const Vec&)> eval;

    static NormSpec sup() {
        return {Tag::sup, [](const Vec& x) { return x.lpNorm<Eigen::Infinity>(); }};
    }
    /// ‖θ‖_{Φ,∞} = ‖Φθ‖∞
    static NormSpec phi_sup(const FeatureMap& fm) {
        return {Tag::phi_sup, [fm](const Vec& x) { return fm.apply(x).lpNorm<Eigen::Infinity>(); }};
    }
    static NormSpec d(const StateActionWeights& w) {
        return {Tag::d, [w](const Vec& x) { return w.norm(x); }};
    }
};

/// max over n_pairs random pairs of ‖map(x) − map(y)‖ / ‖x − y‖, points
/// uniform in [-scale, scale]^dim. A sampled lower bound on the modulus.
template <class Map>
double contraction_modulus_estimate(Map&& map, int dim, const NormSpec& norm, int n_pairs, Rng& rng,
                                    double scale = 10.0) {
    detail::require(n_pairs >= 1, "contraction_modulus_estimate: n_pairs must be at least 1");
    double worst = 0.0;
    Vec x(dim), y(dim);
    for (int i = 0; i < n_pairs; ++i) {
        double gap = 0.0;
        do {
            for (int j = 0; j < dim; ++j) {
                x[j] = rng.uniform(-scale, scale);
                y[j] = rng.uniform(-scale, scale);
            }
            gap = norm.eval(x - y);
        } while (gap == 0.0);
        worst = std::max(worst, norm.eval(map(x) - map(y)) / gap);
    }
    return worst;
}

struct DriftViolation {
    Theta theta;
    double lhs = 0.0; ///< 2γ² E_μ[(max_a φ(S,a)ᵀθ)²]
    double rhs = 0.0; ///< E_{μ,π_b}[(φ(S,A)ᵀθ)²]
    std::string source; ///< "random" or "witness(s,a)"
};

struct DriftReport {
    std::vector<DriftViolation> violations;
    std::vector<std::string> notices; ///< skipped witnesses
    int random_checked = 0;
    int witnesses_checked = 0;

    bool feasible_on_samples() const { return violations.empty(); }
};

/// Both sides of 2γ² E_μ[(max_a φ(S,a)ᵀθ)²] < E_{μ,π_b}[(φ(S,A)ᵀθ)²],
/// as exact weighted sums.
inline std::pair<double, double> drift_sides(const FeatureMap& fm, const Vec& mu, const Policy& behavior, double gamma,
                                             const Theta& theta) {
    const int n_actions = behavior.n_actions();
    const QVector q = fm.apply(theta);
    double lhs = 0.0, rhs = 0.0;
    for (int s = 0; s < mu.size(); ++s) {
        const double best = q.segment(s * n_actions, n_actions).maxCoeff();
        lhs += mu[s] * best * best;
        for (int a = 0; a < n_actions; ++a)
            rhs += mu[s] * behavior(s, a) * q[s * n_actions + a] * q[s * n_actions + a];
    }
    return {2.0 * gamma * gamma * lhs, rhs};
}

/// Searches for θ violating the negative-drift condition: n_random θ uniform
/// in [-1, 1]^d plus, for each (s,a), a witness θ orthogonal to every other
/// feature row with φ(s,a)ᵀθ > 0. A violation is lhs >= rhs.
inline DriftReport negative_drift_check(const FeatureMap& fm, const Vec& mu, const Policy& behavior, double gamma,
                                        int n_random, Rng& rng) {
    detail::require(fm.rows() == mu.size() * behavior.n_actions(), "negative_drift_check: size mismatch");
    DriftReport report;
    auto consider = [&](const Theta& theta, std::string source) {
        auto [lhs, rhs] = drift_sides(fm, mu, behavior, gamma, theta);
        if (lhs >= rhs)
            report.violations.push_back({theta, lhs, rhs, std::move(source)});
    };

    Theta theta(fm.dim());
    for (int i = 0; i < n_random; ++i) {
        for (int j = 0; j < theta.size(); ++j)
            theta[j] = rng.uniform(-1.0, 1.0);
        if (theta.squaredNorm() == 0.0)
            continue;
        ++report.random_checked;
        consider(theta, "random");
    }

    const int n_actions = behavior.n_actions();
    for (int i = 0; i < fm.rows(); ++i) {
        const std::string label =
            "witness(" + std::to_string(i / n_actions) + "," + std::to_string(i % n_actions) + ")";
        if (fm.rows() == 1) {
            ++report.witnesses_checked;
            consider(fm.row(0).transpose(), label);
            continue;
        }
        Mat others(fm.rows() - 1, fm.dim());
        for (int j = 0, row = 0; j < fm.rows(); ++j)
            if (j != i)
                others.row(row++) = fm.row(j);
        Eigen::JacobiSVD<Mat> svd(others, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double cutoff = kRankTol * std::max(1.0, sv.size() ? sv.maxCoeff() : 1.0);
        int rank = 0;
        for (int k = 0; k < sv.size(); ++k)
            rank += sv[k] > cutoff;
        if (rank >= fm.dim()) {
            report.notices.push_back(label + ": orthogonal complement is empty, skipped");
            continue;
        }
        Theta witness = svd.matrixV().col(fm.dim() - 1);
        double along = fm.value(i, witness);
        if (std::abs(along) <= kRankTol) {
            report.notices.push_back(label + ": witness orthogonal to its own feature, skipped");
            continue;
        }
        if (along < 0.0)
            witness = -witness;
        ++report.witnesses_checked;
        consider(witness, label);
    }
    return report;
}

/// Solves (I + ηD⁻¹)Q = H(Q) by iterating Q ← (I + ηD⁻¹)⁻¹H(Q); the scaling
/// has entries <= 1 so the iteration contracts with modulus <= γ.
inline QVector modified_bellman_solve(const Mdp& mdp, const StateActionWeights& w, double eta, double tol = 1e-12,
                                      int max_iter = 100000) {
    detail::require(eta >= 0.0, "modified_bellman_solve: eta must be nonnegative");
    detail::require(w.size() == mdp.size(), "modified_bellman_solve: weight size mismatch");
    const Vec scale = (1.0 + eta / w.values().array()).inverse();
    QVector q = QVector::Zero(mdp.size());
    for (int it = 0; it < max_iter; ++it) {
        QVector next = scale.cwiseProduct(bellman_opt(mdp, q));
        if ((next - q).lpNorm<Eigen::Infinity>() <= tol)
            return next;
        q = std::move(next);
    }
    throw NonConvergence("modified_bellman_solve: no convergence within " + std::to_string(max_iter) +
                         " iterations");
}

struct CoupledFixedPoint {
    std::optional<Vec> u_star; ///< u = ΦᵀD H(Φu)
    std::optional<Vec> v_star; ///< v = (ΦᵀDΦ)⁻¹u
    bool diverged = false;
    int iterations = 0;
};

/// Iterates u ← ΦᵀD H(Φu) from zero. Divergence (guard breach or no
/// convergence within max_iter) is reported, not thrown.
inline CoupledFixedPoint coupled_q_fixed_point(const Mdp& mdp, const Projector& proj, double tol = 1e-12,
                                               double guard = 1e8, int max_iter = 100000) {
    const FeatureMap& fm = proj.features();
    CoupledFixedPoint out;
    Vec u = Vec::Zero(fm.dim());
    for (int it = 1; it <= max_iter; ++it) {
        Vec next = proj.phit_d() * bellman_opt(mdp, fm.apply(u));
        out.iterations = it;
        if (!next.allFinite() || next.lpNorm<Eigen::Infinity>() > guard) {
            out.diverged = true;
            return out;
        }
        if ((next - u).lpNorm<Eigen::Infinity>() <= tol) {
            out.u_star = next;
            out.v_star = proj.solve_gram(next);
            return out;
        }
        u = std::move(next);
    }
    out.diverged = true;
    return out;
}

/// (1 − σ)/σ · γ/(1 − γ)², the extra bias of the coupled fixed point when
/// ΦᵀDΦ = σI.
inline double coupled_bias_term(double sigma, double gamma) {
    return (1.0 - sigma) / sigma * gamma / ((1.0 - gamma) * (1.0 - gamma));
}

/// Copy of `mdp` with rewards and discount both divided by `factor`.
inline Mdp rescaled_mdp(const Mdp& mdp, double factor) {
    return Mdp(mdp.transitions(), mdp.rewards() / factor, mdp.gamma() / factor);
}

} // namespace dtl
