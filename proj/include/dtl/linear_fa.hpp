#pragma once

// Linear function approximation: feature matrices, stationary state-action
// weights D, the D-weighted projection onto the feature span, and the
// componentwise truncation operator.

#include "dtl/error.hpp"
#include "dtl/mdp.hpp"
#include "dtl/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dtl {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kRankTol = 1e-10;

/// Feature matrix Φ with one row φ(s,a)ᵀ per state-action pair.
class FeatureMap {
  public:
    explicit FeatureMap(RowMatrix phi) : phi_(std::move(phi)) {
        detail::require(phi_.rows() > 0 && phi_.cols() > 0, "FeatureMap: empty feature matrix");
        detail::require(phi_.allFinite(), "FeatureMap: non-finite feature entry");
        if (phi_.cols() > phi_.rows())
            throw RankError("FeatureMap: more features than state-action pairs");
        Eigen::JacobiSVD<Mat> svd(phi_);
        const auto& sv = svd.singularValues();
        if (sv.minCoeff() <= kRankTol * std::max(1.0, sv.maxCoeff()))
            throw RankError("FeatureMap: feature matrix is rank deficient (smallest singular value " +
                            std::to_string(sv.minCoeff()) + ")");
        max_row_l1_ = phi_.rowwise().lpNorm<1>().maxCoeff();
    }

    static FeatureMap identity(int n) { return FeatureMap(RowMatrix::Identity(n, n)); }

    /// Copy rescaled by 1 / max_(s,a) ‖φ(s,a)‖₁ when that norm exceeds 1.
    FeatureMap normalized() const {
        if (max_row_l1_ <= 1.0)
            return *this;
        return FeatureMap(phi_ / max_row_l1_);
    }

    const RowMatrix& matrix() const { return phi_; }
    int rows() const { return static_cast<int>(phi_.rows()); }
    int dim() const { return static_cast<int>(phi_.cols()); }
    bool complete_basis() const { return phi_.rows() == phi_.cols(); }
    double max_row_l1() const { return max_row_l1_; }
    bool normalized_flag() const { return max_row_l1_ <= 1.0 + 1e-12; }

    auto row(int idx) const { return phi_.row(idx); }

    /// φ(idx)ᵀθ. All code paths that need a single feature value go through
    /// here, so a vector built with apply() matches per-entry reads bitwise.
    double value(int idx, const Theta& theta) const { return phi_.row(idx).dot(theta); }

    /// Φθ, evaluated row by row with value().
    QVector apply(const Theta& theta) const {
        detail::require(theta.size() == dim(), "FeatureMap: parameter dimension mismatch");
        QVector q(rows());
        for (int i = 0; i < rows(); ++i)
            q[i] = value(i, theta);
        return q;
    }

  private:
    RowMatrix phi_;
    double max_row_l1_ = 0.0;
};

/// Diagonal of D: w(s,a) = μ(s) π_b(a|s).
class StateActionWeights {
  public:
    explicit StateActionWeights(Vec w) : w_(std::move(w)) {
        detail::require(w_.size() > 0, "StateActionWeights: empty");
        if ((w_.array() <= 0.0).any())
            throw AssumptionViolation("exploration assumption violated: some state-action pair has zero "
                                      "stationary weight");
        detail::require(std::abs(w_.sum() - 1.0) <= 1e-10, "StateActionWeights: weights must sum to 1");
    }

    const Vec& values() const { return w_; }
    int size() const { return static_cast<int>(w_.size()); }
    double operator[](int i) const { return w_[i]; }

    /// ‖x‖_D = (xᵀDx)^{1/2}.
    double norm(const Vec& x) const { return std::sqrt((x.array().square() * w_.array()).sum()); }

  private:
    Vec w_;
};

inline StateActionWeights weights_from(const Vec& mu, const Policy& behavior) {
    detail::require(mu.size() == behavior.n_states(), "weights_from: distribution/policy size mismatch");
    const int n_actions = behavior.n_actions();
    Vec w(mu.size() * n_actions);
    for (int s = 0; s < mu.size(); ++s)
        for (int a = 0; a < n_actions; ++a)
            w[s * n_actions + a] = mu[s] * behavior(s, a);
    return StateActionWeights(std::move(w));
}

struct GramInfo {
    Mat gram; ///< ΦᵀDΦ
    double lambda_min = 0.0;
};

inline GramInfo gram_and_lambda_min(const FeatureMap& fm, const StateActionWeights& w) {
    detail::require(fm.rows() == w.size(), "gram_and_lambda_min: feature rows and weights differ in size");
    GramInfo info;
    info.gram = fm.matrix().transpose() * w.values().asDiagonal() * fm.matrix();
    info.gram = 0.5 * (info.gram + info.gram.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(info.gram, Eigen::EigenvaluesOnly);
    info.lambda_min = eig.eigenvalues().minCoeff();
    if (info.lambda_min <= 1e-12)
        throw RankError("gram_and_lambda_min: Gram matrix is not positive definite (lambda_min = " +
                        std::to_string(info.lambda_min) + ")");
    return info;
}

/// Projection onto span(Φ) in ‖·‖_D, with the Gram factorization cached.
class Projector {
  public:
    Projector(const FeatureMap& fm, const StateActionWeights& w)
        : fm_(fm), info_(gram_and_lambda_min(fm, w)), phit_d_(fm.matrix().transpose() * w.values().asDiagonal()),
          llt_(info_.gram) {
        if (llt_.info() != Eigen::Success)
            throw RankError("Projector: Cholesky factorization of the Gram matrix failed");
    }

    /// (ΦᵀDΦ)⁻¹ΦᵀD q
    Theta coefficients(const QVector& q) const {
        detail::require(q.size() == fm_.rows(), "Projector: vector length mismatch");
        return llt_.solve(phit_d_ * q);
    }

    QVector project(const QVector& q) const { return fm_.apply(coefficients(q)); }

    /// Solves (ΦᵀDΦ) x = b.
    Theta solve_gram(const Vec& b) const { return llt_.solve(b); }

    const GramInfo& gram() const { return info_; }
    double lambda_min() const { return info_.lambda_min; }
    const Mat& phit_d() const { return phit_d_; }
    const FeatureMap& features() const { return fm_; }

  private:
    FeatureMap fm_;
    GramInfo info_;
    Mat phit_d_;
    Eigen::LLT<Mat> llt_;
};

inline QVector project_W(const QVector& q, const FeatureMap& fm, const StateActionWeights& w) {
    return Projector(fm, w).project(q);
}

inline double truncate(double x, double r) { return std::clamp(x, -r, r); }

/// Componentwise clamp to [-r, r].
inline Vec truncate(const Vec& x, double r) {
    detail::require(r >= 0.0, "truncate: radius must be nonnegative");
    return x.cwiseMax(-r).cwiseMin(r);
}

/// Default truncation radius max(1, max|R|) / (1 - γ).
inline double default_radius(const Mdp& mdp) { return std::max(1.0, mdp.reward_scale()) / (1.0 - mdp.gamma()); }

enum class LpNorm { one, two, inf };

inline double weighted_norm(const Vec& x, const Vec& weights, LpNorm p) {
    switch (p) {
    case LpNorm::one:
        return (weights.array() * x.array().abs()).sum();
    case LpNorm::two:
        return std::sqrt((weights.array() * x.array().square()).sum());
    case LpNorm::inf:
        return (weights.array() * x.array().abs()).maxCoeff();
    }
    return 0.0;
}

/// min over candidate y ∈ B_r of ‖x − y‖ − ‖x − ⌈x⌉‖ in the weighted ℓ_p norm.
///
/// Candidates are n_random uniform points of B_r plus boundary points built
/// from ⌈x⌉: each coordinate pushed to ±r, and the full sign vertex of x.
/// A nonnegative margin means no candidate beats truncation.
inline double truncation_projection_margin(const Vec& x, double r, const Vec& weights, LpNorm p, int n_random,
                                           Rng& rng) {
    detail::require(weights.size() == x.size(), "truncation check: weight/vector size mismatch");
    detail::require((weights.array() > 0.0).all(), "truncation check: weights must be positive");
    const Vec clipped = truncate(x, r);
    const double best = weighted_norm(x - clipped, weights, p);
    double margin = std::numeric_limits<double>::infinity();
    auto consider = [&](const Vec& y) { margin = std::min(margin, weighted_norm(x - y, weights, p) - best); };

    Vec y(x.size());
    for (int i = 0; i < n_random; ++i) {
        for (int j = 0; j < y.size(); ++j)
            y[j] = rng.uniform(-r, r);
        consider(y);
    }
    for (int j = 0; j < x.size(); ++j) {
        for (double edge : {-r, r}) {
            y = clipped;
            y[j] = edge;
            consider(y);
        }
    }
    for (int j = 0; j < x.size(); ++j)
        y[j] = x[j] >= 0.0 ? r : -r;
    consider(y);
    return margin;
}

inline bool truncation_is_projection_check(const Vec& x, double r, const Vec& weights, LpNorm p, int n_random,
                                           Rng& rng) {
    return truncation_projection_margin(x, r, weights, p, n_random, rng) >= -1e-12;
}

/// One-step approximation error ‖⌈Proj_W H(Φθ)⌉ − H(Φθ)‖∞ at a single θ.
inline double approx_error_at(const Projector& proj, const Mdp& mdp, double r, const Theta& theta) {
    const QVector h = bellman_opt(mdp, proj.features().apply(theta));
    return (truncate(proj.project(h), r) - h).lpNorm<Eigen::Infinity>();
}

/// Sampled lower bound on sup_{Q ∈ W, ‖Q‖∞ <= r} ‖⌈Proj_W H(Q)⌉ − H(Q)‖∞.
///
/// θ is drawn by rejection from the box |θ_j| <= r Σ_i |Φ⁺_{ji}|, which
/// contains every θ with ‖Φθ‖∞ <= r. θ = 0 and each extra candidate (scaled
/// onto the radius-r slice when it lies outside) are always evaluated.
/// Throws NonConvergence when a single draw needs more than 10⁶ proposals.
inline double approx_error_estimate(const FeatureMap& fm, const StateActionWeights& w, const Mdp& mdp, double r,
                                    int n_samples, Rng& rng, std::span<const Theta> candidates = {}) {
    detail::require(n_samples >= 1, "approx_error_estimate: n_samples must be at least 1");
    detail::require(fm.rows() == mdp.size(), "approx_error_estimate: feature rows do not match the MDP");
    const Projector proj(fm, w);

    double best = approx_error_at(proj, mdp, r, Theta::Zero(fm.dim()));
    for (const Theta& c : candidates) {
        const double scale = fm.apply(c).lpNorm<Eigen::Infinity>();
        best = std::max(best, approx_error_at(proj, mdp, r, scale > r ? Theta(c * (r / scale)) : c));
    }

    const Mat pinv = fm.matrix().completeOrthogonalDecomposition().pseudoInverse();
    const Vec half_width = r * pinv.rowwise().lpNorm<1>();
    constexpr int kMaxProposals = 1000000;
    Theta theta(fm.dim());
    for (int i = 0; i < n_samples; ++i) {
        int proposals = 0;
        do {
            if (++proposals > kMaxProposals)
                throw NonConvergence("approx_error_estimate: rejection sampling failed after 10^6 proposals; "
                                     "rescale the radius or the features");
            for (int j = 0; j < theta.size(); ++j)
                theta[j] = rng.uniform(-half_width[j], half_width[j]);
        } while (fm.apply(theta).lpNorm<Eigen::Infinity>() > r);
        best = std::max(best, approx_error_at(proj, mdp, r, theta));
    }
    return best;
}

} // namespace dtl
