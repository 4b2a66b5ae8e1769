#pragma once

// Finite discounted MDPs, the Bellman optimality operator and exact
// dynamic-programming oracles.
//
// State-action pairs are flattened as idx(s, a) = s * n_actions + a with
// 0-based states and actions. Every module in the library uses this layout.

#include "dtl/error.hpp"
#include "dtl/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace dtl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Value vector indexed by idx(s, a); length n_states * n_actions.
using QVector = Eigen::VectorXd;

/// Parameter vector of a linear approximation; length d.
using Theta = Eigen::VectorXd;

inline constexpr double kStochasticTol = 1e-12;

class Mdp {
  public:
    /// @param transitions one n_states x n_states row-stochastic matrix per action
    /// @param rewards R(s, a) laid out by idx(s, a)
    Mdp(std::vector<Mat> transitions, Vec rewards, double gamma)
        : transitions_(std::move(transitions)), rewards_(std::move(rewards)), gamma_(gamma) {
        detail::require(!transitions_.empty(), "Mdp: at least one action is required");
        n_actions_ = static_cast<int>(transitions_.size());
        n_states_ = static_cast<int>(transitions_.front().rows());
        detail::require(n_states_ > 0, "Mdp: at least one state is required");
        detail::require(gamma_ > 0.0 && gamma_ < 1.0, "Mdp: gamma must lie strictly inside (0,1)");
        for (int a = 0; a < n_actions_; ++a) {
            const Mat& p = transitions_[a];
            if (p.rows() != n_states_ || p.cols() != n_states_)
                throw UsageError("Mdp: transition matrix for action " + std::to_string(a) +
                                 " is not n_states x n_states");
            for (int s = 0; s < n_states_; ++s) {
                for (int s2 = 0; s2 < n_states_; ++s2) {
                    const double v = p(s, s2);
                    if (!(v >= 0.0 && v <= 1.0))
                        throw UsageError("Mdp: transition entry outside [0,1] at action " +
                                         std::to_string(a) + ", state " + std::to_string(s));
                }
                if (std::abs(p.row(s).sum() - 1.0) > kStochasticTol)
                    throw UsageError("Mdp: row " + std::to_string(s) + " of action " +
                                     std::to_string(a) + " does not sum to 1");
            }
        }
        detail::require(rewards_.size() == size(), "Mdp: rewards must have n_states * n_actions entries");
        detail::require(rewards_.allFinite(), "Mdp: rewards must be finite");
        reward_min_ = rewards_.minCoeff();
        reward_max_ = rewards_.maxCoeff();
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    int size() const { return n_states_ * n_actions_; }
    double gamma() const { return gamma_; }

    int index(int s, int a) const { return s * n_actions_ + a; }

    const Mat& transition(int a) const { return transitions_.at(a); }
    const std::vector<Mat>& transitions() const { return transitions_; }
    const Vec& rewards() const { return rewards_; }
    double reward(int s, int a) const { return rewards_[index(s, a)]; }

    double reward_min() const { return reward_min_; }
    double reward_max() const { return reward_max_; }
    /// max |R(s,a)|; bounds ‖Q*‖∞ by reward_scale() / (1 - γ).
    double reward_scale() const { return std::max(std::abs(reward_min_), std::abs(reward_max_)); }

  private:
    std::vector<Mat> transitions_;
    Vec rewards_;
    double gamma_;
    int n_states_ = 0;
    int n_actions_ = 0;
    double reward_min_ = 0.0;
    double reward_max_ = 0.0;
};

/// Stochastic policy π(a|s), one row per state.
class Policy {
  public:
    explicit Policy(Mat probs) : probs_(std::move(probs)) {
        detail::require(probs_.rows() > 0 && probs_.cols() > 0, "Policy: empty probability table");
        for (int s = 0; s < probs_.rows(); ++s) {
            if ((probs_.row(s).array() < 0.0).any())
                throw UsageError("Policy: negative probability in row " + std::to_string(s));
            if (std::abs(probs_.row(s).sum() - 1.0) > kStochasticTol)
                throw UsageError("Policy: row " + std::to_string(s) + " does not sum to 1");
        }
    }

    static Policy uniform(int n_states, int n_actions) {
        return Policy(Mat::Constant(n_states, n_actions, 1.0 / n_actions));
    }

    static Policy deterministic(const std::vector<int>& actions, int n_actions) {
        Mat probs = Mat::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
        for (std::size_t s = 0; s < actions.size(); ++s) {
            detail::require(actions[s] >= 0 && actions[s] < n_actions, "Policy: action out of range");
            probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
        }
        return Policy(std::move(probs));
    }

    int n_states() const { return static_cast<int>(probs_.rows()); }
    int n_actions() const { return static_cast<int>(probs_.cols()); }
    double operator()(int s, int a) const { return probs_(s, a); }
    const Mat& probs() const { return probs_; }

    /// Action with unit mass at s, or -1 when the row is not degenerate.
    int deterministic_action(int s) const {
        for (int a = 0; a < n_actions(); ++a)
            if (probs_(s, a) == 1.0)
                return a;
        return -1;
    }

    bool operator==(const Policy& other) const { return probs_ == other.probs_; }

  private:
    Mat probs_;
};

inline void check_conforms(const Mdp& mdp, const QVector& q) {
    if (q.size() != mdp.size())
        throw UsageError("Q-vector has " + std::to_string(q.size()) + " entries, MDP expects " +
                         std::to_string(mdp.size()));
}

inline void check_conforms(const Mdp& mdp, const Policy& pi) {
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
        throw UsageError("Policy dimensions do not match the MDP");
}

/// V(s) = max_a Q(s, a).
inline Vec state_max(const Mdp& mdp, const QVector& q) {
    check_conforms(mdp, q);
    Vec v(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s)
        v[s] = q.segment(mdp.index(s, 0), mdp.n_actions()).maxCoeff();
    return v;
}

/// Bellman optimality operator H(Q)(s,a) = R(s,a) + γ Σ_s' P_a(s,s') max_a' Q(s',a').
inline QVector bellman_opt(const Mdp& mdp, const QVector& q) {
    const Vec v = state_max(mdp, q);
    QVector out(mdp.size());
    for (int a = 0; a < mdp.n_actions(); ++a) {
        const Vec next = mdp.transition(a) * v;
        for (int s = 0; s < mdp.n_states(); ++s)
            out[mdp.index(s, a)] = mdp.reward(s, a) + mdp.gamma() * next[s];
    }
    return out;
}

struct ValueIterationResult {
    QVector q;
    int iterations = 0;
};

/// Iterates Q <- H(Q) from zero until ‖H(Q) - Q‖∞ <= tol.
inline ValueIterationResult value_iteration(const Mdp& mdp, double tol = 1e-10, int max_iter = 100000) {
    detail::require(tol > 0.0, "value_iteration: tol must be positive");
    QVector q = QVector::Zero(mdp.size());
    for (int it = 0; it <= max_iter; ++it) {
        QVector next = bellman_opt(mdp, q);
        if ((next - q).lpNorm<Eigen::Infinity>() <= tol)
            return {std::move(q), it};
        q = std::move(next);
    }
    throw NonConvergence("value_iteration: no convergence to tol " + std::to_string(tol) + " within " +
                         std::to_string(max_iter) + " iterations");
}

/// Greedy actions; ties go to the lowest action index.
inline std::vector<int> greedy_actions(const Mdp& mdp, const QVector& q) {
    check_conforms(mdp, q);
    std::vector<int> actions(mdp.n_states(), 0);
    for (int s = 0; s < mdp.n_states(); ++s) {
        int best = 0;
        for (int a = 1; a < mdp.n_actions(); ++a)
            if (q[mdp.index(s, a)] > q[mdp.index(s, best)])
                best = a;
        actions[s] = best;
    }
    return actions;
}

inline Policy greedy_policy(const Mdp& mdp, const QVector& q) {
    return Policy::deterministic(greedy_actions(mdp, q), mdp.n_actions());
}

/// P_π(s, s') = Σ_a π(a|s) P_a(s, s').
inline Mat policy_transition(const Mdp& mdp, const Policy& pi) {
    check_conforms(mdp, pi);
    Mat p = Mat::Zero(mdp.n_states(), mdp.n_states());
    for (int a = 0; a < mdp.n_actions(); ++a)
        p += pi.probs().col(a).asDiagonal() * mdp.transition(a);
    return p;
}

struct Step {
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
};

namespace detail {
/// Inverse-CDF draw over the entries of a probability row, in index order.
template <class Row> int inverse_cdf(const Row& probs, double u) {
    double acc = 0.0;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
        acc += probs[i];
        if (u < acc)
            return i;
    }
    for (int i = n - 1; i >= 0; --i)
        if (probs[i] > 0.0)
            return i;
    return n - 1;
}
} // namespace detail

/// One transition of the behavior chain.
///
/// Exactly two uniforms are consumed, in this order: the first selects the
/// action by inverse CDF over action indices, the second selects the next
/// state by inverse CDF over state indices. Reproducibility relies on it.
inline Step sample_step(const Mdp& mdp, const Policy& pi, int s, Rng& rng) {
    detail::require(s >= 0 && s < mdp.n_states(), "sample_step: state index out of range");
    Step step;
    step.action = detail::inverse_cdf(pi.probs().row(s), rng.uniform());
    step.reward = mdp.reward(s, step.action);
    step.next_state = detail::inverse_cdf(mdp.transition(step.action).row(s), rng.uniform());
    return step;
}

} // namespace dtl
