#pragma once

// Built-in environments: Baird's star counterexample, the two-state
// divergent example, tabular wrappers and seeded random MDPs.

#include "dtl/linear_fa.hpp"
#include "dtl/markov_chain.hpp"
#include "dtl/mdp.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dtl {

/// An MDP bundled with its features and behavior policy. Construction
/// validates exploration and the feature rank and solves for Q* (tol 1e-10).
class Environment {
  public:
    Environment(std::string name, Mdp mdp, FeatureMap features, Policy behavior)
        : name_(std::move(name)), mdp_(std::move(mdp)), features_(std::move(features)),
          behavior_(std::move(behavior)), mu_(compute_mu(mdp_, behavior_)),
          weights_(weights_from(mu_, behavior_)), q_star_(value_iteration(mdp_, 1e-10).q) {
        if (features_.rows() != mdp_.size())
            throw UsageError("Environment '" + name_ + "': feature matrix has " +
                             std::to_string(features_.rows()) + " rows, expected " +
                             std::to_string(mdp_.size()));
    }

    const std::string& name() const { return name_; }
    const Mdp& mdp() const { return mdp_; }
    const FeatureMap& features() const { return features_; }
    const Policy& behavior() const { return behavior_; }
    const Vec& mu() const { return mu_; }
    const StateActionWeights& weights() const { return weights_; }
    const QVector& q_star() const { return q_star_; }
    double gamma() const { return mdp_.gamma(); }

    Mat behavior_chain() const { return policy_transition(mdp_, behavior_); }

    /// Same environment with a different feature matrix.
    Environment with_features(FeatureMap features) const {
        return Environment(name_, mdp_, std::move(features), behavior_);
    }

  private:
    static Vec compute_mu(const Mdp& mdp, const Policy& behavior) {
        require_exploring(mdp, behavior);
        return stationary_distribution(policy_transition(mdp, behavior));
    }

    std::string name_;
    Mdp mdp_;
    FeatureMap features_;
    Policy behavior_;
    Vec mu_;
    StateActionWeights weights_;
    QVector q_star_;
};

namespace baird_actions {
inline constexpr int solid = 0;
inline constexpr int dash = 1;
} // namespace baird_actions

/// Default 14 x 14 Baird feature matrix (states 0..6 here are states 1..7 in the usual drawing).
///
///   Q(s_i, solid) = θ0 + 2θ_i       i = 1..6
///   Q(s_7, solid) = 2θ0 + θ7
///   Q(s_i, dash)  = θ_(7+i)         i = 1..6
///   Q(s_7, dash)  = θ0
inline RowMatrix baird_default_features() {
    RowMatrix phi = RowMatrix::Zero(14, 14);
    auto idx = [](int s, int a) { return s * 2 + a; };
    for (int i = 1; i <= 6; ++i) {
        phi(idx(i - 1, baird_actions::solid), 0) = 1.0;
        phi(idx(i - 1, baird_actions::solid), i) = 2.0;
        phi(idx(i - 1, baird_actions::dash), 7 + i) = 1.0;
    }
    phi(idx(6, baird_actions::solid), 0) = 2.0;
    phi(idx(6, baird_actions::solid), 7) = 1.0;
    phi(idx(6, baird_actions::dash), 0) = 1.0;
    return phi;
}

inline Mdp baird_mdp(double gamma) {
    Mat solid = Mat::Zero(7, 7);
    solid.col(6).setOnes();
    Mat dash = Mat::Zero(7, 7);
    dash.leftCols(6).setConstant(1.0 / 6.0);
    return Mdp({solid, dash}, Vec::Zero(14), gamma);
}

/// Baird's 7-state, 2-action star MDP with zero rewards and uniform behavior.
inline Environment baird(double gamma) {
    return Environment("baird", baird_mdp(gamma), FeatureMap(baird_default_features()), Policy::uniform(7, 2));
}

inline Mdp example1_mdp(double gamma) {
    Mat to_first(2, 2), to_second(2, 2);
    to_first << 1, 0, 1, 0;
    to_second << 0, 1, 0, 1;
    Vec rewards(4);
    rewards << 1, 2, 2, 4;
    return Mdp({to_first, to_second}, rewards, gamma);
}

/// Two states, two actions; a1 leads to s1 and a2 to s2 from anywhere.
/// Single feature Φ = (1, 2, 2, 4)ᵀ, uniform behavior.
inline Environment example1(double gamma) {
    RowMatrix phi(4, 1);
    phi << 1, 2, 2, 4;
    return Environment("example1", example1_mdp(gamma), FeatureMap(std::move(phi)), Policy::uniform(2, 2));
}

inline Environment tabular(const Mdp& mdp, const Policy& behavior, std::string name = "tabular") {
    return Environment(std::move(name), mdp, FeatureMap::identity(mdp.size()), behavior);
}

/// Transition rows from a flat Dirichlet (normalized exponentials), rewards
/// uniform in [0, 1], uniform behavior, tabular features.
///
/// Draw order: for each action, for each state, one row of n_states
/// exponentials; then the rewards in idx order.
inline Mdp random_mdp_model(std::uint64_t seed, int n_states, int n_actions, double gamma) {
    detail::require(n_states >= 1 && n_actions >= 1, "random_mdp: sizes must be at least 1");
    Rng rng(seed);
    std::vector<Mat> transitions;
    for (int a = 0; a < n_actions; ++a) {
        Mat p(n_states, n_states);
        for (int s = 0; s < n_states; ++s) {
            for (int s2 = 0; s2 < n_states; ++s2)
                p(s, s2) = rng.exponential();
            p.row(s) /= p.row(s).sum();
        }
        transitions.push_back(std::move(p));
    }
    Vec rewards(n_states * n_actions);
    for (int i = 0; i < rewards.size(); ++i)
        rewards[i] = rng.uniform();
    return Mdp(std::move(transitions), std::move(rewards), gamma);
}

inline Environment random_mdp(std::uint64_t seed, int n_states, int n_actions, double gamma) {
    return tabular(random_mdp_model(seed, n_states, n_actions, gamma), Policy::uniform(n_states, n_actions),
                   "random-" + std::to_string(seed) + "-" + std::to_string(n_states) + "x" +
                       std::to_string(n_actions));
}

} // namespace dtl
