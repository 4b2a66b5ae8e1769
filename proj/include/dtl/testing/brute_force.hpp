#pragma once

// Independent Q* oracle for small MDPs: evaluate every deterministic policy
// exactly by a linear solve and take the componentwise best. Shares no code
// path with value iteration.

#include "dtl/mdp.hpp"

#include <vector>

namespace dtl::testing {

/// Q^π for a deterministic policy: solve (I − γP_π)V = R_π, then
/// Q(s,a) = R(s,a) + γ Σ_s' P_a(s,s') V(s').
inline QVector policy_q(const Mdp& mdp, const std::vector<int>& actions) {
    const int n = mdp.n_states();
    Mat p(n, n);
    Vec r(n);
    for (int s = 0; s < n; ++s) {
        p.row(s) = mdp.transition(actions[s]).row(s);
        r[s] = mdp.reward(s, actions[s]);
    }
    const Vec v = (Mat::Identity(n, n) - mdp.gamma() * p).partialPivLu().solve(r);
    QVector q(mdp.size());
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < mdp.n_actions(); ++a)
            q[mdp.index(s, a)] = mdp.reward(s, a) + mdp.gamma() * mdp.transition(a).row(s).dot(v);
    return q;
}

struct EnumerationResult {
    QVector q_star;
    std::vector<int> best_policy;
    int n_policies = 0;
};

/// Enumerates all n_actions^n_states deterministic policies. Intended for
/// MDPs with a handful of states.
inline EnumerationResult enumerate_policies(const Mdp& mdp) {
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    std::vector<int> actions(static_cast<std::size_t>(n), 0);
    EnumerationResult out;
    double best_sum = -1e300;
    while (true) {
        const QVector q = policy_q(mdp, actions);
        out.q_star = out.n_policies == 0 ? q : QVector(out.q_star.cwiseMax(q));
        if (q.sum() > best_sum) {
            best_sum = q.sum();
            out.best_policy = actions;
        }
        ++out.n_policies;
        int i = 0;
        while (i < n && ++actions[static_cast<std::size_t>(i)] == m)
            actions[static_cast<std::size_t>(i++)] = 0;
        if (i == n)
            break;
    }
    return out;
}

} // namespace dtl::testing
