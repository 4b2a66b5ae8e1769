#pragma once

// The property suite run by `dtl check`. Every property is evaluated with
// fixed seeds, so the report is byte-for-byte reproducible.

#include "dtl/algorithms.hpp"
#include "dtl/bounds.hpp"
#include "dtl/csv.hpp"
#include "dtl/envs.hpp"
#include "dtl/linear_fa.hpp"
#include "dtl/markov_chain.hpp"
#include "dtl/mdp.hpp"
#include "dtl/oracles.hpp"
#include "dtl/random.hpp"
#include "dtl/testing/brute_force.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace dtl {

struct CheckResult {
    std::string module;
    std::string property;
    bool passed = false;
    std::string detail;
};

struct CheckOutcome {
    bool passed = false;
    std::string detail;
};

namespace checks {

inline std::string num(double x) { return format_double(x); }

inline Vec random_vec(Rng& rng, int n, double lo, double hi) {
    Vec v(n);
    for (int i = 0; i < n; ++i)
        v[i] = rng.uniform(lo, hi);
    return v;
}

/// Environments every property that quantifies over "all shipped
/// environments" iterates.
inline std::vector<Environment> shipped_environments() {
    return {example1(0.9), baird(0.99), random_mdp(1, 3, 2, 0.8), random_mdp(2, 4, 3, 0.9)};
}

/// Three states, two actions; action 0 jumps uniformly, action 1 rotates the
/// states. Under the uniform policy the chain is doubly stochastic, so
/// D = I / 6.
inline Mdp uniform_weight_mdp(std::uint64_t seed, double gamma) {
    Mat jump = Mat::Constant(3, 3, 1.0 / 3.0);
    Mat rotate = Mat::Zero(3, 3);
    rotate(0, 1) = rotate(1, 2) = rotate(2, 0) = 1.0;
    Rng rng(seed);
    return Mdp({jump, rotate}, random_vec(rng, 6, 0.0, 1.0), gamma);
}

// --- mdp_core -------------------------------------------------------------

inline CheckOutcome bellman_contraction() {
    Rng rng(101);
    double worst = 0.0;
    for (const Environment& env : shipped_environments()) {
        const Mdp& mdp = env.mdp();
        for (int i = 0; i < 100; ++i) {
            const Vec q1 = random_vec(rng, mdp.size(), -10, 10), q2 = random_vec(rng, mdp.size(), -10, 10);
            const double ratio = (bellman_opt(mdp, q1) - bellman_opt(mdp, q2)).lpNorm<Eigen::Infinity>() /
                                 (q1 - q2).lpNorm<Eigen::Infinity>();
            worst = std::max(worst, ratio - mdp.gamma());
        }
    }
    return {worst <= 1e-12, "max(ratio - gamma) = " + num(worst)};
}

inline CheckOutcome bellman_monotone() {
    Rng rng(102);
    double worst = -1.0;
    for (const Environment& env : shipped_environments()) {
        const Mdp& mdp = env.mdp();
        for (int i = 0; i < 100; ++i) {
            const Vec q1 = random_vec(rng, mdp.size(), -10, 10);
            const Vec q2 = q1 + random_vec(rng, mdp.size(), 0, 5);
            worst = std::max(worst, (bellman_opt(mdp, q1) - bellman_opt(mdp, q2)).maxCoeff());
        }
    }
    return {worst <= 1e-12, "max(H(Q1) - H(Q2)) = " + num(worst)};
}

inline CheckOutcome value_iteration_vs_enumeration() {
    constexpr double tol = 1e-10;
    double worst_residual = 0.0, worst_gap = 0.0;
    bool ok = true;
    int seed = 0;
    for (int n_states = 1; n_states <= 3; ++n_states)
        for (int n_actions = 1; n_actions <= 3; ++n_actions) {
            const double gamma = 0.5 + 0.1 * n_states + 0.05 * n_actions;
            const Mdp mdp = random_mdp_model(static_cast<std::uint64_t>(700 + seed++), n_states, n_actions, gamma);
            const QVector q = value_iteration(mdp, tol).q;
            const double residual = (bellman_opt(mdp, q) - q).lpNorm<Eigen::Infinity>();
            const double gap = (q - testing::enumerate_policies(mdp).q_star).lpNorm<Eigen::Infinity>();
            worst_residual = std::max(worst_residual, residual);
            worst_gap = std::max(worst_gap, gap * (1.0 - gamma) / (2.0 * tol));
            ok = ok && residual <= tol && gap <= 2.0 * tol / (1.0 - gamma);
        }
    return {ok, "max residual " + num(worst_residual) + ", max gap / (2 tol/(1-gamma)) " + num(worst_gap)};
}

inline CheckOutcome stationary_invariant() {
    double worst = 0.0;
    for (const Environment& env : shipped_environments()) {
        const Mat p = env.behavior_chain();
        worst = std::max(worst, (p.transpose() * env.mu() - env.mu()).lpNorm<1>());
    }
    return {worst <= 1e-12, "max ||mu P - mu||_1 = " + num(worst)};
}

inline CheckOutcome mixing_time_monotone() {
    const std::vector<double> deltas = {0.4, 0.2, 0.1, 0.05, 0.01, 1e-3, 1e-4};
    bool ok = true;
    std::string detail;
    for (const Environment& env : shipped_environments()) {
        int prev = 0;
        detail += env.name() + ":";
        for (double delta : deltas) {
            const int t = mixing_time(env.behavior_chain(), env.mu(), delta);
            ok = ok && t >= prev;
            prev = t;
            detail += " " + std::to_string(t);
        }
        detail += "; ";
    }
    return {ok, detail};
}

// --- linear_fa ------------------------------------------------------------

inline std::vector<Environment> feature_environments() {
    auto envs = shipped_environments();
    Rng rng(103);
    RowMatrix phi(12, 3);
    for (int i = 0; i < phi.rows(); ++i)
        for (int j = 0; j < phi.cols(); ++j)
            phi(i, j) = rng.uniform(-1.0, 1.0);
    envs.push_back(envs[3].with_features(FeatureMap(phi)));
    return envs;
}

inline CheckOutcome projection_properties() {
    Rng rng(104);
    double idem = 0.0, expansion = -1.0;
    for (const Environment& env : feature_environments()) {
        const Projector proj(env.features(), env.weights());
        for (int i = 0; i < 100; ++i) {
            const Vec q = random_vec(rng, env.mdp().size(), -10, 10);
            const Vec pq = proj.project(q);
            idem = std::max(idem, (proj.project(pq) - pq).lpNorm<Eigen::Infinity>() / (1.0 + pq.lpNorm<Eigen::Infinity>()));
            expansion = std::max(expansion, env.weights().norm(pq) - env.weights().norm(q));
        }
    }
    return {idem <= 1e-10 && expansion <= 1e-12,
            "idempotence error " + num(idem) + ", max(||Pq||_D - ||q||_D) " + num(expansion)};
}

inline CheckOutcome truncation_properties() {
    Rng rng(105);
    bool ok = true;
    for (int i = 0; i < 1000; ++i) {
        const int n = 1 + rng.index(14);
        const double r = rng.uniform(0.0, 5.0);
        const Vec x = random_vec(rng, n, -10, 10), y = random_vec(rng, n, -10, 10);
        const Vec tx = truncate(x, r), ty = truncate(y, r);
        ok = ok && tx.lpNorm<Eigen::Infinity>() <= r;
        ok = ok && (truncate(tx, r) - tx).lpNorm<Eigen::Infinity>() == 0.0;
        ok = ok && (tx - ty).lpNorm<Eigen::Infinity>() <= (x - y).lpNorm<Eigen::Infinity>();
    }
    return {ok, "1000 random pairs"};
}

/// The randomized suite behind "truncation is a metric projection onto B_r".
inline CheckOutcome truncation_is_projection_suite(int n_cases = 1000, int n_points = 200) {
    Rng rng(106);
    const int dims[] = {2, 4, 14};
    const LpNorm norms[] = {LpNorm::one, LpNorm::two, LpNorm::inf};
    double worst = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n_cases; ++c) {
        const int n = dims[c % 3];
        const LpNorm p = norms[(c / 3) % 3];
        const double r = rng.uniform(0.1, 5.0);
        const Vec x = random_vec(rng, n, -3.0 * r, 3.0 * r);
        const Vec w = random_vec(rng, n, 0.01, 1.0);
        worst = std::min(worst, truncation_projection_margin(x, r, w, p, n_points, rng));
    }
    return {worst >= -1e-12, std::to_string(n_cases) + " cases, min margin " + num(worst)};
}

inline CheckOutcome gram_lower_bound() {
    Rng rng(107);
    double worst = -1.0;
    for (const Environment& env : feature_environments()) {
        const GramInfo info = gram_and_lambda_min(env.features(), env.weights());
        for (int i = 0; i < 100; ++i) {
            const Theta theta = random_vec(rng, env.features().dim(), -5, 5);
            const double lhs = info.lambda_min * theta.squaredNorm();
            const double rhs = std::pow(env.weights().norm(env.features().apply(theta)), 2);
            worst = std::max(worst, (lhs - rhs) / std::max(1.0, rhs));
        }
    }
    return {worst <= 1e-12, "max relative (lambda_min ||theta||^2 - ||Phi theta||_D^2) " + num(worst)};
}

inline CheckOutcome tabular_truncated_projection() {
    Rng rng(108);
    double worst = 0.0;
    for (std::uint64_t seed : {1, 2, 3}) {
        const Environment env = random_mdp(seed, 3, 2, 0.8);
        const double r = env.mdp().reward_max() / (1.0 - env.gamma());
        const Projector proj(env.features(), env.weights());
        for (int i = 0; i < 100; ++i) {
            const Vec q = random_vec(rng, env.mdp().size(), -r, r);
            const Vec h = bellman_opt(env.mdp(), q);
            worst = std::max(worst, (truncate(proj.project(h), r) - h).lpNorm<Eigen::Infinity>());
        }
    }
    return {worst <= 1e-10, "max ||trunc(Proj H(Q)) - H(Q)||_inf = " + num(worst)};
}

// --- algorithms -----------------------------------------------------------

inline bool same_log(const RunLog& a, const RunLog& b) {
    if (a.records.size() != b.records.size() || a.samples != b.samples || a.diverged != b.diverged ||
        a.final_state != b.final_state || !(a.theta_final.array() == b.theta_final.array()).all())
        return false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const auto &x = a.records[i], &y = b.records[i];
        if (x.t != y.t || x.samples != y.samples || x.sup_error != y.sup_error || x.theta_norm != y.theta_norm ||
            x.diverged != y.diverged)
            return false;
    }
    return true;
}

inline CheckOutcome run_determinism() {
    AlgoConfig cfg;
    cfg.T = 5;
    cfg.K = 500;
    cfg.alpha = 1e-2;
    cfg.seed = 42;
    bool ok = true;
    for (const Environment& env : {example1(0.9), random_mdp(3, 3, 2, 0.8)})
        for (Algorithm algo :
             {Algorithm::semi_gradient, Algorithm::target, Algorithm::target_trunc, Algorithm::target_proj})
            ok = ok && same_log(run_algorithm(algo, env, cfg), run_algorithm(algo, env, cfg));
    return {ok, "4 algorithms x 2 environments, repeated with seed 42"};
}

inline CheckOutcome truncated_bootstrap_bounded() {
    const Environment env = example1(0.9);
    AlgoConfig cfg;
    cfg.T = 20;
    cfg.K = 2000;
    cfg.alpha = 1e-3;
    cfg.r = 40.0;
    cfg.theta0 = Theta::Constant(1, 30.0);
    cfg.keep_targets = true;
    const RunLog log = target_network_run(env, cfg, true);
    const double r = *cfg.r, gamma = env.gamma();
    double worst = 0.0;
    for (const Theta& target : log.targets) {
        const Vec v = state_max(env.mdp(), truncate(env.features().apply(target), r));
        worst = std::max(worst, gamma * v.lpNorm<Eigen::Infinity>());
    }
    return {worst <= gamma * r, "max |gamma * bootstrap| = " + num(worst) + " vs gamma r = " + num(gamma * r)};
}

struct IterateTrace {
    std::vector<Theta> iterates;
    StepObserver observer() {
        return [this](int, int, const Theta& theta) { iterates.push_back(theta); };
    }
};

/// Compares every inner iterate of the truncated target-network run with the
/// explicit projected-target run under the same seed, with tolerance zero.
inline CheckOutcome truncated_equals_projection(const Environment& env, const AlgoConfig& cfg) {
    IterateTrace a, b;
    const RunLog la = target_network_run(env, cfg, true, a.observer());
    const RunLog lb = projection_variant_run(env, cfg, b.observer());
    bool ok = a.iterates.size() == b.iterates.size() && la.samples == lb.samples;
    for (std::size_t i = 0; ok && i < a.iterates.size(); ++i)
        ok = (a.iterates[i].array() == b.iterates[i].array()).all();
    return {ok, std::to_string(a.iterates.size()) + " iterates compared on " + env.name()};
}

inline CheckOutcome truncated_equals_projection_suite() {
    AlgoConfig cfg;
    cfg.T = 10;
    cfg.K = 1000;
    cfg.alpha = 1e-2;
    cfg.seed = 7;
    cfg.r = 40.0;
    cfg.theta0 = Theta::Constant(1, 1.0);
    const CheckOutcome first = truncated_equals_projection(example1(0.9), cfg);
    cfg.r.reset();
    cfg.theta0.reset();
    const CheckOutcome second = truncated_equals_projection(random_mdp(5, 3, 2, 0.9), cfg);
    return {first.passed && second.passed, first.detail + "; " + second.detail};
}

/// Replays the outer loops one at a time, carrying the state and generator
/// across calls, and compares with the logged targets and start states.
inline CheckOutcome single_trajectory() {
    const Environment env = random_mdp(4, 3, 2, 0.8);
    AlgoConfig cfg;
    cfg.T = 6;
    cfg.K = 257;
    cfg.alpha = 2e-2;
    cfg.seed = 11;
    cfg.keep_targets = true;
    const RunLog log = target_network_run(env, cfg, true);
    Rng rng(cfg.seed);
    int state = cfg.initial_state;
    Theta target = cfg.initial_theta(env.features().dim());
    bool ok = true;
    for (int t = 0; t < cfg.T; ++t) {
        ok = ok && log.outer_start_states[std::size_t(t)] == state;
        target = inner_loop_iterate(env, target, cfg.alpha, cfg.K, true, cfg.radius(env.mdp()), state, rng);
        ok = ok && (target.array() == log.targets[std::size_t(t + 1)].array()).all();
    }
    ok = ok && state == log.final_state;
    return {ok, "6 outer loops replayed without resetting the chain"};
}

inline BoundInputs tabular_bound_inputs(const Environment& env, const AlgoConfig& cfg) {
    const StepsizeReport sr = check_stepsize(env, cfg);
    BoundInputs b;
    b.gamma = env.gamma();
    b.T = cfg.T;
    b.K = cfg.K;
    b.alpha = cfg.alpha;
    b.t_alpha = sr.t_alpha;
    b.lambda_min = sr.lambda_min;
    b.e_approx = 0.0;
    const Theta theta0 = cfg.initial_theta(env.features().dim());
    b.init_gap = (truncate(env.features().apply(theta0), cfg.radius(env.mdp())) - env.q_star()).lpNorm<Eigen::Infinity>();
    return b;
}

/// Mean terminal error over seeds against the closed-form bound, tabular
/// features, stepsize at the theorem's upper limit.
inline CheckOutcome tabular_bound_holds(int n_seeds = 20) {
    const Environment env = random_mdp(21, 3, 2, 0.8);
    AlgoConfig cfg;
    cfg.T = 5;
    cfg.alpha = theorem_alpha_max(gram_and_lambda_min(env.features(), env.weights()).lambda_min, env.gamma());
    cfg.K = std::max(20000, check_stepsize(env, cfg).t_alpha + 1);
    cfg.log_every = cfg.T;
    double mean = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
        cfg.seed = static_cast<std::uint64_t>(s);
        mean += target_network_run(env, cfg, true).records.back().sup_error / n_seeds;
    }
    const BoundTerms bound = theorem1_bound(tabular_bound_inputs(env, cfg));
    return {mean <= bound.total, "mean error " + num(mean) + " <= bound " + num(bound.total)};
}

// --- oracles_analysis -----------------------------------------------------

inline CheckOutcome example1_closed_form() {
    const Environment env = example1(0.9);
    const Projector proj(env.features(), env.weights());
    Rng rng(109);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double theta = rng.uniform(-10, 10);
        worst = std::max(worst, std::abs(example1_map(theta, 0.9) - h_phi_map(Theta::Constant(1, theta), proj, env.mdp())[0]));
    }
    return {worst <= 1e-12, "max |closed form - generic map| = " + num(worst)};
}

inline CheckOutcome example1_growth_envelope() {
    bool ok = true;
    std::string detail;
    for (double gamma : {0.85, 0.9, 0.95, 0.99}) {
        const double c = 1.2 * gamma;
        const auto orbit = iterate_map([gamma](double x) { return example1_map(x, gamma); }, 1.0, 60);
        for (std::size_t t = 0; t < orbit.iterates.size(); ++t) {
            const double envelope = std::pow(c, double(t)) - double(t) / (1.0 - 5.0 / (6.0 * gamma));
            ok = ok && std::abs(orbit.iterates[t]) >= envelope;
        }
        detail += "gamma " + num(gamma) + ": theta_60 = " + num(orbit.last()) + "; ";
    }
    return {ok, detail};
}

/// A complete-basis environment with nonzero Q*: random 3x2 MDP with a
/// random invertible 6x6 feature matrix.
inline Environment complete_basis_env() {
    Rng rng(110);
    RowMatrix phi(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            phi(i, j) = rng.uniform(-1, 1) + (i == j ? 2.0 : 0.0);
    return random_mdp(6, 3, 2, 0.9).with_features(FeatureMap(phi));
}

inline CheckOutcome complete_basis_contraction() {
    Rng rng(111);
    bool ok = true;
    std::string detail;
    for (const Environment& env : {baird(0.99), complete_basis_env()}) {
        const Projector proj(env.features(), env.weights());
        auto map = [&](const Vec& x) { return h_phi_map(x, proj, env.mdp()); };
        const double modulus =
            contraction_modulus_estimate(map, env.features().dim(), NormSpec::phi_sup(env.features()), 500, rng);
        const Theta fixed = env.features().matrix().fullPivLu().solve(env.q_star());
        const double residual = (map(fixed) - fixed).lpNorm<Eigen::Infinity>();
        ok = ok && modulus <= env.gamma() + 1e-12 && residual <= 1e-8;
        detail += env.name() + ": modulus " + num(modulus) + ", |H_Phi(Phi^-1 Q*) - Phi^-1 Q*| " + num(residual) + "; ";
    }
    return {ok, detail};
}

inline CheckOutcome truncated_pbe_in_ball() {
    const Environment env = example1(0.9);
    const Projector proj(env.features(), env.weights());
    const double r = 40.0;
    Rng rng(112);
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
        const Vec q = random_vec(rng, 4, -r, r);
        ok = ok && truncated_pbe_map(q, proj, env.mdp(), r).lpNorm<Eigen::Infinity>() <= r;
    }
    const auto orbit = iterate_map([&](const Vec& q) { return truncated_pbe_map(q, proj, env.mdp(), r); },
                                   Vec(Vec::Zero(4)), 10000);
    ok = ok && !orbit.diverged;
    return {ok, "100 random points stay in B_r; 10^4 iterations from 0 without divergence"};
}

/// Fixed points of the truncated projected Bellman map reached from zero and
/// from five random starts in B_r. Disagreement is reported, not failed.
inline CheckOutcome truncated_pbe_fixed_points() {
    const Environment env = example1(0.9);
    const Projector proj(env.features(), env.weights());
    const double r = 40.0;
    Rng rng(113);
    std::vector<Vec> limits;
    bool converged = true;
    for (int start = 0; start < 6; ++start) {
        const Vec q0 = start == 0 ? Vec(Vec::Zero(4)) : random_vec(rng, 4, -r, r);
        const auto orbit =
            iterate_map([&](const Vec& q) { return truncated_pbe_map(q, proj, env.mdp(), r); }, q0, 100000, 1e8, 1e-13);
        converged = converged && orbit.converged;
        limits.push_back(orbit.last());
    }
    double spread = 0.0;
    for (const Vec& l : limits)
        spread = std::max(spread, (l - limits.front()).lpNorm<Eigen::Infinity>());
    std::string fixed;
    for (int i = 0; i < 4; ++i)
        fixed += (i ? " " : "") + num(std::round(limits.front()[i] * 1e6) / 1e6);
    return {converged, "fixed point (" + fixed + "), spread over 6 starts " + num(spread) +
                           (spread <= 1e-9 ? " (agree)" : " (DISAGREE)")};
}

inline CheckOutcome bound_monotonicity() {
    BoundInputs b;
    b.gamma = 0.9;
    b.T = 20;
    b.K = 1000;
    b.alpha = 1e-4;
    b.t_alpha = 2;
    b.lambda_min = 0.1;
    b.init_gap = 10.0;
    b.e_approx = 0.5;
    bool ok = true;
    double prev = theorem1_bound(b).total;
    for (int K : {2000, 5000, 10000, 100000}) {
        BoundInputs c = b;
        c.K = K;
        const double v = theorem1_bound(c).total;
        ok = ok && v <= prev;
        prev = v;
    }
    prev = theorem1_bound(b).total;
    for (int T : {30, 50, 100}) {
        BoundInputs c = b;
        c.T = T;
        const double v = theorem1_bound(c).total;
        ok = ok && v <= prev;
        prev = v;
    }
    double prev_e3 = 0.0, prev_floor = 0.0;
    for (double alpha : {1e-6, 1e-5, 1e-4, 1e-3}) {
        BoundInputs c = b;
        c.alpha = alpha;
        const double e3 = theorem1_bound(c).e3;
        const double floor = inner_loop_bound(1000000000LL, alpha, 2, 0.1, 0.9);
        ok = ok && e3 >= prev_e3 && floor >= prev_floor;
        prev_e3 = e3;
        prev_floor = floor;
    }
    double prev_inner = inner_loop_bound(3, 1e-3, 2, 0.1, 0.9);
    for (long long k : {10LL, 100LL, 1000LL, 100000LL}) {
        const double v = inner_loop_bound(k, 1e-3, 2, 0.1, 0.9);
        ok = ok && v <= prev_inner;
        prev_inner = v;
    }
    return {ok, "monotone in K, T, alpha (variance terms) and k"};
}

/// Pathwise error recursion for tabular features: the measured terminal
/// error is at most γ^T‖Q̂₀ − Q*‖∞ + Σ γ^(T−i−1) ε_i with ε_i the measured
/// inner-loop error ‖Q̂_(i+1) − H(⌈Q̂_i⌉)‖∞.
inline CheckOutcome error_recursion() {
    const Environment env = random_mdp(8, 3, 2, 0.8);
    AlgoConfig cfg;
    cfg.T = 8;
    cfg.K = 3000;
    cfg.alpha = 2e-2;
    cfg.seed = 5;
    cfg.keep_targets = true;
    const RunLog log = target_network_run(env, cfg, true);
    const double r = cfg.radius(env.mdp());
    const double gamma = env.gamma();
    const FeatureMap& fm = env.features();
    double rhs = std::pow(gamma, cfg.T) * (truncate(fm.apply(log.targets[0]), r) - env.q_star()).lpNorm<Eigen::Infinity>();
    for (int i = 0; i < cfg.T; ++i) {
        const Vec expected = bellman_opt(env.mdp(), truncate(fm.apply(log.targets[std::size_t(i)]), r));
        const double inner = (fm.apply(log.targets[std::size_t(i + 1)]) - expected).lpNorm<Eigen::Infinity>();
        rhs += std::pow(gamma, cfg.T - i - 1) * inner;
    }
    const double lhs = log.records.back().sup_error;
    return {lhs <= rhs + 1e-12, "measured " + num(lhs) + " <= recursion " + num(rhs)};
}

// --- envs -----------------------------------------------------------------

inline CheckOutcome shipped_exploring() {
    bool ok = true;
    for (const Environment& env : shipped_environments())
        ok = ok && is_exploring(env.mdp(), env.behavior());
    return {ok, "example1, baird, random-1-3x2, random-2-4x3"};
}

inline CheckOutcome baird_stationary() {
    const Environment env = baird(0.99);
    Vec expected = Vec::Constant(7, 1.0 / 12.0);
    expected[6] = 0.5;
    const double err = (env.mu() - expected).lpNorm<Eigen::Infinity>();
    return {err <= 1e-12, "max |mu - (1/12,...,1/12,1/2)| = " + num(err)};
}

inline CheckOutcome example1_gram() {
    const Environment env = example1(0.9);
    const double g = gram_and_lambda_min(env.features(), env.weights()).gram(0, 0);
    return {std::abs(g - 6.25) <= 1e-12, "Phi^T D Phi = " + num(g)};
}

inline CheckOutcome negative_drift() {
    Rng rng(114);
    bool ok = true;
    std::string detail;
    {
        const Environment env = baird(0.99);
        const DriftReport rep = negative_drift_check(env.features(), env.mu(), env.behavior(), 0.99, 1000, rng);
        ok = ok && !rep.feasible_on_samples();
        detail += "baird gamma 0.99: " + std::to_string(rep.violations.size()) + " violations; ";
    }
    {
        const Environment env = baird(0.99);
        const DriftReport rep = negative_drift_check(env.features(), env.mu(), env.behavior(), 1e-6, 1000, rng);
        ok = ok && rep.feasible_on_samples();
        detail += "baird gamma 1e-6: " + std::to_string(rep.violations.size()) + " violations; ";
    }
    // Tabular witnesses: violation exactly when 2γ² >= π_b(a|s) = 1/2.
    for (double gamma : {0.4, 0.6}) {
        const Environment env = random_mdp(9, 3, 2, gamma);
        const DriftReport rep = negative_drift_check(env.features(), env.mu(), env.behavior(), gamma, 0, rng);
        const bool expect_violation = 2 * gamma * gamma >= 0.5;
        ok = ok && (rep.violations.size() == (expect_violation ? 6u : 0u));
        detail += "tabular gamma " + num(gamma) + ": " + std::to_string(rep.violations.size()) + " of 6 witnesses; ";
    }
    return {ok, detail};
}

inline CheckOutcome modified_bellman_baseline() {
    constexpr double tol = 1e-12;
    bool ok = true;
    std::string detail;
    for (double eta : {0.01, 0.1}) {
        const Mdp mdp = uniform_weight_mdp(15, 0.9);
        const Environment env = tabular(mdp, Policy::uniform(3, 2));
        const QVector q = modified_bellman_solve(mdp, env.weights(), eta, tol);
        const QVector expected = value_iteration(rescaled_mdp(mdp, 1.0 + eta * mdp.size()), 1e-12).q;
        const double agree = (q - expected).lpNorm<Eigen::Infinity>();
        const double gap = (q - env.q_star()).lpNorm<Eigen::Infinity>();
        ok = ok && agree <= 1e-8 && gap > 10 * tol;
        detail += "eta " + num(eta) + ": agreement " + num(agree) + ", gap to Q* " + num(gap) + "; ";
    }
    return {ok, detail};
}

inline CheckOutcome coupled_baseline() {
    const Mdp mdp = uniform_weight_mdp(16, 0.9);
    const Environment env = tabular(mdp, Policy::uniform(3, 2));
    const Projector proj(env.features(), env.weights());
    const CoupledFixedPoint fp = coupled_q_fixed_point(mdp, proj);
    if (!fp.u_star)
        return {false, "coupled iteration diverged"};
    const QVector expected = value_iteration(rescaled_mdp(mdp, double(mdp.size())), 1e-12).q;
    const double agree = (*fp.u_star - expected).lpNorm<Eigen::Infinity>();
    const double gap = (*fp.u_star - env.q_star()).lpNorm<Eigen::Infinity>();
    return {agree <= 1e-8 && gap > 1e-11, "agreement " + num(agree) + ", gap to Q* " + num(gap)};
}

/// Orthogonal features with ΦᵀDΦ = σI under uniform D; checks the bias
/// bound ‖Φv* − Q*‖∞ <= ‖Q* − Proj Q*‖∞ / (1 − γ) + E_σ.
inline CheckOutcome coupled_bias_bound() {
    const Mdp mdp = uniform_weight_mdp(17, 0.5);
    const Environment tab = tabular(mdp, Policy::uniform(3, 2));
    Rng rng(115);
    Mat raw(6, 3);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 3; ++j)
            raw(i, j) = rng.uniform(-1, 1);
    const Mat u = Eigen::HouseholderQR<Mat>(raw).householderQ() * Mat::Identity(6, 3);
    const double sigma = 0.5;
    const RowMatrix phi = std::sqrt(sigma * 6.0) * u;
    const Environment env = tab.with_features(FeatureMap(phi));
    const Projector proj(env.features(), env.weights());
    const double gram_dev = (proj.gram().gram - sigma * Mat::Identity(3, 3)).lpNorm<Eigen::Infinity>();
    const CoupledFixedPoint fp = coupled_q_fixed_point(mdp, proj);
    if (!fp.v_star)
        return {false, "coupled iteration diverged"};
    const double lhs = (env.features().apply(*fp.v_star) - env.q_star()).lpNorm<Eigen::Infinity>();
    const double rhs = (env.q_star() - proj.project(env.q_star())).lpNorm<Eigen::Infinity>() / (1.0 - mdp.gamma()) +
                       coupled_bias_term(sigma, mdp.gamma());
    return {gram_dev <= 1e-12 && lhs <= rhs, "||Phi v* - Q*|| " + num(lhs) + " <= " + num(rhs)};
}

} // namespace checks

struct PropertySpec {
    const char* module;
    const char* property;
    std::function<CheckOutcome()> run;
};

inline std::vector<PropertySpec> property_suite() {
    using namespace checks;
    return {
        {"mdp_core", "bellman operator is a gamma-contraction in sup norm", bellman_contraction},
        {"mdp_core", "bellman operator is monotone", bellman_monotone},
        {"mdp_core", "value iteration residual and agreement with policy enumeration", value_iteration_vs_enumeration},
        {"mdp_core", "stationary distribution is invariant", stationary_invariant},
        {"mdp_core", "mixing time is nonincreasing in delta", mixing_time_monotone},
        {"linear_fa", "projection is idempotent and nonexpansive in D-norm", projection_properties},
        {"linear_fa", "truncation maps into B_r, fixes B_r and is 1-Lipschitz", truncation_properties},
        {"linear_fa", "truncation is a weighted lp projection onto B_r", [] { return truncation_is_projection_suite(); }},
        {"linear_fa", "lambda_min lower-bounds the D-norm of Phi theta", gram_lower_bound},
        {"linear_fa", "tabular truncated projection of H is H", tabular_truncated_projection},
        {"algorithms", "runs are deterministic in (config, seed)", run_determinism},
        {"algorithms", "truncated bootstrap stays within gamma r", truncated_bootstrap_bounded},
        {"algorithms", "truncated target network equals explicit projected target", truncated_equals_projection_suite},
        {"algorithms", "one trajectory across outer loops", single_trajectory},
        {"algorithms", "tabular mean error within the closed-form bound", [] { return tabular_bound_holds(); }},
        {"oracles_analysis", "two-state closed form equals the generic projected map", example1_closed_form},
        {"oracles_analysis", "two-state iteration grows above its lower envelope", example1_growth_envelope},
        {"oracles_analysis", "complete basis: projected map contracts and fixes Phi^-1 Q*", complete_basis_contraction},
        {"oracles_analysis", "truncated projected map stays in B_r", truncated_pbe_in_ball},
        {"oracles_analysis", "truncated projected fixed point from several starts", truncated_pbe_fixed_points},
        {"oracles_analysis", "bounds are monotone", bound_monotonicity},
        {"oracles_analysis", "tabular error recursion with measured inner-loop errors", error_recursion},
        {"envs", "every shipped environment explores", shipped_exploring},
        {"envs", "baird stationary distribution", baird_stationary},
        {"envs", "two-state example Gram matrix", example1_gram},
        {"oracles_analysis", "negative-drift condition fails at large gamma", negative_drift},
        {"oracles_analysis", "modified Bellman baseline matches rescaled MDP", modified_bellman_baseline},
        {"oracles_analysis", "coupled fixed point matches rescaled MDP", coupled_baseline},
        {"oracles_analysis", "coupled fixed point bias bound", coupled_bias_bound},
    };
}

/// Runs the whole suite; a property that throws counts as failed.
inline std::vector<CheckResult> run_checks() {
    std::vector<CheckResult> results;
    for (const PropertySpec& p : property_suite()) {
        CheckResult res{p.module, p.property, false, ""};
        try {
            const CheckOutcome out = p.run();
            res.passed = out.passed;
            res.detail = out.detail;
        } catch (const std::exception& e) {
            res.detail = std::string("exception: ") + e.what();
        }
        results.push_back(std::move(res));
    }
    return results;
}

inline std::string check_report_csv(const std::vector<CheckResult>& results) {
    std::string out = "module,property,passed,detail\n";
    for (const CheckResult& r : results) {
        std::string property = r.property, detail = r.detail;
        std::replace(property.begin(), property.end(), ',', ';');
        std::replace(detail.begin(), detail.end(), ',', ';');
        CsvRow row;
        row << r.module << property << r.passed << detail;
        out += row.str();
    }
    return out;
}

inline std::string check_report_text(const std::vector<CheckResult>& results) {
    std::string out;
    for (const CheckResult& r : results)
        out += std::string(r.passed ? "PASS" : "FAIL") + "  [" + r.module + "] " + r.property + ": " + r.detail + "\n";
    return out;
}

} // namespace dtl
