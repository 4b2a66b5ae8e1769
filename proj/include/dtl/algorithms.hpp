#pragma once

// Q-learning with linear function approximation driven by one Markovian
// trajectory of the behavior policy:
//
//   semi_gradient_run        classical single-timescale semi-gradient update
//   target_network_run       target network, optionally truncated bootstrap
//   projection_variant_run   target network with an explicit truncated
//                            |S||A|-vector Q̃_t used as the bootstrap
//
// Divergence is an outcome, not an error: once ‖θ‖₂ exceeds the guard (or
// turns non-finite) the run stops and the log says so.

#include "dtl/envs.hpp"
#include "dtl/linear_fa.hpp"
#include "dtl/markov_chain.hpp"
#include "dtl/mdp.hpp"
#include "dtl/random.hpp"

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dtl {

enum class Algorithm { semi_gradient, target, target_trunc, target_proj };

inline std::string_view to_string(Algorithm algo) {
    switch (algo) {
    case Algorithm::semi_gradient:
        return "semi_gradient";
    case Algorithm::target:
        return "target";
    case Algorithm::target_trunc:
        return "target_trunc";
    case Algorithm::target_proj:
        return "target_proj";
    }
    return "unknown";
}

inline Algorithm parse_algorithm(std::string_view name) {
    for (Algorithm a : {Algorithm::semi_gradient, Algorithm::target, Algorithm::target_trunc, Algorithm::target_proj})
        if (to_string(a) == name)
            return a;
    throw UsageError("unknown algorithm '" + std::string(name) +
                     "' (expected semi_gradient, target, target_trunc or target_proj)");
}

struct AlgoConfig {
    int T = 1;       ///< outer iterations (target-network syncs)
    int K = 1;       ///< inner iterations per outer step
    double alpha = 1e-2;
    std::optional<double> r; ///< truncation radius; default_radius(mdp) when unset
    std::uint64_t seed = 0;
    double divergence_guard = 1e8;
    int log_every = 1;                ///< outer steps between log records
    std::optional<Theta> theta0;      ///< θ₀ (semi-gradient) or θ̂₀ (target runs); zero when unset
    int initial_state = 0;
    bool keep_targets = false;        ///< store every θ̂_t in the log

    double radius(const Mdp& mdp) const { return r ? *r : default_radius(mdp); }

    Theta initial_theta(int d) const {
        if (!theta0)
            return Theta::Zero(d);
        detail::require(theta0->size() == d, "AlgoConfig: theta0 has the wrong dimension");
        return *theta0;
    }

    void validate() const {
        detail::require(T >= 0, "AlgoConfig: T must be nonnegative");
        detail::require(K >= 1, "AlgoConfig: K must be at least 1");
        detail::require(alpha > 0.0, "AlgoConfig: alpha must be positive");
        detail::require(!r || *r >= 0.0, "AlgoConfig: r must be nonnegative");
        detail::require(log_every >= 1, "AlgoConfig: log_every must be at least 1");
        detail::require(divergence_guard > 0.0, "AlgoConfig: divergence_guard must be positive");
    }
};

/// Whether (α, K) meet the finite-sample theorem's hypotheses. Reported,
/// never enforced.
struct StepsizeReport {
    double lambda_min = 0.0;
    double alpha_max = 0.0; ///< λ_min (1 − γ)² / 130
    int t_alpha = 0;        ///< mixing time of the behavior chain at precision α
    bool alpha_ok = false;
    bool k_ok = false;      ///< K >= t_α + 1
};

inline double theorem_alpha_max(double lambda_min, double gamma) {
    return lambda_min * (1.0 - gamma) * (1.0 - gamma) / 130.0;
}

inline StepsizeReport check_stepsize(const Environment& env, const AlgoConfig& cfg) {
    StepsizeReport report;
    report.lambda_min = gram_and_lambda_min(env.features(), env.weights()).lambda_min;
    report.alpha_max = theorem_alpha_max(report.lambda_min, env.gamma());
    report.alpha_ok = cfg.alpha <= report.alpha_max;
    report.t_alpha = cfg.alpha < 1.0 ? mixing_time(env.behavior_chain(), env.mu(), cfg.alpha) : 0;
    report.k_ok = cfg.K >= report.t_alpha + 1;
    return report;
}

struct LogRecord {
    int t = 0;
    std::int64_t samples = 0;
    double sup_error = 0.0;
    double theta_norm = 0.0;
    bool diverged = false;
};

struct RunLog {
    Algorithm algo = Algorithm::target_trunc;
    std::string env;
    std::uint64_t seed = 0;
    LogRecord initial;               ///< t = 0, before any sample
    std::vector<LogRecord> records;  ///< t = log_every, 2 log_every, ..., T
    Theta theta_final;               ///< θ̂_T (or the last iterate on divergence)
    bool diverged = false;
    std::int64_t samples = 0;
    std::vector<int> outer_start_states; ///< S_0 of every outer loop
    int final_state = 0;
    std::vector<Theta> targets;      ///< θ̂_0..θ̂_T when keep_targets
};

/// Called after every single update with (t, k + 1, θ_{t,k+1}).
using StepObserver = std::function<void(int, int, const Theta&)>;

namespace detail {

inline bool breached(const Theta& theta, double guard) {
    const double sq = theta.squaredNorm();
    return !std::isfinite(sq) || sq > guard * guard;
}

/// θ ← θ + α φ(s,a) (R + γ·bootstrap(s') − φ(s,a)ᵀθ) for K steps of the
/// behavior chain starting at `state`. Returns false on divergence, with
/// `state` and `steps` updated to where the loop stopped.
template <class Bootstrap>
bool inner_loop(const Environment& env, Theta& theta, Bootstrap&& bootstrap, double alpha, int K, int& state,
                Rng& rng, double guard, std::int64_t& steps, int t, const StepObserver* observer) {
    const Mdp& mdp = env.mdp();
    const FeatureMap& fm = env.features();
    const double gamma = mdp.gamma();
    for (int k = 0; k < K; ++k) {
        const Step step = sample_step(mdp, env.behavior(), state, rng);
        const int idx = mdp.index(state, step.action);
        const double td = step.reward + gamma * bootstrap(step.next_state) - fm.value(idx, theta);
        theta.noalias() += (alpha * td) * fm.row(idx).transpose();
        state = step.next_state;
        ++steps;
        if (observer && *observer)
            (*observer)(t, k + 1, theta);
        if (breached(theta, guard))
            return false;
    }
    return true;
}

inline double sup_error(const Environment& env, const Theta& theta, std::optional<double> radius) {
    // An infinite radius leaves every entry unchanged.
    const QVector q = truncate(env.features().apply(theta), radius.value_or(std::numeric_limits<double>::infinity()));
    const double err = (q - env.q_star()).lpNorm<Eigen::Infinity>();
    return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
}

inline LogRecord make_record(const Environment& env, int t, std::int64_t samples, const Theta& theta,
                             std::optional<double> radius, bool diverged) {
    LogRecord rec;
    rec.t = t;
    rec.samples = samples;
    rec.sup_error = sup_error(env, theta, radius);
    rec.theta_norm = theta.norm();
    if (!std::isfinite(rec.theta_norm))
        rec.theta_norm = std::numeric_limits<double>::infinity();
    rec.diverged = diverged;
    return rec;
}

inline void check_start(const Environment& env, const AlgoConfig& cfg) {
    cfg.validate();
    require(cfg.initial_state >= 0 && cfg.initial_state < env.mdp().n_states(),
            "AlgoConfig: initial_state out of range");
}

} // namespace detail

/// Classical semi-gradient Q-learning, T·K steps in one flat loop,
/// bootstrapping from the current iterate. Outer index t counts blocks of K.
inline RunLog semi_gradient_run(const Environment& env, const AlgoConfig& cfg, const StepObserver& observer = {}) {
    detail::check_start(env, cfg);
    Rng rng(cfg.seed);
    const Mdp& mdp = env.mdp();
    const FeatureMap& fm = env.features();

    RunLog log;
    log.algo = Algorithm::semi_gradient;
    log.env = env.name();
    log.seed = cfg.seed;
    Theta theta = cfg.initial_theta(fm.dim());
    int state = cfg.initial_state;
    std::int64_t steps = 0;
    log.initial = detail::make_record(env, 0, 0, theta, std::nullopt, false);
    if (cfg.keep_targets)
        log.targets.push_back(theta);

    // The bootstrap reads the live iterate, which is what makes this semi-gradient.
    auto bootstrap = [&](int next) {
        double best = fm.value(mdp.index(next, 0), theta);
        for (int a = 1; a < mdp.n_actions(); ++a)
            best = std::max(best, fm.value(mdp.index(next, a), theta));
        return best;
    };

    for (int t = 0; t < cfg.T; ++t) {
        log.outer_start_states.push_back(state);
        const bool ok = detail::inner_loop(env, theta, bootstrap, cfg.alpha, cfg.K, state, rng,
                                           cfg.divergence_guard, steps, t, &observer);
        if (cfg.keep_targets)
            log.targets.push_back(theta);
        if (!ok) {
            log.diverged = true;
            log.records.push_back(detail::make_record(env, t + 1, steps, theta, std::nullopt, true));
            break;
        }
        if ((t + 1) % cfg.log_every == 0 || t + 1 == cfg.T)
            log.records.push_back(detail::make_record(env, t + 1, steps, theta, std::nullopt, false));
    }
    log.theta_final = theta;
    log.samples = steps;
    log.final_state = state;
    return log;
}

/// Target-network Q-learning. With truncation the bootstrap is
/// max_a' ⌈φ(s',a')ᵀθ̂_t⌉ (clamped to [-r, r]); without it, max_a' φ(s',a')ᵀθ̂_t.
/// Every inner loop restarts from θ_{t,0} = 0 and continues the trajectory.
inline RunLog target_network_run(const Environment& env, const AlgoConfig& cfg, bool truncation,
                                 const StepObserver& observer = {}) {
    detail::check_start(env, cfg);
    Rng rng(cfg.seed);
    const Mdp& mdp = env.mdp();
    const FeatureMap& fm = env.features();
    const double r = cfg.radius(mdp);
    const std::optional<double> report_radius = truncation ? std::optional<double>(r) : std::nullopt;

    RunLog log;
    log.algo = truncation ? Algorithm::target_trunc : Algorithm::target;
    log.env = env.name();
    log.seed = cfg.seed;
    Theta target = cfg.initial_theta(fm.dim());
    int state = cfg.initial_state;
    std::int64_t steps = 0;
    log.initial = detail::make_record(env, 0, 0, target, report_radius, false);
    if (cfg.keep_targets)
        log.targets.push_back(target);

    auto bootstrap = [&](int next) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.n_actions(); ++a) {
            double v = fm.value(mdp.index(next, a), target);
            if (truncation)
                v = truncate(v, r);
            best = std::max(best, v);
        }
        assert(!truncation || std::abs(mdp.gamma() * best) <= mdp.gamma() * r);
        return best;
    };

    Theta theta(fm.dim());
    for (int t = 0; t < cfg.T; ++t) {
        log.outer_start_states.push_back(state);
        theta.setZero();
        const bool ok = detail::inner_loop(env, theta, bootstrap, cfg.alpha, cfg.K, state, rng,
                                           cfg.divergence_guard, steps, t, &observer);
        target = theta;
        if (cfg.keep_targets)
            log.targets.push_back(target);
        if (!ok) {
            log.diverged = true;
            log.records.push_back(detail::make_record(env, t + 1, steps, target, report_radius, true));
            break;
        }
        if ((t + 1) % cfg.log_every == 0 || t + 1 == cfg.T)
            log.records.push_back(detail::make_record(env, t + 1, steps, target, report_radius, false));
    }
    log.theta_final = target;
    log.samples = steps;
    log.final_state = state;
    return log;
}

/// Target network with an explicit projected target Q̃_t = ⌈Φθ̂_t⌉ stored as
/// a full |S||A| vector; the bootstrap reads max_a' Q̃_t(s', a').
inline RunLog projection_variant_run(const Environment& env, const AlgoConfig& cfg,
                                     const StepObserver& observer = {}) {
    detail::check_start(env, cfg);
    Rng rng(cfg.seed);
    const Mdp& mdp = env.mdp();
    const FeatureMap& fm = env.features();
    const double r = cfg.radius(mdp);

    RunLog log;
    log.algo = Algorithm::target_proj;
    log.env = env.name();
    log.seed = cfg.seed;
    Theta target = cfg.initial_theta(fm.dim());
    int state = cfg.initial_state;
    std::int64_t steps = 0;
    log.initial = detail::make_record(env, 0, 0, target, r, false);
    if (cfg.keep_targets)
        log.targets.push_back(target);

    QVector q_tilde = truncate(fm.apply(target), r);
    auto bootstrap = [&](int next) { return q_tilde.segment(mdp.index(next, 0), mdp.n_actions()).maxCoeff(); };

    Theta theta(fm.dim());
    for (int t = 0; t < cfg.T; ++t) {
        log.outer_start_states.push_back(state);
        theta.setZero();
        const bool ok = detail::inner_loop(env, theta, bootstrap, cfg.alpha, cfg.K, state, rng,
                                           cfg.divergence_guard, steps, t, &observer);
        target = theta;
        if (cfg.keep_targets)
            log.targets.push_back(target);
        if (!ok) {
            log.diverged = true;
            log.records.push_back(detail::make_record(env, t + 1, steps, target, r, true));
            break;
        }
        q_tilde = truncate(fm.apply(target), r);
        if ((t + 1) % cfg.log_every == 0 || t + 1 == cfg.T)
            log.records.push_back(detail::make_record(env, t + 1, steps, target, r, false));
    }
    log.theta_final = target;
    log.samples = steps;
    log.final_state = state;
    return log;
}

inline RunLog run_algorithm(Algorithm algo, const Environment& env, const AlgoConfig& cfg,
                            const StepObserver& observer = {}) {
    switch (algo) {
    case Algorithm::semi_gradient:
        return semi_gradient_run(env, cfg, observer);
    case Algorithm::target:
        return target_network_run(env, cfg, false, observer);
    case Algorithm::target_trunc:
        return target_network_run(env, cfg, true, observer);
    case Algorithm::target_proj:
        return projection_variant_run(env, cfg, observer);
    }
    throw UsageError("run_algorithm: unknown algorithm");
}

/// Runs one inner loop of K updates against a fixed target θ̂ from θ = 0 and
/// returns the iterate; used to check the inner-loop error bound directly.
inline Theta inner_loop_iterate(const Environment& env, const Theta& target, double alpha, int K, bool truncation,
                                double r, int& state, Rng& rng) {
    const Mdp& mdp = env.mdp();
    const FeatureMap& fm = env.features();
    auto bootstrap = [&](int next) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.n_actions(); ++a) {
            double v = fm.value(mdp.index(next, a), target);
            best = std::max(best, truncation ? truncate(v, r) : v);
        }
        return best;
    };
    Theta theta = Theta::Zero(fm.dim());
    std::int64_t steps = 0;
    detail::inner_loop(env, theta, bootstrap, alpha, K, state, rng, std::numeric_limits<double>::max(), steps, 0,
                       nullptr);
    return theta;
}

} // namespace dtl
