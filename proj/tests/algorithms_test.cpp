#include "dtl/algorithms.hpp"
#include "dtl/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dtl;

namespace {

// Fixed point of the truncated two-state map at γ = 0.9, r = 40, from the
// closed form on the branch 10 <= θ < 20: θ = (1 + 9.6γ) / (1 − 0.24γ).
constexpr double kTruncatedFixedPoint = (1 + 9.6 * 0.9) / (1 - 0.24 * 0.9);

AlgoConfig config(int T, int K, double alpha, std::uint64_t seed = 0) {
    AlgoConfig cfg;
    cfg.T = T;
    cfg.K = K;
    cfg.alpha = alpha;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST(AlgoConfig, Validation) {
    const Environment env = example1(0.9);
    EXPECT_THROW(target_network_run(env, config(1, 0, 0.1), true), UsageError);
    EXPECT_THROW(target_network_run(env, config(1, 1, 0.0), true), UsageError);
    EXPECT_THROW(target_network_run(env, config(-1, 1, 0.1), true), UsageError);
    AlgoConfig cfg = config(1, 1, 0.1);
    cfg.initial_state = 2;
    EXPECT_THROW(semi_gradient_run(env, cfg), UsageError);
    cfg.initial_state = 0;
    cfg.theta0 = Theta::Zero(3);
    EXPECT_THROW(semi_gradient_run(env, cfg), UsageError);
    cfg.theta0.reset();
    cfg.r = -1.0;
    EXPECT_THROW(target_network_run(env, cfg, true), UsageError);
    EXPECT_EQ(parse_algorithm("target_proj"), Algorithm::target_proj);
    EXPECT_THROW(parse_algorithm("dqn"), UsageError);
}

TEST(AlgoConfig, StepsizeReport) {
    const Environment env = example1(0.9);
    AlgoConfig cfg = config(1, 2, 0.999 * 6.25 * 0.01 / 130);
    const StepsizeReport rep = check_stepsize(env, cfg);
    EXPECT_NEAR(rep.lambda_min, 6.25, 1e-14);
    EXPECT_NEAR(rep.alpha_max, 6.25 * 0.01 / 130, 1e-18);
    EXPECT_TRUE(rep.alpha_ok);
    EXPECT_EQ(rep.t_alpha, 1);
    EXPECT_TRUE(rep.k_ok);
    cfg.alpha *= 2;
    cfg.K = 1;
    const StepsizeReport bad = check_stepsize(env, cfg);
    EXPECT_FALSE(bad.alpha_ok);
    EXPECT_FALSE(bad.k_ok);
}

TEST(SemiGradient, ZeroStepsReturnsInitialParameter) {
    const Environment env = example1(0.9);
    AlgoConfig cfg = config(0, 5, 0.1);
    cfg.theta0 = Theta::Constant(1, 3.0);
    const RunLog log = semi_gradient_run(env, cfg);
    EXPECT_TRUE(log.records.empty());
    EXPECT_EQ(log.samples, 0);
    EXPECT_EQ(log.theta_final[0], 3.0);
    Vec phi_theta(4);
    phi_theta << 3, 6, 6, 12;
    EXPECT_NEAR(log.initial.sup_error, (phi_theta - env.q_star()).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(SemiGradient, BairdDiverges) {
    const Environment env = baird(0.99);
    AlgoConfig cfg = config(200, 1000, 0.01, 1);
    cfg.theta0 = Theta::Ones(14);
    const RunLog log = semi_gradient_run(env, cfg);
    EXPECT_TRUE(log.diverged);
    EXPECT_LE(log.samples, 200000);
    EXPECT_TRUE(log.records.back().diverged);
    EXPECT_GT(log.records.back().theta_norm, 1e8);
}

TEST(SemiGradient, TabularConverges) {
    const Environment env = random_mdp(2, 2, 2, 0.8);
    const RunLog log = semi_gradient_run(env, config(100, 10000, 5e-3, 3));
    EXPECT_FALSE(log.diverged);
    EXPECT_LT(log.records.back().sup_error, 0.1 * env.mdp().reward_max() / (1 - 0.8));
    EXPECT_LT(log.records.back().sup_error, log.initial.sup_error);
}

TEST(SemiGradient, NonFiniteIsDivergenceNotACrash) {
    const Environment env = example1(0.9);
    AlgoConfig cfg = config(10, 100, 1e3);
    cfg.divergence_guard = std::numeric_limits<double>::max();
    const RunLog log = semi_gradient_run(env, cfg);
    EXPECT_TRUE(log.diverged);
    EXPECT_TRUE(std::isinf(log.records.back().theta_norm));
}

TEST(TargetNetwork, LogCadenceAndSampleCounts) {
    const Environment env = random_mdp(1, 3, 2, 0.8);
    AlgoConfig cfg = config(10, 7, 0.05);
    cfg.log_every = 3;
    const RunLog log = target_network_run(env, cfg, true);
    std::vector<int> ts;
    for (const auto& rec : log.records)
        ts.push_back(rec.t);
    EXPECT_EQ(ts, (std::vector<int>{3, 6, 9, 10}));
    for (std::size_t i = 1; i < log.records.size(); ++i)
        EXPECT_GE(log.records[i].samples, log.records[i - 1].samples);
    EXPECT_EQ(log.samples, 70);
    EXPECT_EQ(log.records.back().samples, 70);
    EXPECT_EQ(log.outer_start_states.size(), 10u);
    EXPECT_EQ(log.outer_start_states[0], 0);
}

TEST(TargetNetwork, ExampleWithoutTruncationGrowsGeometrically) {
    const Environment env = example1(0.9);
    AlgoConfig cfg = config(120, 10000, 1e-3, 4);
    cfg.theta0 = Theta::Constant(1, 1.0);
    cfg.keep_targets = true;
    cfg.divergence_guard = 1e3;
    const RunLog log = target_network_run(env, cfg, false);
    EXPECT_TRUE(log.diverged);
    // Once away from the origin a sync multiplies θ̂ by about 6γ/5 = 1.08 on average.
    const std::size_t first = 30, last = log.targets.size() - 2;
    ASSERT_GT(last, first + 20);
    const double rate = std::pow(log.targets[last][0] / log.targets[first][0], 1.0 / double(last - first));
    EXPECT_NEAR(rate, 1.08, 0.01);
    for (std::size_t t = first; t < last; ++t)
        EXPECT_GT(log.targets[t + 1][0] / log.targets[t][0], 1.0);
}

TEST(TargetNetwork, ExampleWithTruncationSettles) {
    const Environment env = example1(0.9);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        AlgoConfig cfg = config(30, 20000, 1e-3, seed);
        cfg.theta0 = Theta::Constant(1, 1.0);
        cfg.r = 40.0;
        const RunLog log = target_network_run(env, cfg, true);
        EXPECT_FALSE(log.diverged);
        EXPECT_NEAR(log.theta_final[0], kTruncatedFixedPoint, 0.5);
        EXPECT_EQ(greedy_actions(env.mdp(), truncate(env.features().apply(log.theta_final), 40.0)),
                  (std::vector<int>{1, 1}));
    }
}

TEST(TargetNetwork, OracleFixedPointMatchesClosedForm) {
    const Environment env = example1(0.9);
    const Projector proj(env.features(), env.weights());
    const auto orbit = iterate_map([&](const Vec& th) { return truncated_theta_map(th, proj, env.mdp(), 40.0); },
                                   Vec(Vec::Zero(1)), 10000, 1e8, 1e-14);
    ASSERT_TRUE(orbit.converged);
    EXPECT_NEAR(orbit.last()[0], kTruncatedFixedPoint, 1e-12);
    EXPECT_NEAR(kTruncatedFixedPoint, 12.295918367346939, 1e-12);
}

TEST(TargetNetwork, Deterministic) {
    const Environment env = random_mdp(3, 3, 2, 0.9);
    for (bool trunc : {false, true}) {
        const RunLog a = target_network_run(env, config(5, 300, 0.05, 42), trunc);
        const RunLog b = target_network_run(env, config(5, 300, 0.05, 42), trunc);
        EXPECT_TRUE((a.theta_final.array() == b.theta_final.array()).all());
        ASSERT_EQ(a.records.size(), b.records.size());
        for (std::size_t i = 0; i < a.records.size(); ++i)
            EXPECT_EQ(a.records[i].sup_error, b.records[i].sup_error);
    }
}

TEST(TargetNetwork, InnerLoopRestartsAndChainContinues) {
    const Environment env = random_mdp(6, 4, 2, 0.8);
    AlgoConfig cfg = config(4, 101, 0.03, 9);
    cfg.keep_targets = true;
    std::vector<std::pair<int, int>> first_steps;
    std::vector<Theta> first_iterates;
    const RunLog log = target_network_run(env, cfg, true, [&](int t, int k, const Theta& theta) {
        if (k == 1) {
            first_steps.emplace_back(t, k);
            first_iterates.push_back(theta);
        }
    });
    ASSERT_EQ(first_iterates.size(), 4u);
    Rng rng(cfg.seed);
    int state = 0;
    for (int t = 0; t < 4; ++t) {
        EXPECT_EQ(log.outer_start_states[std::size_t(t)], state);
        // One step from θ = 0 is α·td·φ with only one nonzero tabular coordinate.
        EXPECT_EQ((first_iterates[std::size_t(t)].array() != 0.0).count(), 1);
        const Theta next = inner_loop_iterate(env, log.targets[std::size_t(t)], cfg.alpha, cfg.K, true,
                                              cfg.radius(env.mdp()), state, rng);
        EXPECT_TRUE((next.array() == log.targets[std::size_t(t + 1)].array()).all());
    }
    EXPECT_EQ(state, log.final_state);
}

TEST(ProjectionVariant, BitwiseEqualToTruncatedTargetNetwork) {
    for (const Environment& env : {example1(0.9), random_mdp(5, 3, 2, 0.9)}) {
        AlgoConfig cfg = config(8, 500, 0.01, 7);
        if (env.name() == "example1") {
            cfg.r = 40.0;
            cfg.theta0 = Theta::Constant(1, 1.0);
        }
        std::vector<Theta> a, b;
        const RunLog la = target_network_run(env, cfg, true, [&](int, int, const Theta& th) { a.push_back(th); });
        const RunLog lb = projection_variant_run(env, cfg, [&](int, int, const Theta& th) { b.push_back(th); });
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            ASSERT_TRUE((a[i].array() == b[i].array()).all()) << env.name() << " step " << i;
        EXPECT_EQ(la.theta_final[0], lb.theta_final[0]);
    }
}

TEST(ProjectionVariant, SeedSevenTerminalMatches) {
    const Environment env = example1(0.9);
    AlgoConfig cfg = config(20, 5000, 1e-3, 7);
    cfg.r = 40.0;
    cfg.theta0 = Theta::Constant(1, 1.0);
    EXPECT_EQ(target_network_run(env, cfg, true).theta_final[0], projection_variant_run(env, cfg).theta_final[0]);
}

TEST(ProjectionVariant, TabularTargetIsTruncatedParameter) {
    const Environment env = random_mdp(8, 3, 2, 0.9);
    AlgoConfig cfg = config(3, 200, 0.5, 2);
    cfg.r = 0.3;
    cfg.keep_targets = true;
    const RunLog log = projection_variant_run(env, cfg);
    for (const Theta& target : log.targets)
        EXPECT_EQ(truncate(env.features().apply(target), 0.3), truncate(Vec(target), 0.3));
    EXPECT_EQ(log.records.back().sup_error,
              (truncate(Vec(log.theta_final), 0.3) - env.q_star()).lpNorm<Eigen::Infinity>());
}

TEST(RunAlgorithm, Dispatch) {
    const Environment env = example1(0.9);
    for (Algorithm algo : {Algorithm::semi_gradient, Algorithm::target, Algorithm::target_trunc, Algorithm::target_proj})
        EXPECT_EQ(run_algorithm(algo, env, config(1, 1, 0.01)).algo, algo);
}
