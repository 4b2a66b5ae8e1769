#include "dtl/algorithms.hpp"
#include "dtl/bounds.hpp"
#include "dtl/envs.hpp"
#include "dtl/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dtl;

namespace {

Vec random_vec(Rng& rng, int n, double lo, double hi) {
    Vec v(n);
    for (int i = 0; i < n; ++i)
        v[i] = rng.uniform(lo, hi);
    return v;
}

/// Straight transcription of the four bound terms, kept separate from the
/// library version.
double reference_total(double gamma, int T, long long K, double alpha, int t, double lambda, double e_approx, double gap) {
    const double a = 1 - gamma;
    const double e1 = std::pow(gamma, T) * gap;
    const double e2 = 2 * std::pow(1 - lambda * alpha, double(K - t - 1) / 2.0) / (std::sqrt(lambda) * a * a);
    const double e3 = 24 * std::sqrt(alpha * (t + 1)) / (lambda * a * a);
    const double e4 = e_approx / a;
    return e1 + e2 + e3 + e4;
}

// Two-state example, γ = 0.9, r = 40: fixed point of the truncated map on
// its branch 10 <= θ < 20.
constexpr double kTheta = (1 + 9.6 * 0.9) / (1 - 0.24 * 0.9);

} // namespace

TEST(HPhiMap, ExampleAtZero) {
    const Environment env = example1(0.9);
    const Projector proj(env.features(), env.weights());
    EXPECT_NEAR(h_phi_map(Theta::Zero(1), proj, env.mdp())[0], 1.0, 1e-15);
}

TEST(HPhiMap, CompleteBasisIsInverseOfFeatures) {
    const Environment env = baird(0.9);
    const Projector proj(env.features(), env.weights());
    const Mat inv = Mat(env.features().matrix()).inverse();
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const Theta theta = random_vec(rng, 14, -2, 2);
        const Theta direct = inv * bellman_opt(env.mdp(), env.features().apply(theta));
        EXPECT_LE((h_phi_map(theta, proj, env.mdp()) - direct).lpNorm<Eigen::Infinity>(), 1e-12);
    }
}

TEST(HPhiMap, TabularFixesOptimalValues) {
    const Environment env = random_mdp(2, 3, 2, 0.9);
    const Projector proj(env.features(), env.weights());
    EXPECT_LE((h_phi_map(env.q_star(), proj, env.mdp()) - env.q_star()).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(Example1Map, Values) {
    EXPECT_EQ(example1_map(0.0, 0.9), 1.0);
    EXPECT_NEAR(example1_map(1.0, 0.9), 2.08, 1e-15);
    EXPECT_NEAR(example1_map(-1.0, 0.9), 0.46, 1e-15);
    EXPECT_NEAR(example1_map(5.0, 0.7), 1 + 1.2 * 0.7 * 5, 1e-14);
    EXPECT_NEAR(example1_map(-5.0, 0.7), 1 - 0.6 * 0.7 * 5, 1e-14);
}

TEST(Example1Map, AgreesWithGenericMap) {
    const Environment env = example1(0.9);
    const Projector proj(env.features(), env.weights());
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const double theta = rng.uniform(-10, 10);
        EXPECT_NEAR(example1_map(theta, 0.9), h_phi_map(Theta::Constant(1, theta), proj, env.mdp())[0], 1e-12);
    }
}

TEST(IterateMap, ExampleDivergesGeometrically) {
    const auto orbit = iterate_map([](double x) { return example1_map(x, 0.9); }, 1.0, 80, 1e3);
    EXPECT_TRUE(orbit.diverged);
    EXPECT_LE(orbit.iterates.size(), 81u);
    EXPECT_GT(orbit.last(), 1e3);
}

TEST(IterateMap, GrowthRatioOnGammaGrid) {
    for (double gamma : {0.85, 0.9, 0.95, 0.99}) {
        const auto orbit = iterate_map([gamma](double x) { return example1_map(x, gamma); }, 1.0, 200);
        int checked = 0;
        for (std::size_t t = 0; t + 1 < orbit.iterates.size(); ++t) {
            if (orbit.iterates[t] <= 5.0)
                continue;
            EXPECT_GE(orbit.iterates[t + 1] / orbit.iterates[t], 1.2 * gamma - 1e-9);
            ++checked;
        }
        EXPECT_GT(checked, 10) << "gamma " << gamma;
    }
}

TEST(IterateMap, BellmanFromZeroConverges) {
    const Environment env = random_mdp(3, 3, 2, 0.9);
    const auto orbit = iterate_map([&](const Vec& q) { return bellman_opt(env.mdp(), q); }, Vec(Vec::Zero(6)), 10000,
                                   1e8, 1e-12);
    EXPECT_TRUE(orbit.converged);
    EXPECT_LE((orbit.last() - env.q_star()).lpNorm<Eigen::Infinity>(), 1e-9);
    // Banach: ‖Q_t − Q*‖ <= γ^t ‖Q*‖ so t stays below log(tol(1−γ)/R)/log γ plus slack.
    EXPECT_LE(orbit.iterates.size(), std::size_t(std::log(1e-12 * 0.1) / std::log(0.9)) + 50);
}

TEST(TruncatedPbe, ExampleFixedPoint) {
    const Environment env = example1(0.9);
    const Projector proj(env.features(), env.weights());
    const auto orbit = iterate_map([&](const Vec& q) { return truncated_pbe_map(q, proj, env.mdp(), 40.0); },
                                   Vec(Vec::Zero(4)), 10000, 1e8, 1e-13);
    ASSERT_TRUE(orbit.converged);
    Vec expected(4);
    expected << kTheta, 2 * kTheta, 2 * kTheta, 40.0;
    EXPECT_LE((orbit.last() - expected).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_NEAR(kTheta, 12.2959183673469, 1e-12);
    // 22.6 is not a fixed point: the map sends it to 1 + 14.4γ.
    EXPECT_NEAR(truncated_theta_map(Theta::Constant(1, 22.6), proj, env.mdp(), 40.0)[0], 13.96, 1e-12);
}

TEST(TruncatedPbe, StaysInBall) {
    const Environment env = random_mdp(4, 3, 2, 0.9);
    RowMatrix phi(6, 2);
    phi << 1, 0, 1, 1, 0, 1, 2, 1, 1, 3, 0.5, 0;
    const Environment fa = env.with_features(FeatureMap(phi));
    const Projector proj(fa.features(), fa.weights());
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial)
        EXPECT_LE(truncated_pbe_map(random_vec(rng, 6, -8, 8), proj, fa.mdp(), 2.0).lpNorm<Eigen::Infinity>(), 2.0);
}

TEST(TruncatedPbe, TabularEqualsBellmanOnBall) {
    const Environment env = random_mdp(5, 3, 2, 0.8);
    const Projector proj(env.features(), env.weights());
    const double r = env.mdp().reward_max() / 0.2;
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec q = random_vec(rng, 6, -r, r);
        EXPECT_LE((truncated_pbe_map(q, proj, env.mdp(), r) - bellman_opt(env.mdp(), q)).lpNorm<Eigen::Infinity>(),
                  1e-12);
    }
}

TEST(ContractionModulus, BellmanInSupNorm) {
    for (const Environment& env : {example1(0.9), baird(0.99), random_mdp(1, 3, 2, 0.8)}) {
        Rng rng(5);
        const double m = contraction_modulus_estimate([&](const Vec& q) { return bellman_opt(env.mdp(), q); },
                                                      env.mdp().size(), NormSpec::sup(), 500, rng);
        EXPECT_LE(m, env.gamma() + 1e-12) << env.name();
    }
}

TEST(ContractionModulus, BairdProjectedMapInFeatureSupNorm) {
    const Environment env = baird(0.99);
    const Projector proj(env.features(), env.weights());
    Rng rng(6);
    const double m = contraction_modulus_estimate([&](const Vec& x) { return h_phi_map(x, proj, env.mdp()); }, 14,
                                                  NormSpec::phi_sup(env.features()), 1000, rng);
    EXPECT_LE(m, 0.99 + 1e-12);
}

TEST(ContractionModulus, ExampleProjectedMapExpands) {
    const Environment env = example1(0.9);
    const Projector proj(env.features(), env.weights());
    Rng rng(7);
    const double m = contraction_modulus_estimate([&](const Vec& x) { return h_phi_map(x, proj, env.mdp()); }, 1,
                                                  NormSpec::sup(), 200, rng);
    EXPECT_GE(m, 1.05);
    EXPECT_LE(m, 1.08 + 1e-12);
}

TEST(NegativeDrift, BairdHasAViolatingWitness) {
    const Environment env = baird(0.99);
    Rng rng(8);
    const DriftReport rep = negative_drift_check(env.features(), env.mu(), env.behavior(), 0.99, 200, rng);
    ASSERT_FALSE(rep.feasible_on_samples());
    EXPECT_EQ(rep.witnesses_checked, 14);
    for (const auto& v : rep.violations) {
        EXPECT_GE(v.lhs, v.rhs);
        const auto [lhs, rhs] = drift_sides(env.features(), env.mu(), env.behavior(), 0.99, v.theta);
        EXPECT_EQ(lhs, v.lhs);
        EXPECT_EQ(rhs, v.rhs);
    }
}

TEST(NegativeDrift, VanishingDiscountHasNoViolation) {
    for (const Environment& env : {baird(0.9), example1(0.9), random_mdp(2, 3, 3, 0.9)}) {
        Rng rng(9);
        EXPECT_TRUE(negative_drift_check(env.features(), env.mu(), env.behavior(), 1e-6, 500, rng).feasible_on_samples())
            << env.name();
    }
}

TEST(NegativeDrift, TabularWitnessThreshold) {
    // Witness e_(s,a): lhs = 2γ²μ(s), rhs = μ(s)π_b(a|s); violated iff 2γ² >= π_b(a|s).
    Mat probs(2, 2);
    probs << 0.3, 0.7, 0.6, 0.4;
    const Mdp mdp = example1_mdp(0.9);
    const Environment env = tabular(mdp, Policy(probs));
    for (double gamma : {0.3, 0.45, 0.5, 0.56, 0.6}) {
        Rng rng(10);
        const DriftReport rep = negative_drift_check(env.features(), env.mu(), env.behavior(), gamma, 0, rng);
        int expected = 0;
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 2; ++a)
                expected += 2 * gamma * gamma >= probs(s, a);
        EXPECT_EQ(int(rep.violations.size()), expected) << "gamma " << gamma;
    }
}

TEST(NegativeDrift, OverCompleteSkipsWithNotice) {
    const Environment env = example1(0.9);
    Rng rng(11);
    const DriftReport rep = negative_drift_check(env.features(), env.mu(), env.behavior(), 0.9, 10, rng);
    EXPECT_EQ(rep.witnesses_checked + int(rep.notices.size()), 4);
}

TEST(TheoremBound, PlugInValues) {
    BoundInputs b;
    b.gamma = 0.9;
    b.lambda_min = 6.25;
    b.alpha = theorem_alpha_max(6.25, 0.9);
    b.t_alpha = 1;
    b.K = 100000;
    b.T = 50;
    b.init_gap = 40;
    b.e_approx = 0;
    EXPECT_NEAR(b.alpha, 4.8077e-4, 1e-8);
    const BoundTerms terms = theorem1_bound(b);
    EXPECT_NEAR(terms.e1, std::pow(0.9, 50) * 40, 1e-15);
    EXPECT_NEAR(terms.total, reference_total(0.9, 50, 100000, b.alpha, 1, 6.25, 0, 40), 1e-12);
    EXPECT_NEAR(terms.e3, 24 * std::sqrt(b.alpha * 2) / (6.25 * 0.01), 1e-12);
    EXPECT_EQ(terms.e4, 0.0);
    EXPECT_FALSE(terms.stepsize_warning);
}

TEST(TheoremBound, Preconditions) {
    BoundInputs b;
    b.t_alpha = 5;
    b.K = 5;
    EXPECT_THROW(theorem1_bound(b), PreconditionError);
    b.K = 6;
    b.alpha = 1.0;
    b.lambda_min = 1.0;
    const BoundTerms terms = theorem1_bound(b);
    EXPECT_TRUE(terms.stepsize_warning);
    EXPECT_NEAR(terms.total, reference_total(b.gamma, b.T, 6, 1.0, 5, 1.0, 0.0, 0.0), 1e-12);
}

TEST(TheoremBound, StagedLimitsDecreaseToZero) {
    double prev = std::numeric_limits<double>::infinity();
    for (double alpha : {1e-4, 1e-6, 1e-8, 1e-10, 1e-12}) {
        BoundInputs b;
        b.gamma = 0.9;
        b.T = 1000000;
        b.alpha = alpha;
        b.t_alpha = 3;
        b.lambda_min = 0.5;
        b.K = static_cast<long long>(200.0 / (b.lambda_min * alpha));
        b.init_gap = 10;
        const double total = theorem1_bound(b).total;
        EXPECT_LT(total, prev);
        prev = total;
    }
    EXPECT_LT(prev, 2e-2);
}

TEST(InnerLoopBound, Endpoints) {
    const double lambda = 0.2, gamma = 0.9, alpha = 1e-3;
    const double floor = 520 / (lambda * lambda * 0.01) * alpha * 3;
    EXPECT_NEAR(inner_loop_bound(3, alpha, 2, lambda, gamma), 4 / (lambda * 0.01) + floor, 1e-9);
    EXPECT_NEAR(inner_loop_bound(1000000000LL, alpha, 2, lambda, gamma), floor, 1e-9);
    EXPECT_THROW(inner_loop_bound(2, alpha, 2, lambda, gamma), PreconditionError);
}

TEST(InnerLoopBound, MonteCarloMeanSquareError) {
    // Tabular, target θ̂ = 0: the inner loop solves θ* = H(0) = R.
    const Environment env = random_mdp(13, 3, 2, 0.8);
    const double lambda = gram_and_lambda_min(env.features(), env.weights()).lambda_min;
    const double alpha = 0.05;
    const int t_alpha = mixing_time(env.behavior_chain(), env.mu(), alpha);
    const Vec theta_star = env.mdp().rewards();
    for (int k : {t_alpha + 1, 50, 200, 1000, 5000}) {
        double mse = 0.0;
        for (int seed = 0; seed < 100; ++seed) {
            Rng rng(static_cast<std::uint64_t>(seed));
            int state = 0;
            const Theta theta = inner_loop_iterate(env, Theta::Zero(6), alpha, k, true, 5.0, state, rng);
            mse += (theta - theta_star).squaredNorm() / 100;
        }
        EXPECT_LE(mse, inner_loop_bound(k, alpha, t_alpha, lambda, 0.8)) << "k = " << k;
    }
}

TEST(ModifiedBellman, ZeroEtaIsOptimal) {
    const Environment env = random_mdp(2, 3, 2, 0.9);
    EXPECT_LE((modified_bellman_solve(env.mdp(), env.weights(), 0.0) - env.q_star()).lpNorm<Eigen::Infinity>(),
              2e-10 / 0.1);
    EXPECT_THROW(modified_bellman_solve(env.mdp(), env.weights(), -1.0), UsageError);
}

TEST(ModifiedBellman, UniformWeightsRescaleTheModel) {
    // Example-1 with tabular features has D = I/4.
    const Mdp mdp = example1_mdp(0.9);
    const Environment env = tabular(mdp, Policy::uniform(2, 2));
    for (double eta : {0.01, 0.05, 0.5}) {
        const QVector q = modified_bellman_solve(mdp, env.weights(), eta);
        const QVector expected = value_iteration(rescaled_mdp(mdp, 1 + 4 * eta), 1e-12).q;
        EXPECT_LE((q - expected).lpNorm<Eigen::Infinity>(), 1e-8);
        EXPECT_GT((q - env.q_star()).lpNorm<Eigen::Infinity>(), 1.0);
    }
}

TEST(CoupledFixedPoint, TabularUniformWeights) {
    const Mdp mdp = example1_mdp(0.9);
    const Environment env = tabular(mdp, Policy::uniform(2, 2));
    const Projector proj(env.features(), env.weights());
    const CoupledFixedPoint fp = coupled_q_fixed_point(mdp, proj);
    ASSERT_TRUE(fp.u_star.has_value());
    const QVector expected = value_iteration(rescaled_mdp(mdp, 4.0), 1e-12).q;
    EXPECT_LE((*fp.u_star - expected).lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_LE((*fp.v_star - 4.0 * *fp.u_star).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(CoupledFixedPoint, VanishingDiscountClosedForm) {
    const Environment env = random_mdp(3, 3, 2, 1e-12);
    RowMatrix phi(6, 2);
    phi << 1, 0, 1, 1, 0, 1, 2, 1, 1, 3, 0.5, 0;
    const FeatureMap fm(phi);
    const Projector proj(fm, env.weights());
    const CoupledFixedPoint fp = coupled_q_fixed_point(env.mdp(), proj);
    ASSERT_TRUE(fp.u_star.has_value());
    EXPECT_LE((*fp.u_star - proj.phit_d() * env.mdp().rewards()).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(CoupledFixedPoint, ReportsDivergence) {
    const Environment env = example1(0.99);
    const Projector proj(env.features(), env.weights());
    // u ← ΦᵀD H(Φu) scales by 25/4 · 1.2γ on the positive half-line.
    const CoupledFixedPoint fp = coupled_q_fixed_point(env.mdp(), proj);
    EXPECT_TRUE(fp.diverged);
    EXPECT_FALSE(fp.u_star.has_value());
}

TEST(CoupledFixedPoint, BiasBoundOnOrthogonalFeatures) {
    Mat jump = Mat::Constant(3, 3, 1.0 / 3.0);
    Mat rotate = Mat::Zero(3, 3);
    rotate(0, 1) = rotate(1, 2) = rotate(2, 0) = 1.0;
    Rng rng(12);
    const Mdp mdp({jump, rotate}, random_vec(rng, 6, 0, 1), 0.5);
    const Environment tab = tabular(mdp, Policy::uniform(3, 2));
    Mat raw(6, 3);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 3; ++j)
            raw(i, j) = rng.uniform(-1, 1);
    const Mat u = Eigen::HouseholderQR<Mat>(raw).householderQ() * Mat::Identity(6, 3);
    for (double sigma : {0.25, 0.5, 0.9}) {
        const FeatureMap fm(RowMatrix(std::sqrt(sigma * 6) * u));
        const Projector proj(fm, tab.weights());
        ASSERT_LE((proj.gram().gram - sigma * Mat::Identity(3, 3)).lpNorm<Eigen::Infinity>(), 1e-12);
        const CoupledFixedPoint fp = coupled_q_fixed_point(mdp, proj);
        ASSERT_TRUE(fp.v_star.has_value());
        const double lhs = (fm.apply(*fp.v_star) - tab.q_star()).lpNorm<Eigen::Infinity>();
        const double rhs =
            (tab.q_star() - proj.project(tab.q_star())).lpNorm<Eigen::Infinity>() / 0.5 + coupled_bias_term(sigma, 0.5);
        EXPECT_LE(lhs, rhs) << "sigma " << sigma;
    }
    EXPECT_NEAR(coupled_bias_term(0.5, 0.5), 2.0, 1e-15);
}
