#include <gtest/gtest.h>

#include <cmath>

#include "crossing/fluctuation.hpp"
#include "support/oracles.hpp"

using namespace crossing;

TEST(Ladder, UnitStepStub) {
    ConstantSampler one{1.0};
    Xoshiro256pp rng{1};
    const auto s = sample_ladder(one, -2.5, 100, rng);
    EXPECT_EQ(s.epoch, 3);
    EXPECT_DOUBLE_EQ(s.height, 0.5);
    EXPECT_FALSE(s.capped);
    EXPECT_THROW(sample_ladder(one, 0.5, 100, rng), DomainError);
}

TEST(Ladder, CapIsReported) {
    ConstantSampler down{-1.0};
    Xoshiro256pp rng{1};
    const auto s = sample_ladder(down, 0.0, 10, rng);
    EXPECT_TRUE(s.capped);
    EXPECT_EQ(s.epoch, 10);
}

TEST(Rho, StubIsExactlyOneHalf) {
    const auto c = estimate_rho(ConstantSampler{1.0}, 10'000, 10, 3);
    EXPECT_EQ(c.rho, 0.5);
    EXPECT_EQ(c.distribution, "custom");
}

TEST(Rho, ExponentialIsOne) {
    const auto c = estimate_rho(IncrementDistribution::centered_exponential(), 200'000, default_ladder_cap, 4);
    EXPECT_NEAR(c.rho, oracle::rho_exponential, 4.0 * c.rho_stderr);
    EXPECT_LT(c.rho_stderr, 0.01);
    // ladder heights are Exp(1): E Y = 1, E Y^2 = 2, E Y^3 = 6
    EXPECT_NEAR(c.EY2, 2.0, 0.05);
    EXPECT_NEAR(c.EY3, 6.0, 0.3);
}

TEST(Rho, NormalMatchesZetaValue) {
    const auto c = estimate_rho(IncrementDistribution::standard_normal(), 200'000, default_ladder_cap, 5);
    EXPECT_NEAR(c.rho, oracle::rho_normal(), 4.0 * c.rho_stderr);
    EXPECT_NEAR(oracle::rho_normal(), 0.5826, 1e-4);
}

TEST(Rho, IndependentOfThreads) {
    const auto a = estimate_rho(IncrementDistribution::uniform_symmetric(), 20'000, default_ladder_cap, 6, {1, 1000});
    const auto b = estimate_rho(IncrementDistribution::uniform_symmetric(), 20'000, default_ladder_cap, 6, {4, 1000});
    EXPECT_EQ(a.rho, b.rho);
    EXPECT_EQ(a.rho_stderr, b.rho_stderr);
}

TEST(Rho, Refusals) {
    EXPECT_THROW(estimate_rho(IncrementDistribution::two_point(), 20'000, 1000, 1), AssumptionViolation);
    EXPECT_THROW(estimate_rho(IncrementDistribution::standard_normal(), 100, 1000, 1), DomainError);
    // with a one-step cap about half the epochs are capped
    EXPECT_THROW(estimate_rho(IncrementDistribution::standard_normal(), 20'000, 1, 1), NumericalRefusal);
}

TEST(H, NonnegativeSideIsLinear) {
    OvershootConstants c;
    c.rho = 0.6;
    const auto h = estimate_H(IncrementDistribution::standard_normal(), 2.0, 0, 10, 1, c);
    EXPECT_DOUBLE_EQ(h.value, 1.4);
    EXPECT_DOUBLE_EQ(h.stderr_mc, 0.0);
}

TEST(H, ExponentialOvershootIsMemoryless) {
    // for Exp(1) ladder heights the overshoot over any level is Exp(1), so
    // E[S_{T_x} + x] = 1 and H(x) = 1 - rho = 0 for x < 0
    OvershootConstants c;
    c.rho = 1.0;
    const auto h = estimate_H(IncrementDistribution::centered_exponential(), -1.5, 100'000, default_ladder_cap, 7, c);
    EXPECT_NEAR(h.mean_overshoot, 1.0, 4.0 * h.stderr_mc);
    EXPECT_NEAR(h.value, 0.0, 4.0 * h.stderr_mc);
}

TEST(H, HarmonicOnNegativeAxis) {
    const auto rep = check_H_harmonic(IncrementDistribution::uniform_symmetric(), {-0.5, -2.0}, 40'000, 8);
    ASSERT_EQ(rep.points.size(), 2u);
    EXPECT_LT(rep.worst_ratio, 4.0);
    EXPECT_THROW(check_H_harmonic(IncrementDistribution::uniform_symmetric(), {0.5}, 1000, 8), DomainError);
}

TEST(LadderPool, TailLeadingMatchesExponential) {
    // Y ~ Exp(1): E (Y + x)_+^2 = 2 e^x, so the leading term is -e^x
    const auto pool = ladder_pool(IncrementDistribution::centered_exponential(), 200'000, default_ladder_cap, 9);
    // P(T_0 > cap) ~ 1 / sqrt(pi cap) for a symmetric-tailed ladder epoch
    EXPECT_LT(pool.capped, 400u);
    const auto [v, se] = h_tail_leading(pool, -1.0);
    EXPECT_NEAR(v, -std::exp(-1.0), 4.0 * se);
}

TEST(Renewal, ExponentialIsPoissonPlusOne) {
    const auto r = renewal_measure(IncrementDistribution::centered_exponential(), 0.0, 2.0, 40'000, 10);
    EXPECT_NEAR(r.direct.mean, oracle::renewal_exponential(2.0), 4.0 * r.direct.std_error);
    EXPECT_NEAR(r.wald, oracle::renewal_exponential(2.0), 4.0 * r.wald_stderr + 1e-3);
    EXPECT_THROW(renewal_measure(IncrementDistribution::centered_exponential(), 1.0, 1.0, 10, 1), DomainError);
}

TEST(Renewal, BlackwellRateForNormal) {
    // away from 0 the renewal density approaches 1 / E Y
    const auto c = estimate_rho(IncrementDistribution::standard_normal(), 100'000, default_ladder_cap, 11);
    const auto r = renewal_measure(IncrementDistribution::standard_normal(), 5.0, 7.0, 20'000, 12);
    EXPECT_NEAR(r.direct.mean, 2.0 / c.EY, 4.0 * r.direct.std_error + 0.02);
}
