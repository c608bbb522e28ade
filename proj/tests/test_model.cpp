#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "crossing/model.hpp"
#include "crossing/rng.hpp"
#include "crossing/stats.hpp"

using namespace crossing;

TEST(Boundary, AffineValuesAndDerivative) {
    const auto b = Boundary::affine(1.0, -0.5);
    EXPECT_DOUBLE_EQ(b(0.0), 1.0);
    EXPECT_DOUBLE_EQ(b(3.0), -0.5);
    EXPECT_DOUBLE_EQ(b.derivative(2.0), -0.5);
    EXPECT_DOUBLE_EQ(b.derivative_bound(), 0.5);
    EXPECT_TRUE(b.eventually_crosses());
}

TEST(Boundary, PerturbedDerivativeMatchesFiniteDifference) {
    const auto b = Boundary::perturbed(1.0, -0.5, 0.2, 3.0);
    for (double t : {0.0, 0.4, 1.7, 5.0}) {
        const double h = 1e-6;
        EXPECT_NEAR(b.derivative(t), (b(t + h) - b(t - h)) / (2 * h), 1e-7);
        EXPECT_LE(std::abs(b.derivative(t)), b.derivative_bound() + 1e-15);
    }
}

TEST(Boundary, PolynomialTrimsZerosAndBoundsDerivative) {
    const auto b = Boundary::polynomial({1.0, -0.25, -0.1, 0.0}, 4.0);
    EXPECT_EQ(b.params().size(), 3u);
    EXPECT_NEAR(b.derivative_bound(), 0.25 + 0.2 * 4.0, 1e-12);
    EXPECT_TRUE(b.eventually_crosses());
}

TEST(Boundary, AssumptionChecks) {
    EXPECT_THROW(Boundary::affine(-1.0, -0.5).validate(), AssumptionViolation);
    try {
        Boundary::affine(1.0, 0.1).require_eventual_crossing();
        FAIL();
    } catch (const AssumptionViolation& e) {
        EXPECT_EQ(e.assumption(), 2);
        EXPECT_NE(std::string(e.what()).find("assumption 2 violated"), std::string::npos);
    }
    EXPECT_THROW(Boundary::polynomial({1.0}, 0.0), ConfigError);
}

TEST(Boundary, DiscreteLevelIsScaledCurve) {
    const auto b = Boundary::affine(1.0, -0.5);
    EXPECT_DOUBLE_EQ(boundary_level(b, 50, 100), 10.0 * 0.75);
}

TEST(Payoff, BoundsHoldOnRandomPoints) {
    const Payoff payoffs[] = {Payoff::time_exponential(1.5, 0.5), Payoff::gaussian_bump(2.0, 0.3, 0.4, 0.7),
                              Payoff::windowed_polynomial({0.5, -1.0, 0.25}, 1.2, 0.1)};
    Xoshiro256pp g{17};
    for (const auto& p : payoffs) {
        for (int i = 0; i < 20000; ++i) {
            const double t = 10.0 * g.uniform();
            const double x = -12.0 + 24.0 * g.uniform();
            ASSERT_TRUE(p.within_bounds(t, x)) << "t=" << t << " x=" << x;
        }
    }
}

TEST(Payoff, PartialsMatchFiniteDifferences) {
    const Payoff payoffs[] = {Payoff::gaussian_bump(2.0, 0.3, 0.4, 0.7),
                              Payoff::windowed_polynomial({0.5, -1.0, 0.25}, 1.2, 0.1)};
    const double h = 1e-4;
    for (const auto& p : payoffs) {
        for (double x : {-1.3, 0.0, 0.9}) {
            const double t = 0.8;
            EXPECT_NEAR(p.dx(t, x), (p.value(t, x + h) - p.value(t, x - h)) / (2 * h), 1e-7);
            EXPECT_NEAR(p.dxx(t, x), (p.value(t, x + h) - 2 * p.value(t, x) + p.value(t, x - h)) / (h * h), 1e-5);
            EXPECT_NEAR(p.dt(t, x), (p.value(t + h, x) - p.value(t - h, x)) / (2 * h), 1e-7);
        }
    }
}

TEST(Payoff, RejectsBadParameters) {
    EXPECT_THROW(Payoff::time_exponential(1.0, -0.1), ConfigError);
    EXPECT_THROW(Payoff::gaussian_bump(1.0, 0.1, 0.0, 0.0), ConfigError);
    EXPECT_THROW(Payoff::windowed_polynomial({}, 1.0, 0.0), ConfigError);
}

namespace {

// Sample mean, variance, third and fourth moments of 4e5 draws.
std::array<double, 4> sampled_moments(const IncrementDistribution& d, std::uint64_t seed) {
    MomentAccumulator<4> acc;
    d.with_sampler([&](auto sampler) {
        Xoshiro256pp g{seed};
        for (int i = 0; i < 400000; ++i) {
            const double x = sampler(g);
            acc.add({x, x * x, x * x * x, x * x * x * x});
        }
        return 0;
    });
    return {acc.mean(0), acc.mean(1), acc.mean(2), acc.mean(3)};
}

}  // namespace

class DistributionMoments : public ::testing::TestWithParam<IncrementDistribution> {};

TEST_P(DistributionMoments, SamplerMatchesDeclaredMoments) {
    const auto& d = GetParam();
    const auto m = sampled_moments(d, 99);
    const auto exact = d.moments();
    // tolerances are ~5 standard errors for the heaviest-tailed member
    EXPECT_NEAR(m[0], 0.0, 0.01) << d.name();
    EXPECT_NEAR(m[1], 1.0, 0.02) << d.name();
    EXPECT_NEAR(m[2], exact.m3, 0.12) << d.name();
    EXPECT_NEAR(m[3], exact.m4, 0.8) << d.name();
}

INSTANTIATE_TEST_SUITE_P(Catalogue, DistributionMoments,
                         ::testing::Values(IncrementDistribution::standard_normal(),
                                           IncrementDistribution::centered_exponential(),
                                           IncrementDistribution::uniform_symmetric(),
                                           IncrementDistribution::gaussian_mixture(0.3, 1.0, 0.5),
                                           IncrementDistribution::two_point()),
                         [](const auto& info) {
                             auto name = info.param.name();
                             std::replace(name.begin(), name.end(), '-', '_');
                             return name;
                         });

TEST(Distribution, ClosedFormMoments) {
    EXPECT_DOUBLE_EQ(IncrementDistribution::centered_exponential().moments().m3, 2.0);
    EXPECT_DOUBLE_EQ(IncrementDistribution::centered_exponential().moments().m4, 9.0);
    EXPECT_DOUBLE_EQ(IncrementDistribution::uniform_symmetric().moments().m4, 1.8);
    EXPECT_DOUBLE_EQ(IncrementDistribution::standard_normal().moments().m3, 0.0);
}

TEST(Distribution, MixtureIsStandardized) {
    const auto d = IncrementDistribution::gaussian_mixture(0.3, 1.0, 0.5);
    const auto& p = d.params();
    const double mean = p[0] * p[1] + (1 - p[0]) * p[3];
    const double second = p[0] * (p[1] * p[1] + p[2] * p[2]) + (1 - p[0]) * (p[3] * p[3] + p[4] * p[4]);
    EXPECT_NEAR(mean, 0.0, 1e-15);
    EXPECT_NEAR(second, 1.0, 1e-15);
    EXPECT_THROW(IncrementDistribution::gaussian_mixture(0.5, 1.0, 1.0), ConfigError);
}

TEST(Distribution, LatticeRefusal) {
    const auto d = IncrementDistribution::two_point();
    EXPECT_FALSE(d.non_lattice());
    try {
        d.require_non_lattice();
        FAIL();
    } catch (const AssumptionViolation& e) {
        EXPECT_EQ(e.assumption(), 1);
    }
    EXPECT_NO_THROW(IncrementDistribution::uniform_symmetric().require_non_lattice());
}

TEST(TimeTrace, InterpolatesNodesAndStaysMonotone) {
    std::vector<double> t, v;
    for (int i = 0; i <= 20; ++i) {
        t.push_back(0.25 * i);
        v.push_back(std::tanh(3.0 * (0.25 * i - 2.5)));
    }
    const TimeTrace tr{t, v};
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_DOUBLE_EQ(tr(t[i]), v[i]);
    double prev = tr(0.0);
    for (int k = 1; k <= 2000; ++k) {
        const double x = 5.0 * k / 2000.0;
        const double y = tr(x);
        ASSERT_GE(y, prev - 1e-15);
        prev = y;
    }
}

TEST(TimeTrace, TailPolicies) {
    const TimeTrace strict{{0.0, 1.0, 2.0}, {3.0, 2.0, 1.0}};
    EXPECT_THROW(strict(2.5), DomainError);
    const auto held = strict.with_tail(TimeTrace::Tail::hold_last);
    EXPECT_DOUBLE_EQ(held(2.5), 1.0);
    EXPECT_DOUBLE_EQ(held(-1.0), 3.0);
    EXPECT_THROW((TimeTrace{{0.0, 0.0}, {1.0, 1.0}}), DomainError);
}

TEST(SplitPayoff, PartsReassembleAndMatchSlope) {
    const auto b = Boundary::affine(1.0, -0.5);
    const auto f = Payoff::gaussian_bump(1.0, 0.2, 0.0, 1.0);
    const TimeTrace delta{{0.0, 1.0, 2.0}, {0.3, -0.1, 0.2}};
    const auto s = split_payoff(f, b, delta);
    for (double t : {0.0, 0.5, 1.5}) {
        for (double x : {-1.0, 0.2, 1.0}) {
            EXPECT_NEAR(s.f0(t, x) + s.f1(t, x), f.value(t, x), 1e-15);
            const double h = 1e-6;
            EXPECT_NEAR(s.f0_dx(t, x), (s.f0(t, x + h) - s.f0(t, x - h)) / (2 * h), 1e-8);
        }
        EXPECT_DOUBLE_EQ(s.f1(t, b(t)), 0.0);
    }
}
