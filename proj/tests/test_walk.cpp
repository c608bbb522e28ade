#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "crossing/walk.hpp"
#include "support/oracles.hpp"

using namespace crossing;

namespace {

const Boundary standard_boundary = Boundary::affine(1.0, -0.5);

}  // namespace

TEST(Walk, DeterministicStubByHand) {
    // S_k = k against b_k = 2 (1 - k/8): k = 1 gives 1 < 1.75, k = 2 gives 2 >= 1.5
    ConstantSampler one{1.0};
    Xoshiro256pp rng{1};
    const auto r = simulate_crossing(4, one, standard_boundary, rng);
    EXPECT_EQ(r.stop_index, 2);
    EXPECT_DOUBLE_EQ(r.tau, 0.5);
    EXPECT_DOUBLE_EQ(r.terminal, 1.0);
    EXPECT_DOUBLE_EQ(r.overshoot, 0.5);
}

TEST(Walk, ReplayOfSubstreamGivesSameStop) {
    const auto dist = IncrementDistribution::standard_normal();
    const std::int64_t n = 50;
    const auto records = collect_records(n, dist, standard_boundary, 200, 123);
    ASSERT_EQ(records.size(), 200u);
    for (std::uint64_t p = 0; p < records.size(); ++p) {
        auto rng = substream(123, StreamDomain::walk, p);
        NormalSampler z;
        double s = 0.0;
        std::int64_t k = 0;
        do {
            s += z(rng);
            ++k;
        } while (s < boundary_level(standard_boundary, k, n));
        ASSERT_EQ(records[p].stop_index, k) << "path " << p;
        EXPECT_NEAR(records[p].overshoot, s - boundary_level(standard_boundary, k, n), 1e-12);
        EXPECT_GE(records[p].overshoot, 0.0);
        EXPECT_NEAR(records[p].terminal, s / std::sqrt(double(n)), 1e-12);
    }
}

TEST(Walk, StepCapRefuses) {
    WalkOptions o;
    o.cap_factor = 1e-3;  // two steps at n = 100
    EXPECT_THROW(mc_expectation([](const CrossingRecord& r) { return r.tau; }, 100,
                                IncrementDistribution::standard_normal(), standard_boundary, 1000, 5, o),
                 StepCapExceeded);
}

TEST(Walk, RequiresEventualCrossing) {
    try {
        simulate_crossing(10, IncrementDistribution::standard_normal(), Boundary::affine(1.0, 0.2), 1);
        FAIL();
    } catch (const AssumptionViolation& e) {
        EXPECT_EQ(e.assumption(), 2);
    }
}

TEST(Walk, EstimatesIndependentOfThreads) {
    const auto dist = IncrementDistribution::centered_exponential();
    auto fn = [](const CrossingRecord& r) { return std::exp(-0.5 * r.tau); };
    const auto a = mc_expectation(fn, 64, dist, standard_boundary, 20000, 9, {}, {1, 512});
    const auto b = mc_expectation(fn, 64, dist, standard_boundary, 20000, 9, {}, {3, 512});
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
    EXPECT_EQ(a.paths, 20000u);
}

TEST(Walk, MomentsAgreeWithExpectation) {
    const auto dist = IncrementDistribution::uniform_symmetric();
    auto fn = [](const CrossingRecord& r) { return r.tau; };
    const auto e = mc_expectation(fn, 32, dist, standard_boundary, 5000, 4);
    const auto m = mc_moments<2>([](const CrossingRecord& r) { return std::array<double, 2>{r.tau, r.overshoot}; }, 32,
                                 dist, standard_boundary, 5000, 4);
    EXPECT_DOUBLE_EQ(m.mean(0), e.mean);
}

TEST(Walk, ConvergesToBrownianValue) {
    // at n = 400 the O(1/sqrt n) gap is about 0.3 / 20; check the walk sits
    // between that and the limit rather than on the limit
    const auto m = mc_expectation([](const CrossingRecord& r) { return std::exp(-0.5 * r.tau); }, 400,
                                  IncrementDistribution::standard_normal(), standard_boundary, 40000, 21);
    const double u = oracle::AffineExponential{}.u00();
    EXPECT_LT(m.mean, u);
    EXPECT_GT(m.mean, u - 0.03);
}

TEST(BrownianOracle, MatchesLaplaceTransform) {
    const auto est = brownian_oracle([](double tau, double) { return std::exp(-0.5 * tau); }, standard_boundary, 20000,
                                     3);
    EXPECT_NEAR(est.mean, oracle::AffineExponential{}.u00(), 4.0 * est.std_error + 1e-3);
}

TEST(BrownianOracle, PathIntegralMatchesRunningCost) {
    const oracle::AffineExponential ex;
    const double c3 = std::pow(ex.c(), 3);
    const auto est = brownian_path_integral([&](double t, double x) { return c3 * ex.u(t, x); }, standard_boundary,
                                            20000, 8);
    EXPECT_NEAR(est.mean, ex.w00(), 4.0 * est.std_error + 1e-3);
}

TEST(Diagnostics, CountsAreMonotoneInDistance) {
    DiagnosticsSpec spec;
    spec.distances = {0.5, 1.0, 2.0, 1e9};
    spec.intervals = {{0.0, 1.0}, {1.0, 2.0}};
    spec.proximity = true;
    const auto records = collect_records(100, IncrementDistribution::standard_normal(), standard_boundary, 300, 77, {},
                                         {}, &spec);
    for (const auto& r : records) {
        ASSERT_EQ(r.near_counts.size(), 4u);
        for (std::size_t i = 1; i < 4; ++i) ASSERT_GE(r.near_counts[i], r.near_counts[i - 1]);
        // every step before and at the stop is within an infinite distance
        EXPECT_GE(r.near_counts[3], r.stop_index - 1);
        EXPECT_LE(r.near_counts[3], r.stop_index + 1);
        EXPECT_GT(r.proximity_sum, 0.0);
        EXPECT_LE(r.proximity_sum, static_cast<double>(r.stop_index + 1));
    }
    const auto v = visit_counts(records, spec);
    EXPECT_EQ(v.mean_near.size(), 4u);
    EXPECT_NEAR(v.scaled_near[1], v.mean_near[1].mean / 2.0, 1e-15);
    EXPECT_THROW(visit_counts(records, DiagnosticsSpec{{-1.0}, {}, false}), DomainError);
}

TEST(Diagnostics, DisabledCountersStayEmpty) {
    const auto records = collect_records(16, IncrementDistribution::standard_normal(), standard_boundary, 10, 1);
    for (const auto& r : records) {
        EXPECT_TRUE(r.near_counts.empty());
        EXPECT_DOUBLE_EQ(r.proximity_sum, 0.0);
    }
}

TEST(Overshoot, SampleLayout) {
    CrossingRecord r;
    r.tau = 0.5;
    r.overshoot = 0.25;
    const TimeTrace delta{{0.0, 1.0}, {2.0, 2.0}};
    const auto s = overshoot_sample(r, delta);
    EXPECT_DOUBLE_EQ(s[0], 0.25);
    EXPECT_DOUBLE_EQ(s[2], 0.5);
    EXPECT_DOUBLE_EQ(s[3], 0.0);
    r.tau = 3.0;
    const auto out = overshoot_sample(r, delta);
    EXPECT_DOUBLE_EQ(out[2], 0.0);
    EXPECT_DOUBLE_EQ(out[3], 1.0);
}

TEST(Overshoot, JointStatsAreSane) {
    const TimeTrace delta{{0.0, 20.0}, {1.0, 1.0}};
    const auto s = joint_overshoot_stats(100, IncrementDistribution::centered_exponential(), standard_boundary, delta,
                                         20000, 2);
    // E R_n -> rho = 1 for this law; at n = 100 within a few percent
    EXPECT_NEAR(s.mean_overshoot.mean, 1.0, 0.1);
    // paths outliving the trace carry no Delta; a few tenths of a percent here
    EXPECT_GT(s.excluded_mass, 0.0);
    EXPECT_LT(s.excluded_mass, 0.01);
    EXPECT_LE(s.overshoot_delta.mean, s.mean_overshoot.mean);
    EXPECT_NEAR(s.overshoot_delta.mean, s.mean_overshoot.mean, 0.01);
    EXPECT_LT(std::abs(s.corr_overshoot_tau), 0.1);
}

TEST(RecordsCsv, HeaderAndRows) {
    const auto records = collect_records(16, IncrementDistribution::standard_normal(), standard_boundary, 3, 1);
    std::ostringstream os;
    write_records_csv(os, records, 10);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "path_id,stop_index,tau,terminal,overshoot");
    int rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(line.rfind(std::to_string(10 + rows) + ",", 0), 0u);
        ++rows;
    }
    EXPECT_EQ(rows, 3);
}
