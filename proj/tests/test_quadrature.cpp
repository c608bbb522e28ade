#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crossing/quadrature.hpp"

using namespace crossing;

namespace {

double integrate(const QuadratureRule& r, auto&& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * g(r.nodes[i]);
    return s;
}

}  // namespace

TEST(Gauss, HermiteMomentsExact) {
    const auto r = gauss_hermite(10);
    // E Z^k = (k - 1)!! for even k; exact up to degree 19
    EXPECT_NEAR(integrate(r, [](double) { return 1.0; }), 1.0, 1e-13);
    EXPECT_NEAR(integrate(r, [](double x) { return x * x; }), 1.0, 1e-13);
    EXPECT_NEAR(integrate(r, [](double x) { return std::pow(x, 8); }), 105.0, 1e-9);
    EXPECT_NEAR(integrate(r, [](double x) { return std::pow(x, 18); }), 34459425.0, 1e-3);
    EXPECT_NEAR(integrate(r, [](double x) { return std::pow(x, 7); }), 0.0, 1e-9);
}

TEST(Gauss, LaguerreFactorials) {
    const auto r = gauss_laguerre(12);
    double fact = 1.0;
    for (int k = 0; k <= 10; ++k) {
        if (k > 0) fact *= k;
        EXPECT_NEAR(integrate(r, [k](double x) { return std::pow(x, k); }), fact, 1e-10 * fact) << k;
    }
}

TEST(Gauss, LegendreAgainstPolynomials) {
    const auto r = gauss_legendre(8);
    EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 2.0, 1e-14);
    EXPECT_NEAR(integrate(r, [](double x) { return std::pow(x, 14); }), 2.0 / 15.0, 1e-14);
    EXPECT_NEAR(integrate(r, [](double x) { return std::cos(x); }), 2.0 * std::sin(1.0), 1e-13);
}

class IncrementRuleMoments : public ::testing::TestWithParam<IncrementDistribution> {};

TEST_P(IncrementRuleMoments, MatchDeclaredMoments) {
    const auto& d = GetParam();
    const auto r = increment_rule(d, 32);
    const auto m = d.moments();
    EXPECT_NEAR(integrate(r, [](double) { return 1.0; }), 1.0, 1e-14);
    EXPECT_NEAR(integrate(r, [](double x) { return x; }), 0.0, 1e-12) << d.name();
    EXPECT_NEAR(integrate(r, [](double x) { return x * x; }), 1.0, 1e-12) << d.name();
    EXPECT_NEAR(integrate(r, [](double x) { return x * x * x; }), m.m3, 1e-11) << d.name();
    EXPECT_NEAR(integrate(r, [](double x) { return x * x * x * x; }), m.m4, 1e-10) << d.name();
}

INSTANTIATE_TEST_SUITE_P(Catalogue, IncrementRuleMoments,
                         ::testing::Values(IncrementDistribution::standard_normal(),
                                           IncrementDistribution::centered_exponential(),
                                           IncrementDistribution::uniform_symmetric(),
                                           IncrementDistribution::gaussian_mixture(0.3, 1.0, 0.5)),
                         [](const auto& info) {
                             auto name = info.param.name();
                             std::replace(name.begin(), name.end(), '-', '_');
                             return name;
                         });

TEST(IncrementRule, ExponentialTransform) {
    // E exp(s X) = e^{-s} / (1 - s) for X = E - 1. Weights from eigenvectors
    // carry absolute error near 1e-32, so growing integrands keep the outer
    // nodes modest: 24 nodes reach about 80.
    const auto r = increment_rule(IncrementDistribution::centered_exponential(), 24);
    const double s = 0.3;
    EXPECT_NEAR(integrate(r, [s](double x) { return std::exp(s * x); }), std::exp(-s) / (1.0 - s), 1e-10);
}

TEST(IncrementRule, LatticeRefused) {
    EXPECT_THROW(increment_rule(IncrementDistribution::two_point()), AssumptionViolation);
}
