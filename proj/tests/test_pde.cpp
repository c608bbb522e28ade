#include <gtest/gtest.h>

#include <cmath>

#include "crossing/hash.hpp"
#include "crossing/pde.hpp"
#include "support/oracles.hpp"

using namespace crossing;

namespace {

const Boundary standard_boundary = Boundary::affine(1.0, -0.5);
const Payoff standard_payoff = Payoff::time_exponential(1.0, 0.5);

Field standard_u(const GridConfig& g = {}) {
    return solve_value(standard_boundary, boundary_data(standard_payoff, standard_boundary), g);
}

}  // namespace

TEST(SolveValue, MatchesClosedFormAcrossTheDomain) {
    const auto u = standard_u();
    const oracle::AffineExponential ex;
    for (auto [t, x] : {std::pair{0.0, 0.0}, {0.0, -1.0}, {1.0, -0.5}, {2.0, -2.0}, {0.5, 0.7}}) {
        EXPECT_NEAR(u.value(t, x), ex.u(t, x), 2e-4) << "t=" << t << " x=" << x;
    }
    EXPECT_NEAR(u.value(0.0, 0.0), 0.539003082724, 1e-4);
}

TEST(SolveValue, SecondOrderUnderRefinement) {
    GridConfig g;
    g.ny = 129;
    g.nt = 257;
    const double ref = oracle::standard_truncated(g.t_max);
    const double e1 = std::abs(standard_u(g).value(0.0, 0.0) - ref);
    const double e2 = std::abs(standard_u(g.refined(2)).value(0.0, 0.0) - ref);
    EXPECT_GT(e1 / e2, 3.0) << e1 << " " << e2;
}

TEST(SolveValue, BoundaryDataHeldOnBoundary) {
    const auto u = standard_u();
    for (int i = 0; i < u.grid().nt; i += 97) {
        EXPECT_DOUBLE_EQ(u(i, 0), std::exp(-0.5 * u.grid().time(i)));
    }
}

TEST(SolveValue, FarFieldChoiceIsImmaterial) {
    GridConfig g;
    g.far_field = FarField::constant_extension;
    EXPECT_NEAR(standard_u(g).value(0.0, 0.0), standard_u().value(0.0, 0.0), 1e-8);
}

TEST(SolveValue, TailMetadataMatchesInverseGaussian) {
    const auto u = standard_u();
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    const double alive = 1.0 - GK::integrate(oracle::standard_density, 0.0, 12.0, 25, 1e-14);
    EXPECT_NEAR(u.metadata().tail_probability, alive, 1e-3);
    EXPECT_LE(u.metadata().truncation_bias_bound, 1e-4);
    EXPECT_EQ(u.metadata().kind, "u");
}

TEST(SolveValue, RefusesShortHorizon) {
    GridConfig g;
    g.t_max = 1.0;
    EXPECT_THROW(standard_u(g), NumericalRefusal);
    SolveOptions lax;
    lax.check_truncation = false;
    EXPECT_NO_THROW(solve_value(standard_boundary, boundary_data(standard_payoff, standard_boundary), g, lax));
}

TEST(SolveValue, MonotoneTowardsTheBoundary) {
    // exp(-t/2) rewards early crossing, so u grows as x approaches b(0)
    const auto u = standard_u();
    double prev = 0.0;
    for (int k = 0; k <= 60; ++k) {
        const double x = -5.0 + 6.0 * k / 60.0;
        const double v = u.value(0.0, x);
        ASSERT_GT(v, prev);
        prev = v;
    }
}

TEST(GridConfig, ValidationPaths) {
    GridConfig g;
    g.ny = 4;
    try {
        g.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "/grid/ny");
    }
    EXPECT_EQ(GridConfig{}.refined(2).ny, 1023);
}

TEST(Field, WindowIsEnforced) {
    const auto u = standard_u();
    EXPECT_THROW(u.value(0.0, -20.0), DomainError);
    EXPECT_THROW(u.value(0.0, 2.0), DomainError);
}

TEST(ThirdDerivative, ExactOnCubics) {
    GridConfig g;
    g.ny = 64;
    g.nt = 16;
    const auto f = Field::from_function(g, standard_boundary, [](double, double y) { return y * y * y; });
    const auto d = third_derivative(f);
    for (int j = 0; j < g.ny; j += 7) EXPECT_NEAR(d(3, j), -6.0, 1e-6);
}

TEST(ThirdDerivative, MatchesClosedForm) {
    const auto u = standard_u();
    const auto d = third_derivative(u);
    const oracle::AffineExponential ex;
    const double c3 = std::pow(ex.c(), 3);
    for (auto [t, x] : {std::pair{0.0, -1.0}, {1.0, -1.0}, {0.0, -3.0}}) {
        EXPECT_NEAR(d.value(t, x), c3 * ex.u(t, x), 2e-3 * c3 * ex.u(t, x));
    }
}

TEST(Delta, MatchesClosedForm) {
    const auto u = standard_u();
    const auto delta = compute_delta(u, standard_payoff);
    const double c = oracle::AffineExponential{}.c();
    for (double t : {0.0, 0.5, 2.0, 6.0}) EXPECT_NEAR(delta(t), -c * std::exp(-0.5 * t), 1e-3);
}

TEST(RunningCost, MatchesClosedForm) {
    const auto u = standard_u();
    const auto d = third_derivative(u);
    SolveOptions o;
    o.tail_probability = u.metadata().tail_probability;
    const auto w = solve_running_cost(standard_boundary, d, GridConfig{}, o);
    EXPECT_NEAR(w.value(0.0, 0.0), oracle::AffineExponential{}.w00(), 5e-4);
    EXPECT_EQ(w.metadata().kind, "w");
}

TEST(RunningCost, RejectsForeignGrid) {
    GridConfig g;
    g.ny = 65;
    g.nt = 65;
    SolveOptions lax;
    lax.check_truncation = false;
    const auto small = solve_value(standard_boundary, boundary_data(standard_payoff, standard_boundary), g, lax);
    EXPECT_THROW(solve_running_cost(standard_boundary, small, GridConfig{}), DomainError);
}

TEST(Field, ContentHashTracksValues) {
    GridConfig g;
    g.ny = 32;
    g.nt = 16;
    const auto a = Field::from_function(g, standard_boundary, [](double t, double y) { return t + y; });
    const auto b = Field::from_function(g, standard_boundary, [](double t, double y) { return t + y; });
    const auto c = Field::from_function(g, standard_boundary, [](double t, double y) { return t + y + 1e-12; });
    EXPECT_EQ(content_hash(a), content_hash(b));
    EXPECT_NE(content_hash(a), content_hash(c));
}
