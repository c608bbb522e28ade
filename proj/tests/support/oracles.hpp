#pragma once

// Independent reference values. Nothing here calls the library; the
// closed forms come from Brownian first passage over an affine boundary,
// where the value function and its derivatives are explicit.

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/zeta.hpp>

namespace oracle {

/// Boundary b(t) = a - mu t with a, mu > 0 and payoff exp(-s t): Brownian
/// first passage has E exp(-s tau) = exp(a (mu - sqrt(mu^2 + 2 s))).
struct AffineExponential {
    double a = 1.0;
    double mu = 0.5;
    double s = 0.5;

    double root() const { return std::sqrt(mu * mu + 2.0 * s); }
    /// Decay rate of u in the gap: u(t, x) = exp(-s t) exp(-c (b(t) - x)).
    double c() const { return root() - mu; }

    double u(double t, double x) const { return std::exp(-s * t - c() * (a - mu * t - x)); }
    double u00() const { return std::exp(a * (mu - root())); }

    /// w(0,0) = E int_0^tau u_xxx(t, W_t) dt = c^3 E[tau exp(-s tau)], the
    /// last by optional stopping of the martingale u(t, W_t).
    double w00() const { return std::pow(c(), 3) * a / root() * u00(); }

    /// g(0,0) = E Delta(tau) with Delta = f_x - u_x = -c exp(-s t) on the
    /// boundary.
    double g00() const { return -c() * u00(); }
};

/// Inverse Gaussian first-passage density of W over 1 - t/2.
inline double standard_density(double t) {
    if (t <= 0.0) return 0.0;
    const double g = 1.0 - 0.5 * t;
    return std::exp(-g * g / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t * t * t);
}

/// The standard problem with the horizon cut at T: paths still alive at T
/// collect exp(-T/2).
inline double standard_truncated(double T) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    const double hit = GK::integrate([](double t) { return std::exp(-0.5 * t) * standard_density(t); }, 0.0, T, 25, 1e-14);
    const double mass = GK::integrate(standard_density, 0.0, T, 25, 1e-14);
    return hit + std::exp(-0.5 * T) * (1.0 - mass);
}

/// rho for standard-normal steps: -zeta(1/2) / sqrt(2 pi).
inline double rho_normal() { return -boost::math::zeta(0.5) / std::sqrt(2.0 * std::numbers::pi); }

/// rho for X = E - 1 with E ~ Exp(1): ladder heights are Exp(1) by
/// memorylessness, so rho = E Y^2 / (2 E Y) = 1.
inline constexpr double rho_exponential = 1.0;

/// Renewal measure of Exp(1) ladder heights on [0, h), counting the renewal
/// at 0: a Poisson process of unit rate plus one.
inline double renewal_exponential(double h) { return 1.0 + h; }

/// e_n at (t, x) for the standard problem with uniform(-sqrt3, sqrt3) steps,
/// where u-bar = u is the exponential above: E exp(c X / sqrt n) is
/// sinh(sqrt3 c / sqrt n) / (sqrt3 c / sqrt n) and the time step multiplies
/// by exp((c - 1) / (2 n)).
inline double e_n_uniform(double t, double x, double n) {
    const AffineExponential p;
    const double z = std::sqrt(3.0) * p.c() / std::sqrt(n);
    return p.u(t, x) * (std::exp((p.c() * p.mu - p.s) / n) * std::sinh(z) / z - 1.0);
}

}  // namespace oracle
