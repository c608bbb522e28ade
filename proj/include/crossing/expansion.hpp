#pragma once

// The corrected approximation
//
//     E f(tau_n, W_n(tau_n)) ~ u(0,0) + (EX^3 / 6 sqrt n) w(0,0) + (rho / sqrt n) g(0,0),
//
// with w(0,0) = E int_0^tau0 u_xxx(t, W_t) dt and g(0,0) = E Delta(tau0), plus
// the one-step error e_n of the extended value function and the exact
// discrete recursion for u_n.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crossing/errors.hpp"
#include "crossing/fluctuation.hpp"
#include "crossing/hash.hpp"
#include "crossing/model.hpp"
#include "crossing/pde.hpp"
#include "crossing/quadrature.hpp"
#include "crossing/stats.hpp"
#include "crossing/walk.hpp"

namespace crossing {

inline std::uint64_t content_hash(const OvershootConstants& c) {
    Hasher h;
    h.add(std::string_view{"constants"}).add(std::string_view{c.distribution});
    h.add(c.rho).add(c.rho_stderr).add(c.EY).add(c.EY2).add(c.EY3);
    h.add(c.epochs_used).add(c.capped).add(c.cap).add(c.seed);
    return h.value();
}

struct Provenance {
    std::uint64_t problem = 0;    ///< boundary, payoff, distribution, grid
    std::uint64_t u = 0;
    std::uint64_t w = 0;
    std::uint64_t g = 0;
    std::uint64_t constants = 0;
    double tail_probability = 0.0;  ///< P(tau0 > t_max)
    double bias_u = 0.0;            ///< truncation bias bounds of the three solves
    double bias_w = 0.0;
    double bias_g = 0.0;
};

struct ExpansionReport {
    double leading = 0.0;         ///< u(0, 0)
    double skew_term = 0.0;       ///< EX^3 / 6 * w(0, 0)
    double overshoot_term = 0.0;  ///< rho * g(0, 0)
    double w00 = 0.0;
    double g00 = 0.0;
    double m3 = 0.0;
    double rho = 0.0;
    double rho_stderr = 0.0;
    Provenance provenance;

    std::shared_ptr<const Field> u;
    std::shared_ptr<const Field> u_xxx;
    std::shared_ptr<const Field> w;
    std::shared_ptr<const Field> g;
    TimeTrace delta;

    double correction() const noexcept { return skew_term + overshoot_term; }
    double corrected(double n) const noexcept { return leading + correction() / std::sqrt(n); }
};

namespace detail {

inline void check_assembly_inputs(const Boundary& boundary, const IncrementDistribution& dist,
                                  const std::optional<OvershootConstants>& constants) {
    dist.require_non_lattice();
    boundary.validate();
    boundary.require_eventual_crossing();
    if (!constants) throw DomainError("overshoot constants are required to assemble the expansion");
    if (constants->distribution != dist.name()) {
        throw DomainError("overshoot constants were estimated for '" + constants->distribution + "', not '" +
                          dist.name() + "'");
    }
}

}  // namespace detail

/// Combines already solved u, w and g fields with EX^3 and rho.
inline ExpansionReport assemble_from_fields(const Boundary& boundary, const Payoff& payoff,
                                            const IncrementDistribution& dist, const GridConfig& grid,
                                            const OvershootConstants& constants, std::shared_ptr<const Field> u,
                                            std::shared_ptr<const Field> w, std::shared_ptr<const Field> g,
                                            std::shared_ptr<const Field> uxxx = nullptr) {
    ExpansionReport r;
    Hasher problem;
    problem.add(content_hash(boundary)).add(content_hash(payoff)).add(content_hash(dist)).add(content_hash(grid));
    r.provenance.problem = problem.value();
    r.provenance.constants = content_hash(constants);
    r.delta = compute_delta(*u, payoff);
    if (!uxxx) uxxx = std::make_shared<const Field>(third_derivative(*u));

    r.leading = u->value(0.0, 0.0);
    r.w00 = w->value(0.0, 0.0);
    r.g00 = g->value(0.0, 0.0);
    r.m3 = dist.moments().m3;
    r.rho = constants.rho;
    r.rho_stderr = constants.rho_stderr;
    r.skew_term = r.m3 == 0.0 ? 0.0 : r.m3 / 6.0 * r.w00;
    r.overshoot_term = r.rho * r.g00;

    r.provenance.u = content_hash(*u);
    r.provenance.w = content_hash(*w);
    r.provenance.g = content_hash(*g);
    r.provenance.tail_probability = u->metadata().tail_probability;
    r.provenance.bias_u = u->metadata().truncation_bias_bound;
    r.provenance.bias_w = w->metadata().truncation_bias_bound;
    r.provenance.bias_g = g->metadata().truncation_bias_bound;
    r.u = std::move(u);
    r.u_xxx = std::move(uxxx);
    r.w = std::move(w);
    r.g = std::move(g);
    return r;
}

/// The three solved fields behind one expansion.
struct ExpansionFields {
    std::shared_ptr<const Field> u;
    std::shared_ptr<const Field> u_xxx;
    std::shared_ptr<const Field> w;
    std::shared_ptr<const Field> g;
};

/// Solves u, then w from u_xxx and g from Delta. Law-free.
inline ExpansionFields solve_fields(const Boundary& boundary, const Payoff& payoff, const GridConfig& grid) {
    boundary.validate();
    ExpansionFields f;
    SolveOptions uo;
    uo.source_hash = content_hash(payoff);
    f.u = std::make_shared<const Field>(solve_value(boundary, boundary_data(payoff, boundary), grid, uo));
    const double tail = f.u->metadata().tail_probability;
    const TimeTrace delta = compute_delta(*f.u, payoff);

    f.u_xxx = std::make_shared<const Field>(third_derivative(*f.u));
    SolveOptions wo;
    wo.tail_probability = tail;
    wo.source_hash = content_hash(*f.u_xxx);
    f.w = std::make_shared<const Field>(solve_running_cost(boundary, *f.u_xxx, grid, wo));

    SolveOptions go;
    go.tail_probability = tail;
    go.kind = "g";
    Hasher dh;
    dh.add(std::span<const double>{delta.values()});
    go.source_hash = dh.value();
    f.g = std::make_shared<const Field>(solve_value(boundary, [delta](double t) { return delta(t); }, grid, go));
    return f;
}

/// Runs the three solves and combines them with EX^3 and rho.
inline ExpansionReport assemble(const Boundary& boundary, const Payoff& payoff, const IncrementDistribution& dist,
                                const GridConfig& grid, const std::optional<OvershootConstants>& constants) {
    detail::check_assembly_inputs(boundary, dist, constants);
    auto f = solve_fields(boundary, payoff, grid);
    return assemble_from_fields(boundary, payoff, dist, grid, *constants, std::move(f.u), std::move(f.w),
                                std::move(f.g), std::move(f.u_xxx));
}

// ---------------------------------------------------------------------------
// e_n and the extended value function
// ---------------------------------------------------------------------------

/// u-bar: u below the boundary, f0 on and above it, together with u_xxx
/// below the boundary.
class ExtendedValue {
public:
    using Fn = std::function<double(double, double)>;

    ExtendedValue(Boundary boundary, Fn below, Fn above, Fn third)
        : boundary_(std::move(boundary)), below_(std::move(below)), above_(std::move(above)), third_(std::move(third)) {}

    /// From the solved fields of an expansion report.
    static ExtendedValue from_report(const ExpansionReport& r, const Payoff& payoff) {
        const Boundary& b = r.u->boundary();
        auto u = r.u;
        auto uxxx = r.u_xxx;
        const SplitPayoff split = split_payoff(payoff, b, r.delta);
        return ExtendedValue{b, [u](double t, double x) { return u->value(t, x); },
                             [split](double t, double x) { return split.f0(t, x); },
                             [uxxx](double t, double x) { return uxxx->value(t, x); }};
    }

    double operator()(double t, double x) const { return x < boundary_(t) ? below_(t, x) : above_(t, x); }
    double third(double t, double x) const { return third_(t, x); }
    const Boundary& boundary() const noexcept { return boundary_; }

private:
    Boundary boundary_;
    Fn below_, above_, third_;
};

struct Probe {
    double t = 0.0;
    double x = 0.0;
};

struct EnRow {
    double t = 0.0, x = 0.0;
    std::int64_t n = 0;
    double e_n = 0.0;
    double predicted = 0.0;  ///< EX^3 u_xxx / (6 n sqrt n)
    double residual = 0.0;   ///< e_n - predicted
    double scaled = std::numeric_limits<double>::quiet_NaN();  ///< e_n 6 n sqrt n / EX^3 (m3 != 0)
    double u_xxx = 0.0;
    double envelope = 0.0;   ///< 1/n^2 + (1/n) / (1 + n (b - x)^2)
};

/// e_n(t, x) = E u-bar(t + 1/n, x + X / sqrt n) - u-bar(t, x) by Gauss
/// quadrature against the increment law.
inline std::vector<EnRow> e_n_diagnostic(const ExtendedValue& ubar, const IncrementDistribution& dist, std::int64_t n,
                                         const std::vector<Probe>& probes, int nodes = 64) {
    dist.require_non_lattice();
    if (n < 1) throw DomainError("n must be at least 1");
    const auto rule = increment_rule(dist, nodes);
    const double m3 = dist.moments().m3;
    const double nd = static_cast<double>(n), rn = std::sqrt(nd);
    std::vector<EnRow> rows;
    for (const auto& p : probes) {
        const double gap = ubar.boundary()(p.t) - p.x;
        if (!(gap > 0.0)) throw DomainError("e_n probe lies on or above the boundary");
        if (nd * gap * gap < 1.0) throw DomainError("e_n probe too close to the boundary (n (b - x)^2 < 1)");
        const double base = ubar(p.t, p.x);
        // Neumaier-compensated sum of w_i (u-bar_i - base)
        double sum = 0.0, comp = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double term = rule.weights[i] * (ubar(p.t + 1.0 / nd, p.x + rule.nodes[i] / rn) - base);
            const double s = sum + term;
            comp += std::abs(sum) >= std::abs(term) ? (sum - s) + term : (term - s) + sum;
            sum = s;
        }
        EnRow row;
        row.t = p.t;
        row.x = p.x;
        row.n = n;
        row.e_n = sum + comp;
        row.u_xxx = ubar.third(p.t, p.x);
        row.predicted = m3 * row.u_xxx / (6.0 * nd * rn);
        row.residual = row.e_n - row.predicted;
        if (m3 != 0.0) row.scaled = row.e_n * 6.0 * nd * rn / m3;
        row.envelope = 1.0 / (nd * nd) + (1.0 / nd) / (1.0 + nd * gap * gap);
        rows.push_back(row);
    }
    return rows;
}

/// Combines e_n tables computed from a solve and from its 2x refinement,
/// cancelling the O(h^2) error of the second-order scheme row by row.
inline std::vector<EnRow> richardson(const std::vector<EnRow>& coarse, const std::vector<EnRow>& fine) {
    if (coarse.size() != fine.size()) throw DomainError("richardson needs matching e_n tables");
    std::vector<EnRow> out = fine;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& r = out[i];
        const auto& c = coarse[i];
        if (r.n != c.n || r.t != c.t || r.x != c.x) throw DomainError("richardson needs matching e_n probes");
        r.e_n = (4.0 * fine[i].e_n - c.e_n) / 3.0;
        r.u_xxx = (4.0 * fine[i].u_xxx - c.u_xxx) / 3.0;
        const double nd = static_cast<double>(r.n);
        const double m3 = fine[i].predicted != 0.0 ? fine[i].predicted * 6.0 * nd * std::sqrt(nd) / fine[i].u_xxx : 0.0;
        r.predicted = m3 * r.u_xxx / (6.0 * nd * std::sqrt(nd));
        r.residual = r.e_n - r.predicted;
        if (m3 != 0.0) r.scaled = r.e_n * 6.0 * nd * std::sqrt(nd) / m3;
    }
    return out;
}

/// Least-squares slope of log|y| against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t m = std::min(x.size(), y.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double lx = std::log(x[i]), ly = std::log(std::abs(y[i]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double md = static_cast<double>(m);
    return (md * sxy - sx * sy) / (md * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Discrete recursion for u_n
// ---------------------------------------------------------------------------

struct ConvolutionOptions {
    double t_max = 20.0;          ///< horizon; the last row is f0(t_max, b(t_max))
    double y_max = 8.0;           ///< depth of the y grid below the boundary
    double h_factor = 1.0 / 16.0; ///< coarse spacing as a fraction of sigma = 1/sqrt(n)
    double width = 8.0;           ///< kernel half-width in sigmas
    int boundary_nodes = 32;      ///< Gauss-Legendre nodes for the region above the boundary
    bool richardson = true;       ///< also solve at h/2 and extrapolate
};

struct ConvolutionResult {
    double value = 0.0;        ///< u_n(0, 0)
    double coarse = 0.0;       ///< at spacing h
    double fine = 0.0;         ///< at spacing h/2 (NaN without Richardson)
    double error_bound = 0.0;  ///< |fine - coarse| / 3 (interpolation error estimate)
    std::int64_t steps = 0;
    int nodes = 0;
};

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// One backward sweep with linear interpolation on y_j = j h (node 0 holds
// the limit from below, u_n(t, b(t)-)).
inline double convolution_sweep(const Boundary& boundary, const std::function<double(double, double)>& f0,
                                std::int64_t n, double h, const ConvolutionOptions& o, std::int64_t& steps_out,
                                int& nodes_out) {
    const double sigma = 1.0 / std::sqrt(static_cast<double>(n));
    const int J = static_cast<int>(std::ceil(o.y_max / h));
    const int D = static_cast<int>(std::ceil(o.width * sigma / h)) + 1;
    const auto N = static_cast<std::int64_t>(std::ceil(o.t_max * static_cast<double>(n) - 1e-9));
    steps_out = N;
    nodes_out = J + 1;
    auto tk = [&](std::int64_t k) { return static_cast<double>(k) / static_cast<double>(n); };

    const auto gl = gauss_legendre(o.boundary_nodes);
    std::vector<double> U(J + 1, f0(tk(N), boundary(tk(N)))), next(J + 1);
    std::vector<double> pb(2 * D + 1), bb(2 * D + 1);

    for (std::int64_t k = N; k >= 1; --k) {
        const double t1 = tk(k), t0 = tk(k - 1);
        const double b1 = boundary(t1);
        const double db = b1 - boundary(t0);
        // y' = y + db - X / sqrt(n); segment [m h, (m+1) h] relative to node j
        for (int d = -D; d <= D; ++d) {
            const double a = (d * h - db) / sigma, c = ((d + 1) * h - db) / sigma;
            const double P = normal_cdf(c) - normal_cdf(a);
            const double Q = normal_pdf(a) - normal_pdf(c);
            const double B = (sigma / h) * (Q - a * P);
            pb[d + D] = P - B;
            bb[d + D] = B;
        }
        for (int j = 0; j <= J; ++j) {
            const double mu = j * h + db;
            double acc = 0.0;
            const int m_lo = std::max(0, j - D), m_hi = std::min(J - 1, j + D);
            for (int m = m_lo; m <= m_hi; ++m) acc += pb[m - j + D] * U[m] + bb[m - j + D] * U[m + 1];
            if (j + D >= J) acc += U[J] * (1.0 - normal_cdf((J * h - mu) / sigma));
            const double lo = mu - o.width * sigma;
            if (lo < 0.0) {
                // stopped region y' <= 0: f0 at x' = b(t1) - y'
                const double half = -0.5 * lo, mid = 0.5 * lo;
                double s = 0.0;
                for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                    const double y = mid + half * gl.nodes[i];
                    s += gl.weights[i] * f0(t1, b1 - y) * normal_pdf((y - mu) / sigma) / sigma;
                }
                acc += half * s;
            }
            next[j] = acc;
        }
        std::swap(U, next);
    }
    const double y0 = boundary(0.0);
    const double s = y0 / h;
    const int j = std::min(J - 1, static_cast<int>(s));
    const double frac = s - j;
    return (1.0 - frac) * U[j] + frac * U[j + 1];
}

}  // namespace detail

/// u_n(0, 0) = E f0(tau_n, W_n(tau_n)) by the backward recursion
/// u_n(t, x) = E u_n(t + 1/n, x + X / sqrt n) below the boundary, u_n = f0 on
/// and above it. Normal increments only.
inline ConvolutionResult convolution_oracle(const Boundary& boundary, const std::function<double(double, double)>& f0,
                                            const IncrementDistribution& dist, std::int64_t n,
                                            const ConvolutionOptions& options = {}) {
    if (dist.kind() != DistributionKind::standard_normal) {
        throw NumericalRefusal("convolution oracle supports standard-normal increments only (got " + dist.name() + ")");
    }
    if (n < 1) throw DomainError("n must be at least 1");
    boundary.validate();
    if (!(options.h_factor > 0.0) || options.h_factor > 0.25) {
        throw NumericalRefusal("convolution grid under-resolved: spacing must be at most sigma / 4");
    }
    if (boundary.b0() >= options.y_max) throw ConfigError("/convolution/y_max", "must exceed b(0)");
    const double sigma = 1.0 / std::sqrt(static_cast<double>(n));
    ConvolutionResult r;
    r.coarse = detail::convolution_sweep(boundary, f0, n, options.h_factor * sigma, options, r.steps, r.nodes);
    if (options.richardson) {
        r.fine = detail::convolution_sweep(boundary, f0, n, 0.5 * options.h_factor * sigma, options, r.steps, r.nodes);
        r.value = (4.0 * r.fine - r.coarse) / 3.0;
        r.error_bound = std::abs(r.fine - r.coarse) / 3.0;
    } else {
        r.fine = std::numeric_limits<double>::quiet_NaN();
        r.value = r.coarse;
        r.error_bound = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

// ---------------------------------------------------------------------------
// Rate study
// ---------------------------------------------------------------------------

struct RateRow {
    std::int64_t n = 0;
    McEstimate mc;                          ///< E f(tau_n, W_n(tau_n))
    double uncorrected = 0.0;               ///< u(0, 0)
    double corrected = 0.0;
    double scaled_resid_corrected = 0.0;    ///< sqrt n |mc - corrected|
    double scaled_resid_uncorrected = 0.0;  ///< sqrt n |mc - u(0,0)|
    double scaled_stderr = 0.0;             ///< sqrt n * mc stderr
    OvershootStats overshoot;               ///< from the same paths
};

struct TrendVerdict {
    double kendall_tau = 0.0;
    std::size_t signal_points = 0;  ///< rows whose corrected residual exceeds 3 stderr
    bool inconclusive = false;
    bool pass = false;
};

struct RateStudy {
    std::vector<RateRow> rows;
    TrendVerdict trend;
    std::uint64_t paths = 0;
    std::uint64_t seed = 0;
};

/// "Decreasing" as Kendall tau of sqrt(n) |mc - corrected| against n being
/// <= 0 over the rows where the residual is signal (> 3 stderr); with fewer
/// than two such rows the verdict is an inconclusive pass.
inline TrendVerdict trend_verdict(const std::vector<RateRow>& rows) {
    std::vector<double> ns, rs;
    for (const auto& r : rows) {
        if (r.scaled_resid_corrected > 3.0 * r.scaled_stderr) {
            ns.push_back(static_cast<double>(r.n));
            rs.push_back(r.scaled_resid_corrected);
        }
    }
    TrendVerdict v;
    v.signal_points = ns.size();
    if (ns.size() < 2) {
        v.inconclusive = true;
        v.pass = true;
        return v;
    }
    v.kendall_tau = kendall_tau(ns, rs);
    v.pass = v.kendall_tau <= 0.0;
    return v;
}

/// Seed of the n-th row: distinct counter streams per n under one master seed.
inline std::uint64_t rate_seed(std::uint64_t master_seed, std::int64_t n) {
    std::uint64_t key = master_seed ^ (static_cast<std::uint64_t>(n) * 0x9e3779b97f4a7c15ULL);
    return splitmix64(key);
}

/// One row of the rate study: paths at a single n seeded with `seed`.
inline RateRow rate_row(const Boundary& boundary, const Payoff& payoff, const IncrementDistribution& dist,
                        const ExpansionReport& report, std::int64_t n, std::uint64_t paths, std::uint64_t seed,
                        const WalkOptions& walk = {}, const ParallelOptions& parallel = {}) {
    dist.require_non_lattice();
    const TimeTrace& delta = report.delta;
    auto acc = mc_moments<6>(
        [&](const CrossingRecord& r) {
            const auto o = overshoot_sample(r, delta);
            return std::array<double, 6>{payoff.value(r.tau, r.terminal), o[0], o[1], o[2], o[3], o[4]};
        },
        n, dist, boundary, paths, seed, walk, parallel);
    RateRow row;
    row.n = n;
    row.mc = {acc.mean(0), acc.stderr_of_mean(0), acc.count(), seed};
    const double rn = std::sqrt(static_cast<double>(n));
    row.uncorrected = report.leading;
    row.corrected = report.corrected(static_cast<double>(n));
    row.scaled_resid_corrected = rn * std::abs(row.mc.mean - row.corrected);
    row.scaled_resid_uncorrected = rn * std::abs(row.mc.mean - row.uncorrected);
    row.scaled_stderr = rn * row.mc.std_error;
    auto est = [&](std::size_t i) { return McEstimate{acc.mean(i), acc.stderr_of_mean(i), acc.count(), seed}; };
    row.overshoot.mean_overshoot = est(1);
    row.overshoot.var_overshoot = acc.variance(1);
    row.overshoot.corr_overshoot_tau = acc.correlation(1, 2);
    row.overshoot.mean_tau = est(2);
    row.overshoot.overshoot_delta = est(3);
    row.overshoot.excluded_mass = acc.mean(4);
    row.overshoot.overshoot_square = est(5);
    return row;
}

inline RateStudy rate_study(const Boundary& boundary, const Payoff& payoff, const IncrementDistribution& dist,
                            const ExpansionReport& report, const std::vector<std::int64_t>& n_list,
                            std::uint64_t paths, std::uint64_t master_seed, const WalkOptions& walk = {},
                            const ParallelOptions& parallel = {}) {
    dist.require_non_lattice();
    if (n_list.size() < 3) throw DomainError("rate study needs at least three n values");
    for (std::size_t i = 1; i < n_list.size(); ++i) {
        if (!(n_list[i] > n_list[i - 1])) throw DomainError("rate study n list must be increasing");
    }
    RateStudy study;
    study.paths = paths;
    study.seed = master_seed;
    for (const auto n : n_list) {
        study.rows.push_back(
            rate_row(boundary, payoff, dist, report, n, paths, rate_seed(master_seed, n), walk, parallel));
    }
    study.trend = trend_verdict(study.rows);
    return study;
}

}  // namespace crossing
