#pragma once

// Random-walk first passage over sqrt(n) b(k/n), the Brownian-limit oracle,
// and the near-boundary visit counters.

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "crossing/errors.hpp"
#include "crossing/model.hpp"
#include "crossing/rng.hpp"
#include "crossing/stats.hpp"

namespace crossing {

struct WalkOptions {
    double t_max = 12.0;      ///< horizon the step cap is scaled by
    double cap_factor = 50.0; ///< step cap = ceil(cap_factor * n * t_max)

    std::int64_t step_cap(std::int64_t n) const {
        return static_cast<std::int64_t>(std::ceil(cap_factor * static_cast<double>(n) * t_max));
    }
};

/// Half-open gap interval [lo, hi) for the counts M_B = #{k <= n tau_n :
/// b_k - S_k in B}.
struct GapInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Which near-boundary counters to keep. Empty means none; the hot loop then
/// carries no extra work.
struct DiagnosticsSpec {
    std::vector<double> distances;       ///< d values for N_d
    std::vector<GapInterval> intervals;  ///< sets B for M_B (alpha = 1)
    bool proximity = false;              ///< sum of 1 / (1 + (b_k - S_k)^2)

    bool enabled() const noexcept { return !distances.empty() || !intervals.empty() || proximity; }
};

struct CrossingRecord {
    std::int64_t stop_index = 0;  ///< n tau_n
    double tau = 0.0;             ///< stop_index / n
    double terminal = 0.0;        ///< W_n(tau_n) = S_stop / sqrt(n)
    double overshoot = 0.0;       ///< R_n = S_stop - b_stop
    std::vector<std::int64_t> near_counts;      ///< N_d, one per requested d
    std::vector<std::int64_t> interval_counts;  ///< M_B, one per requested B
    double proximity_sum = 0.0;
};

/// The walk ran past its step cap without crossing. Raised instead of
/// returning a censored record.
class StepCapExceeded : public NumericalRefusal {
public:
    StepCapExceeded(std::int64_t cap, std::int64_t n)
        : NumericalRefusal("walk did not cross within the step cap " + std::to_string(cap) + " at n = " +
                           std::to_string(n) + "; raise t_max or cap_factor") {}
};

/// First passage of S_k over b_k = sqrt(n) b(k/n) for increments drawn by
/// `sampler`.
///
/// tau_n is defined through the piecewise-linear interpolant W_n, but since
/// b is compared only at grid times the stopping rule is exactly the discrete
/// one "S_k >= b_k": an interpolated crossing strictly between grid points
/// never stops the walk.
template <class Sampler, class Rng>
CrossingRecord simulate_crossing(std::int64_t n, Sampler& sampler, const Boundary& boundary, Rng& rng,
                                 const WalkOptions& options = {}, const DiagnosticsSpec* diagnostics = nullptr) {
    if (n < 1) throw DomainError("walk scale n must be at least 1");
    const double rn = std::sqrt(static_cast<double>(n));
    const double nd = static_cast<double>(n);
    const std::int64_t cap = options.step_cap(n);

    CrossingRecord rec;
    const bool diag = diagnostics != nullptr && diagnostics->enabled();
    if (diag) {
        rec.near_counts.assign(diagnostics->distances.size(), 0);
        rec.interval_counts.assign(diagnostics->intervals.size(), 0);
    }
    auto count_intervals = [&](double gap) {
        for (std::size_t i = 0; i < diagnostics->intervals.size(); ++i) {
            const auto& b = diagnostics->intervals[i];
            if (gap >= b.lo && gap < b.hi) ++rec.interval_counts[i];
        }
    };

    double s = 0.0;
    std::int64_t k = 0;
    double level = rn * boundary(0.0);
    while (s < level) {
        if (diag) {
            const double gap = level - s;
            for (std::size_t i = 0; i < diagnostics->distances.size(); ++i) {
                if (gap < diagnostics->distances[i]) ++rec.near_counts[i];
            }
            count_intervals(gap);
            if (diagnostics->proximity) rec.proximity_sum += 1.0 / (1.0 + gap * gap);
        }
        if (k >= cap) throw StepCapExceeded(cap, n);
        s += sampler(rng);
        ++k;
        level = rn * boundary(static_cast<double>(k) / nd);
    }
    if (diag) count_intervals(level - s);

    rec.stop_index = k;
    rec.tau = static_cast<double>(k) / nd;
    rec.terminal = s / rn;
    rec.overshoot = s - level;
    assert(rec.overshoot >= 0.0);
    return rec;
}

/// One path with the increments of `dist`, seeded directly by `path_seed`.
inline CrossingRecord simulate_crossing(std::int64_t n, const IncrementDistribution& dist, const Boundary& boundary,
                                        std::uint64_t path_seed, const WalkOptions& options = {},
                                        const DiagnosticsSpec* diagnostics = nullptr) {
    boundary.require_eventual_crossing();
    Xoshiro256pp rng{path_seed};
    return dist.with_sampler([&](auto sampler) {
        return simulate_crossing(n, sampler, boundary, rng, options, diagnostics);
    });
}

/// Shared driver: path p uses substream(master_seed, walk, p); `accumulate`
/// folds each record into a per-block accumulator of type Acc.
template <class Acc, class Accumulate>
Acc simulate_paths(std::int64_t n, const IncrementDistribution& dist, const Boundary& boundary,
                   std::uint64_t paths, std::uint64_t master_seed, Accumulate&& accumulate,
                   const WalkOptions& options = {}, const ParallelOptions& parallel = {},
                   const DiagnosticsSpec* diagnostics = nullptr) {
    boundary.require_eventual_crossing();
    return dist.with_sampler([&](auto proto) {
        return run_blocks<Acc>(paths, parallel, [&](std::uint64_t begin, std::uint64_t end) {
            Acc acc{};
            auto sampler = proto;
            for (std::uint64_t p = begin; p < end; ++p) {
                auto rng = substream(master_seed, StreamDomain::walk, p);
                accumulate(acc, simulate_crossing(n, sampler, boundary, rng, options, diagnostics));
            }
            return acc;
        });
    });
}

/// Monte Carlo mean of functional(record). A path hitting the step cap
/// aborts the whole estimate.
template <class Functional>
McEstimate mc_expectation(Functional&& functional, std::int64_t n, const IncrementDistribution& dist,
                          const Boundary& boundary, std::uint64_t paths, std::uint64_t master_seed,
                          const WalkOptions& options = {}, const ParallelOptions& parallel = {}) {
    if (paths < 2) throw DomainError("mc_expectation needs at least two paths");
    auto acc = simulate_paths<ScalarAccumulator>(
        n, dist, boundary, paths, master_seed,
        [&](ScalarAccumulator& a, const CrossingRecord& r) { a.add({functional(r)}); }, options, parallel);
    return to_estimate(acc, master_seed);
}

/// Several functionals of the same paths at once (component i of the array
/// returned by `functional`).
template <std::size_t K, class Functional>
MomentAccumulator<K> mc_moments(Functional&& functional, std::int64_t n, const IncrementDistribution& dist,
                                const Boundary& boundary, std::uint64_t paths, std::uint64_t master_seed,
                                const WalkOptions& options = {}, const ParallelOptions& parallel = {}) {
    return simulate_paths<MomentAccumulator<K>>(
        n, dist, boundary, paths, master_seed,
        [&](MomentAccumulator<K>& a, const CrossingRecord& r) { a.add(functional(r)); }, options, parallel);
}

// ---------------------------------------------------------------------------
// Brownian oracle
// ---------------------------------------------------------------------------

struct BrownianOptions {
    double dt = 1e-3;
    /// Stop observing at t_max; an uncrossed path is then scored as if it
    /// crossed at t_max (matching the PDE terminal row). Infinity means no
    /// horizon, in which case the path is capped at cap_time.
    double t_max = std::numeric_limits<double>::infinity();
    double cap_time = 600.0;
    int bisection_levels = 12;  ///< refinement of the crossing time inside a step
};

namespace detail {

// P(bridge from (t0, w0) to (t0 + h, w1) touches the line through (t0, b0),
// (t0 + h, b1)), both endpoints strictly below it.
inline double bridge_crossing_probability(double gap0, double gap1, double h) noexcept {
    if (gap0 <= 0.0 || gap1 <= 0.0) return 1.0;
    return std::exp(-2.0 * gap0 * gap1 / h);
}

struct BrownianStop {
    double tau;
    bool crossed;
    double integral;  ///< trapezoid integral of q along the path up to tau
};

// Simulates one Brownian path started at (0, 0). `q` (may be null) is
// integrated along the path.
template <class Rng>
BrownianStop brownian_path(const Boundary& boundary, const BrownianOptions& o, Rng& rng,
                           const std::function<double(double, double)>* q) {
    boost::random::normal_distribution<double> normal{0.0, 1.0};
    auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    const double sq = std::sqrt(o.dt);
    const double horizon = std::isfinite(o.t_max) ? o.t_max : o.cap_time;
    const auto steps = static_cast<std::int64_t>(std::ceil(horizon / o.dt - 1e-9));

    double t = 0.0, w = 0.0;
    double q0 = q ? (*q)(0.0, 0.0) : 0.0;
    double integral = 0.0;
    if (w >= boundary(0.0)) return {0.0, true, 0.0};
    for (std::int64_t i = 0; i < steps; ++i) {
        const double h = std::min(o.dt, horizon - t);
        const double t1 = t + h;
        const double w1 = w + (h == o.dt ? sq : std::sqrt(h)) * normal(rng);
        const double g0 = boundary(t) - w, g1 = boundary(t1) - w1;
        const double p = bridge_crossing_probability(g0, g1, h);
        if (p >= 1.0 || uniform() < p) {
            // Locate the crossing by bisection on the bridge, conditioning on
            // a crossing inside [a, c] at each level by rejection.
            double a = t, wa = w, c = t1, wc = w1;
            for (int level = 0; level < o.bisection_levels; ++level) {
                const double m = 0.5 * (a + c), hh = 0.5 * (c - a);
                double wm = 0.0, p1 = 0.0, p2 = 0.0;
                for (int attempt = 0; attempt < 1000; ++attempt) {
                    wm = 0.5 * (wa + wc) + std::sqrt(0.5 * hh) * normal(rng);
                    p1 = bridge_crossing_probability(boundary(a) - wa, boundary(m) - wm, hh);
                    p2 = bridge_crossing_probability(boundary(m) - wm, boundary(c) - wc, hh);
                    if (uniform() < 1.0 - (1.0 - p1) * (1.0 - p2)) break;
                }
                const double both = 1.0 - (1.0 - p1) * (1.0 - p2);
                if (uniform() * both < p1) {
                    c = m;
                    wc = wm;
                } else {
                    a = m;
                    wa = wm;
                }
            }
            const double tau = 0.5 * (a + c);
            if (q) {
                const double qa = (*q)(tau, boundary(tau));
                integral += 0.5 * (q0 + qa) * (tau - t);
            }
            return {tau, true, integral};
        }
        if (q) {
            const double q1 = (*q)(t1, w1);
            integral += 0.5 * (q0 + q1) * h;
            q0 = q1;
        }
        t = t1;
        w = w1;
    }
    if (!std::isfinite(o.t_max)) {
        throw NumericalRefusal("Brownian path did not cross before cap_time " + std::to_string(o.cap_time));
    }
    return {o.t_max, false, integral};
}

}  // namespace detail

/// E f(tau_0, W(tau_0)) = E f(tau_0, b(tau_0)) for Brownian motion from
/// (0, 0), by Euler steps with the Brownian-bridge crossing correction.
template <class F>
McEstimate brownian_oracle(F&& f, const Boundary& boundary, std::uint64_t paths, std::uint64_t master_seed,
                           const BrownianOptions& options = {}, const ParallelOptions& parallel = {}) {
    if (paths < 2) throw DomainError("brownian_oracle needs at least two paths");
    auto acc = run_blocks<ScalarAccumulator>(paths, parallel, [&](std::uint64_t begin, std::uint64_t end) {
        ScalarAccumulator a;
        for (std::uint64_t p = begin; p < end; ++p) {
            auto rng = substream(master_seed, StreamDomain::brownian, p);
            const auto stop = detail::brownian_path(boundary, options, rng, nullptr);
            a.add({f(stop.tau, boundary(stop.tau))});
        }
        return a;
    });
    return to_estimate(acc, master_seed);
}

/// E int_0^{tau_0 ^ t_max} q(t, W_t) dt along Brownian paths.
inline McEstimate brownian_path_integral(const std::function<double(double, double)>& q, const Boundary& boundary,
                                         std::uint64_t paths, std::uint64_t master_seed,
                                         const BrownianOptions& options = {}, const ParallelOptions& parallel = {}) {
    if (paths < 2) throw DomainError("brownian_path_integral needs at least two paths");
    auto acc = run_blocks<ScalarAccumulator>(paths, parallel, [&](std::uint64_t begin, std::uint64_t end) {
        ScalarAccumulator a;
        for (std::uint64_t p = begin; p < end; ++p) {
            auto rng = substream(master_seed, StreamDomain::brownian, p);
            a.add({detail::brownian_path(boundary, options, rng, &q).integral});
        }
        return a;
    });
    return to_estimate(acc, master_seed);
}

// ---------------------------------------------------------------------------
// Visit diagnostics
// ---------------------------------------------------------------------------

/// Means of N_d, M_B, 1{M_B >= 1} and the proximity sum over a record
/// stream. Mergeable, so it can be filled block-wise.
class VisitAccumulator {
public:
    VisitAccumulator() = default;
    explicit VisitAccumulator(const DiagnosticsSpec& spec)
        : near_(spec.distances.size()), interval_(spec.intervals.size()), hit_(spec.intervals.size()) {}

    void add(const CrossingRecord& r) {
        if (near_.empty() && interval_.empty()) {
            near_.resize(r.near_counts.size());
            interval_.resize(r.interval_counts.size());
            hit_.resize(r.interval_counts.size());
        }
        for (std::size_t i = 0; i < near_.size(); ++i) near_[i].add({static_cast<double>(r.near_counts[i])});
        for (std::size_t i = 0; i < interval_.size(); ++i) {
            interval_[i].add({static_cast<double>(r.interval_counts[i])});
            hit_[i].add({r.interval_counts[i] > 0 ? 1.0 : 0.0});
        }
        proximity_.add({r.proximity_sum});
        stop_.add({static_cast<double>(r.stop_index)});
    }

    void merge(const VisitAccumulator& o) {
        if (near_.empty() && interval_.empty() && proximity_.count() == 0) {
            *this = o;
            return;
        }
        for (std::size_t i = 0; i < near_.size() && i < o.near_.size(); ++i) near_[i].merge(o.near_[i]);
        for (std::size_t i = 0; i < interval_.size() && i < o.interval_.size(); ++i) {
            interval_[i].merge(o.interval_[i]);
            hit_[i].merge(o.hit_[i]);
        }
        proximity_.merge(o.proximity_);
        stop_.merge(o.stop_);
    }

    const std::vector<ScalarAccumulator>& near() const noexcept { return near_; }
    const std::vector<ScalarAccumulator>& interval() const noexcept { return interval_; }
    const std::vector<ScalarAccumulator>& hit() const noexcept { return hit_; }
    const ScalarAccumulator& proximity() const noexcept { return proximity_; }
    const ScalarAccumulator& stop_index() const noexcept { return stop_; }

private:
    std::vector<ScalarAccumulator> near_, interval_, hit_;
    ScalarAccumulator proximity_, stop_;
};

struct VisitSummary {
    std::vector<double> distances;
    std::vector<McEstimate> mean_near;          ///< E N_d
    std::vector<double> scaled_near;            ///< E N_d / (1 + d^2)
    std::vector<GapInterval> intervals;
    std::vector<McEstimate> mean_interval;      ///< E M_B
    std::vector<double> interval_hit;           ///< P(M_B >= 1)
    std::vector<double> interval_ratio;         ///< E M_B / (P(M_B >= 1) (1 + sup B^2))
    McEstimate proximity;                       ///< E sum 1 / (1 + (b_k - S_k)^2)
};

inline VisitSummary summarize(const VisitAccumulator& acc, const DiagnosticsSpec& spec, std::uint64_t seed = 0) {
    VisitSummary s;
    s.distances = spec.distances;
    s.intervals = spec.intervals;
    for (std::size_t i = 0; i < spec.distances.size(); ++i) {
        const double d = spec.distances[i];
        s.mean_near.push_back(to_estimate(acc.near()[i], seed));
        s.scaled_near.push_back(acc.near()[i].mean() / (1.0 + d * d));
    }
    for (std::size_t i = 0; i < spec.intervals.size(); ++i) {
        const double sup = spec.intervals[i].hi;
        const double hit = acc.hit()[i].mean();
        s.mean_interval.push_back(to_estimate(acc.interval()[i], seed));
        s.interval_hit.push_back(hit);
        s.interval_ratio.push_back(hit > 0.0 ? acc.interval()[i].mean() / (hit * (1.0 + sup * sup)) : 0.0);
    }
    s.proximity = to_estimate(acc.proximity(), seed);
    return s;
}

/// Visit statistics over an existing record stream.
inline VisitSummary visit_counts(const std::vector<CrossingRecord>& records, const DiagnosticsSpec& spec) {
    for (double d : spec.distances) {
        if (!(d > 0.0)) throw DomainError("visit distance d must be positive");
    }
    VisitAccumulator acc{spec};
    for (const auto& r : records) acc.add(r);
    return summarize(acc, spec);
}

/// Simulates paths with counters on and summarizes them without keeping the
/// records.
inline VisitSummary visit_counts(std::int64_t n, const IncrementDistribution& dist, const Boundary& boundary,
                                 const DiagnosticsSpec& spec, std::uint64_t paths, std::uint64_t master_seed,
                                 const WalkOptions& options = {}, const ParallelOptions& parallel = {}) {
    for (double d : spec.distances) {
        if (!(d > 0.0)) throw DomainError("visit distance d must be positive");
    }
    auto acc = simulate_paths<VisitAccumulator>(
        n, dist, boundary, paths, master_seed, [](VisitAccumulator& a, const CrossingRecord& r) { a.add(r); },
        options, parallel, &spec);
    return summarize(acc, spec, master_seed);
}

// ---------------------------------------------------------------------------
// Joint overshoot statistics
// ---------------------------------------------------------------------------

struct OvershootStats {
    McEstimate mean_overshoot;      ///< E R_n
    double var_overshoot = 0.0;     ///< Var R_n
    double corr_overshoot_tau = 0.0;
    McEstimate mean_tau;
    McEstimate overshoot_delta;     ///< E[R_n Delta(tau_n); tau_n within the trace window]
    double excluded_mass = 0.0;     ///< P(tau_n beyond the trace window)
    McEstimate overshoot_square;    ///< E R_n^2
};

/// (R, tau, R Delta(tau) 1{in window}, 1{out of window}, R^2) for one record.
inline std::array<double, 5> overshoot_sample(const CrossingRecord& r, const TimeTrace& delta) {
    const bool inside = r.tau >= delta.t_min() && r.tau <= delta.t_max();
    const double rd = inside ? r.overshoot * delta(r.tau) : 0.0;
    return {r.overshoot, r.tau, rd, inside ? 0.0 : 1.0, r.overshoot * r.overshoot};
}

inline OvershootStats overshoot_stats(const MomentAccumulator<5>& acc, std::uint64_t seed) {
    auto est = [&](std::size_t i) { return McEstimate{acc.mean(i), acc.stderr_of_mean(i), acc.count(), seed}; };
    OvershootStats s;
    s.mean_overshoot = est(0);
    s.var_overshoot = acc.variance(0);
    s.corr_overshoot_tau = acc.correlation(0, 1);
    s.mean_tau = est(1);
    s.overshoot_delta = est(2);
    s.excluded_mass = acc.mean(3);
    s.overshoot_square = est(4);
    return s;
}

inline OvershootStats joint_overshoot_stats(std::int64_t n, const IncrementDistribution& dist,
                                            const Boundary& boundary, const TimeTrace& delta, std::uint64_t paths,
                                            std::uint64_t master_seed, const WalkOptions& options = {},
                                            const ParallelOptions& parallel = {}) {
    if (paths < 2) throw DomainError("joint_overshoot_stats needs at least two paths");
    auto acc = mc_moments<5>([&](const CrossingRecord& r) { return overshoot_sample(r, delta); }, n, dist,
                             boundary, paths, master_seed, options, parallel);
    return overshoot_stats(acc, master_seed);
}

/// The records of paths [0, count) under `master_seed`: the same paths an
/// estimate with that seed starts from.
inline std::vector<CrossingRecord> collect_records(std::int64_t n, const IncrementDistribution& dist,
                                                   const Boundary& boundary, std::uint64_t count,
                                                   std::uint64_t master_seed, const WalkOptions& options = {},
                                                   const ParallelOptions& parallel = {},
                                                   const DiagnosticsSpec* diagnostics = nullptr) {
    struct Sink {
        std::vector<CrossingRecord> records;
        void merge(const Sink& o) { records.insert(records.end(), o.records.begin(), o.records.end()); }
    };
    auto sink = simulate_paths<Sink>(
        n, dist, boundary, count, master_seed, [](Sink& s, const CrossingRecord& r) { s.records.push_back(r); },
        options, parallel, diagnostics);
    return std::move(sink.records);
}

/// Streams records as CSV rows: path_id, stop_index, tau, terminal, overshoot.
inline void write_records_csv(std::ostream& os, const std::vector<CrossingRecord>& records,
                              std::uint64_t first_path_id = 0) {
    os << "path_id,stop_index,tau,terminal,overshoot\n";
    char buf[160];
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        std::snprintf(buf, sizeof buf, "%llu,%lld,%.12g,%.12g,%.12g\n",
                      static_cast<unsigned long long>(first_path_id + i), static_cast<long long>(r.stop_index),
                      r.tau, r.terminal, r.overshoot);
        os << buf;
    }
}

}  // namespace crossing
