#pragma once

// Ladder variables of the unscaled walk: the mean limiting overshoot rho,
// the harmonic function H, and the ladder-height renewal measure.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "crossing/errors.hpp"
#include "crossing/model.hpp"
#include "crossing/rng.hpp"
#include "crossing/stats.hpp"

namespace crossing {

inline constexpr std::int64_t default_ladder_cap = 1'000'000;

struct LadderSample {
    std::int64_t epoch = 0;  ///< T_x
    double height = 0.0;     ///< x + S_{T_x} (0 when capped)
    bool capped = false;
};

/// T_x = inf{k >= 1 : x + S_k >= 0} for x <= 0, stopped after `cap` steps.
template <class Sampler, class Rng>
LadderSample sample_ladder(Sampler& sampler, double x, std::int64_t cap, Rng& rng) {
    if (x > 0.0) throw DomainError("ladder start x must be nonpositive");
    if (cap < 1) throw DomainError("ladder cap must be at least 1");
    double s = x;
    for (std::int64_t k = 1; k <= cap; ++k) {
        s += sampler(rng);
        if (s >= 0.0) return {k, s, false};
    }
    return {cap, 0.0, true};
}

/// Overshoot walk from x <= 0 with the cap applied per weak ascending
/// ladder epoch of S (steps since S last reached its running maximum), so a
/// walk spanning several ladder epochs is capped on the same terms as a
/// single one. `ladder_epochs` receives the number of epochs begun.
template <class Sampler, class Rng>
LadderSample sample_overshoot(Sampler& sampler, double x, std::int64_t cap, Rng& rng, std::uint64_t& ladder_epochs) {
    if (x > 0.0) throw DomainError("ladder start x must be nonpositive");
    if (cap < 1) throw DomainError("ladder cap must be at least 1");
    double s = 0.0, top = 0.0;
    std::int64_t since = 0;
    ladder_epochs = 1;
    for (std::int64_t k = 1;; ++k) {
        s += sampler(rng);
        if (x + s >= 0.0) return {k, x + s, false};
        if (s >= top) {
            top = s;
            since = 0;
            ++ladder_epochs;
        } else if (++since >= cap) {
            return {k, 0.0, true};
        }
    }
}

namespace detail {

// Runs fn(sampler) with a concrete sampler for either a catalogue
// distribution or a bare sampler object (e.g. ConstantSampler).
template <class Law, class Fn>
decltype(auto) with_law(const Law& law, Fn&& fn) {
    if constexpr (std::is_same_v<Law, IncrementDistribution>) {
        return law.with_sampler(std::forward<Fn>(fn));
    } else {
        return fn(law);
    }
}

template <class Law>
std::string law_name(const Law& law) {
    if constexpr (std::is_same_v<Law, IncrementDistribution>) {
        return law.name();
    } else {
        return "custom";
    }
}

// Moments of ladder heights plus the capped count.
struct LadderMoments {
    MomentAccumulator<3> m;  // Y, Y^2, Y^3
    std::uint64_t capped = 0;
    std::uint64_t ladder_epochs = 0;

    void merge(const LadderMoments& o) {
        m.merge(o.m);
        capped += o.capped;
        ladder_epochs += o.ladder_epochs;
    }
};

}  // namespace detail

/// rho = E Y^2 / (2 E Y) with Y = S_{T_0}, plus the ladder moments it came
/// from.
struct OvershootConstants {
    double rho = 0.0;
    double rho_stderr = 0.0;  ///< delta method on (E Y, E Y^2)
    double EY = 0.0;
    double EY_stderr = 0.0;
    double EY2 = 0.0;
    double EY3 = 0.0;
    std::uint64_t epochs_used = 0;
    std::uint64_t capped = 0;
    std::int64_t cap = default_ladder_cap;
    std::uint64_t seed = 0;
    std::string distribution;

    double capped_fraction() const noexcept {
        const auto total = epochs_used + capped;
        return total ? static_cast<double>(capped) / static_cast<double>(total) : 0.0;
    }
};

inline OvershootConstants constants_from(const detail::LadderMoments& acc, std::int64_t cap, std::uint64_t seed) {
    OvershootConstants c;
    const auto& m = acc.m;
    c.EY = m.mean(0);
    c.EY2 = m.mean(1);
    c.EY3 = m.mean(2);
    c.EY_stderr = m.stderr_of_mean(0);
    c.rho = c.EY2 / (2.0 * c.EY);
    const double ga = -c.EY2 / (2.0 * c.EY * c.EY), gb = 1.0 / (2.0 * c.EY);
    const double var = ga * ga * m.covariance(0, 0) + 2.0 * ga * gb * m.covariance(0, 1) + gb * gb * m.covariance(1, 1);
    c.rho_stderr = m.count() > 0 ? std::sqrt(std::max(0.0, var) / static_cast<double>(m.count())) : 0.0;
    c.epochs_used = m.count();
    c.capped = acc.capped;
    c.cap = cap;
    c.seed = seed;
    return c;
}

/// Plug-in estimate of rho from `epochs` ladder epochs. Refuses when 0.1% or
/// more of them hit the cap.
template <class Law>
OvershootConstants estimate_rho(const Law& law, std::uint64_t epochs, std::int64_t cap, std::uint64_t master_seed,
                                const ParallelOptions& parallel = {}) {
    if constexpr (std::is_same_v<Law, IncrementDistribution>) law.require_non_lattice();
    if (epochs < 10'000) throw DomainError("estimate_rho needs at least 10^4 epochs");
    auto acc = detail::with_law(law, [&](auto proto) {
        return run_blocks<detail::LadderMoments>(epochs, parallel, [&](std::uint64_t begin, std::uint64_t end) {
            detail::LadderMoments a;
            auto sampler = proto;
            for (std::uint64_t i = begin; i < end; ++i) {
                auto rng = substream(master_seed, StreamDomain::ladder, i);
                const auto s = sample_ladder(sampler, 0.0, cap, rng);
                if (s.capped) {
                    ++a.capped;
                } else {
                    const double y = s.height;
                    a.m.add({y, y * y, y * y * y});
                }
            }
            return a;
        });
    });
    auto c = constants_from(acc, cap, master_seed);
    c.distribution = detail::law_name(law);
    if (c.capped_fraction() >= 1e-3) {
        throw NumericalRefusal("ladder cap " + std::to_string(cap) + " hit by " +
                               std::to_string(100.0 * c.capped_fraction()) + "% of epochs (limit 0.1%); raise the cap");
    }
    if (!(c.EY > 0.0)) throw NumericalRefusal("ladder heights have nonpositive mean");
    return c;
}

struct HEstimate {
    double x = 0.0;
    double value = 0.0;          ///< H(x)
    double stderr_mc = 0.0;      ///< of the overshoot mean only (0 for x >= 0)
    double rho_stderr = 0.0;     ///< carried from the constants
    double mean_overshoot = 0.0; ///< E[S_{T_x} + x]
    std::uint64_t capped = 0;
};

/// H(x) = x - rho for x >= 0 and E[S_{T_x} + x] - rho for x < 0.
template <class Law>
HEstimate estimate_H(const Law& law, double x, std::uint64_t epochs, std::int64_t cap, std::uint64_t master_seed,
                     const OvershootConstants& constants, const ParallelOptions& parallel = {}) {
    HEstimate h;
    h.x = x;
    h.rho_stderr = constants.rho_stderr;
    if (x >= 0.0) {
        h.value = x - constants.rho;
        h.mean_overshoot = x;
        return h;
    }
    if (epochs < 2) throw DomainError("estimate_H needs at least two epochs");
    auto acc = detail::with_law(law, [&](auto proto) {
        return run_blocks<detail::LadderMoments>(epochs, parallel, [&](std::uint64_t begin, std::uint64_t end) {
            detail::LadderMoments a;
            auto sampler = proto;
            std::uint64_t ladders = 0;
            for (std::uint64_t i = begin; i < end; ++i) {
                auto rng = substream(master_seed, StreamDomain::nested, i);
                const auto s = sample_overshoot(sampler, x, cap, rng, ladders);
                a.ladder_epochs += ladders;
                if (s.capped) {
                    ++a.capped;
                } else {
                    a.m.add({s.height, 0.0, 0.0});
                }
            }
            return a;
        });
    });
    if (static_cast<double>(acc.capped) >= 1e-3 * static_cast<double>(acc.ladder_epochs)) {
        throw NumericalRefusal("ladder cap hit in 0.1% or more of the ladder epochs of walks from x = " +
                               std::to_string(x) + "; raise the cap");
    }
    h.mean_overshoot = acc.m.mean(0);
    h.stderr_mc = acc.m.stderr_of_mean(0);
    h.value = h.mean_overshoot - constants.rho;
    h.capped = acc.capped;
    return h;
}

/// Uncapped ladder heights S_{T_0} kept in generation order.
struct LadderPool {
    std::vector<double> heights;
    std::uint64_t capped = 0;
};

template <class Law>
LadderPool ladder_pool(const Law& law, std::uint64_t size, std::int64_t cap, std::uint64_t master_seed,
                       const ParallelOptions& parallel = {}) {
    struct Chunk {
        std::vector<double> heights;
        std::uint64_t capped = 0;
        void merge(const Chunk& o) {
            heights.insert(heights.end(), o.heights.begin(), o.heights.end());
            capped += o.capped;
        }
    };
    auto chunk = detail::with_law(law, [&](auto proto) {
        return run_blocks<Chunk>(size, parallel, [&](std::uint64_t begin, std::uint64_t end) {
            Chunk c;
            c.heights.reserve(end - begin);
            auto sampler = proto;
            for (std::uint64_t i = begin; i < end; ++i) {
                auto rng = substream(master_seed, StreamDomain::ladder_pool, i);
                const auto s = sample_ladder(sampler, 0.0, cap, rng);
                if (s.capped) {
                    ++c.capped;
                } else {
                    c.heights.push_back(s.height);
                }
            }
            return c;
        });
    });
    return {std::move(chunk.heights), chunk.capped};
}

/// Leading tail term -E(Y + x)_+^2 / (2 (E Y)^2) of H as x -> -inf,
/// estimated from a ladder pool. Returns {value, stderr}.
inline std::pair<double, double> h_tail_leading(const LadderPool& pool, double x) {
    MomentAccumulator<2> acc;
    for (double y : pool.heights) {
        const double p = std::max(0.0, y + x);
        acc.add({y, p * p});
    }
    const double ey = acc.mean(0), q = acc.mean(1);
    const double value = -q / (2.0 * ey * ey);
    // delta method on (E Y, E (Y + x)_+^2)
    const double ga = q / (ey * ey * ey), gb = -1.0 / (2.0 * ey * ey);
    const double var = ga * ga * acc.covariance(0, 0) + 2 * ga * gb * acc.covariance(0, 1) + gb * gb * acc.covariance(1, 1);
    return {value, std::sqrt(std::max(0.0, var) / static_cast<double>(acc.count()))};
}

struct HarmonicPoint {
    double x = 0.0;
    double lhs = 0.0;         ///< H(x) from walks started at x
    double lhs_stderr = 0.0;
    double rhs = 0.0;         ///< E H(x + X) through the ladder-height pool
    double rhs_stderr = 0.0;
    double deviation = 0.0;   ///< |rhs - lhs|
    double combined_stderr = 0.0;
};

struct HarmonicReport {
    std::vector<HarmonicPoint> points;
    double rho = 0.0;  ///< the common rho subtracted from both sides
    double max_deviation = 0.0;
    /// max over x of deviation / combined stderr (0 when both are 0).
    double worst_ratio = 0.0;
};

/// Checks H(x) = E H(x + X) for x < 0.
///
/// The left side runs fresh walks from x. The right side draws X and, when
/// x + X < 0, builds the overshoot over level -(x + X) from ladder heights
/// resampled out of a shared pool (the walk's first passage over a positive
/// level happens at a ladder epoch). The pool is split into 16 groups, each
/// serving a disjoint share of the outer draws, so the spread of the group
/// means carries both the outer and the pool sampling error. Both sides
/// subtract the same rho, which therefore cancels.
template <class Law>
HarmonicReport check_H_harmonic(const Law& law, const std::vector<double>& xs, std::uint64_t epochs,
                                std::uint64_t master_seed, std::int64_t cap = default_ladder_cap,
                                const ParallelOptions& parallel = {}) {
    constexpr std::size_t groups = 16;
    for (double x : xs) {
        if (!(x < 0.0)) throw DomainError("H harmonicity is only claimed for x < 0");
    }
    if (epochs < 2 * groups) throw DomainError("check_H_harmonic needs at least 32 epochs");

    std::uint64_t key = master_seed;
    const std::uint64_t rho_seed = splitmix64(key), pool_seed = splitmix64(key);
    const auto constants = [&] {
        // rho only shifts both sides equally; a modest run is enough.
        return estimate_rho(law, std::max<std::uint64_t>(10'000, epochs / 10), cap, rho_seed, parallel);
    }();
    const LadderPool pool = ladder_pool(law, epochs, cap, pool_seed, parallel);
    if (pool.heights.size() < groups) throw NumericalRefusal("ladder pool too small");
    const std::size_t group_size = pool.heights.size() / groups;

    struct GroupAcc {
        std::array<ScalarAccumulator, groups> g;
        void merge(const GroupAcc& o) {
            for (std::size_t i = 0; i < groups; ++i) g[i].merge(o.g[i]);
        }
    };

    HarmonicReport report;
    report.rho = constants.rho;
    for (std::size_t ix = 0; ix < xs.size(); ++ix) {
        const double x = xs[ix];
        const std::uint64_t lhs_seed = splitmix64(key), rhs_seed = splitmix64(key);
        const auto lhs = estimate_H(law, x, epochs, cap, lhs_seed, constants, parallel);

        auto acc = detail::with_law(law, [&](auto proto) {
            return run_blocks<GroupAcc>(epochs, parallel, [&](std::uint64_t begin, std::uint64_t end) {
                GroupAcc a;
                auto sampler = proto;
                for (std::uint64_t j = begin; j < end; ++j) {
                    auto rng = substream(rhs_seed, StreamDomain::nested, j);
                    const std::size_t g = j % groups;
                    const double* heights = pool.heights.data() + g * group_size;
                    const double z = x + sampler(rng);
                    double overshoot;
                    if (z >= 0.0) {
                        overshoot = z;
                    } else {
                        const double level = -z;
                        double v = 0.0;
                        while (v < level) v += heights[rng() % group_size];
                        overshoot = v - level;
                    }
                    a.g[g].add({overshoot});
                }
                return a;
            });
        });

        ScalarAccumulator means;
        double weighted = 0.0, total = 0.0;
        for (const auto& g : acc.g) {
            means.add({g.mean()});
            weighted += g.mean() * static_cast<double>(g.count());
            total += static_cast<double>(g.count());
        }
        HarmonicPoint p;
        p.x = x;
        p.lhs = lhs.value;
        p.lhs_stderr = lhs.stderr_mc;
        p.rhs = weighted / total - constants.rho;
        p.rhs_stderr = means.stderr_of_mean();
        p.deviation = std::abs(p.rhs - p.lhs);
        p.combined_stderr = std::hypot(p.lhs_stderr, p.rhs_stderr);
        report.max_deviation = std::max(report.max_deviation, p.deviation);
        if (p.combined_stderr > 0.0) {
            report.worst_ratio = std::max(report.worst_ratio, p.deviation / p.combined_stderr);
        } else if (p.deviation > 0.0) {
            report.worst_ratio = std::numeric_limits<double>::infinity();
        }
        report.points.push_back(p);
    }
    return report;
}

struct RenewalEstimate {
    double lo = 0.0, hi = 0.0;
    McEstimate direct;          ///< counting renewals V_k in [lo, hi)
    double wald = 0.0;          ///< (E S_{T_{-hi}} - E S_{T_{-lo}}) / E Y
    double wald_stderr = 0.0;
    std::uint64_t capped = 0;   ///< replicates dropped for hitting the ladder cap
};

/// mu([lo, hi)) for the ladder-height renewal measure, two ways.
template <class Law>
RenewalEstimate renewal_measure(const Law& law, double lo, double hi, std::uint64_t replicates,
                                std::uint64_t master_seed, std::int64_t cap = default_ladder_cap,
                                const ParallelOptions& parallel = {}) {
    if (!(lo >= 0.0 && hi > lo) || !std::isfinite(hi)) throw DomainError("renewal window must be a bounded [lo, hi) with 0 <= lo < hi");
    if (replicates < 2) throw DomainError("renewal_measure needs at least two replicates");

    struct Acc {
        ScalarAccumulator value;
        std::uint64_t capped = 0;
        void merge(const Acc& o) {
            value.merge(o.value);
            capped += o.capped;
        }
    };

    std::uint64_t key = master_seed;
    const std::uint64_t direct_seed = splitmix64(key), hi_seed = splitmix64(key), lo_seed = splitmix64(key),
                        ey_seed = splitmix64(key);

    RenewalEstimate out;
    out.lo = lo;
    out.hi = hi;

    auto direct = detail::with_law(law, [&](auto proto) {
        return run_blocks<Acc>(replicates, parallel, [&](std::uint64_t begin, std::uint64_t end) {
            Acc a;
            auto sampler = proto;
            for (std::uint64_t i = begin; i < end; ++i) {
                auto rng = substream(direct_seed, StreamDomain::renewal, i);
                double v = 0.0, count = 0.0;
                bool capped = false;
                while (true) {
                    if (v >= lo && v < hi) count += 1.0;
                    if (v >= hi) break;
                    const auto s = sample_ladder(sampler, 0.0, cap, rng);
                    if (s.capped) {
                        capped = true;
                        break;
                    }
                    v += s.height;
                }
                if (capped) {
                    ++a.capped;
                } else {
                    a.value.add({count});
                }
            }
            return a;
        });
    });
    out.direct = to_estimate(direct.value, master_seed);
    out.capped = direct.capped;

    // S_{T_x} for x = -level: the walk's value at its first passage over level.
    auto passage = [&](double level, std::uint64_t seed) {
        return detail::with_law(law, [&](auto proto) {
            return run_blocks<Acc>(replicates, parallel, [&](std::uint64_t begin, std::uint64_t end) {
                Acc a;
                auto sampler = proto;
                for (std::uint64_t i = begin; i < end; ++i) {
                    auto rng = substream(seed, StreamDomain::renewal, i);
                    std::uint64_t ladders = 0;
                    const auto s = sample_overshoot(sampler, -level, cap, rng, ladders);
                    if (s.capped) {
                        ++a.capped;
                    } else {
                        a.value.add({s.height + level});
                    }
                }
                return a;
            });
        });
    };
    const auto at_hi = passage(hi, hi_seed);
    double num = at_hi.value.mean(), num_var = std::pow(at_hi.value.stderr_of_mean(), 2);
    out.capped += at_hi.capped;
    if (lo > 0.0) {
        const auto at_lo = passage(lo, lo_seed);
        num -= at_lo.value.mean();
        num_var += std::pow(at_lo.value.stderr_of_mean(), 2);
        out.capped += at_lo.capped;
    }
    const auto c = estimate_rho(law, std::max<std::uint64_t>(10'000, replicates), cap, ey_seed, parallel);
    out.wald = num / c.EY;
    const double rel = num_var / (num * num) + std::pow(c.EY_stderr / c.EY, 2);
    out.wald_stderr = std::abs(out.wald) * std::sqrt(rel);
    return out;
}

}  // namespace crossing
