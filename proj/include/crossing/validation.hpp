#pragma once

// The acceptance suite. Each criterion returns a verdict, a one-line detail
// and a JSON artifact holding every number the verdict was computed from;
// artifacts carry no timings, so reruns can be compared byte for byte.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "crossing/errors.hpp"
#include "crossing/expansion.hpp"
#include "crossing/fluctuation.hpp"
#include "crossing/hash.hpp"
#include "crossing/io.hpp"
#include "crossing/model.hpp"
#include "crossing/pde.hpp"
#include "crossing/report.hpp"
#include "crossing/walk.hpp"

namespace crossing {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
    Json artifact;
    double seconds = 0.0;
};

struct ValidationOptions {
    std::uint64_t master_seed = 20'240'601;
    ParallelOptions parallel;
    /// Multiplies every path and epoch budget; 1 is the full suite.
    double budget = 1.0;
    /// Runtime limits are only enforced at full budget.
    bool enforce_runtime = true;
};

inline constexpr int criterion_count = 9;

inline const char* criterion_title(int id);

inline CriterionResult make_result(int id) {
    CriterionResult r;
    r.id = id;
    r.title = criterion_title(id);
    return r;
}

inline const char* criterion_title(int id) {
    switch (id) {
        case 1: return "closed-form leading term";
        case 2: return "overshoot constants";
        case 3: return "H-harmonicity";
        case 4: return "corrected rate trend";
        case 5: return "overshoot-Delta consistency";
        case 6: return "convolution oracle vs walk";
        case 7: return "near-boundary visit bounds";
        case 8: return "e_n diagnostic";
        case 9: return "determinism across threads";
    }
    return "unknown";
}

/// b(t) = 1 - t/2, f = exp(-t/2).
struct StandardProblem {
    Boundary boundary = Boundary::affine(1.0, -0.5);
    Payoff payoff = Payoff::time_exponential(1.0, 0.5);
};

/// E[exp(-tau/2); tau <= T] + exp(-T/2) P(tau > T) for Brownian first
/// passage over 1 - t/2: the exact value of the standard problem truncated
/// at horizon T, by quadrature of the inverse Gaussian density.
inline double standard_truncated_value(double T) {
    auto density = [](double t) {
        if (t <= 0.0) return 0.0;
        const double a = 1.0 - 0.5 * t;
        return std::exp(-a * a / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t * t * t);
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double hit = GK::integrate([&](double t) { return std::exp(-0.5 * t) * density(t); }, 0.0, T, 20, 1e-15);
    const double crossed = GK::integrate(density, 0.0, T, 20, 1e-15);
    return hit + std::exp(-0.5 * T) * (1.0 - crossed);
}

/// Shared, lazily computed inputs: criteria 4 and 5 use the same rate-study
/// rows and every criterion needing rho uses the same estimate, so running
/// the suite in one process never repeats the expensive parts.
class ValidationContext {
public:
    explicit ValidationContext(ValidationOptions options) : options_(std::move(options)) {}

    const ValidationOptions& options() const noexcept { return options_; }
    const StandardProblem& problem() const noexcept { return problem_; }

    std::uint64_t budget(std::uint64_t full, std::uint64_t minimum) const {
        const double scaled = std::round(static_cast<double>(full) * options_.budget);
        return std::max<std::uint64_t>(minimum, static_cast<std::uint64_t>(scaled));
    }

    /// Seed of one named experiment, derived from the master seed.
    std::uint64_t seed(std::string_view tag) const {
        Hasher h;
        h.add(options_.master_seed).add(tag);
        std::uint64_t s = h.value();
        return splitmix64(s);
    }

    /// rho for the expansion, from 10^6 ladder epochs at full budget.
    const OvershootConstants& constants(const IncrementDistribution& dist) {
        auto it = constants_.find(dist.name());
        if (it == constants_.end()) {
            auto c = estimate_rho(dist, budget(1'000'000, 100'000), default_ladder_cap, seed("rho/" + dist.name()),
                                  options_.parallel);
            it = constants_.emplace(dist.name(), c).first;
        }
        return it->second;
    }

    /// Expansion of the standard problem on the default grid refined by
    /// `factor`.
    const ExpansionReport& report(const IncrementDistribution& dist, int factor = 1) {
        const auto key = std::make_pair(dist.name(), factor);
        auto it = reports_.find(key);
        if (it == reports_.end()) {
            const GridConfig grid = factor == 1 ? GridConfig{} : GridConfig{}.refined(factor);
            auto r = assemble(problem_.boundary, problem_.payoff, dist, grid, constants(dist));
            it = reports_.emplace(key, std::move(r)).first;
        }
        return it->second;
    }

    /// Rate-study row of the standard problem at n with 10^7 paths at full
    /// budget; seeded per n so a row is the same whether it is computed
    /// alone or inside the full study.
    const RateRow& row(const IncrementDistribution& dist, std::int64_t n) {
        const auto key = std::make_pair(dist.name(), n);
        auto it = rows_.find(key);
        if (it == rows_.end()) {
            const auto& rep = report(dist);
            auto r = rate_row(problem_.boundary, problem_.payoff, dist, rep, n, rate_paths(),
                              rate_seed(seed("rates/" + dist.name()), n), WalkOptions{}, options_.parallel);
            it = rows_.emplace(key, r).first;
        }
        return it->second;
    }

    std::uint64_t rate_paths() const { return budget(10'000'000, 20'000); }

private:
    ValidationOptions options_;
    StandardProblem problem_;
    std::map<std::string, OvershootConstants> constants_;
    std::map<std::pair<std::string, int>, ExpansionReport> reports_;
    std::map<std::pair<std::string, std::int64_t>, RateRow> rows_;
};

namespace detail {

inline std::string sci(double v, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

inline Json estimate_json(const McEstimate& e) {
    return {{"mean", e.mean}, {"stderr", e.std_error}, {"paths", e.paths}};
}

inline Json row_json(const RateRow& r) {
    return {{"n", r.n},
            {"mc", r.mc.mean},
            {"mc_stderr", r.mc.std_error},
            {"uncorrected", r.uncorrected},
            {"corrected", r.corrected},
            {"scaled_resid_corrected", r.scaled_resid_corrected},
            {"scaled_resid_uncorrected", r.scaled_resid_uncorrected},
            {"scaled_stderr", r.scaled_stderr},
            {"mean_overshoot", estimate_json(r.overshoot.mean_overshoot)},
            {"overshoot_delta", estimate_json(r.overshoot.overshoot_delta)},
            {"corr_overshoot_tau", r.overshoot.corr_overshoot_tau},
            {"excluded_mass", r.overshoot.excluded_mass}};
}

inline Json constants_json(const OvershootConstants& c) {
    return {{"rho", c.rho}, {"rho_stderr", c.rho_stderr}, {"EY", c.EY}, {"epochs", c.epochs_used},
            {"capped", c.capped}, {"seed", c.seed}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// u(0,0) of the standard problem against exp(1/2 - sqrt(5/4)) and the
/// error ratio under x2 refinement. The ratio is measured against the exact
/// horizon-truncated value, since the solver's target at t_max = 12 is that
/// value and not the infinite-horizon one (they differ by 2.7e-5).
inline CriterionResult criterion_1(ValidationContext& ctx) {
    auto r = make_result(1);
    const auto& p = ctx.problem();
    GridConfig g;
    g.ny = 512;
    g.nt = 1024;
    g.t_max = 12.0;
    g.y_max = 8.0;
    SolveOptions o;
    o.source_hash = content_hash(p.payoff);
    const auto t0 = std::chrono::steady_clock::now();
    const double coarse = solve_value(p.boundary, boundary_data(p.payoff, p.boundary), g, o).value(0.0, 0.0);
    const double fine = solve_value(p.boundary, boundary_data(p.payoff, p.boundary), g.refined(2), o).value(0.0, 0.0);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const double closed = std::exp(0.5 - std::sqrt(1.25));
    const double truncated = standard_truncated_value(g.t_max);
    const double err = std::abs(coarse - closed);
    const double ratio = std::abs(coarse - truncated) / std::abs(fine - truncated);
    const bool in_time = !ctx.options().enforce_runtime || seconds < 30.0;
    r.pass = err < 2e-3 && ratio >= 3.0 && in_time;
    r.detail = "u(0,0)=" + fmt12(coarse) + " |err|=" + detail::sci(err) + " refinement ratio=" + detail::sci(ratio) +
               " (" + detail::sci(seconds, 3) + " s)";
    r.artifact = {{"closed_form", closed},       {"truncated_reference", truncated},
                  {"u_coarse", coarse},          {"u_fine", fine},
                  {"abs_error", err},            {"refinement_ratio", ratio}};
    return r;
}

/// rho: exactly 1/2 for the unit stub, 1 +- 0.01 for centered-exponential,
/// two disjoint standard-normal runs within 0.005.
inline CriterionResult criterion_2(ValidationContext& ctx) {
    auto r = make_result(2);
    const auto& par = ctx.options().parallel;
    const auto t0 = std::chrono::steady_clock::now();
    const auto stub = estimate_rho(ConstantSampler{1.0}, 10'000, 1'000, ctx.seed("c2/stub"), par);
    const auto expo = estimate_rho(IncrementDistribution::centered_exponential(), ctx.budget(1'000'000, 100'000),
                                   default_ladder_cap, ctx.seed("c2/exp"), par);
    const auto epochs = ctx.budget(10'000'000, 100'000);
    const auto normal = IncrementDistribution::standard_normal();
    const auto n1 = estimate_rho(normal, epochs, default_ladder_cap, ctx.seed("c2/normal/1"), par);
    const auto n2 = estimate_rho(normal, epochs, default_ladder_cap, ctx.seed("c2/normal/2"), par);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const bool stub_ok = stub.rho == 0.5;
    const bool exp_ok = std::abs(expo.rho - 1.0) <= 0.01;
    const bool normal_ok = std::abs(n1.rho - n2.rho) <= 0.005;
    const bool in_time = !ctx.options().enforce_runtime || seconds < 300.0;
    r.pass = stub_ok && exp_ok && normal_ok && in_time;
    r.detail = "stub=" + fmt12(stub.rho) + " exp=" + detail::sci(expo.rho, 5) + " normal=" + detail::sci(n1.rho, 5) +
               "/" + detail::sci(n2.rho, 5) + " (" + detail::sci(seconds, 3) + " s)";
    r.artifact = {{"stub", detail::constants_json(stub)},
                  {"centered_exponential", detail::constants_json(expo)},
                  {"standard_normal_1", detail::constants_json(n1)},
                  {"standard_normal_2", detail::constants_json(n2)}};
    return r;
}

/// H(x) = E H(x + X) at x in {-0.5, -1, -2}, standard normal, 10^6 epochs
/// per point.
inline CriterionResult criterion_3(ValidationContext& ctx) {
    auto r = make_result(3);
    const auto rep = check_H_harmonic(IncrementDistribution::standard_normal(), {-0.5, -1.0, -2.0},
                                      ctx.budget(1'000'000, 1'000), ctx.seed("c3"), default_ladder_cap,
                                      ctx.options().parallel);
    Json points = Json::array();
    bool ok = true;
    for (const auto& p : rep.points) {
        ok = ok && p.deviation < 3.0 * p.combined_stderr;
        points.push_back({{"x", p.x},
                          {"H", p.lhs},
                          {"H_stderr", p.lhs_stderr},
                          {"EH_shift", p.rhs},
                          {"EH_shift_stderr", p.rhs_stderr},
                          {"deviation", p.deviation},
                          {"combined_stderr", p.combined_stderr}});
    }
    r.pass = ok;
    r.detail = "worst |dev|/stderr=" + detail::sci(rep.worst_ratio, 3) + " (limit 3)";
    r.artifact = {{"rho", rep.rho}, {"points", points}};
    return r;
}

/// Rate trend for centered-exponential increments at n = 100, 400, 1600.
inline CriterionResult criterion_4(ValidationContext& ctx) {
    auto r = make_result(4);
    const auto dist = IncrementDistribution::centered_exponential();
    const auto t0 = std::chrono::steady_clock::now();
    const auto& rep = ctx.report(dist);
    std::vector<RateRow> rows;
    for (std::int64_t n : {100, 400, 1600}) rows.push_back(ctx.row(dist, n));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // (a) the correction helps wherever the uncorrected residual is signal
    bool a = true;
    for (const auto& row : rows) {
        if (row.scaled_resid_uncorrected > 3.0 * row.scaled_stderr) {
            a = a && row.scaled_resid_corrected < row.scaled_resid_uncorrected;
        }
    }
    // (b) sqrt(n)|mc - corrected| nonincreasing up to 3 combined stderr
    bool b = true;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double slack = 3.0 * std::hypot(rows[i - 1].scaled_stderr, rows[i].scaled_stderr);
        b = b && rows[i].scaled_resid_corrected <= rows[i - 1].scaled_resid_corrected + slack;
    }
    // (c) at n = 1600, sqrt(n)|mc - u| matches |skew + overshoot|
    const auto& last = rows.back();
    const double target = std::abs(rep.correction());
    const bool c = std::abs(last.scaled_resid_uncorrected - target) < 3.0 * last.scaled_stderr;
    const bool in_time = !ctx.options().enforce_runtime || seconds < 1800.0;
    r.pass = a && b && c && in_time;
    std::string scaled;
    for (const auto& row : rows) scaled += (scaled.empty() ? "" : "/") + detail::sci(row.scaled_resid_corrected, 3);
    r.detail = std::string("(a)") + (a ? "ok" : "FAIL") + " (b)" + (b ? "ok" : "FAIL") + " (c)" + (c ? "ok" : "FAIL") +
               " sqrt(n)|mc-corr|=" + scaled + " sqrt(1600)|mc-u|=" + detail::sci(last.scaled_resid_uncorrected, 4) +
               " vs " + detail::sci(target, 4) + " +- " + detail::sci(3.0 * last.scaled_stderr, 2);
    Json jrows = Json::array();
    for (const auto& row : rows) jrows.push_back(detail::row_json(row));
    r.artifact = {{"leading", rep.leading},
                  {"skew_term", rep.skew_term},
                  {"overshoot_term", rep.overshoot_term},
                  {"rho", rep.rho},
                  {"rows", jrows},
                  {"a", a},
                  {"b", b},
                  {"c", c}};
    return r;
}

/// E[R_n Delta(tau_n)] against rho g(0,0), E R_n against rho and
/// |corr(R_n, tau_n)| < 0.05 at n = 1600 for normal and exponential laws.
inline CriterionResult criterion_5(ValidationContext& ctx) {
    auto r = make_result(5);
    bool ok = true;
    std::string detail;
    Json laws = Json::object();
    for (const auto& dist : {IncrementDistribution::standard_normal(), IncrementDistribution::centered_exponential()}) {
        const auto& rep = ctx.report(dist);
        const auto& row = ctx.row(dist, 1600);
        const auto& o = row.overshoot;
        const double target_rd = rep.rho * rep.g00;
        const double se_rd = std::hypot(o.overshoot_delta.std_error, rep.rho_stderr * rep.g00);
        const double se_r = std::hypot(o.mean_overshoot.std_error, rep.rho_stderr);
        const bool rd_ok = std::abs(o.overshoot_delta.mean - target_rd) < 3.0 * se_rd;
        const bool r_ok = std::abs(o.mean_overshoot.mean - rep.rho) < 3.0 * se_r;
        const bool corr_ok = std::abs(o.corr_overshoot_tau) < 0.05;
        ok = ok && rd_ok && r_ok && corr_ok;
        detail += (detail.empty() ? "" : "; ") + dist.name() + ": E[R D]=" + detail::sci(o.overshoot_delta.mean, 5) +
                  " vs " + detail::sci(target_rd, 5) + " (" + detail::sci((o.overshoot_delta.mean - target_rd) / se_rd, 3) +
                  " se) E R=" + detail::sci(o.mean_overshoot.mean, 5) + " vs " + detail::sci(rep.rho, 5) + " (" +
                  detail::sci((o.mean_overshoot.mean - rep.rho) / se_r, 3) + " se) corr=" +
                  detail::sci(o.corr_overshoot_tau, 2);
        laws[dist.name()] = {{"rho", rep.rho},
                             {"rho_stderr", rep.rho_stderr},
                             {"g00", rep.g00},
                             {"row", detail::row_json(row)},
                             {"overshoot_delta_ok", rd_ok},
                             {"mean_overshoot_ok", r_ok},
                             {"correlation_ok", corr_ok}};
    }
    r.pass = ok;
    r.detail = detail;
    r.artifact = laws;
    return r;
}

/// Convolution recursion at n = 256 against walk MC of E f0(tau_n, W_n(tau_n)).
inline CriterionResult criterion_6(ValidationContext& ctx) {
    auto r = make_result(6);
    const auto& p = ctx.problem();
    const auto dist = IncrementDistribution::standard_normal();
    SolveOptions o;
    o.source_hash = content_hash(p.payoff);
    const Field u = solve_value(p.boundary, boundary_data(p.payoff, p.boundary), GridConfig{}, o);
    const auto split = split_payoff(p.payoff, p.boundary, compute_delta(u, p.payoff).with_tail(TimeTrace::Tail::hold_last));
    auto f0 = [&split](double t, double x) { return split.f0(t, x); };
    const std::int64_t n = 256;
    const auto conv = convolution_oracle(p.boundary, f0, dist, n);
    const auto mc = mc_expectation([&](const CrossingRecord& rec) { return split.f0(rec.tau, rec.terminal); }, n, dist,
                                   p.boundary, ctx.budget(10'000'000, 20'000), ctx.seed("c6"), WalkOptions{},
                                   ctx.options().parallel);
    const double z = (mc.mean - conv.value) / mc.std_error;
    r.pass = std::abs(z) < 3.0;
    r.detail = "convolution=" + fmt12(conv.value) + " (+-" + detail::sci(conv.error_bound, 2) + ") mc=" +
               detail::sci(mc.mean, 7) + " +- " + detail::sci(mc.std_error, 2) + " z=" + detail::sci(z, 3);
    r.artifact = {{"n", n},
                  {"convolution", conv.value},
                  {"convolution_coarse", conv.coarse},
                  {"convolution_fine", conv.fine},
                  {"convolution_error_bound", conv.error_bound},
                  {"mc", detail::estimate_json(mc)},
                  {"z", z}};
    return r;
}

/// E N_d / (1 + d^2) within a factor 4 across d at n = 100, 400; the
/// proximity sum over log n within a factor 2 across n = 100, 400, 1600.
inline CriterionResult criterion_7(ValidationContext& ctx) {
    auto r = make_result(7);
    const auto& p = ctx.problem();
    const auto dist = IncrementDistribution::standard_normal();
    const auto paths = ctx.budget(200'000, 2'000);
    DiagnosticsSpec spec;
    spec.distances = {0.5, 1.0, 2.0, 4.0};
    spec.proximity = true;

    bool shape_ok = true;
    std::vector<double> prox_ratio;
    Json per_n = Json::array();
    std::string detail;
    for (std::int64_t n : {100, 400, 1600}) {
        const auto v = visit_counts(n, dist, p.boundary, spec, paths, ctx.seed("c7/" + std::to_string(n)),
                                    WalkOptions{}, ctx.options().parallel);
        const auto [lo, hi] = std::minmax_element(v.scaled_near.begin(), v.scaled_near.end());
        const double spread = *hi / *lo;
        const double pr = v.proximity.mean / std::log(static_cast<double>(n));
        prox_ratio.push_back(pr);
        if (n <= 400) {
            shape_ok = shape_ok && spread < 4.0;
            detail += "n=" + std::to_string(n) + " spread=" + detail::sci(spread, 3) + " ";
        }
        per_n.push_back({{"n", n},
                         {"scaled_near", v.scaled_near},
                         {"near_spread", spread},
                         {"proximity", detail::estimate_json(v.proximity)},
                         {"proximity_over_log_n", pr}});
    }
    const auto [plo, phi] = std::minmax_element(prox_ratio.begin(), prox_ratio.end());
    const double prox_spread = *phi / *plo;
    const bool prox_ok = prox_spread < 2.0;
    r.pass = shape_ok && prox_ok;
    r.detail = detail + "proximity/log n spread=" + detail::sci(prox_spread, 3);
    r.artifact = {{"paths", paths}, {"per_n", per_n}, {"proximity_spread", prox_spread}};
    return r;
}

/// e_n at interior probes: scaled e_n against u_xxx for the exponential law,
/// and the log-log slope for symmetric laws. e_n is Richardson-extrapolated
/// across the default grid and its x2 refinement, since at n = 10^4 the raw
/// grid error is of the size of e_n itself.
inline CriterionResult criterion_8(ValidationContext& ctx) {
    auto r = make_result(8);
    const auto& p = ctx.problem();
    const std::vector<Probe> probes{{0.0, -1.0}, {0.0, -2.0}, {1.0, -1.0}};
    // The fields are law-free; the exponential report supplies them.
    const auto expo = IncrementDistribution::centered_exponential();
    const auto coarse = ExtendedValue::from_report(ctx.report(expo, 1), p.payoff);
    const auto fine = ExtendedValue::from_report(ctx.report(expo, 2), p.payoff);
    auto en = [&](const IncrementDistribution& d, std::int64_t n) {
        return richardson(e_n_diagnostic(coarse, d, n, probes), e_n_diagnostic(fine, d, n, probes));
    };

    bool skew_ok = true;
    Json skew = Json::array();
    std::string detail = "exp scaled/u_xxx:";
    for (const auto& row : en(expo, 10'000)) {
        const double rel = std::abs(row.scaled - row.u_xxx) / std::abs(row.u_xxx);
        skew_ok = skew_ok && rel < 0.10;
        detail += " " + detail::sci(row.scaled / row.u_xxx, 4);
        skew.push_back({{"t", row.t}, {"x", row.x}, {"scaled", row.scaled}, {"u_xxx", row.u_xxx}, {"rel_error", rel}});
    }

    bool slope_ok = true;
    Json slopes = Json::array();
    detail += "; slopes:";
    const std::vector<std::int64_t> ns{100, 1'000, 10'000};
    // Normal increments are left out: u-bar solves the heat equation below the
    // boundary, so their e_n is only an exponentially small boundary term.
    const auto bimodal = IncrementDistribution::gaussian_mixture(0.5, 0.6, 0.8);
    for (const auto& d : {IncrementDistribution::uniform_symmetric(), bimodal}) {
        std::vector<std::vector<EnRow>> tables;
        for (auto n : ns) tables.push_back(en(d, n));
        for (std::size_t k = 0; k < probes.size(); ++k) {
            std::vector<double> x, y;
            for (std::size_t i = 0; i < ns.size(); ++i) {
                x.push_back(static_cast<double>(ns[i]));
                y.push_back(std::abs(tables[i][k].e_n));
            }
            const double slope = loglog_slope(x, y);
            slope_ok = slope_ok && std::abs(slope + 2.0) <= 0.3;
            detail += " " + detail::sci(slope, 4);
            slopes.push_back({{"law", d.name()}, {"t", probes[k].t}, {"x", probes[k].x}, {"abs_e_n", y}, {"slope", slope}});
        }
    }
    r.pass = skew_ok && slope_ok;
    r.detail = detail;
    r.artifact = {{"skew", skew}, {"symmetric_slopes", slopes}};
    return r;
}

namespace detail {

inline CriterionResult run_criterion(ValidationContext& ctx, int id);

}  // namespace detail

/// Reruns criteria 1-8 at 1% budget with one and with four worker threads
/// and compares the serialized artifacts byte for byte.
inline CriterionResult criterion_9(ValidationContext& ctx) {
    auto r = make_result(9);
    std::vector<int> mismatched;
    Json hashes = Json::object();
    for (int id = 1; id <= 8; ++id) {
        std::string text[2];
        for (int k = 0; k < 2; ++k) {
            ValidationOptions o = ctx.options();
            o.budget = 0.01;
            o.enforce_runtime = false;
            o.parallel.threads = k == 0 ? 1 : 4;
            ValidationContext fresh{o};
            std::ostringstream os;
            write_json(os, detail::run_criterion(fresh, id).artifact);
            text[k] = os.str();
        }
        Hasher h;
        h.add(std::string_view{text[0]});
        hashes[std::to_string(id)] = hex(h.value());
        if (text[0] != text[1]) mismatched.push_back(id);
    }
    r.pass = mismatched.empty();
    if (r.pass) {
        r.detail = "criteria 1-8 artifacts identical with 1 and 4 threads";
    } else {
        r.detail = "artifacts differ for criteria";
        for (int id : mismatched) r.detail += " " + std::to_string(id);
    }
    r.artifact = {{"artifact_hashes", hashes}, {"mismatched", mismatched}};
    return r;
}

namespace detail {

inline CriterionResult run_criterion(ValidationContext& ctx, int id) {
    switch (id) {
        case 1: return criterion_1(ctx);
        case 2: return criterion_2(ctx);
        case 3: return criterion_3(ctx);
        case 4: return criterion_4(ctx);
        case 5: return criterion_5(ctx);
        case 6: return criterion_6(ctx);
        case 7: return criterion_7(ctx);
        case 8: return criterion_8(ctx);
        case 9: return criterion_9(ctx);
    }
    throw DomainError("no acceptance criterion " + std::to_string(id));
}

}  // namespace detail

/// Runs one criterion and times it. Library errors propagate.
inline CriterionResult run_criterion(ValidationContext& ctx, int id) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = detail::run_criterion(ctx, id);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline std::string format_result(const CriterionResult& r) {
    char head[96];
    std::snprintf(head, sizeof head, "criterion %d %-30s %s  ", r.id, ("[" + r.title + "]").c_str(),
                  r.pass ? "PASS" : "FAIL");
    return head + r.detail;
}

}  // namespace crossing
