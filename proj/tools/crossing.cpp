// crossing: command-line driver.
//
//   crossing <solve|simulate|rho|expand|rates|validate> --config FILE
//            [--out DIR] [--threads K] [--diagnostics]
//
// Exit status: 0 success, 1 acceptance failures or I/O errors, 2 bad config,
// 3 violated assumption, 4 numerical refusal.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "crossing/errors.hpp"
#include "crossing/expansion.hpp"
#include "crossing/fluctuation.hpp"
#include "crossing/io.hpp"
#include "crossing/report.hpp"
#include "crossing/validation.hpp"
#include "crossing/walk.hpp"

namespace {

using namespace crossing;

constexpr const char* out_env = "CROSSING_OUT_DIR";
constexpr std::uint64_t max_record_rows = 100'000;

struct Run {
    ExperimentConfig config;
    ParallelOptions parallel;
    bool diagnostics = false;
    std::filesystem::path out;

    bool wants(const char* format) const {
        for (const auto& f : config.formats) {
            if (f == format) return true;
        }
        return false;
    }
};

// Seeds of the stages, derived from the master seed so that stages never
// share random streams.
std::uint64_t stage_seed(const Run& run, std::string_view stage) {
    Hasher h;
    h.add(run.config.master_seed).add(stage);
    std::uint64_t s = h.value();
    return splitmix64(s);
}

ProvenanceHeader provenance(const Run& run) {
    auto h = config_provenance(run.config);
    h.add_hash("grid", content_hash(run.config.grid));
    return h;
}

/// Reuses <out>/rho.json when it was produced from the same law, seed, epoch
/// count and cap; otherwise estimates and writes it.
OvershootConstants constants_for(const Run& run, const OutputDirectory& dir) {
    const auto& c = run.config;
    const auto seed = stage_seed(run, "rho");
    const auto path = dir.path() / "rho.json";
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        Json j = Json::parse(in, nullptr, false);
        if (!j.is_discarded() && j.is_object()) {
            try {
                auto k = constants_from_json(j);
                if (k.distribution == c.distribution.name() && k.seed == seed && k.epochs_used + k.capped == c.epochs &&
                    k.cap == c.cap) {
                    return k;
                }
            } catch (const ConfigError&) {
            }
        }
    }
    auto k = estimate_rho(c.distribution, c.epochs, c.cap, seed, run.parallel);
    dir.write("rho.json", [&](std::ostream& os) { write_json(os, to_json(k)); });
    return k;
}

ExpansionReport expansion_for(const Run& run, const OutputDirectory& dir) {
    const auto& c = run.config;
    c.distribution.require_non_lattice();
    c.boundary.require_eventual_crossing();
    const auto k = constants_for(run, dir);
    const FieldCache cache{dir.path() / "cache"};
    return assemble_cached(cache, c.boundary, c.payoff, c.distribution, c.grid, k);
}

int cmd_solve(const Run& run) {
    const auto& c = run.config;
    c.boundary.require_eventual_crossing();
    const OutputDirectory dir{run.out};
    const FieldCache cache{dir.path() / "cache"};
    int hits = 0;
    const auto f = solve_fields_cached(cache, c.boundary, c.payoff, c.grid, &hits);
    auto prov = provenance(run);
    prov.add_hash("field_u", content_hash(*f.u));
    prov.add_hash("field_w", content_hash(*f.w));
    prov.add_hash("field_g", content_hash(*f.g));
    const Json summary{{"u00", f.u->value(0.0, 0.0)},
                       {"w00", f.w->value(0.0, 0.0)},
                       {"g00", f.g->value(0.0, 0.0)},
                       {"tail_probability", f.u->metadata().tail_probability},
                       {"truncation_bias_u", f.u->metadata().truncation_bias_bound},
                       {"truncation_bias_w", f.w->metadata().truncation_bias_bound},
                       {"truncation_bias_g", f.g->metadata().truncation_bias_bound},
                       {"cache_hits", hits},
                       {"cache", (dir.path() / "cache").string()},
                       {"provenance", prov.to_json()}};
    dir.write("fields.json", [&](std::ostream& os) { write_json(os, summary); });
    std::printf("u(0,0) = %.12g  w(0,0) = %.12g  g(0,0) = %.12g  (%s)\n", f.u->value(0.0, 0.0),
                f.w->value(0.0, 0.0), f.g->value(0.0, 0.0), hits == 3 ? "cached" : "solved");
    return 0;
}

int cmd_simulate(const Run& run) {
    const auto& c = run.config;
    c.boundary.require_eventual_crossing();
    const OutputDirectory dir{run.out};
    const auto prov = provenance(run);
    std::vector<SimulationRow> rows;
    for (const auto n : c.n_list) {
        const auto seed = rate_seed(stage_seed(run, "simulate"), n);
        auto acc = mc_moments<3>(
            [&](const CrossingRecord& r) {
                return std::array<double, 3>{c.payoff.value(r.tau, r.terminal), r.overshoot, r.tau};
            },
            n, c.distribution, c.boundary, c.paths, seed, c.walk, run.parallel);
        SimulationRow row;
        row.n = n;
        row.estimate = {acc.mean(0), acc.stderr_of_mean(0), acc.count(), seed};
        row.overshoot.mean_overshoot = {acc.mean(1), acc.stderr_of_mean(1), acc.count(), seed};
        row.overshoot.mean_tau = {acc.mean(2), acc.stderr_of_mean(2), acc.count(), seed};
        row.overshoot.corr_overshoot_tau = acc.correlation(1, 2);
        rows.push_back(row);
        std::printf("n = %lld  E f = %.8f +- %.2g\n", static_cast<long long>(n), row.estimate.mean,
                    row.estimate.std_error);

        if (run.diagnostics) {
            DiagnosticsSpec spec;
            spec.distances = {0.5, 1.0, 2.0, 4.0};
            spec.proximity = true;
            const auto v = visit_counts(n, c.distribution, c.boundary, spec, c.paths, seed, c.walk, run.parallel);
            const auto tag = std::to_string(n);
            dir.write("visits_n" + tag + ".csv", [&](std::ostream& os) { write_visits_csv(os, n, v, prov); });
            const auto records = collect_records(n, c.distribution, c.boundary, std::min(c.paths, max_record_rows),
                                                 seed, c.walk, run.parallel);
            dir.write("records_n" + tag + ".csv", [&](std::ostream& os) {
                prov.write_comments(os);
                write_records_csv(os, records);
            });
        }
    }
    dir.write("simulate.csv", [&](std::ostream& os) { write_simulation_csv(os, rows, prov); });
    return 0;
}

int cmd_rho(const Run& run) {
    const OutputDirectory dir{run.out};
    const auto k = constants_for(run, dir);
    std::printf("rho = %.8f +- %.2g  (E Y = %.8f, %llu epochs, %llu capped)\n", k.rho, k.rho_stderr, k.EY,
                static_cast<unsigned long long>(k.epochs_used), static_cast<unsigned long long>(k.capped));
    return 0;
}

int cmd_expand(const Run& run) {
    const OutputDirectory dir{run.out};
    const auto r = expansion_for(run, dir);
    auto prov = provenance(run);
    add_report_provenance(prov, r);
    dir.write("expansion.json", [&](std::ostream& os) { write_json(os, report_json(r, run.config.n_list, prov)); });
    std::printf("leading = %.12g  skew_term = %.12g  overshoot_term = %.12g\n", r.leading, r.skew_term,
                r.overshoot_term);
    for (const auto n : run.config.n_list) {
        std::printf("  corrected(%lld) = %.12g\n", static_cast<long long>(n), r.corrected(static_cast<double>(n)));
    }
    return 0;
}

int cmd_rates(const Run& run) {
    const auto& c = run.config;
    const OutputDirectory dir{run.out};
    const auto r = expansion_for(run, dir);
    const auto study = rate_study(c.boundary, c.payoff, c.distribution, r, c.n_list, c.paths,
                                  stage_seed(run, "rates"), c.walk, run.parallel);
    auto prov = provenance(run);
    add_report_provenance(prov, r);
    if (run.wants("csv")) {
        dir.write("rates.csv", [&](std::ostream& os) { write_rate_study_csv(os, study, prov); });
        dir.write("overshoot.csv", [&](std::ostream& os) { write_overshoot_csv(os, study, prov); });
    }
    if (run.wants("json")) {
        dir.write("rates.json", [&](std::ostream& os) { write_json(os, rate_study_json(study, prov)); });
    }
    std::printf("%8s %14s %12s %14s %14s\n", "n", "mc", "stderr", "sqrt(n)|corr|", "sqrt(n)|unc|");
    for (const auto& row : study.rows) {
        std::printf("%8lld %14.8f %12.2g %14.6f %14.6f\n", static_cast<long long>(row.n), row.mc.mean,
                    row.mc.std_error, row.scaled_resid_corrected, row.scaled_resid_uncorrected);
    }
    std::printf("trend: kendall tau %.3f over %zu signal rows -> %s\n", study.trend.kendall_tau,
                study.trend.signal_points,
                study.trend.inconclusive ? "inconclusive" : (study.trend.pass ? "decreasing" : "not decreasing"));
    return 0;
}

int cmd_validate(const Run& run) {
    // The suite runs on its own fixed problems; the configured problem must
    // still satisfy the hypotheses it is about.
    const auto& c = run.config;
    c.distribution.require_non_lattice();
    c.boundary.validate();
    c.boundary.require_eventual_crossing();
    const OutputDirectory dir{run.out / "validation"};
    ValidationOptions options;
    options.master_seed = c.master_seed;
    options.parallel = run.parallel;
    ValidationContext ctx{options};
    int failed = 0;
    for (int id = 1; id <= criterion_count; ++id) {
        const auto r = run_criterion(ctx, id);
        std::printf("%s\n", format_result(r).c_str());
        std::fflush(stdout);
        dir.write("criterion_" + std::to_string(id) + ".json", [&](std::ostream& os) { write_json(os, r.artifact); });
        if (!r.pass) ++failed;
    }
    std::printf("%d of %d criteria passed\n", criterion_count - failed, criterion_count);
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Corrected diffusion approximations for random-walk boundary crossing"};
    app.require_subcommand(1);
    std::string config_path, out;
    unsigned threads = 1;
    bool diagnostics = false;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", out, "output directory (overrides the config and " + std::string(out_env) + ")");
        sub->add_option("--threads", threads, "worker threads; affects speed only")->check(CLI::PositiveNumber);
        sub->add_flag("--diagnostics", diagnostics, "near-boundary counters and per-path records");
    };
    const std::vector<std::pair<const char*, const char*>> commands{
        {"solve", "solve and cache the u, w and g fields"},
        {"simulate", "Monte Carlo estimates of E f(tau_n, W_n(tau_n))"},
        {"rho", "estimate the mean limiting overshoot"},
        {"expand", "assemble the corrected approximation"},
        {"rates", "rate study against Monte Carlo over n_list"},
        {"validate", "run the acceptance suite"}};
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Run run;
        run.config = load_config(config_path);
        run.parallel.threads = threads;
        run.parallel.block_size = run.config.batch_size;
        run.diagnostics = diagnostics;
        if (!out.empty()) {
            run.out = out;
        } else if (const char* env = std::getenv(out_env); env && *env) {
            run.out = env;
        } else {
            run.out = run.config.output_directory;
        }

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "solve") return cmd_solve(run);
        if (cmd == "simulate") return cmd_simulate(run);
        if (cmd == "rho") return cmd_rho(run);
        if (cmd == "expand") return cmd_expand(run);
        if (cmd == "rates") return cmd_rates(run);
        return cmd_validate(run);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error at %s\n", e.what());
        return 2;
    } catch (const AssumptionViolation& e) {
        std::fprintf(stderr, "%s (hypothesis %d of the corrected approximation)\n", e.what(), e.assumption());
        return 3;
    } catch (const NumericalRefusal& e) {
        std::fprintf(stderr, "numerical refusal: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
