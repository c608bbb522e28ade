// Acceptance suite runner: one PASS/FAIL line per criterion.
//
//   acceptance [ids...] [--seed S] [--threads K] [--budget B] [--out DIR]
//              [--expect-fail ID...]
//
// Exit status is 0 when every criterion passes, or when every failing one
// was named in --expect-fail and failed on its verdict rather than by an
// error. FAIL lines are printed either way.

#include <cstdio>
#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "crossing/report.hpp"
#include "crossing/validation.hpp"

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> ids;
    crossing::ValidationOptions options;
    std::string out;
    std::vector<int> expected;
    app.add_option("ids", ids, "criteria to run (default: all)")->check(CLI::Range(1, crossing::criterion_count));
    app.add_option("--seed", options.master_seed, "master seed");
    app.add_option("--threads", options.parallel.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--budget", options.budget, "fraction of the full path and epoch budgets")
        ->check(CLI::Range(1e-6, 1.0));
    app.add_option("--out", out, "directory for per-criterion JSON artifacts");
    app.add_option("--expect-fail", expected, "criteria with a documented failing verdict")
        ->check(CLI::Range(1, crossing::criterion_count));
    CLI11_PARSE(app, argc, argv);
    if (ids.empty()) {
        for (int i = 1; i <= crossing::criterion_count; ++i) ids.push_back(i);
    }
    options.enforce_runtime = options.budget == 1.0;

    crossing::ValidationContext ctx{options};
    std::optional<crossing::OutputDirectory> dir;
    if (!out.empty()) dir.emplace(out);
    int failed = 0, documented = 0;
    for (int id : ids) {
        try {
            const auto r = crossing::run_criterion(ctx, id);
            std::printf("%s\n", crossing::format_result(r).c_str());
            std::fflush(stdout);
            if (!r.pass) {
                const bool known = std::find(expected.begin(), expected.end(), id) != expected.end();
                ++(known ? documented : failed);
            }
            if (dir) {
                dir->write("criterion_" + std::to_string(id) + ".json",
                           [&](std::ostream& os) { crossing::write_json(os, r.artifact); });
            }
        } catch (const std::exception& e) {
            std::printf("criterion %d %-30s FAIL  error: %s\n", id, ("[" + std::string(crossing::criterion_title(id)) + "]").c_str(),
                        e.what());
            std::fflush(stdout);
            ++failed;
        }
    }
    const int total = static_cast<int>(ids.size());
    std::printf("%d of %d criteria passed", total - failed - documented, total);
    if (documented > 0) std::printf(", %d documented expected failure%s", documented, documented > 1 ? "s" : "");
    std::printf("\n");
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
