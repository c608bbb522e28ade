#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "crossing/io.hpp"
#include "crossing/report.hpp"

using namespace crossing;
namespace fs = std::filesystem;

namespace {

Json standard_doc() {
    return Json::parse(R"({
      "problem": {
        "boundary": {"kind": "affine", "params": {"b0": 1.0, "slope": -0.5}},
        "payoff": {"kind": "time-exponential", "params": {"amplitude": 1.0, "rate": 0.5}},
        "distribution": {"kind": "centered-exponential"}
      },
      "grid": {"ny": 128, "nt": 256},
      "mc": {"paths": 1000, "master_seed": 7},
      "n_list": [4, 16, 64]
    })");
}

std::string config_error_path(const Json& doc) {
    try {
        config_from_json(doc);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("crossing_io_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Config, RoundTripsThroughJson) {
    const auto c = config_from_json(standard_doc());
    EXPECT_EQ(c.master_seed, 7u);
    EXPECT_EQ(c.paths, 1000u);
    EXPECT_EQ(c.grid.ny, 128);
    EXPECT_EQ(c.n_list, (std::vector<std::int64_t>{4, 16, 64}));
    EXPECT_EQ(c.distribution.kind(), DistributionKind::centered_exponential);
    EXPECT_EQ(content_hash(boundary_from_json(to_json(c.boundary))), content_hash(c.boundary));
    EXPECT_EQ(content_hash(payoff_from_json(to_json(c.payoff))), content_hash(c.payoff));
    EXPECT_EQ(content_hash(grid_from_json(to_json(c.grid))), content_hash(c.grid));
    const auto mix = IncrementDistribution::gaussian_mixture(0.3, 1.0, 0.5);
    EXPECT_EQ(content_hash(distribution_from_json(to_json(mix))), content_hash(mix));
}

TEST(Config, ErrorsNameTheOffendingPath) {
    auto doc = standard_doc();
    doc["mc"].erase("master_seed");
    EXPECT_EQ(config_error_path(doc), "/mc/master_seed");

    doc = standard_doc();
    doc["problem"]["payoff"]["params"]["rate"] = -1.0;
    EXPECT_EQ(config_error_path(doc), "/problem/payoff/params/rate");

    doc = standard_doc();
    doc["n_list"][1] = "sixteen";
    EXPECT_EQ(config_error_path(doc), "/n_list/1");

    doc = standard_doc();
    doc["grid"]["far_field"] = "dirichlet";
    EXPECT_EQ(config_error_path(doc), "/grid/far_field");

    doc = standard_doc();
    doc["problem"]["distribution"]["kind"] = "cauchy";
    EXPECT_EQ(config_error_path(doc), "/problem/distribution/kind");
}

TEST(Config, HashTracksContent) {
    auto doc = standard_doc();
    const auto a = content_hash(config_from_json(doc));
    doc["mc"]["master_seed"] = 8;
    EXPECT_NE(content_hash(config_from_json(doc)), a);
    EXPECT_EQ(content_hash(config_from_json(standard_doc())), a);
}

TEST(Config, LoadReportsBadFiles) {
    const auto dir = scratch("load");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
    EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}

TEST(Constants, JsonRoundTrip) {
    OvershootConstants c;
    c.rho = 0.58;
    c.rho_stderr = 1e-3;
    c.EY = 0.82;
    c.epochs_used = 12345;
    c.seed = 99;
    c.distribution = "standard-normal";
    const auto back = constants_from_json(to_json(c));
    EXPECT_EQ(content_hash(back), content_hash(c));
}

TEST(FieldCache, StoreLoadAndHits) {
    const auto dir = scratch("cache");
    const FieldCache cache(dir);
    GridConfig g;
    g.ny = 128;
    g.nt = 256;
    const auto b = Boundary::affine(1.0, -0.5);
    const auto f = Payoff::time_exponential(1.0, 0.5);
    int hits = -1;
    const auto first = solve_fields_cached(cache, b, f, g, &hits);
    EXPECT_EQ(hits, 0);
    const auto second = solve_fields_cached(cache, b, f, g, &hits);
    EXPECT_EQ(hits, 3);
    EXPECT_EQ(content_hash(*first.u), content_hash(*second.u));
    EXPECT_EQ(content_hash(*first.w), content_hash(*second.w));
    EXPECT_EQ(content_hash(*first.g), content_hash(*second.g));
    EXPECT_EQ(second.u->metadata().tail_probability, first.u->metadata().tail_probability);

    // a different grid is a different key
    g.nt = 512;
    solve_fields_cached(cache, b, f, g, &hits);
    EXPECT_EQ(hits, 0);
}

TEST(FieldCache, TruncatedBinaryIsAMiss) {
    const auto dir = scratch("truncated");
    const FieldCache cache(dir);
    GridConfig g;
    g.ny = 32;
    g.nt = 16;
    const auto field = Field::from_function(g, Boundary::affine(1.0, -0.5), [](double t, double y) { return t * y; });
    cache.store(42, field);
    ASSERT_TRUE(cache.load(42).has_value());
    fs::resize_file(dir / (hex(42) + ".bin"), 64);
    EXPECT_FALSE(cache.load(42).has_value());
}

TEST(Csv, EmptyStudyIsHeaderOnly) {
    std::ostringstream os;
    write_rate_study_csv(os, RateStudy{});
    EXPECT_EQ(os.str(), std::string(rate_study_columns) + "\n");
}

TEST(Csv, RowsHaveEightColumnsAndProvenance) {
    RateStudy s;
    RateRow r;
    r.n = 100;
    r.mc = {0.5, 1e-3, 1000, 1};
    s.rows = {r, r};
    ProvenanceHeader prov;
    prov.add("seed", "1").add_hash("config", 0xabcull);
    std::ostringstream os;
    write_rate_study_csv(os, s, prov);
    std::istringstream in(os.str());
    std::string line;
    int comments = 0, rows = 0;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            ++comments;
            continue;
        }
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7) << line;
        ++rows;
    }
    EXPECT_EQ(comments, 2);
    EXPECT_EQ(rows, 3);
}

TEST(Json, NonFiniteBecomesNull) {
    Json j{{"a", std::numeric_limits<double>::quiet_NaN()}, {"b", 0.1 + 0.2}, {"c", {1.0 / 3.0}}};
    const auto r = round12(j);
    EXPECT_TRUE(r["a"].is_null());
    EXPECT_EQ(r["b"].get<double>(), 0.3);
    EXPECT_EQ(r["c"][0].get<double>(), 0.333333333333);
    EXPECT_EQ(fmt12(0.1 + 0.2), "0.3");
}

TEST(OutputDirectory, WritesAreByteIdenticalOnRerun) {
    const auto dir = scratch("rerun");
    Json j{{"x", 1.0 / 7.0}, {"n", 3}};
    std::string first, second;
    for (std::string* dst : {&first, &second}) {
        OutputDirectory out(dir);
        const auto p = out.write("a.json", [&](std::ostream& os) { write_json(os, j); });
        std::ifstream in(p, std::ios::binary);
        *dst = std::string(std::istreambuf_iterator<char>(in), {});
    }
    EXPECT_EQ(first, second);
    EXPECT_FALSE(fs::exists(dir / ".write-probe"));
}

TEST(OutputDirectory, UnusablePathThrows) {
    const auto dir = scratch("blocked");
    fs::create_directories(dir);
    std::ofstream(dir / "file") << "x";
    EXPECT_THROW(OutputDirectory(dir / "file" / "sub"), Error);
}
