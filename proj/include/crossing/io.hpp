#pragma once

// JSON forms of the problem catalogue, experiment configs, overshoot
// constants and expansion reports, plus the on-disk field cache.
//
// Problem blocks look like {"kind": "affine", "params": {"b0": 1, "slope": -0.5}}.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "crossing/errors.hpp"
#include "crossing/expansion.hpp"
#include "crossing/fluctuation.hpp"
#include "crossing/hash.hpp"
#include "crossing/model.hpp"
#include "crossing/pde.hpp"

namespace crossing {

using Json = nlohmann::ordered_json;

namespace detail {

inline const Json& require(const Json& j, const std::string& path, const char* key) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(path + "/" + key, "required key is missing");
    return *it;
}

inline double number(const Json& j, const std::string& path, const char* key) {
    const Json& v = require(j, path, key);
    if (!v.is_number()) throw ConfigError(path + "/" + key, "expected a number");
    return v.get<double>();
}

inline double number_or(const Json& j, const std::string& path, const char* key, double fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return number(j, path, key);
}

inline std::int64_t integer(const Json& j, const std::string& path, const char* key) {
    const Json& v = require(j, path, key);
    if (!v.is_number_integer()) throw ConfigError(path + "/" + key, "expected an integer");
    return v.get<std::int64_t>();
}

inline std::int64_t integer_or(const Json& j, const std::string& path, const char* key, std::int64_t fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return integer(j, path, key);
}

inline std::vector<double> numbers(const Json& j, const std::string& path, const char* key) {
    const Json& v = require(j, path, key);
    if (!v.is_array()) throw ConfigError(path + "/" + key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(path + "/" + key + "/" + std::to_string(i), "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

inline std::string text(const Json& j, const std::string& path, const char* key) {
    const Json& v = require(j, path, key);
    if (!v.is_string()) throw ConfigError(path + "/" + key, "expected a string");
    return v.get<std::string>();
}

inline const Json& params_of(const Json& j, const std::string& path) {
    static const Json empty = Json::object();
    if (!j.contains("params")) return empty;
    const Json& p = j["params"];
    if (!p.is_object()) throw ConfigError(path + "/params", "expected an object");
    return p;
}

// Rethrows ConfigErrors raised by factories (which name paths relative to
// the block) under the block's own path.
template <class Fn>
auto rebased(const std::string& path, const char* block, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::string p = e.path();
        const std::string prefix = std::string("/") + block;
        if (p.rfind(prefix, 0) == 0) p = path + p.substr(prefix.size());
        const std::string what = e.what();
        const auto colon = what.find(": ");
        throw ConfigError(p, colon == std::string::npos ? what : what.substr(colon + 2));
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Problem catalogue
// ---------------------------------------------------------------------------

inline Boundary boundary_from_json(const Json& j, const std::string& path = "/boundary") {
    const auto kind = detail::text(j, path, "kind");
    const Json& p = detail::params_of(j, path);
    const std::string pp = path + "/params";
    return detail::rebased(path, "boundary", [&] {
        if (kind == "affine") return Boundary::affine(detail::number(p, pp, "b0"), detail::number(p, pp, "slope"));
        if (kind == "affine-plus-smooth-perturbation") {
            return Boundary::perturbed(detail::number(p, pp, "b0"), detail::number(p, pp, "slope"),
                                       detail::number(p, pp, "amplitude"), detail::number(p, pp, "frequency"));
        }
        if (kind == "custom-polynomial") {
            return Boundary::polynomial(detail::numbers(p, pp, "coefficients"), detail::number(p, pp, "horizon"));
        }
        throw ConfigError(path + "/kind", "unknown boundary kind '" + kind + "'");
    });
}

inline Json to_json(const Boundary& b) {
    const auto& p = b.params();
    switch (b.kind()) {
        case BoundaryKind::affine:
            return {{"kind", "affine"}, {"params", {{"b0", p[0]}, {"slope", p[1]}}}};
        case BoundaryKind::affine_plus_perturbation:
            return {{"kind", "affine-plus-smooth-perturbation"},
                    {"params", {{"b0", p[0]}, {"slope", p[1]}, {"amplitude", p[2]}, {"frequency", p[3]}}}};
        case BoundaryKind::polynomial:
            return {{"kind", "custom-polynomial"}, {"params", {{"coefficients", p}, {"horizon", b.horizon()}}}};
    }
    return {};
}

inline Payoff payoff_from_json(const Json& j, const std::string& path = "/payoff") {
    const auto kind = detail::text(j, path, "kind");
    const Json& p = detail::params_of(j, path);
    const std::string pp = path + "/params";
    return detail::rebased(path, "payoff", [&] {
        if (kind == "time-exponential") {
            return Payoff::time_exponential(detail::number(p, pp, "amplitude"), detail::number(p, pp, "rate"));
        }
        if (kind == "gaussian-bump") {
            return Payoff::gaussian_bump(detail::number(p, pp, "amplitude"), detail::number(p, pp, "rate"),
                                         detail::number(p, pp, "center"), detail::number(p, pp, "width"));
        }
        if (kind == "windowed-polynomial") {
            return Payoff::windowed_polynomial(detail::numbers(p, pp, "coefficients"), detail::number(p, pp, "width"),
                                               detail::number(p, pp, "rate"));
        }
        throw ConfigError(path + "/kind", "unknown payoff kind '" + kind + "'");
    });
}

inline Json to_json(const Payoff& f) {
    const auto& p = f.params();
    switch (f.kind()) {
        case PayoffKind::time_exponential:
            return {{"kind", "time-exponential"}, {"params", {{"amplitude", p[0]}, {"rate", p[1]}}}};
        case PayoffKind::gaussian_bump:
            return {{"kind", "gaussian-bump"},
                    {"params", {{"amplitude", p[0]}, {"rate", p[1]}, {"center", p[2]}, {"width", p[3]}}}};
        case PayoffKind::windowed_polynomial:
            return {{"kind", "windowed-polynomial"},
                    {"params",
                     {{"coefficients", std::vector<double>(p.begin() + 2, p.end())}, {"width", p[0]}, {"rate", p[1]}}}};
    }
    return {};
}

inline IncrementDistribution distribution_from_json(const Json& j, const std::string& path = "/distribution") {
    const auto kind = detail::text(j, path, "kind");
    const Json& p = detail::params_of(j, path);
    const std::string pp = path + "/params";
    return detail::rebased(path, "distribution", [&] {
        if (kind == "standard-normal") return IncrementDistribution::standard_normal();
        if (kind == "centered-exponential") return IncrementDistribution::centered_exponential();
        if (kind == "uniform-symmetric") return IncrementDistribution::uniform_symmetric();
        if (kind == "two-point") return IncrementDistribution::two_point();
        if (kind == "gaussian-mixture") {
            return IncrementDistribution::gaussian_mixture(detail::number(p, pp, "weight"), detail::number(p, pp, "mean1"),
                                                           detail::number(p, pp, "sd1"));
        }
        throw ConfigError(path + "/kind", "unknown distribution kind '" + kind + "'");
    });
}

inline Json to_json(const IncrementDistribution& d) {
    Json j{{"kind", d.name()}, {"params", Json::object()}};
    if (d.kind() == DistributionKind::gaussian_mixture) {
        const auto& p = d.params();
        j["params"] = {{"weight", p[0]}, {"mean1", p[1]}, {"sd1", p[2]}};
    }
    return j;
}

inline GridConfig grid_from_json(const Json& j, const std::string& path = "/grid") {
    GridConfig g;
    if (j.is_null()) return g;
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    g.y_max = detail::number_or(j, path, "y_max", g.y_max);
    g.t_max = detail::number_or(j, path, "t_max", g.t_max);
    g.ny = static_cast<int>(detail::integer_or(j, path, "ny", g.ny));
    g.nt = static_cast<int>(detail::integer_or(j, path, "nt", g.nt));
    g.truncation_tolerance = detail::number_or(j, path, "truncation_tolerance", g.truncation_tolerance);
    g.rannacher_steps = static_cast<int>(detail::integer_or(j, path, "rannacher_steps", g.rannacher_steps));
    if (j.contains("far_field")) {
        const auto ff = detail::text(j, path, "far_field");
        if (ff == "neumann-zero") {
            g.far_field = FarField::neumann_zero;
        } else if (ff == "constant-extension") {
            g.far_field = FarField::constant_extension;
        } else {
            throw ConfigError(path + "/far_field", "expected 'neumann-zero' or 'constant-extension'");
        }
    }
    detail::rebased(path, "grid", [&] {
        g.validate();
        return 0;
    });
    return g;
}

inline Json to_json(const GridConfig& g) {
    return {{"y_max", g.y_max},
            {"t_max", g.t_max},
            {"ny", g.ny},
            {"nt", g.nt},
            {"far_field", g.far_field == FarField::neumann_zero ? "neumann-zero" : "constant-extension"},
            {"truncation_tolerance", g.truncation_tolerance},
            {"rannacher_steps", g.rannacher_steps}};
}

// ---------------------------------------------------------------------------
// Experiment config
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    Boundary boundary = Boundary::affine(1.0, -0.5);
    Payoff payoff = Payoff::time_exponential(1.0, 0.5);
    IncrementDistribution distribution = IncrementDistribution::standard_normal();
    GridConfig grid;
    std::uint64_t paths = 100'000;
    std::uint64_t master_seed = 0;
    std::uint64_t batch_size = 4096;
    WalkOptions walk;
    std::uint64_t epochs = 1'000'000;
    std::int64_t cap = default_ladder_cap;
    std::vector<std::int64_t> n_list{100, 400, 1600};
    std::string output_directory = "out";
    std::vector<std::string> formats{"csv", "json"};
    Json source;  ///< the parsed document, kept for provenance
};

inline ExperimentConfig config_from_json(const Json& root) {
    if (!root.is_object()) throw ConfigError("", "config must be a JSON object");
    ExperimentConfig c;
    c.source = root;
    const Json& problem = detail::require(root, "", "problem");
    c.boundary = boundary_from_json(detail::require(problem, "/problem", "boundary"), "/problem/boundary");
    c.payoff = payoff_from_json(detail::require(problem, "/problem", "payoff"), "/problem/payoff");
    c.distribution = distribution_from_json(detail::require(problem, "/problem", "distribution"),
                                            "/problem/distribution");
    c.grid = grid_from_json(root.contains("grid") ? root["grid"] : Json{}, "/grid");

    const Json& mc = detail::require(root, "", "mc");
    const Json& seed = detail::require(mc, "/mc", "master_seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
        throw ConfigError("/mc/master_seed", "expected a nonnegative integer");
    }
    c.master_seed = seed.get<std::uint64_t>();
    const auto paths = detail::integer_or(mc, "/mc", "paths", static_cast<std::int64_t>(c.paths));
    if (paths < 2) throw ConfigError("/mc/paths", "must be at least 2");
    c.paths = static_cast<std::uint64_t>(paths);
    const auto batch = detail::integer_or(mc, "/mc", "batch_size", static_cast<std::int64_t>(c.batch_size));
    if (batch < 1) throw ConfigError("/mc/batch_size", "must be positive");
    c.batch_size = static_cast<std::uint64_t>(batch);
    c.walk.cap_factor = detail::number_or(mc, "/mc", "cap_factor", c.walk.cap_factor);
    if (!(c.walk.cap_factor > 0.0)) throw ConfigError("/mc/cap_factor", "must be positive");
    c.walk.t_max = c.grid.t_max;

    if (root.contains("fluctuation")) {
        const Json& fl = root["fluctuation"];
        const auto epochs = detail::integer_or(fl, "/fluctuation", "epochs", static_cast<std::int64_t>(c.epochs));
        if (epochs < 10'000) throw ConfigError("/fluctuation/epochs", "must be at least 10000");
        c.epochs = static_cast<std::uint64_t>(epochs);
        c.cap = detail::integer_or(fl, "/fluctuation", "cap", c.cap);
        if (c.cap < 1) throw ConfigError("/fluctuation/cap", "must be positive");
    }
    if (root.contains("n_list")) {
        const Json& nl = root["n_list"];
        if (!nl.is_array()) throw ConfigError("/n_list", "expected an array of integers");
        c.n_list.clear();
        for (std::size_t i = 0; i < nl.size(); ++i) {
            if (!nl[i].is_number_integer() || nl[i].get<std::int64_t>() < 1) {
                throw ConfigError("/n_list/" + std::to_string(i), "expected a positive integer");
            }
            c.n_list.push_back(nl[i].get<std::int64_t>());
        }
    }
    if (root.contains("outputs")) {
        const Json& o = root["outputs"];
        if (o.contains("directory")) c.output_directory = detail::text(o, "/outputs", "directory");
        if (o.contains("formats")) {
            const Json& f = o["formats"];
            if (!f.is_array()) throw ConfigError("/outputs/formats", "expected an array of strings");
            c.formats.clear();
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (!f[i].is_string() || (f[i] != "csv" && f[i] != "json")) {
                    throw ConfigError("/outputs/formats/" + std::to_string(i), "expected 'csv' or 'json'");
                }
                c.formats.push_back(f[i].get<std::string>());
            }
        }
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("", "cannot open config file " + file.string());
    Json root;
    try {
        root = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    return config_from_json(root);
}

inline std::uint64_t content_hash(const ExperimentConfig& c) {
    Hasher h;
    h.add(std::string_view{c.source.dump()});
    return h.value();
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

inline Json to_json(const OvershootConstants& c) {
    return {{"distribution", c.distribution},
            {"rho", c.rho},
            {"rho_stderr", c.rho_stderr},
            {"EY", c.EY},
            {"EY_stderr", c.EY_stderr},
            {"EY2", c.EY2},
            {"EY3", c.EY3},
            {"epochs", c.epochs_used},
            {"capped", c.capped},
            {"cap", c.cap},
            {"seed", c.seed},
            {"hash", hex(content_hash(c))}};
}

inline OvershootConstants constants_from_json(const Json& j, const std::string& path = "") {
    OvershootConstants c;
    c.distribution = detail::text(j, path, "distribution");
    c.rho = detail::number(j, path, "rho");
    c.rho_stderr = detail::number_or(j, path, "rho_stderr", 0.0);
    c.EY = detail::number(j, path, "EY");
    c.EY_stderr = detail::number_or(j, path, "EY_stderr", 0.0);
    c.EY2 = detail::number(j, path, "EY2");
    c.EY3 = detail::number_or(j, path, "EY3", 0.0);
    c.epochs_used = static_cast<std::uint64_t>(detail::integer_or(j, path, "epochs", 0));
    c.capped = static_cast<std::uint64_t>(detail::integer_or(j, path, "capped", 0));
    c.cap = detail::integer_or(j, path, "cap", default_ladder_cap);
    c.seed = static_cast<std::uint64_t>(detail::integer_or(j, path, "seed", 0));
    return c;
}

inline Json to_json(const ExpansionReport& r) {
    const auto& p = r.provenance;
    return {{"leading", r.leading},
            {"skew_term", r.skew_term},
            {"overshoot_term", r.overshoot_term},
            {"w00", r.w00},
            {"g00", r.g00},
            {"m3", r.m3},
            {"rho", r.rho},
            {"rho_stderr", r.rho_stderr},
            {"provenance",
             {{"problem", hex(p.problem)},
              {"u", hex(p.u)},
              {"w", hex(p.w)},
              {"g", hex(p.g)},
              {"constants", hex(p.constants)},
              {"tail_probability", p.tail_probability},
              {"truncation_bias_u", p.bias_u},
              {"truncation_bias_w", p.bias_w},
              {"truncation_bias_g", p.bias_g}}}};
}

// ---------------------------------------------------------------------------
// Field cache: <key>.bin holds little-endian doubles row-major over
// (time, space); <key>.json is the header.
// ---------------------------------------------------------------------------

class FieldCache {
public:
    explicit FieldCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    /// Cache key of a solve: field kind, boundary, data source and grid.
    static std::uint64_t key(std::string_view kind, const Boundary& boundary, std::uint64_t source_hash,
                             const GridConfig& grid) {
        Hasher h;
        h.add(kind).add(content_hash(boundary)).add(source_hash).add(content_hash(grid));
        return h.value();
    }

    std::optional<Field> load(std::uint64_t key) const {
        const auto bin = dir_ / (hex(key) + ".bin");
        const auto hdr = dir_ / (hex(key) + ".json");
        if (!std::filesystem::exists(bin) || !std::filesystem::exists(hdr)) return std::nullopt;
        std::ifstream hin(hdr);
        Json j = Json::parse(hin, nullptr, false);
        if (j.is_discarded()) return std::nullopt;
        const GridConfig grid = grid_from_json(j["grid"], "/grid");
        const Boundary boundary = boundary_from_json(j["boundary"], "/boundary");
        FieldMetadata meta;
        meta.kind = j.value("kind", "");
        meta.source_hash = std::stoull(j.value("source_hash", "0"), nullptr, 16);
        // NaN metadata is written as null
        auto num = [&](const char* k) {
            const auto it = j.find(k);
            return it == j.end() || !it->is_number() ? std::numeric_limits<double>::quiet_NaN() : it->get<double>();
        };
        meta.tail_probability = num("tail_probability");
        meta.truncation_bias_bound = num("truncation_bias_bound");
        meta.far_field_estimate = num("far_field_estimate");
        meta.max_abs_third = num("max_abs_third");
        meta.max_abs_fourth = num("max_abs_fourth");
        if (j.contains("warnings")) meta.warnings = j["warnings"].get<std::vector<std::string>>();

        const std::size_t count = static_cast<std::size_t>(grid.ny) * static_cast<std::size_t>(grid.nt);
        if (std::filesystem::file_size(bin) != count * 8) return std::nullopt;
        std::ifstream in(bin, std::ios::binary);
        std::vector<double> values(count);
        std::vector<unsigned char> buf(count * 8);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[i * 8 + b]) << (8 * b);
            values[i] = std::bit_cast<double>(bits);
        }
        return Field{grid, boundary, std::move(values), std::move(meta)};
    }

    void store(std::uint64_t key, const Field& field) const {
        std::filesystem::create_directories(dir_);
        const auto& m = field.metadata();
        Json j{{"key", hex(key)},
               {"kind", m.kind},
               {"grid", to_json(field.grid())},
               {"boundary", to_json(field.boundary())},
               {"source_hash", hex(m.source_hash)},
               {"content_hash", hex(content_hash(field))},
               {"tail_probability", m.tail_probability},
               {"truncation_bias_bound", m.truncation_bias_bound},
               {"far_field_estimate", m.far_field_estimate},
               {"max_abs_third", m.max_abs_third},
               {"max_abs_fourth", m.max_abs_fourth},
               {"warnings", m.warnings},
               {"layout", "little-endian float64, row-major over (time, space)"}};
        std::ofstream hout(dir_ / (hex(key) + ".json"));
        hout << j.dump(2) << '\n';
        std::vector<unsigned char> buf(field.values().size() * 8);
        for (std::size_t i = 0; i < field.values().size(); ++i) {
            const auto bits = std::bit_cast<std::uint64_t>(field.values()[i]);
            for (int b = 0; b < 8; ++b) buf[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
        }
        std::ofstream out(dir_ / (hex(key) + ".bin"), std::ios::binary);
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!out) throw Error("cannot write field cache in " + dir_.string());
    }

    const std::filesystem::path& directory() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
};

/// solve_fields() backed by the cache: the u, w and g fields are read back
/// when all three are present under their content keys, else solved and
/// stored. `hits` receives the number of fields read from disk.
inline ExpansionFields solve_fields_cached(const FieldCache& cache, const Boundary& boundary, const Payoff& payoff,
                                           const GridConfig& grid, int* hits = nullptr) {
    const auto ku = FieldCache::key("u", boundary, content_hash(payoff), grid);
    const auto kw = FieldCache::key("w", boundary, content_hash(payoff), grid);
    const auto kg = FieldCache::key("g", boundary, content_hash(payoff), grid);
    auto u = cache.load(ku);
    auto w = cache.load(kw);
    auto g = cache.load(kg);
    if (u && w && g) {
        if (hits) *hits = 3;
        ExpansionFields f;
        f.u = std::make_shared<const Field>(std::move(*u));
        f.w = std::make_shared<const Field>(std::move(*w));
        f.g = std::make_shared<const Field>(std::move(*g));
        return f;
    }
    auto f = solve_fields(boundary, payoff, grid);
    cache.store(ku, *f.u);
    cache.store(kw, *f.w);
    cache.store(kg, *f.g);
    if (hits) *hits = 0;
    return f;
}

/// assemble() with the fields taken through the cache.
inline ExpansionReport assemble_cached(const FieldCache& cache, const Boundary& boundary, const Payoff& payoff,
                                       const IncrementDistribution& dist, const GridConfig& grid,
                                       const std::optional<OvershootConstants>& constants, int* hits = nullptr) {
    detail::check_assembly_inputs(boundary, dist, constants);
    auto f = solve_fields_cached(cache, boundary, payoff, grid, hits);
    return assemble_from_fields(boundary, payoff, dist, grid, *constants, std::move(f.u), std::move(f.w),
                                std::move(f.g), std::move(f.u_xxx));
}

}  // namespace crossing
