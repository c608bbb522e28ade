#pragma once

// CSV and JSON emission. Every file starts with '#' provenance lines (CSV) or
// a "provenance" object (JSON); numbers are printed at 12 significant digits
// so reruns compare byte for byte.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "crossing/errors.hpp"
#include "crossing/expansion.hpp"
#include "crossing/hash.hpp"
#include "crossing/io.hpp"
#include "crossing/walk.hpp"

namespace crossing {

inline std::string fmt12(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string fmt12(std::int64_t v) { return std::to_string(v); }
inline std::string fmt12(std::uint64_t v) { return std::to_string(v); }

/// Ordered key/value pairs written ahead of the data.
class ProvenanceHeader {
public:
    ProvenanceHeader& add(std::string key, std::string value) {
        entries_.emplace_back(std::move(key), std::move(value));
        return *this;
    }
    ProvenanceHeader& add_hash(std::string key, std::uint64_t h) { return add(std::move(key), hex(h)); }

    void write_comments(std::ostream& os) const {
        for (const auto& [k, v] : entries_) os << "# " << k << ": " << v << '\n';
    }

    Json to_json() const {
        Json j = Json::object();
        for (const auto& [k, v] : entries_) j[k] = v;
        return j;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Provenance common to everything derived from one config.
inline ProvenanceHeader config_provenance(const ExperimentConfig& c) {
    ProvenanceHeader h;
    h.add_hash("config", content_hash(c));
    h.add_hash("boundary", content_hash(c.boundary));
    h.add_hash("payoff", content_hash(c.payoff));
    h.add_hash("distribution", content_hash(c.distribution));
    h.add("master_seed", std::to_string(c.master_seed));
    return h;
}

inline void add_report_provenance(ProvenanceHeader& h, const ExpansionReport& r) {
    const auto& p = r.provenance;
    h.add_hash("problem", p.problem);
    h.add_hash("field_u", p.u);
    h.add_hash("field_w", p.w);
    h.add_hash("field_g", p.g);
    h.add_hash("constants", p.constants);
    h.add("truncation_bias", fmt12(p.bias_u) + " " + fmt12(p.bias_w) + " " + fmt12(p.bias_g));
}

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

inline constexpr const char* rate_study_columns =
    "n,mc,mc_stderr,uncorrected,corrected,scaled_resid_corrected,scaled_resid_uncorrected,scaled_stderr";

inline void write_rate_study_csv(std::ostream& os, const RateStudy& study, const ProvenanceHeader& prov = {}) {
    prov.write_comments(os);
    os << rate_study_columns << '\n';
    for (const auto& r : study.rows) {
        os << r.n << ',' << fmt12(r.mc.mean) << ',' << fmt12(r.mc.std_error) << ',' << fmt12(r.uncorrected) << ','
           << fmt12(r.corrected) << ',' << fmt12(r.scaled_resid_corrected) << ','
           << fmt12(r.scaled_resid_uncorrected) << ',' << fmt12(r.scaled_stderr) << '\n';
    }
}

inline void write_overshoot_csv(std::ostream& os, const RateStudy& study, const ProvenanceHeader& prov = {}) {
    prov.write_comments(os);
    os << "n,mean_overshoot,mean_overshoot_stderr,var_overshoot,corr_overshoot_tau,mean_tau,"
          "overshoot_delta,overshoot_delta_stderr,excluded_mass\n";
    for (const auto& r : study.rows) {
        const auto& o = r.overshoot;
        os << r.n << ',' << fmt12(o.mean_overshoot.mean) << ',' << fmt12(o.mean_overshoot.std_error) << ','
           << fmt12(o.var_overshoot) << ',' << fmt12(o.corr_overshoot_tau) << ',' << fmt12(o.mean_tau.mean) << ','
           << fmt12(o.overshoot_delta.mean) << ',' << fmt12(o.overshoot_delta.std_error) << ','
           << fmt12(o.excluded_mass) << '\n';
    }
}

inline void write_en_csv(std::ostream& os, const std::vector<EnRow>& rows, const ProvenanceHeader& prov = {}) {
    prov.write_comments(os);
    os << "t,x,n,e_n,predicted,residual,scaled,u_xxx,envelope\n";
    for (const auto& r : rows) {
        os << fmt12(r.t) << ',' << fmt12(r.x) << ',' << r.n << ',' << fmt12(r.e_n) << ',' << fmt12(r.predicted) << ','
           << fmt12(r.residual) << ',' << fmt12(r.scaled) << ',' << fmt12(r.u_xxx) << ',' << fmt12(r.envelope) << '\n';
    }
}

struct SimulationRow {
    std::int64_t n = 0;
    McEstimate estimate;
    OvershootStats overshoot;
};

inline void write_simulation_csv(std::ostream& os, const std::vector<SimulationRow>& rows,
                                 const ProvenanceHeader& prov = {}) {
    prov.write_comments(os);
    os << "n,paths,seed,mc,mc_stderr,mean_overshoot,mean_tau,corr_overshoot_tau\n";
    for (const auto& r : rows) {
        os << r.n << ',' << r.estimate.paths << ',' << r.estimate.seed << ',' << fmt12(r.estimate.mean) << ','
           << fmt12(r.estimate.std_error) << ',' << fmt12(r.overshoot.mean_overshoot.mean) << ','
           << fmt12(r.overshoot.mean_tau.mean) << ',' << fmt12(r.overshoot.corr_overshoot_tau) << '\n';
    }
}

inline void write_visits_csv(std::ostream& os, std::int64_t n, const VisitSummary& v, const ProvenanceHeader& prov = {}) {
    prov.write_comments(os);
    os << "n,kind,d,mean_count,scaled\n";
    for (std::size_t i = 0; i < v.distances.size(); ++i) {
        os << n << ",near," << fmt12(v.distances[i]) << ',' << fmt12(v.mean_near[i].mean) << ',' << fmt12(v.scaled_near[i])
           << '\n';
    }
    os << n << ",proximity,0," << fmt12(v.proximity.mean) << ',' << fmt12(v.proximity.std_error) << '\n';
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

/// Floats in JSON artifacts go through %.12g as well.
inline Json round12(const Json& j) {
    if (j.is_number_float()) {
        const double v = j.get<double>();
        return std::isfinite(v) ? Json::parse(fmt12(v)) : Json(nullptr);
    }
    if (j.is_object()) {
        Json out = Json::object();
        for (const auto& [k, v] : j.items()) out[k] = round12(v);
        return out;
    }
    if (j.is_array()) {
        Json out = Json::array();
        for (const auto& v : j) out.push_back(round12(v));
        return out;
    }
    return j;
}

inline Json report_json(const ExpansionReport& r, const std::vector<std::int64_t>& n_list, const ProvenanceHeader& prov) {
    Json j = to_json(r);
    Json corrected = Json::array();
    for (auto n : n_list) corrected.push_back({{"n", n}, {"corrected", r.corrected(static_cast<double>(n))}});
    j["corrected"] = corrected;
    j["artifact_provenance"] = prov.to_json();
    return j;
}

inline Json rate_study_json(const RateStudy& study, const ProvenanceHeader& prov) {
    Json rows = Json::array();
    for (const auto& r : study.rows) {
        rows.push_back({{"n", r.n},
                        {"mc", r.mc.mean},
                        {"mc_stderr", r.mc.std_error},
                        {"uncorrected", r.uncorrected},
                        {"corrected", r.corrected},
                        {"scaled_resid_corrected", r.scaled_resid_corrected},
                        {"scaled_resid_uncorrected", r.scaled_resid_uncorrected},
                        {"scaled_stderr", r.scaled_stderr}});
    }
    return {{"paths", study.paths},
            {"master_seed", study.seed},
            {"rows", rows},
            {"trend", {{"kendall_tau", study.trend.kendall_tau},
                       {"signal_points", study.trend.signal_points},
                       {"inconclusive", study.trend.inconclusive},
                       {"pass", study.trend.pass}}},
            {"provenance", prov.to_json()}};
}

inline void write_json(std::ostream& os, const Json& j) { os << round12(j).dump(2) << '\n'; }

// ---------------------------------------------------------------------------
// Output directory
// ---------------------------------------------------------------------------

class OutputDirectory {
public:
    /// Creates the directory if needed; throws Error when it cannot be
    /// created or written.
    explicit OutputDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_)) {
            throw Error("output directory " + dir_.string() + " cannot be created: " + ec.message());
        }
        const auto probe = dir_ / ".write-probe";
        {
            std::ofstream out(probe);
            if (!out) throw Error("output directory " + dir_.string() + " is not writable");
        }
        std::filesystem::remove(probe, ec);
    }

    template <class Writer>
    std::filesystem::path write(const std::string& name, Writer&& writer) const {
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot open " + path.string() + " for writing");
        writer(out);
        out.flush();
        if (!out) throw Error("write to " + path.string() + " failed");
        return path;
    }

    const std::filesystem::path& path() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
};

}  // namespace crossing
