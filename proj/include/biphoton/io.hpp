#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "biphoton/correlator.hpp"
#include "biphoton/errors.hpp"
#include "biphoton/fitter.hpp"
#include "biphoton/simulator.hpp"
#include "biphoton/version.hpp"

namespace biphoton {

using nlohmann::json;

inline std::string fmt(double v) { return detail::format_double(v); }

// ---------------------------------------------------------------------------
// SimConfig <-> JSON. Field names mirror the config structure; parsing is
// partial (absent fields keep the values already in `base`).
// ---------------------------------------------------------------------------

inline json sim_config_to_json(const SimConfig& cfg) {
    json j;
    j["params"] = {{"gamma_ratio_delta", cfg.params.gamma_ratio_delta},
                   {"f", cfg.params.f},
                   {"chi", cfg.params.chi},
                   {"delta_prime_ratio", cfg.params.delta_prime_ratio}};
    j["gamma_hz"] = cfg.gamma_hz;
    j["trial_count"] = cfg.trial_count;
    j["trial_length_s"] = cfg.trial_length_s;
    j["pair_rate_hz"] = cfg.pair_rate_hz;
    j["background_rate_hz"] = cfg.background_rate_hz;
    j["thermal_coherence_s"] = cfg.thermal_coherence_s;
    j["envelope"] = {{"rise_time_s", cfg.envelope.rise_time_s},
                     {"decay_time_s", cfg.envelope.decay_time_s}};
    j["detector"] = {{"efficiency", cfg.detector.efficiency},
                     {"dark_rate_hz", cfg.detector.dark_rate_hz},
                     {"dead_time_s", cfg.detector.dead_time_s},
                     {"splitter_ratio", cfg.detector.splitter_ratio}};
    j["kernel_tau_max_gamma"] = cfg.kernel_tau_max_gamma;
    j["kernel_table_size"] = cfg.kernel_table_size;
    j["resolution_ps"] = cfg.resolution_ps;
    j["seed"] = cfg.seed;
    j["max_records"] = cfg.max_records;
    return j;
}

namespace detail {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            fail(errc::bad_config, std::string("config field '") + key + "' has the wrong type");
        }
    }
}

/// Accepts either a scalar (broadcast to all four channels) or an array of 4.
inline void read_per_channel(const json& j, const char* key, std::array<double, 4>& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (v.is_number()) {
        out.fill(v.get<double>());
    } else if (v.is_array() && v.size() == 4) {
        for (std::size_t i = 0; i < 4; ++i) out[i] = v.at(i).get<double>();
    } else {
        fail(errc::bad_config,
             std::string("config field '") + key + "' must be a number or an array of 4");
    }
}

}  // namespace detail

inline SimConfig sim_config_from_json(const json& j, SimConfig base = {}) {
    require(j.is_object(), errc::bad_config, "simulation config must be a JSON object");
    if (j.contains("params")) {
        const json& p = j.at("params");
        detail::read_field(p, "gamma_ratio_delta", base.params.gamma_ratio_delta);
        detail::read_field(p, "f", base.params.f);
        detail::read_field(p, "chi", base.params.chi);
        detail::read_field(p, "delta_prime_ratio", base.params.delta_prime_ratio);
    }
    detail::read_field(j, "gamma_hz", base.gamma_hz);
    detail::read_field(j, "trial_count", base.trial_count);
    detail::read_field(j, "trial_length_s", base.trial_length_s);
    detail::read_field(j, "pair_rate_hz", base.pair_rate_hz);
    detail::read_field(j, "background_rate_hz", base.background_rate_hz);
    detail::read_field(j, "thermal_coherence_s", base.thermal_coherence_s);
    if (j.contains("envelope")) {
        const json& e = j.at("envelope");
        detail::read_field(e, "rise_time_s", base.envelope.rise_time_s);
        detail::read_field(e, "decay_time_s", base.envelope.decay_time_s);
    }
    if (j.contains("detector")) {
        const json& d = j.at("detector");
        detail::read_per_channel(d, "efficiency", base.detector.efficiency);
        detail::read_per_channel(d, "dark_rate_hz", base.detector.dark_rate_hz);
        detail::read_per_channel(d, "dead_time_s", base.detector.dead_time_s);
        detail::read_field(d, "splitter_ratio", base.detector.splitter_ratio);
    }
    detail::read_field(j, "kernel_tau_max_gamma", base.kernel_tau_max_gamma);
    detail::read_field(j, "kernel_table_size", base.kernel_table_size);
    detail::read_field(j, "resolution_ps", base.resolution_ps);
    detail::read_field(j, "seed", base.seed);
    detail::read_field(j, "max_records", base.max_records);
    return base;
}

// ---------------------------------------------------------------------------
// Provenance: every emitted file carries the tool version and the resolved
// configuration that produced it, so a run can be reproduced byte for byte.
// ---------------------------------------------------------------------------

inline json make_provenance(const json& config) {
    return json{{"tool", "biphoton"}, {"version", version}, {"config", config}};
}

inline void write_csv_provenance(std::ostream& out, const json& config) {
    out << "# biphoton " << version << "\n";
    out << "# provenance: " << make_provenance(config).dump() << "\n";
}

// ---------------------------------------------------------------------------
// Correlation curves as CSV.
// ---------------------------------------------------------------------------

inline void write_curve_csv(std::ostream& out, const CorrelationCurve& curve,
                            const json& config) {
    write_csv_provenance(out, config);
    out << "tau_s,counts,accidental,g,stderr,valid\n";
    for (const auto& bin : curve.bins) {
        out << fmt(bin.tau_center_s) << ',' << bin.coincidence_count << ','
            << fmt(bin.accidental_norm) << ',' << fmt(bin.g_value) << ',' << fmt(bin.g_stderr)
            << ',' << (bin.valid ? 1 : 0) << '\n';
    }
    require(out.good(), errc::io_failure, "failed writing curve CSV");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

inline double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        require(pos == s.size(), errc::invalid_argument,
                std::string("bad numeric field for ") + what + ": '" + s + "'");
        return v;
    } catch (const std::exception&) {
        fail(errc::invalid_argument,
             std::string("bad numeric field for ") + what + ": '" + s + "'");
    }
}

}  // namespace detail

/// Reads a curve back from the CSV format emitted by write_curve_csv. The
/// request is reconstructed from the delay grid (bin width and range), which
/// is all the fitter needs.
inline CorrelationCurve read_curve_csv(std::istream& in) {
    CorrelationCurve curve;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            require(line.rfind("tau_s,", 0) == 0, errc::invalid_argument,
                    "curve CSV: missing column header");
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv_line(line);
        require(fields.size() >= 6, errc::invalid_argument, "curve CSV: short row");
        BinStat bin;
        bin.tau_center_s = detail::parse_double(fields[0], "tau_s");
        bin.coincidence_count =
            static_cast<std::uint64_t>(detail::parse_double(fields[1], "counts"));
        bin.accidental_norm = detail::parse_double(fields[2], "accidental");
        bin.g_value = detail::parse_double(fields[3], "g");
        bin.g_stderr = detail::parse_double(fields[4], "stderr");
        bin.valid = detail::parse_double(fields[5], "valid") != 0.0;
        curve.bins.push_back(bin);
    }
    require(curve.bins.size() >= 3 && curve.bins.size() % 2 == 1, errc::invalid_argument,
            "curve CSV: expected an odd number of delay bins");
    const double w = curve.bins[1].tau_center_s - curve.bins[0].tau_center_s;
    require(w > 0, errc::invalid_argument, "curve CSV: delay grid not increasing");
    curve.request.bin_width_s = w;
    curve.request.tau_range_s = curve.bins.back().tau_center_s;
    return curve;
}

// ---------------------------------------------------------------------------
// Structured results as JSON.
// ---------------------------------------------------------------------------

inline json cs_result_to_json(const CsResult& cs, const json& config) {
    json bins = json::array();
    for (const auto& rb : cs.r_curve) {
        bins.push_back({{"tau_s", rb.tau_s},
                        {"r", rb.r},
                        {"stderr", rb.stderr_},
                        {"valid", rb.valid}});
    }
    return json{{"provenance", make_provenance(config)},
                {"r_max", cs.r_max},
                {"r_max_stderr", cs.r_max_stderr},
                {"tau_at_max_s", cs.tau_at_max_s},
                {"violation_sigma", cs.violation_sigma},
                {"g11_zero", cs.g11_zero},
                {"g22_zero", cs.g22_zero},
                {"r_curve", bins}};
}

inline json fit_result_to_json(const FitResult& fr, const json& config) {
    return json{{"provenance", make_provenance(config)},
                {"params",
                 {{"f", fr.params.f},
                  {"chi", fr.params.chi},
                  {"delta_prime_ratio", fr.params.delta_prime_ratio},
                  {"gamma_ratio_delta", fr.params.gamma_ratio_delta}}},
                {"stderr",
                 {{"f", fr.stderr_[0]}, {"chi", fr.stderr_[1]}, {"delta_prime_ratio", fr.stderr_[2]}}},
                {"covariance", fr.covariance},
                {"chi_square", fr.chi_square},
                {"degrees_of_freedom", fr.degrees_of_freedom},
                {"converged", fr.converged},
                {"iterations", fr.iterations}};
}

inline json scan_manifest_to_json(const ScanManifest& manifest, const json& config) {
    json entries = json::array();
    for (const auto& e : manifest.entries) {
        entries.push_back({{"value", e.value},
                           {"seed", e.seed},
                           {"file", e.file},
                           {"record_count", e.record_count}});
    }
    return json{{"provenance", make_provenance(config)},
                {"axis", manifest.axis},
                {"entries", entries}};
}

}  // namespace biphoton
