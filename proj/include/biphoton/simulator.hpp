#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "biphoton/channel.hpp"
#include "biphoton/errors.hpp"
#include "biphoton/model.hpp"
#include "biphoton/pair_kernel.hpp"
#include "biphoton/parallel.hpp"
#include "biphoton/rng.hpp"
#include "biphoton/timetag.hpp"

namespace biphoton {

namespace detail {

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace detail

/// Trial-scale rate envelope r(t) = (1 - e^{-t/rise}) e^{-t/decay}, normalized
/// to peak 1 over the trial. Phenomenological stand-in for the slow population
/// dynamics during a trial.
struct RateEnvelope {
    double rise_time_s = 5e-6;
    double decay_time_s = 1e-3;

    void validate() const {
        require(rise_time_s > 0 && decay_time_s > 0, errc::bad_config,
                "envelope times must be positive");
    }
};

class NormalizedEnvelope {
  public:
    NormalizedEnvelope(const RateEnvelope& env, double trial_length_s)
        : rise_(env.rise_time_s), decay_(env.decay_time_s) {
        env.validate();
        const double t_peak = rise_ * std::log1p(decay_ / rise_);
        peak_ = raw(std::min(t_peak, trial_length_s));
        if (peak_ <= 0.0) peak_ = 1.0;
    }

    double operator()(double t) const {
        return std::clamp(raw(t) / peak_, 0.0, 1.0);
    }

  private:
    double raw(double t) const { return -std::expm1(-t / rise_) * std::exp(-t / decay_); }

    double rise_;
    double decay_;
    double peak_;
};

struct DetectorConfig {
    std::array<double, 4> efficiency{1.0, 1.0, 1.0, 1.0};
    std::array<double, 4> dark_rate_hz{0.0, 0.0, 0.0, 0.0};
    std::array<double, 4> dead_time_s{0.0, 0.0, 0.0, 0.0};
    double splitter_ratio = 0.5;  ///< probability of routing to arm 'a', both fields

    void validate() const {
        for (double e : efficiency)
            require(e >= 0.0 && e <= 1.0, errc::bad_config, "efficiency must be in [0, 1]");
        for (double r : dark_rate_hz)
            require(r >= 0.0, errc::bad_config, "dark rate must be >= 0");
        for (double d : dead_time_s)
            require(d >= 0.0, errc::bad_config, "dead time must be >= 0");
        require(splitter_ratio > 0.0 && splitter_ratio < 1.0, errc::bad_config,
                "splitter ratio must be in (0, 1)");
    }
};

struct SimConfig {
    ModelParams params;
    double gamma_hz = 6.07e6;        ///< linewidth / 2 pi; converts delay units to seconds
    std::uint64_t trial_count = 1000;
    double trial_length_s = 1e-3;
    double pair_rate_hz = 0.0;        ///< correlated-pair rate at envelope peak
    double background_rate_hz = 0.0;  ///< per-field uncorrelated rate at envelope peak
    double thermal_coherence_s = 5e-9;
    RateEnvelope envelope;
    DetectorConfig detector;
    double kernel_tau_max_gamma = 0.0;  ///< 0 selects the 30 ns equivalent
    std::size_t kernel_table_size = 4096;
    std::uint64_t resolution_ps = 100;
    std::uint64_t seed = 1;
    std::uint64_t max_records = 150'000'000;

    double gamma_angular() const { return 2.0 * std::numbers::pi * gamma_hz; }
    double resolution_s() const { return static_cast<double>(resolution_ps) * 1e-12; }
    std::uint64_t trial_length_units() const {
        return static_cast<std::uint64_t>(std::llround(trial_length_s / resolution_s()));
    }
    double kernel_tau_max() const {
        return kernel_tau_max_gamma > 0.0 ? kernel_tau_max_gamma : gamma_angular() * 30e-9;
    }

    void validate() const {
        params.validate();
        detector.validate();
        require(gamma_hz > 0.0, errc::bad_config, "gamma_hz must be positive");
        require(trial_count >= 1, errc::bad_config, "trial count must be at least 1");
        require(trial_count <= std::numeric_limits<std::uint32_t>::max(), errc::bad_config,
                "trial count exceeds format limit");
        require(trial_length_s > 0.0, errc::bad_config, "trial length must be positive");
        require(pair_rate_hz >= 0.0 && background_rate_hz >= 0.0, errc::bad_config,
                "rates must be >= 0");
        require(thermal_coherence_s > 0.0, errc::bad_config,
                "thermal coherence time must be positive");
        require(resolution_ps > 0, errc::bad_config, "resolution must be positive");
        require(trial_length_units() >= 1, errc::bad_config,
                "trial shorter than one resolution slot");
        require(kernel_table_size >= 1000, errc::bad_config, "kernel table too small");
        if (pair_rate_hz > 0.0) {
            // Keep the truncated kernel tail below the percent level.
            require(kernel_tau_max() > 3.0 / params.chi, errc::bad_config,
                    "kernel truncation must exceed 3/chi in dimensionless delay");
        }
        envelope.validate();
    }
};

namespace detail {

/// Mean of r(t) and r(t)^2 over the trial, for record-count estimates.
inline std::pair<double, double> envelope_moments(const NormalizedEnvelope& env,
                                                  double trial_length_s) {
    constexpr int n = 1024;
    double m1 = 0.0;
    double m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = (static_cast<double>(i) + 0.5) / n * trial_length_s;
        const double r = env(t);
        m1 += r;
        m2 += r * r;
    }
    return {m1 / n, m2 / n};
}

struct TrialTally {
    std::uint64_t pairs = 0;       ///< pairs kept inside the trial window
    std::uint64_t background = 0;  ///< background photons generated, both fields
};

struct TrialScratch {
    std::vector<double> field_photons[2];
    std::vector<double> channel_times[4];
};

/// Generates one trial into `out` (records sorted by (t, channel), slots
/// deduplicated per channel after quantization).
inline TrialTally generate_trial(const SimConfig& cfg, const NormalizedEnvelope& env,
                                 const PairKernel* kernel, std::uint32_t trial,
                                 std::vector<TimeTagRecord>& out, TrialScratch& scratch) {
    Xoshiro256 rng(derive_stream_seed(cfg.seed, trial));
    const double T = cfg.trial_length_s;
    const double gamma = cfg.gamma_angular();
    TrialTally tally;

    auto& field1 = scratch.field_photons[0];
    auto& field2 = scratch.field_photons[1];
    field1.clear();
    field2.clear();

    // (a) correlated pairs: inhomogeneous Poisson process with rate
    // pair_rate * r(t)^2, generated by thinning at the peak rate. Joint
    // processes scale as the square of the single-photon envelope, which is
    // what keeps normalized correlations independent of the envelope level.
    // Each pair is a field-1 photon at t and a field-2 photon at t + tau with
    // tau drawn from the delay kernel; pairs whose partner falls outside the
    // trial are dropped entirely.
    if (cfg.pair_rate_hz > 0.0 && kernel != nullptr) {
        double t = 0.0;
        const double mean_gap = 1.0 / cfg.pair_rate_hz;
        for (;;) {
            t += rng.exponential(mean_gap);
            if (t >= T) break;
            const double r = env(t);
            if (rng.uniform01() >= r * r) continue;
            const double tau = kernel->sample(rng) / gamma;
            const double t2 = t + tau;
            if (t2 < 0.0 || t2 >= T) continue;
            field1.push_back(t);
            field2.push_back(t2);
            ++tally.pairs;
        }
    }

    // (b) per-field thermal background: doubly stochastic Poisson process with
    // piecewise-constant intensity over coherence-time slices, each slice's
    // intensity drawn from an exponential with mean background_rate * r(t).
    // Exponential intensities give an equal-time autocorrelation of 2 within a
    // field and 1 across fields.
    if (cfg.background_rate_hz > 0.0) {
        for (auto& photons : scratch.field_photons) {
            const std::size_t before = photons.size();
            const double slice_len = cfg.thermal_coherence_s;
            for (double start = 0.0; start < T; start += slice_len) {
                const double end = std::min(start + slice_len, T);
                const double mean_intensity =
                    cfg.background_rate_hz * env(0.5 * (start + end));
                if (mean_intensity <= 0.0) continue;
                const double intensity = rng.exponential(mean_intensity);
                if (intensity <= 0.0) continue;
                double t = start;
                const double mean_gap = 1.0 / intensity;
                for (;;) {
                    t += rng.exponential(mean_gap);
                    if (t >= end) break;
                    photons.push_back(t);
                }
            }
            tally.background += photons.size() - before;
        }
    }

    // (c) arm routing, (d) efficiency thinning and dark counts.
    for (auto& times : scratch.channel_times) times.clear();
    for (int field = 0; field < 2; ++field) {
        for (double t : scratch.field_photons[field]) {
            const int arm = rng.uniform01() < cfg.detector.splitter_ratio ? 0 : 1;
            const int ch = field * 2 + arm;
            if (rng.uniform01() < cfg.detector.efficiency[ch])
                scratch.channel_times[ch].push_back(t);
        }
    }
    for (int ch = 0; ch < 4; ++ch) {
        const double dark = cfg.detector.dark_rate_hz[ch];
        if (dark <= 0.0) continue;
        double t = 0.0;
        const double mean_gap = 1.0 / dark;
        for (;;) {
            t += rng.exponential(mean_gap);
            if (t >= T) break;
            scratch.channel_times[ch].push_back(t);
        }
    }

    // Dead-time removal on the time-sorted per-channel sequence, then
    // quantization to resolution slots; events landing in an occupied slot
    // merge into one count.
    const double res = cfg.resolution_s();
    const std::uint64_t length_units = cfg.trial_length_units();
    out.clear();
    for (int ch = 0; ch < 4; ++ch) {
        auto& times = scratch.channel_times[ch];
        std::sort(times.begin(), times.end());
        const double dead = cfg.detector.dead_time_s[ch];
        double last_accepted = -1.0;
        std::uint64_t last_slot = std::numeric_limits<std::uint64_t>::max();
        for (double t : times) {
            if (dead > 0.0 && last_accepted >= 0.0 && t - last_accepted < dead) continue;
            last_accepted = t;
            auto slot = static_cast<std::uint64_t>(t / res);
            if (slot >= length_units) slot = length_units - 1;
            if (slot == last_slot) continue;
            last_slot = slot;
            out.push_back(TimeTagRecord{trial, static_cast<Channel>(ch), slot});
        }
    }
    std::sort(out.begin(), out.end(), record_less);
    return tally;
}

}  // namespace detail

/// Expected record count before thinning; used for the memory-cap check.
inline double estimate_record_count(const SimConfig& cfg) {
    const NormalizedEnvelope env(cfg.envelope, cfg.trial_length_s);
    const auto [m1, m2] = detail::envelope_moments(env, cfg.trial_length_s);
    double per_trial = 2.0 * cfg.pair_rate_hz * m2 * cfg.trial_length_s +
                       2.0 * cfg.background_rate_hz * m1 * cfg.trial_length_s;
    for (double dark : cfg.detector.dark_rate_hz) per_trial += dark * cfg.trial_length_s;
    return per_trial * static_cast<double>(cfg.trial_count);
}

struct SimResult {
    TagDataset dataset;
    std::uint64_t generated_pairs = 0;
    std::uint64_t generated_background = 0;
};

/// Generates a synthetic dataset. A pure function of the config: trials are
/// generated from per-trial derived seeds and assembled in trial order, so the
/// result is bit-identical for any thread count.
inline SimResult simulate_full(const SimConfig& cfg, unsigned threads = 1) {
    cfg.validate();
    const double estimate = estimate_record_count(cfg);
    require(estimate <= static_cast<double>(cfg.max_records), errc::record_budget_exceeded,
            "expected about " + std::to_string(static_cast<std::uint64_t>(estimate)) +
                " records, exceeding the cap of " + std::to_string(cfg.max_records));

    const NormalizedEnvelope env(cfg.envelope, cfg.trial_length_s);
    PairKernel kernel;
    const bool with_pairs = cfg.pair_rate_hz > 0.0;
    if (with_pairs)
        kernel = PairKernel::build(cfg.params, cfg.kernel_tau_max(), cfg.kernel_table_size);

    const auto n_trials = static_cast<std::size_t>(cfg.trial_count);
    std::vector<std::vector<TimeTagRecord>> per_trial(n_trials);
    std::vector<detail::TrialTally> tallies(n_trials);

    parallel_for(n_trials, threads, [&](std::size_t i) {
        thread_local detail::TrialScratch scratch;
        tallies[i] = detail::generate_trial(cfg, env, with_pairs ? &kernel : nullptr,
                                            static_cast<std::uint32_t>(i), per_trial[i], scratch);
    });

    SimResult result;
    TagDataset& ds = result.dataset;
    ds.resolution_ps = cfg.resolution_ps;
    ds.trial_length_units = cfg.trial_length_units();
    ds.trial_count = cfg.trial_count;
    std::size_t total = 0;
    for (const auto& tr : per_trial) total += tr.size();
    ds.records.reserve(total);
    for (const auto& tr : per_trial) ds.records.insert(ds.records.end(), tr.begin(), tr.end());
    for (const auto& tally : tallies) {
        result.generated_pairs += tally.pairs;
        result.generated_background += tally.background;
    }

    ds.metadata["tool"] = "biphoton";
    ds.metadata["seed"] = std::to_string(cfg.seed);
    ds.metadata["gamma_hz"] = detail::format_double(cfg.gamma_hz);
    ds.metadata["detuning_gamma"] = detail::format_double(cfg.params.gamma_ratio_delta);
    ds.metadata["f"] = detail::format_double(cfg.params.f);
    ds.metadata["chi"] = detail::format_double(cfg.params.chi);
    ds.metadata["delta_prime_gamma"] = detail::format_double(cfg.params.delta_prime_ratio);
    ds.metadata["pair_rate_hz"] = detail::format_double(cfg.pair_rate_hz);
    ds.metadata["background_rate_hz"] = detail::format_double(cfg.background_rate_hz);
    ds.metadata["generated_pairs"] = std::to_string(result.generated_pairs);
    return result;
}

inline TagDataset simulate(const SimConfig& cfg, unsigned threads = 1) {
    return simulate_full(cfg, threads).dataset;
}

/// Scan axes. Plain axes replace one config field per value. "rate_scale" is
/// the pump-strength analogue: it multiplies the background rate by the value
/// and the pair rate by its square, so singles and joint rates move together
/// the way they do when the source strength changes.
inline SimConfig apply_scan_axis(const SimConfig& base, const std::string& axis, double value) {
    SimConfig cfg = base;
    if (axis == "delta_prime_ratio") {
        cfg.params.delta_prime_ratio = value;
    } else if (axis == "pair_rate_hz") {
        cfg.pair_rate_hz = value;
    } else if (axis == "background_rate_hz") {
        cfg.background_rate_hz = value;
    } else if (axis == "f") {
        cfg.params.f = value;
    } else if (axis == "chi") {
        cfg.params.chi = value;
    } else if (axis == "rate_scale") {
        cfg.background_rate_hz = base.background_rate_hz * value;
        cfg.pair_rate_hz = base.pair_rate_hz * value * value;
    } else {
        fail(errc::unknown_axis, "unknown scan axis '" + axis + "'");
    }
    return cfg;
}

struct ScanEntry {
    double value = 0.0;
    std::uint64_t seed = 0;
    std::string file;
    std::uint64_t record_count = 0;
};

struct ScanManifest {
    std::string axis;
    std::vector<ScanEntry> entries;
};

/// One dataset per axis value, written to out_dir. Dataset i uses seed
/// base.seed ^ i, so a single-value scan reproduces simulate(base) exactly.
inline ScanManifest scan(const SimConfig& base, const std::string& axis,
                         const std::vector<double>& values, const std::filesystem::path& out_dir,
                         unsigned threads = 1) {
    for (double v : values)
        require(std::isfinite(v), errc::invalid_argument, "scan values must be finite");
    std::filesystem::create_directories(out_dir);

    ScanManifest manifest;
    manifest.axis = axis;
    for (std::size_t i = 0; i < values.size(); ++i) {
        SimConfig cfg = apply_scan_axis(base, axis, values[i]);
        cfg.seed = base.seed ^ static_cast<std::uint64_t>(i);
        const TagDataset ds = simulate(cfg, threads);

        ScanEntry entry;
        entry.value = values[i];
        entry.seed = cfg.seed;
        entry.file = "scan_" + axis + "_" + std::to_string(i) + ".ttag";
        entry.record_count = ds.records.size();
        std::ofstream out(out_dir / entry.file, std::ios::binary);
        require(out.good(), errc::io_failure, "cannot open " + entry.file + " for writing");
        write_dataset(ds, out);
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

}  // namespace biphoton
