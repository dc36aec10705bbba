#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "biphoton/channel.hpp"
#include "biphoton/errors.hpp"
#include "biphoton/timetag.hpp"

namespace biphoton {

/// Half-open slot interval [begin, end) within a trial.
struct Window {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
    std::uint64_t length() const { return end - begin; }
};

/// Parameters of a correlation estimate. Negative window fields select the
/// full-trial default (window = whole trial, centered at the midpoint).
struct CorrelationRequest {
    Channel channel_a = Channel::d1a;
    Channel channel_b = Channel::d2b;
    double window_center_s = -1.0;
    double window_T_s = -1.0;
    double tau_range_s = 30e-9;
    double bin_width_s = 0.5e-9;
};

struct SinglesEstimate {
    double p = 0.0;           ///< detection probability per resolution slot
    std::uint64_t count = 0;  ///< raw tag count over (window x trials)
};

struct BinStat {
    double tau_center_s = 0.0;
    std::uint64_t coincidence_count = 0;
    double accidental_norm = 0.0;  ///< expected accidental count for this bin
    double g_value = 0.0;
    double g_stderr = 0.0;
    bool valid = false;
};

struct CorrelationCurve {
    CorrelationRequest request;
    Window window;
    SinglesEstimate singles_a;
    std::vector<BinStat> bins;  ///< bins k = -K..K in order

    const BinStat& at_tau_zero() const { return bins[bins.size() / 2]; }
};

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    const std::int64_t r = a % b;
    if (r != 0 && ((r < 0) != (b < 0))) --q;
    return q;
}

/// Request resolved to slot units. Bin k covers signed slot differences
/// [k*bws - fl, k*bws + fh] with fl = floor(bws/2), fh = bws - 1 - fl, i.e.
/// bins centered on multiples of the bin width, half-open on the right.
struct ResolvedRequest {
    std::int64_t bws = 1;   ///< bin width in slots
    std::int64_t k_max = 0; ///< bins run k = -k_max .. +k_max
    std::int64_t fl = 0;
    std::int64_t fh = 0;
    Window window;
    std::uint64_t trial_length = 0;
    std::uint64_t trial_count = 0;
    double resolution_s = 0.0;

    std::int64_t delta_min() const { return -k_max * bws - fl; }
    std::int64_t delta_max() const { return k_max * bws + fh; }
    std::size_t bin_count() const { return static_cast<std::size_t>(2 * k_max + 1); }
    std::int64_t bin_of(std::int64_t delta) const { return floor_div(delta + fl, bws); }
    double tau_center_s(std::int64_t k) const {
        return static_cast<double>(k * bws) * resolution_s;
    }
    /// Number of (slot, slot + delta) pairs with slot in the window and both
    /// slots inside the trial, summed over the slot differences of bin k.
    /// This is the edge-exact pair count entering the accidental estimate.
    double pair_slot_count(std::int64_t k) const {
        const auto w0 = static_cast<std::int64_t>(window.begin);
        const auto w1 = static_cast<std::int64_t>(window.end);
        const auto len = static_cast<std::int64_t>(trial_length);
        double total = 0.0;
        for (std::int64_t d = k * bws - fl; d <= k * bws + fh; ++d) {
            const std::int64_t lo = std::max(w0, -d);
            const std::int64_t hi = std::min(w1, len - d);
            if (hi > lo) total += static_cast<double>(hi - lo);
        }
        return total;
    }
    /// Window of bin k's shifted singles estimate: the request window moved by
    /// the bin center, clipped to the trial.
    Window shifted_window(std::int64_t k) const {
        const std::int64_t shift = k * bws;
        const auto len = static_cast<std::int64_t>(trial_length);
        const std::int64_t lo =
            std::clamp(static_cast<std::int64_t>(window.begin) + shift, std::int64_t{0}, len);
        const std::int64_t hi =
            std::clamp(static_cast<std::int64_t>(window.end) + shift, std::int64_t{0}, len);
        return Window{static_cast<std::uint64_t>(lo), static_cast<std::uint64_t>(std::max(lo, hi))};
    }
};

inline std::int64_t round_ratio(double value, double unit) {
    return static_cast<std::int64_t>(std::llround(value / unit));
}

inline ResolvedRequest resolve(const TagDataset& ds, const CorrelationRequest& req) {
    ResolvedRequest r;
    r.resolution_s = ds.resolution_s();
    r.trial_length = ds.trial_length_units;
    r.trial_count = ds.trial_count;

    require(req.bin_width_s > 0, errc::invalid_argument, "bin width must be positive");
    r.bws = round_ratio(req.bin_width_s, r.resolution_s);
    require(r.bws >= 1, errc::invalid_argument, "bin width below dataset resolution");
    require(std::fabs(static_cast<double>(r.bws) * r.resolution_s - req.bin_width_s) <=
                1e-6 * req.bin_width_s,
            errc::invalid_argument, "bin width is not a multiple of the dataset resolution");
    r.fl = r.bws / 2;
    r.fh = r.bws - 1 - r.fl;

    require(req.tau_range_s > 0, errc::invalid_argument, "tau range must be positive");
    r.k_max = round_ratio(req.tau_range_s, req.bin_width_s);
    require(r.k_max >= 1, errc::invalid_argument, "tau range below one bin");
    require(std::fabs(static_cast<double>(r.k_max) * req.bin_width_s - req.tau_range_s) <=
                1e-6 * req.tau_range_s,
            errc::invalid_argument, "tau range is not a multiple of the bin width");

    const double trial_len_s = ds.trial_length_s();
    const double center = req.window_center_s < 0 ? 0.5 * trial_len_s : req.window_center_s;
    const double width = req.window_T_s < 0 ? trial_len_s : req.window_T_s;
    require(width > 0, errc::invalid_argument, "window length must be positive");
    const std::int64_t wlen = std::max<std::int64_t>(1, round_ratio(width, r.resolution_s));
    const std::int64_t w0 = round_ratio(center - 0.5 * width, r.resolution_s);
    require(w0 >= 0 && w0 + wlen <= static_cast<std::int64_t>(r.trial_length),
            errc::invalid_argument, "window extends outside the trial");
    r.window = Window{static_cast<std::uint64_t>(w0), static_cast<std::uint64_t>(w0 + wlen)};
    return r;
}

/// Per-trial slices of the record array (records are sorted by trial).
template <typename Fn>
void for_each_trial(const TagDataset& ds, Fn&& fn) {
    const auto& recs = ds.records;
    std::size_t i = 0;
    while (i < recs.size()) {
        std::size_t j = i;
        const std::uint32_t trial = recs[i].trial;
        while (j < recs.size() && recs[j].trial == trial) ++j;
        fn(trial, i, j);
        i = j;
    }
}

inline std::uint64_t count_in_window(const std::vector<std::uint64_t>& times, const Window& w) {
    const auto lo = std::lower_bound(times.begin(), times.end(), w.begin);
    const auto hi = std::lower_bound(times.begin(), times.end(), w.end);
    return static_cast<std::uint64_t>(hi - lo);
}

struct SweepAccumulator {
    std::vector<std::uint64_t> coincidences;  // per bin
    std::uint64_t count_a = 0;
    std::vector<std::uint64_t> count_b;       // per shifted bin window
};

/// Core per-trial sweep: counts coincidences (tag on A inside the window,
/// tag on B in the same trial, slot difference within range) and the singles
/// entering the normalization. Two-pointer over the sorted per-trial arrays.
inline void sweep_trial(const ResolvedRequest& r, const std::vector<std::uint64_t>& a_times,
                        const std::vector<std::uint64_t>& b_times, bool same_channel,
                        SweepAccumulator& acc) {
    const std::int64_t dmin = r.delta_min();
    const std::int64_t dmax = r.delta_max();

    const auto a_begin = std::lower_bound(a_times.begin(), a_times.end(), r.window.begin);
    const auto a_end = std::lower_bound(a_times.begin(), a_times.end(), r.window.end);
    acc.count_a += static_cast<std::uint64_t>(a_end - a_begin);

    std::size_t lo = 0;
    for (auto it = a_begin; it != a_end; ++it) {
        const auto a = static_cast<std::int64_t>(*it);
        while (lo < b_times.size() && static_cast<std::int64_t>(b_times[lo]) < a + dmin) ++lo;
        for (std::size_t j = lo; j < b_times.size(); ++j) {
            const auto b = static_cast<std::int64_t>(b_times[j]);
            if (b > a + dmax) break;
            if (same_channel && b == a) continue;  // distinct tags cannot share a slot
            const std::int64_t k = r.bin_of(b - a);
            ++acc.coincidences[static_cast<std::size_t>(k + r.k_max)];
        }
    }

    for (std::int64_t k = -r.k_max; k <= r.k_max; ++k) {
        const Window w = r.shifted_window(k);
        if (w.length() == 0) continue;
        acc.count_b[static_cast<std::size_t>(k + r.k_max)] += count_in_window(b_times, w);
    }
}

struct SweepResult {
    ResolvedRequest resolved;
    SweepAccumulator acc;
};

inline SweepResult run_sweep(const TagDataset& ds, const CorrelationRequest& req) {
    SweepResult out;
    out.resolved = resolve(ds, req);
    out.acc.coincidences.assign(out.resolved.bin_count(), 0);
    out.acc.count_b.assign(out.resolved.bin_count(), 0);

    const bool same_channel = req.channel_a == req.channel_b;
    std::vector<std::uint64_t> a_times, b_times;
    for_each_trial(ds, [&](std::uint32_t, std::size_t begin, std::size_t end) {
        a_times.clear();
        b_times.clear();
        for (std::size_t i = begin; i < end; ++i) {
            const auto& rec = ds.records[i];
            if (rec.channel == req.channel_a) a_times.push_back(rec.t);
            if (rec.channel == req.channel_b) b_times.push_back(rec.t);
        }
        sweep_trial(out.resolved, a_times, same_channel ? a_times : b_times, same_channel,
                    out.acc);
    });
    return out;
}

}  // namespace detail

/// Raw coincidence histogram: per-bin counts over signed delay bins
/// k = -k_max .. k_max, bin k covering [k*w - w/2, k*w + w/2).
struct Histogram {
    std::int64_t k_max = 0;
    std::int64_t bin_width_slots = 1;
    std::vector<std::uint64_t> counts;

    std::uint64_t at(std::int64_t k) const {
        return counts[static_cast<std::size_t>(k + k_max)];
    }
    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
};

/// Probability per resolution slot of a tag on `channel` within the window,
/// averaged over all trials.
inline SinglesEstimate singles_probability(const TagDataset& ds, Channel channel,
                                           const Window& window) {
    require(window.end <= ds.trial_length_units && window.begin < window.end,
            errc::invalid_argument, "singles window outside trial");
    std::uint64_t count = 0;
    for (const auto& rec : ds.records) {
        if (rec.channel == channel && rec.t >= window.begin && rec.t < window.end) ++count;
    }
    const double slots =
        static_cast<double>(ds.trial_count) * static_cast<double>(window.length());
    return SinglesEstimate{static_cast<double>(count) / slots, count};
}

inline Window window_from_seconds(const TagDataset& ds, double center_s, double T_s) {
    CorrelationRequest req;
    req.window_center_s = center_s;
    req.window_T_s = T_s;
    return detail::resolve(ds, req).window;
}

/// Coincidence counts for the request, exactly equal to the brute-force count
/// over all same-trial tag pairs (tag_a in the window, slot difference in
/// range).
inline Histogram coincidence_histogram(const TagDataset& ds, const CorrelationRequest& req) {
    auto sweep = detail::run_sweep(ds, req);
    return Histogram{sweep.resolved.k_max, sweep.resolved.bws, std::move(sweep.acc.coincidences)};
}

namespace detail {

inline CorrelationCurve make_curve(const CorrelationRequest& req, const ResolvedRequest& r,
                                   const SweepAccumulator& acc) {
    CorrelationCurve curve;
    curve.request = req;
    curve.window = r.window;
    const double window_slots =
        static_cast<double>(r.trial_count) * static_cast<double>(r.window.length());
    curve.singles_a = SinglesEstimate{static_cast<double>(acc.count_a) / window_slots,
                                      acc.count_a};
    curve.bins.resize(r.bin_count());
    for (std::int64_t k = -r.k_max; k <= r.k_max; ++k) {
        const auto idx = static_cast<std::size_t>(k + r.k_max);
        BinStat& bin = curve.bins[idx];
        bin.tau_center_s = r.tau_center_s(k);
        bin.coincidence_count = acc.coincidences[idx];

        const Window wb = r.shifted_window(k);
        const double pairs = r.pair_slot_count(k);
        if (wb.length() == 0 || pairs <= 0.0) continue;
        const double pb = static_cast<double>(acc.count_b[idx]) /
                          (static_cast<double>(r.trial_count) * static_cast<double>(wb.length()));
        const double norm =
            curve.singles_a.p * pb * static_cast<double>(r.trial_count) * pairs;
        if (norm <= 0.0) continue;  // zero singles: normalization undefined
        bin.accidental_norm = norm;
        bin.g_value = static_cast<double>(bin.coincidence_count) / norm;
        bin.g_stderr =
            std::sqrt(static_cast<double>(std::max<std::uint64_t>(bin.coincidence_count, 1))) /
            norm;
        bin.valid = true;
    }
    return curve;
}

}  // namespace detail

/// Normalizes a histogram into a correlation curve given the singles of A over
/// the window and of B over each bin-shifted window. Pure arithmetic; the
/// accidental estimate uses the edge-exact pair-slot count per bin.
inline CorrelationCurve normalize(const TagDataset& ds, const Histogram& hist,
                                  const CorrelationRequest& req, const SinglesEstimate& singles_a,
                                  const std::vector<SinglesEstimate>& singles_b_shifted) {
    const auto r = detail::resolve(ds, req);
    require(hist.counts.size() == r.bin_count() && singles_b_shifted.size() == r.bin_count(),
            errc::invalid_argument, "normalize: size mismatch with request");
    detail::SweepAccumulator acc;
    acc.coincidences = hist.counts;
    acc.count_a = singles_a.count;
    acc.count_b.resize(r.bin_count());
    for (std::size_t i = 0; i < singles_b_shifted.size(); ++i)
        acc.count_b[i] = singles_b_shifted[i].count;
    return detail::make_curve(req, r, acc);
}

/// Shifted-window singles of channel B for every bin of the request.
inline std::vector<SinglesEstimate> shifted_singles(const TagDataset& ds,
                                                    const CorrelationRequest& req) {
    const auto r = detail::resolve(ds, req);
    std::vector<SinglesEstimate> out(r.bin_count());
    std::vector<std::uint64_t> counts(r.bin_count(), 0);
    std::vector<std::uint64_t> b_times;
    detail::for_each_trial(ds, [&](std::uint32_t, std::size_t begin, std::size_t end) {
        b_times.clear();
        for (std::size_t i = begin; i < end; ++i)
            if (ds.records[i].channel == req.channel_b) b_times.push_back(ds.records[i].t);
        for (std::int64_t k = -r.k_max; k <= r.k_max; ++k) {
            const Window w = r.shifted_window(k);
            if (w.length() == 0) continue;
            counts[static_cast<std::size_t>(k + r.k_max)] += detail::count_in_window(b_times, w);
        }
    });
    for (std::int64_t k = -r.k_max; k <= r.k_max; ++k) {
        const auto idx = static_cast<std::size_t>(k + r.k_max);
        const Window w = r.shifted_window(k);
        if (w.length() == 0) continue;
        out[idx] = SinglesEstimate{
            static_cast<double>(counts[idx]) /
                (static_cast<double>(r.trial_count) * static_cast<double>(w.length())),
            counts[idx]};
    }
    return out;
}

/// One-pass histogram + normalization.
inline CorrelationCurve correlate(const TagDataset& ds, const CorrelationRequest& req) {
    const auto sweep = detail::run_sweep(ds, req);
    return detail::make_curve(req, sweep.resolved, sweep.acc);
}

/// A point of the windowed time series: the window center, the joint detection
/// probability per slot pair, and the normalized correlation. For cross-field
/// pairs the values are maxima over the delay range; for same-field pairs they
/// are taken at the tau = 0 bin.
struct SeriesPoint {
    double t_center_s = 0.0;
    double joint_probability = 0.0;
    double g_value = 0.0;
    double g_stderr = 0.0;
    double tau_s = 0.0;
    bool valid = false;
};

inline std::vector<SeriesPoint> windowed_max_series(const TagDataset& ds, Channel channel_a,
                                                    Channel channel_b, double window_T_s,
                                                    double stride_s, double tau_range_s = 30e-9,
                                                    double bin_width_s = 0.5e-9) {
    require(window_T_s > 0 && stride_s > 0, errc::invalid_argument,
            "series: window and stride must be positive");
    require(stride_s >= window_T_s / 10.0, errc::invalid_argument,
            "series: stride must be at least T/10");
    const double trial_len = ds.trial_length_s();
    const bool cross = !same_field(channel_a, channel_b);

    std::vector<SeriesPoint> out;
    for (double start = 0.0; start + window_T_s <= trial_len * (1.0 + 1e-12);
         start += stride_s) {
        CorrelationRequest req;
        req.channel_a = channel_a;
        req.channel_b = channel_b;
        req.window_center_s = std::min(start + 0.5 * window_T_s, trial_len - 0.5 * window_T_s);
        req.window_T_s = window_T_s;
        req.tau_range_s = tau_range_s;
        req.bin_width_s = bin_width_s;
        const CorrelationCurve curve = correlate(ds, req);

        SeriesPoint pt;
        pt.t_center_s = req.window_center_s;
        const BinStat* chosen = nullptr;
        if (cross) {
            for (const auto& bin : curve.bins) {
                if (!bin.valid) continue;
                if (chosen == nullptr || bin.g_value > chosen->g_value) chosen = &bin;
            }
        } else {
            const BinStat& zero = curve.at_tau_zero();
            if (zero.valid) chosen = &zero;
        }
        if (chosen != nullptr) {
            const auto r = detail::resolve(ds, req);
            const std::int64_t k = detail::round_ratio(chosen->tau_center_s, bin_width_s);
            const double pairs = r.pair_slot_count(k);
            pt.joint_probability = pairs > 0.0
                                       ? static_cast<double>(chosen->coincidence_count) /
                                             (static_cast<double>(ds.trial_count) * pairs)
                                       : 0.0;
            pt.g_value = chosen->g_value;
            pt.g_stderr = chosen->g_stderr;
            pt.tau_s = chosen->tau_center_s;
            pt.valid = true;
        }
        out.push_back(pt);
    }
    return out;
}

/// Cauchy-Schwarz test result. violation_sigma = (r_max - 1) / r_max_stderr.
struct CsResult {
    struct RBin {
        double tau_s = 0.0;
        double r = 0.0;
        double stderr_ = 0.0;
        bool valid = false;
    };
    std::vector<RBin> r_curve;
    double r_max = 0.0;
    double r_max_stderr = 0.0;
    double tau_at_max_s = 0.0;
    double violation_sigma = 0.0;
    double g11_zero = 0.0;
    double g22_zero = 0.0;
    CorrelationCurve g_1a2b;
    CorrelationCurve g_1b2a;
    CorrelationCurve g_1a1b;
    CorrelationCurve g_2a2b;
};

struct CsOptions {
    double tau_range_s = 30e-9;
    double bin_width_s = 0.5e-9;
};

/// Full-trial Cauchy-Schwarz ratio R(tau) from the two cross-correlations and
/// the equal-time autocorrelations of each field (tau = 0 bin of the a x b
/// cross-histogram within the field). Errors propagate in quadrature of the
/// relative errors of the four factors.
inline CsResult cauchy_schwarz(const TagDataset& ds, const CsOptions& opts = {}) {
    bool seen[4] = {false, false, false, false};
    for (const auto& rec : ds.records) seen[static_cast<int>(rec.channel)] = true;
    for (Channel c : all_channels)
        require(seen[static_cast<int>(c)], errc::missing_channel,
                std::string("dataset has no tags on channel ") + to_string(c));

    auto request = [&](Channel a, Channel b) {
        CorrelationRequest req;
        req.channel_a = a;
        req.channel_b = b;
        req.tau_range_s = opts.tau_range_s;
        req.bin_width_s = opts.bin_width_s;
        return req;
    };

    CsResult out;
    out.g_1a2b = correlate(ds, request(Channel::d1a, Channel::d2b));
    out.g_1b2a = correlate(ds, request(Channel::d1b, Channel::d2a));
    out.g_1a1b = correlate(ds, request(Channel::d1a, Channel::d1b));
    out.g_2a2b = correlate(ds, request(Channel::d2a, Channel::d2b));

    auto factor = [](const BinStat& bin, const char* name) {
        require(bin.valid && bin.coincidence_count > 0, errc::invalid_factor,
                std::string("factor ") + name + " has no counts");
        return bin;
    };
    const BinStat g11 = factor(out.g_1a1b.at_tau_zero(), "g_1a1b(0)");
    const BinStat g22 = factor(out.g_2a2b.at_tau_zero(), "g_2a2b(0)");
    out.g11_zero = g11.g_value;
    out.g22_zero = g22.g_value;
    const double rel11 = g11.g_stderr / g11.g_value;
    const double rel22 = g22.g_stderr / g22.g_value;

    out.r_curve.resize(out.g_1a2b.bins.size());
    bool have_max = false;
    for (std::size_t i = 0; i < out.g_1a2b.bins.size(); ++i) {
        const BinStat& ab = out.g_1a2b.bins[i];
        const BinStat& ba = out.g_1b2a.bins[i];
        CsResult::RBin& rb = out.r_curve[i];
        rb.tau_s = ab.tau_center_s;
        if (!ab.valid || !ba.valid || ab.coincidence_count == 0 || ba.coincidence_count == 0)
            continue;
        rb.r = ab.g_value * ba.g_value / (g11.g_value * g22.g_value);
        const double relab = ab.g_stderr / ab.g_value;
        const double relba = ba.g_stderr / ba.g_value;
        rb.stderr_ = rb.r * std::sqrt(relab * relab + relba * relba + rel11 * rel11 +
                                      rel22 * rel22);
        rb.valid = true;
        if (!have_max || rb.r > out.r_max) {
            out.r_max = rb.r;
            out.r_max_stderr = rb.stderr_;
            out.tau_at_max_s = rb.tau_s;
            have_max = true;
        }
    }
    require(have_max, errc::invalid_factor, "no valid R(tau) bins");
    out.violation_sigma = (out.r_max - 1.0) / out.r_max_stderr;
    return out;
}

}  // namespace biphoton
