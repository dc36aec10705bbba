#pragma once

// Test-side oracles and generators. These deliberately take the dumb-but-sure
// route (dense evaluation, all-pairs counting, fine quadrature) so they stay
// independent of the library implementations they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "biphoton/channel.hpp"
#include "biphoton/correlator.hpp"
#include "biphoton/model.hpp"
#include "biphoton/pair_kernel.hpp"
#include "biphoton/timetag.hpp"

namespace testsupport {

using namespace biphoton;

/// Dense-evaluation maximum of a callable over [lo, hi] with a fixed step.
template <typename F>
inline std::pair<double, double> dense_max(F&& f, double lo, double hi, double step) {
    double best_x = lo;
    double best_v = f(lo);
    for (double x = lo + step; x <= hi; x += step) {
        const double v = f(x);
        if (v > best_v) {
            best_v = v;
            best_x = x;
        }
    }
    return {best_x, best_v};
}

/// O(N^2) coincidence histogram over all same-trial tag pairs: tag_a on
/// channel A inside the window, tag_b on channel B, slot difference within
/// range. Bin membership is decided by scanning the bin edges directly.
inline std::vector<std::uint64_t> brute_force_histogram(const TagDataset& ds,
                                                        const CorrelationRequest& req) {
    const double res = ds.resolution_s();
    const auto bws = static_cast<std::int64_t>(std::llround(req.bin_width_s / res));
    const auto k_max = static_cast<std::int64_t>(std::llround(req.tau_range_s / req.bin_width_s));
    const std::int64_t fl = bws / 2;
    const std::int64_t fh = bws - 1 - fl;

    const double trial_len = ds.trial_length_s();
    const double center = req.window_center_s < 0 ? 0.5 * trial_len : req.window_center_s;
    const double width = req.window_T_s < 0 ? trial_len : req.window_T_s;
    const auto w0 = static_cast<std::int64_t>(std::llround((center - 0.5 * width) / res));
    const auto w1 = w0 + static_cast<std::int64_t>(std::llround(width / res));

    std::vector<std::uint64_t> counts(static_cast<std::size_t>(2 * k_max + 1), 0);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& a = ds.records[i];
        if (a.channel != req.channel_a) continue;
        const auto ta = static_cast<std::int64_t>(a.t);
        if (ta < w0 || ta >= w1) continue;
        for (std::size_t j = 0; j < ds.records.size(); ++j) {
            if (i == j) continue;
            const auto& b = ds.records[j];
            if (b.channel != req.channel_b || b.trial != a.trial) continue;
            const std::int64_t delta = static_cast<std::int64_t>(b.t) - ta;
            for (std::int64_t k = -k_max; k <= k_max; ++k) {
                if (delta >= k * bws - fl && delta <= k * bws + fh) {
                    ++counts[static_cast<std::size_t>(k + k_max)];
                    break;
                }
            }
        }
    }
    return counts;
}

/// Random dataset with sorted, deduplicated records.
inline TagDataset random_dataset(std::mt19937_64& rng, std::size_t max_tags = 2000,
                                 bool with_metadata = false) {
    TagDataset ds;
    std::uniform_int_distribution<std::uint64_t> res_pick(0, 2);
    ds.resolution_ps = std::array<std::uint64_t, 3>{100, 250, 1000}[res_pick(rng)];
    ds.trial_length_units = std::uniform_int_distribution<std::uint64_t>(64, 4096)(rng);
    ds.trial_count = std::uniform_int_distribution<std::uint64_t>(1, 40)(rng);

    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, max_tags)(rng);
    std::vector<TimeTagRecord> recs;
    recs.reserve(n);
    std::uniform_int_distribution<std::uint32_t> trial_pick(
        0, static_cast<std::uint32_t>(ds.trial_count - 1));
    std::uniform_int_distribution<std::uint64_t> t_pick(0, ds.trial_length_units - 1);
    std::uniform_int_distribution<int> ch_pick(0, 3);
    for (std::size_t i = 0; i < n; ++i)
        recs.push_back(TimeTagRecord{trial_pick(rng), static_cast<Channel>(ch_pick(rng)),
                                     t_pick(rng)});
    std::sort(recs.begin(), recs.end(), record_less);
    recs.erase(std::unique(recs.begin(), recs.end()), recs.end());
    ds.records = std::move(recs);

    if (with_metadata) {
        const int n_meta = std::uniform_int_distribution<int>(0, 4)(rng);
        for (int i = 0; i < n_meta; ++i)
            ds.metadata["key" + std::to_string(i)] =
                "value_" + std::to_string(rng() % 1000000);
    }
    return ds;
}

/// Simpson-rule CDF of the pair-delay bracket on [-tau_max, tau_max],
/// evaluated on a fine grid independent of the kernel table.
struct BracketCdf {
    std::vector<double> x;
    std::vector<double> cdf;

    static BracketCdf build(const ModelParams& p, double tau_max, std::size_t n_cells = 200000) {
        BracketCdf out;
        if (n_cells % 2 == 1) ++n_cells;
        const double h = 2.0 * tau_max / static_cast<double>(n_cells);
        std::vector<double> dens(n_cells + 1);
        for (std::size_t i = 0; i <= n_cells; ++i) {
            const double xi = -tau_max + static_cast<double>(i) * h;
            dens[i] = interference_bracket(xi, p.chi, p.delta_prime_ratio);
        }
        out.x.resize(n_cells / 2 + 1);
        out.cdf.resize(n_cells / 2 + 1);
        out.x[0] = -tau_max;
        out.cdf[0] = 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i + 2 <= n_cells; i += 2) {
            acc += h / 3.0 * (dens[i] + 4.0 * dens[i + 1] + dens[i + 2]);
            out.x[i / 2 + 1] = -tau_max + static_cast<double>(i + 2) * h;
            out.cdf[i / 2 + 1] = acc;
        }
        for (auto& c : out.cdf) c /= acc;
        return out;
    }

    double operator()(double v) const {
        if (v <= x.front()) return 0.0;
        if (v >= x.back()) return 1.0;
        const auto it = std::upper_bound(x.begin(), x.end(), v);
        const auto i = static_cast<std::size_t>(it - x.begin()) - 1;
        const double frac = (v - x[i]) / (x[i + 1] - x[i]);
        return cdf[i] + (cdf[i + 1] - cdf[i]) * frac;
    }
};

/// Kolmogorov-Smirnov distance between sorted samples and a reference CDF.
template <typename Cdf>
inline double ks_distance(std::vector<double> samples, const Cdf& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::fabs((static_cast<double>(i) + 1.0) / n - f));
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    }
    return d;
}

}  // namespace testsupport

namespace testsupport {

/// Runs f expecting a biphoton::Error; returns its code.
template <typename F>
inline biphoton::errc error_code_of(F&& f) {
    try {
        f();
    } catch (const biphoton::Error& e) {
        return e.code();
    }
    throw std::runtime_error("expected biphoton::Error was not thrown");
}

}  // namespace testsupport

namespace testsupport {

/// Pair rate that makes the measured cross-correlation amplitude match the
/// kernel's f: the excess at delay tau is Rp*K(tau)/(R1*R2) with
/// K = bracket/I, so Rp solves Rp = (4f/pi^2) * I_seconds * (Rp + Rb)^2.
inline double tuned_pair_rate(const biphoton::ModelParams& params, double kernel_tau_max_gamma,
                              double gamma_angular, double background_rate_hz) {
    const auto kernel = biphoton::PairKernel::build(params, kernel_tau_max_gamma);
    const double integral_s = kernel.bracket_integral() / gamma_angular;
    const double target = biphoton::four_over_pi_sq * params.f;
    double rp = 0.0;
    for (int i = 0; i < 40; ++i) {
        const double total = background_rate_hz + rp;
        rp = target * integral_s * total * total;
    }
    return rp;
}

}  // namespace testsupport
