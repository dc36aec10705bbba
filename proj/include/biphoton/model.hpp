#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "biphoton/errors.hpp"

namespace biphoton {

inline constexpr double four_over_pi_sq = 4.0 / (std::numbers::pi * std::numbers::pi);

/// Physical and empirical parameters of the correlation models, all in
/// dimensionless form (detunings in units of the natural linewidth).
struct ModelParams {
    double gamma_ratio_delta = 0.0;   ///< detuning / linewidth (signed)
    double f = 1.0;                   ///< amplitude factor of the empirical model
    double chi = 1.0;                 ///< decay enhancement factor
    double delta_prime_ratio = 0.0;   ///< fitted beat frequency / linewidth

    void validate() const {
        require(f > 0.0, errc::bad_config, "model parameter f must be > 0");
        require(chi > 0.0, errc::bad_config, "model parameter chi must be > 0");
        require(std::isfinite(gamma_ratio_delta) && std::isfinite(delta_prime_ratio),
                errc::bad_config, "detunings must be finite");
    }

    /// Theory limit: the empirical model collapses onto the base model.
    static ModelParams theory(double delta_over_gamma) {
        return ModelParams{delta_over_gamma, 1.0, 1.0, delta_over_gamma};
    }
};

/// Equal-time autocorrelation levels entering the Cauchy-Schwarz denominator.
struct AutoCorrelationLevels {
    double g11_zero = 2.0;
    double g22_zero = 2.0;

    void validate() const {
        require(g11_zero > 0.0 && g22_zero > 0.0, errc::invalid_argument,
                "autocorrelation levels must be positive");
    }
    /// Values below 1 are unphysical for bunched/Poissonian light.
    bool physical() const { return g11_zero >= 1.0 && g22_zero >= 1.0; }
};

/// Interference bracket 1 + e^{-chi|x|} - 2 cos(dp |x|) e^{-chi|x|/2} with
/// x in units of 1/linewidth. Lies in [0, 4] and vanishes at x = 0.
inline double interference_bracket(double x, double chi, double delta_prime_ratio) {
    const double ax = std::fabs(x);
    const double half = std::exp(-0.5 * chi * ax);
    return 1.0 + half * half - 2.0 * std::cos(delta_prime_ratio * ax) * half;
}

/// Normalized cross-correlation of the two-pathway interference model,
/// as a function of dimensionless delay tau_gamma = Gamma*tau.
inline double g12_theory(double tau_gamma, double delta_over_gamma) {
    return 1.0 + four_over_pi_sq * interference_bracket(tau_gamma, 1.0, delta_over_gamma);
}

/// Empirical variant with free amplitude f, decay factor chi and beat
/// frequency delta_prime. Reduces to g12_theory when f = chi = 1 and
/// delta_prime = delta.
inline double g12_empirical(double tau_gamma, const ModelParams& p) {
    return 1.0 + four_over_pi_sq * p.f *
                     interference_bracket(tau_gamma, p.chi, p.delta_prime_ratio);
}

/// Model-level Cauchy-Schwarz ratio in the symmetric-arm form: the cross
/// correlation squared over the product of equal-time autocorrelations.
inline double r_model(double tau_gamma, const ModelParams& p, const AutoCorrelationLevels& autos) {
    autos.validate();
    const double g = g12_empirical(tau_gamma, p);
    return g * g / (autos.g11_zero * autos.g22_zero);
}

struct Extremum {
    double tau = 0.0;
    double value = 0.0;
};

/// Suggested dense-scan step for an oscillation at the given dimensionless
/// frequency: at least 50 samples per period, capped at 1/100 of the range.
inline double oscillation_scan_step(double delta_ratio, double lo, double hi) {
    const double range = hi - lo;
    const double cap = range / 100.0;
    const double d = std::fabs(delta_ratio);
    if (d < 1e-12) return cap;
    const double period = 2.0 * std::numbers::pi / d;
    return std::min(cap, period / 50.0);
}

/// Global maximum of `curve` over [lo, hi]: dense scan at `scan_step` (bracket
/// the best sample), then golden-section refinement to absolute tolerance
/// `tau_tol` on the abscissa.
template <typename F>
Extremum find_extremum(F&& curve, double lo, double hi, double scan_step, double tau_tol = 1e-4) {
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, errc::invalid_argument,
            "find_extremum: bad range");
    require(scan_step > 0.0, errc::invalid_argument, "find_extremum: scan step must be > 0");

    double best_x = lo;
    double best_v = curve(lo);
    const auto steps = static_cast<long long>(std::ceil((hi - lo) / scan_step));
    for (long long i = 1; i <= steps; ++i) {
        const double x = std::min(lo + static_cast<double>(i) * scan_step, hi);
        const double v = curve(x);
        if (v > best_v) {
            best_v = v;
            best_x = x;
        }
    }

    double a = std::max(lo, best_x - scan_step);
    double b = std::min(hi, best_x + scan_step);
    constexpr double invphi = 0.6180339887498949;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = curve(x1);
    double f2 = curve(x2);
    while (b - a > tau_tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = curve(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = curve(x1);
        }
    }
    const double mid = 0.5 * (a + b);
    const double fm = curve(mid);
    Extremum out{mid, fm};
    if (best_v > out.value) out = {best_x, best_v};
    return out;
}

/// Convenience: maximum of the empirical model over [0, hi].
inline Extremum g12_empirical_max(const ModelParams& p, double hi) {
    p.validate();
    const double step = oscillation_scan_step(p.delta_prime_ratio, 0.0, hi);
    return find_extremum([&](double x) { return g12_empirical(x, p); }, 0.0, hi, step);
}

}  // namespace biphoton
