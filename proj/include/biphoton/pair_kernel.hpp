#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "biphoton/errors.hpp"
#include "biphoton/model.hpp"
#include "biphoton/rng.hpp"

namespace biphoton {

/// Tabulated inverse-CDF sampler for the pair-delay density
///   K(x) ~ 1 + e^{-chi|x|} - 2 cos(dp|x|) e^{-chi|x|/2}
/// on [-tau_max, tau_max], x in dimensionless delay units. The density is even
/// in x; the amplitude factor f cancels under normalization but must be
/// positive (f = 0 would leave no pair correlation to sample).
///
/// The cumulative is built by trapezoidal integration on a uniform grid with
/// at least 50 points per oscillation period; sampling inverts the quadratic
/// cumulative within the bracketing cell, so draws follow the tabulated
/// trapezoid CDF exactly.
class PairKernel {
  public:
    static PairKernel build(const ModelParams& params, double tau_max_gamma,
                            std::size_t table_size = 4096) {
        params.validate();
        require(params.f > 0.0, errc::bad_config, "pair kernel: f must be > 0");
        require(tau_max_gamma > 0.0, errc::bad_config, "pair kernel: tau_max must be > 0");
        require(table_size >= 1000, errc::bad_config,
                "pair kernel: table size must be at least 1000");

        PairKernel k;
        k.tau_max_ = tau_max_gamma;
        const double d = std::fabs(params.delta_prime_ratio);
        std::size_t n = table_size;
        if (d > 0.0) {
            const double period = 2.0 * std::numbers::pi / d;
            const double needed = 2.0 * tau_max_gamma / (period / 50.0);
            n = std::max<std::size_t>(n, static_cast<std::size_t>(std::ceil(needed)) + 1);
        }
        if (n % 2 == 0) ++n;  // symmetric grid with a point at x = 0

        k.x_.resize(n);
        k.density_.resize(n);
        k.cumulative_.resize(n);
        const double h = 2.0 * tau_max_gamma / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = -tau_max_gamma + static_cast<double>(i) * h;
            k.x_[i] = x;
            k.density_[i] = interference_bracket(x, params.chi, params.delta_prime_ratio);
        }
        k.cumulative_[0] = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            k.cumulative_[i] =
                k.cumulative_[i - 1] + 0.5 * (k.density_[i] + k.density_[i - 1]) * h;
        }
        k.step_ = h;
        require(k.cumulative_.back() > 0.0, errc::bad_config, "pair kernel: degenerate density");
        return k;
    }

    /// One delay draw in dimensionless units.
    double sample(Xoshiro256& rng) const {
        const double target = rng.uniform01() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        std::size_t cell = it == cumulative_.begin()
                               ? 0
                               : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
        cell = std::min(cell, cumulative_.size() - 2);

        const double t = target - cumulative_[cell];
        const double b = density_[cell];
        const double a = 0.5 * (density_[cell + 1] - density_[cell]) / step_;
        double dx;
        if (std::fabs(a) < 1e-300) {
            dx = b > 0.0 ? t / b : 0.0;
        } else {
            const double disc = std::max(0.0, b * b + 4.0 * a * t);
            dx = (-b + std::sqrt(disc)) / (2.0 * a);
            if (!(dx >= 0.0 && dx <= step_)) dx = std::clamp(b > 0.0 ? t / b : 0.0, 0.0, step_);
        }
        return std::clamp(x_[cell] + dx, -tau_max_, tau_max_);
    }

    /// CDF of the tabulated density at x (exact for the trapezoid table).
    double cdf(double x) const {
        if (x <= -tau_max_) return 0.0;
        if (x >= tau_max_) return 1.0;
        const double pos = (x + tau_max_) / step_;
        auto cell = static_cast<std::size_t>(pos);
        cell = std::min(cell, x_.size() - 2);
        const double dx = x - x_[cell];
        const double partial =
            density_[cell] * dx +
            0.5 * (density_[cell + 1] - density_[cell]) / step_ * dx * dx;
        return (cumulative_[cell] + partial) / cumulative_.back();
    }

    /// Normalized density at x.
    double pdf(double x) const {
        if (std::fabs(x) > tau_max_) return 0.0;
        const double pos = (x + tau_max_) / step_;
        auto cell = static_cast<std::size_t>(std::min(pos, static_cast<double>(x_.size() - 2)));
        const double frac = (x - x_[cell]) / step_;
        const double d = density_[cell] + (density_[cell + 1] - density_[cell]) * frac;
        return d / cumulative_.back();
    }

    /// Integral of the raw (un-normalized) bracket over the support, in
    /// dimensionless delay units. Fixes the absolute scale of the pair excess
    /// when converting pair rates to correlation amplitudes.
    double bracket_integral() const { return cumulative_.back(); }

    double tau_max() const { return tau_max_; }
    std::size_t table_points() const { return x_.size(); }

  private:
    std::vector<double> x_;
    std::vector<double> density_;
    std::vector<double> cumulative_;
    double step_ = 0.0;
    double tau_max_ = 0.0;
};

}  // namespace biphoton
