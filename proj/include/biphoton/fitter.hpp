#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "biphoton/correlator.hpp"
#include "biphoton/errors.hpp"
#include "biphoton/model.hpp"

namespace biphoton {

struct FitResult {
    ModelParams params;                      ///< fitted f, chi, delta_prime; delta copied from guess
    std::array<double, 3> stderr_{};          ///< parameter errors (f, chi, delta_prime)
    std::array<std::array<double, 3>, 3> covariance{};
    double chi_square = 0.0;
    int degrees_of_freedom = 0;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

/// Model value and partials w.r.t. (f, chi, dp) at dimensionless delay x >= 0.
struct ModelEval {
    double value;
    std::array<double, 3> grad;
};

inline ModelEval eval_empirical(double x, double f, double chi, double dp) {
    const double ax = std::fabs(x);
    const double half = std::exp(-0.5 * chi * ax);
    const double full = half * half;
    const double c = std::cos(dp * ax);
    const double s = std::sin(dp * ax);
    const double bracket = 1.0 + full - 2.0 * c * half;
    ModelEval out;
    out.value = 1.0 + four_over_pi_sq * f * bracket;
    out.grad[0] = four_over_pi_sq * bracket;
    out.grad[1] = four_over_pi_sq * f * ax * (c * half - full);
    out.grad[2] = four_over_pi_sq * f * 2.0 * ax * s * half;
    return out;
}

/// Solves the symmetric 3x3 system A x = b by Gaussian elimination with
/// partial pivoting. Returns false when the matrix is singular.
inline bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b,
                   std::array<double, 3>& x) {
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int row = col + 1; row < 3; ++row)
            if (std::fabs(a[row][col]) > std::fabs(a[pivot][col])) pivot = row;
        if (std::fabs(a[pivot][col]) < 1e-300) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int row = col + 1; row < 3; ++row) {
            const double m = a[row][col] / a[col][col];
            for (int k = col; k < 3; ++k) a[row][k] -= m * a[col][k];
            b[row] -= m * b[col];
        }
    }
    for (int row = 2; row >= 0; --row) {
        double sum = b[row];
        for (int k = row + 1; k < 3; ++k) sum -= a[row][k] * x[k];
        x[row] = sum / a[row][row];
    }
    return true;
}

inline bool invert3(const std::array<std::array<double, 3>, 3>& a,
                    std::array<std::array<double, 3>, 3>& inv) {
    for (int col = 0; col < 3; ++col) {
        std::array<double, 3> e{0.0, 0.0, 0.0};
        e[static_cast<std::size_t>(col)] = 1.0;
        std::array<double, 3> x{};
        if (!solve3(a, e, x)) return false;
        for (int row = 0; row < 3; ++row) inv[row][col] = x[row];
    }
    return true;
}

struct FitPoint {
    double x;  ///< dimensionless |delay|
    double g;
    double weight;  ///< 1 / sigma
};

inline std::vector<FitPoint> fit_points(const CorrelationCurve& curve, double gamma_hz) {
    require(gamma_hz > 0.0, errc::invalid_argument, "gamma_hz must be positive");
    const double gamma = 2.0 * std::numbers::pi * gamma_hz;
    std::vector<FitPoint> pts;
    pts.reserve(curve.bins.size());
    for (const auto& bin : curve.bins) {
        if (!bin.valid || bin.g_stderr <= 0.0) continue;
        pts.push_back(FitPoint{gamma * std::fabs(bin.tau_center_s), bin.g_value,
                               1.0 / bin.g_stderr});
    }
    return pts;
}

inline double chi_square_at(const std::vector<FitPoint>& pts, double f, double chi, double dp) {
    double total = 0.0;
    for (const auto& pt : pts) {
        const double r = (pt.g - eval_empirical(pt.x, f, chi, dp).value) * pt.weight;
        total += r * r;
    }
    return total;
}

}  // namespace detail

/// Starting parameters estimated from the measured curve: the beat frequency
/// from the dominant DFT peak of (g - mean) over positive delays, the
/// amplitude from the curve maximum, and the decay factor from the falloff of
/// successive interference peaks.
inline ModelParams initial_guess(const CorrelationCurve& curve, double gamma_hz) {
    const auto k_half = static_cast<std::int64_t>(curve.bins.size() / 2);
    std::vector<double> g;
    for (std::int64_t k = 1; k <= k_half; ++k) {
        const auto& bin = curve.bins[static_cast<std::size_t>(k + k_half)];
        if (bin.valid) g.push_back(bin.g_value);
    }
    require(g.size() >= 8, errc::no_oscillation, "too few valid bins for a frequency estimate");

    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());

    const auto n = g.size();
    const auto n_freq = n / 2;
    std::vector<double> magnitude(n_freq + 1, 0.0);
    for (std::size_t k = 1; k <= n_freq; ++k) {
        std::complex<double> acc{0.0, 0.0};
        const double w = -2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j)
            acc += (g[j] - mean) * std::polar(1.0, w * static_cast<double>(j));
        magnitude[k] = std::abs(acc);
    }
    std::size_t peak = 1;
    for (std::size_t k = 2; k <= n_freq; ++k)
        if (magnitude[k] > magnitude[peak]) peak = k;

    std::vector<double> sorted_mag(magnitude.begin() + 1, magnitude.end());
    std::sort(sorted_mag.begin(), sorted_mag.end());
    const double floor_mag = sorted_mag[sorted_mag.size() / 2];
    require(magnitude[peak] > 1e-12 && magnitude[peak] > 3.0 * floor_mag, errc::no_oscillation,
            "no dominant frequency peak above the noise floor");

    // Parabolic refinement of the peak position.
    double k_ref = static_cast<double>(peak);
    if (peak > 1 && peak < n_freq) {
        const double ym = magnitude[peak - 1];
        const double y0 = magnitude[peak];
        const double yp = magnitude[peak + 1];
        const double denom = ym - 2.0 * y0 + yp;
        if (std::fabs(denom) > 1e-30) k_ref += 0.5 * (ym - yp) / denom;
    }

    const double bin_w = curve.request.bin_width_s;
    const double freq_hz = k_ref / (static_cast<double>(n) * bin_w);
    ModelParams guess;
    guess.delta_prime_ratio = freq_hz / gamma_hz;
    guess.gamma_ratio_delta = guess.delta_prime_ratio;

    double g_max = 1.0;
    for (double v : g) g_max = std::max(g_max, v);
    guess.f = std::clamp((g_max - 1.0) * std::numbers::pi * std::numbers::pi / 16.0, 0.1, 10.0);

    // Decay factor from the falloff of the first two interference peaks,
    // measured above the estimated long-delay baseline 1 + a*f.
    guess.chi = 1.0;
    const double gamma = 2.0 * std::numbers::pi * gamma_hz;
    std::vector<std::pair<double, double>> peaks;  // (x, smoothed g)
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double prev = g[j - 1];
        const double cur = g[j];
        const double next = g[j + 1];
        if (cur >= prev && cur > next) {
            const double x = gamma * bin_w * static_cast<double>(j + 1);
            peaks.emplace_back(x, (prev + cur + next) / 3.0);
            if (peaks.size() == 2) break;
        }
    }
    if (peaks.size() == 2) {
        const double baseline = 1.0 + (g_max - 1.0) / 4.0;
        const double e1 = peaks[0].second - baseline;
        const double e2 = peaks[1].second - baseline;
        if (e1 > 0.0 && e2 > 0.0 && e1 > e2) {
            const double x1 = peaks[0].first;
            const double x2 = peaks[1].first;
            const double target = e1 / e2;
            auto ratio = [&](double chi) {
                const double q1 = std::exp(-0.5 * chi * x1);
                const double q2 = std::exp(-0.5 * chi * x2);
                return q1 * (q1 + 2.0) / (q2 * (q2 + 2.0));
            };
            double lo = 0.2, hi = 20.0;
            if (ratio(lo) < target && ratio(hi) > target) {
                for (int iter = 0; iter < 60; ++iter) {
                    const double mid = 0.5 * (lo + hi);
                    (ratio(mid) < target ? lo : hi) = mid;
                }
                guess.chi = 0.5 * (lo + hi);
            }
        }
    }
    guess.chi = std::clamp(guess.chi, 0.2, 20.0);
    return guess;
}

/// Weighted least-squares fit of the empirical correlation model to a measured
/// curve over (f, chi, delta_prime), by damped normal equations with an
/// analytic Jacobian. Damping schedule: lambda starts at 1e-3, x10 on a
/// rejected step, /10 on an accepted one. Convergence: three consecutive
/// accepted steps with relative chi-square decrease < 1e-8 or step norm
/// < 1e-10; at most 500 iterations. The covariance is the inverse Gauss-Newton
/// normal matrix at the optimum scaled by chi_square / dof.
inline FitResult fit(const CorrelationCurve& curve, const ModelParams& guess, double gamma_hz) {
    guess.validate();
    const auto pts = detail::fit_points(curve, gamma_hz);
    require(pts.size() >= 10, errc::invalid_argument,
            "fit needs at least 10 valid bins, got " + std::to_string(pts.size()));

    double f = std::max(guess.f, 1e-6);
    double chi = std::max(guess.chi, 1e-6);
    double dp = guess.delta_prime_ratio;

    FitResult result;
    result.degrees_of_freedom = static_cast<int>(pts.size()) - 3;

    double current = detail::chi_square_at(pts, f, chi, dp);
    double lambda = 1e-3;
    int streak = 0;
    int iter = 0;
    bool converged = false;

    while (iter < 500) {
        ++iter;
        std::array<std::array<double, 3>, 3> normal{};
        std::array<double, 3> rhs{};
        for (const auto& pt : pts) {
            const auto eval = detail::eval_empirical(pt.x, f, chi, dp);
            const double resid = (pt.g - eval.value) * pt.weight;
            std::array<double, 3> j{eval.grad[0] * pt.weight, eval.grad[1] * pt.weight,
                                    eval.grad[2] * pt.weight};
            for (int a = 0; a < 3; ++a) {
                rhs[a] += j[a] * resid;
                for (int b = 0; b < 3; ++b) normal[a][b] += j[a] * j[b];
            }
        }

        auto damped = normal;
        for (int a = 0; a < 3; ++a)
            damped[a][a] += lambda * std::max(normal[a][a], 1e-300);
        std::array<double, 3> step{};
        if (!detail::solve3(damped, rhs, step)) {
            fail(errc::degenerate_fit, "singular normal matrix");
        }

        const double f_new = std::max(f + step[0], 1e-9);
        const double chi_new = std::max(chi + step[1], 1e-9);
        const double dp_new = dp + step[2];
        const double proposed = detail::chi_square_at(pts, f_new, chi_new, dp_new);

        if (proposed <= current) {
            const double rel_decrease =
                current > 0.0 ? (current - proposed) / current : 0.0;
            const double step_norm = std::sqrt(step[0] * step[0] + step[1] * step[1] +
                                               step[2] * step[2]);
            f = f_new;
            chi = chi_new;
            dp = dp_new;
            current = proposed;
            lambda = std::max(lambda / 10.0, 1e-12);
            if (rel_decrease < 1e-8 || step_norm < 1e-10) {
                if (++streak >= 3) {
                    converged = true;
                    break;
                }
            } else {
                streak = 0;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;  // cannot improve further
        }
    }

    result.iterations = iter;
    result.converged = converged;
    result.params = guess;
    result.params.f = f;
    result.params.chi = chi;
    result.params.delta_prime_ratio = dp;
    result.chi_square = current;

    std::array<std::array<double, 3>, 3> normal{};
    for (const auto& pt : pts) {
        const auto eval = detail::eval_empirical(pt.x, f, chi, dp);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                normal[a][b] += eval.grad[a] * eval.grad[b] * pt.weight * pt.weight;
    }
    std::array<std::array<double, 3>, 3> inv{};
    if (!detail::invert3(normal, inv)) fail(errc::degenerate_fit, "singular normal matrix");
    const double scale =
        result.degrees_of_freedom > 0 ? current / result.degrees_of_freedom : 1.0;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) result.covariance[a][b] = inv[a][b] * scale;
        result.stderr_[a] = std::sqrt(std::max(result.covariance[a][a], 0.0));
    }
    return result;
}

/// Worst relative deviation between the analytic partials of the empirical
/// model and central finite differences (relative step 1e-6), over the given
/// dimensionless delay points.
inline double gradient_check(const ModelParams& params, const std::vector<double>& tau_gamma) {
    params.validate();
    double worst = 0.0;
    const std::array<double, 3> theta{params.f, params.chi, params.delta_prime_ratio};
    for (double x : tau_gamma) {
        const auto eval = detail::eval_empirical(x, theta[0], theta[1], theta[2]);
        for (int i = 0; i < 3; ++i) {
            const double h = 1e-6 * std::max(std::fabs(theta[i]), 1e-3);
            auto shifted = theta;
            shifted[i] = theta[i] + h;
            const double up =
                detail::eval_empirical(x, shifted[0], shifted[1], shifted[2]).value;
            shifted[i] = theta[i] - h;
            const double down =
                detail::eval_empirical(x, shifted[0], shifted[1], shifted[2]).value;
            const double numeric = (up - down) / (2.0 * h);
            const double denom = std::max({std::fabs(eval.grad[i]), std::fabs(numeric), 1e-9});
            worst = std::max(worst, std::fabs(eval.grad[i] - numeric) / denom);
        }
    }
    return worst;
}

/// Model Cauchy-Schwarz ratio on a dimensionless delay grid, using fitted
/// parameters and measured equal-time autocorrelation levels.
inline std::vector<double> predict_r(const FitResult& fit_result,
                                     const AutoCorrelationLevels& autos,
                                     const std::vector<double>& tau_gamma) {
    require(fit_result.converged, errc::invalid_argument, "predict_r requires a converged fit");
    std::vector<double> out;
    out.reserve(tau_gamma.size());
    for (double x : tau_gamma) out.push_back(r_model(x, fit_result.params, autos));
    return out;
}

}  // namespace biphoton
