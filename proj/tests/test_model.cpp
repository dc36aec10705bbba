#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "biphoton/model.hpp"
#include "support/helpers.hpp"

using namespace biphoton;
using testsupport::dense_max;

TEST_CASE("g12_theory anchors") {
    for (double d : {0.0, 1.0, 9.0, 20.0, 40.0, 1000.0}) {
        REQUIRE(g12_theory(0.0, d) == 1.0);
    }
    // Long-delay limit: both exponentials are gone well before 50 linewidths.
    const double limit = 1.0 + four_over_pi_sq;
    CHECK(std::fabs(g12_theory(50.0, 20.0) - limit) < 1e-8);
    CHECK(std::fabs(g12_theory(-50.0, 7.3) - limit) < 1e-8);
}

TEST_CASE("g12_theory maximum at large detuning approaches 2.62") {
    const double step = oscillation_scan_step(1000.0, 0.0, 5.0);
    const auto ext = find_extremum([](double x) { return g12_theory(x, 1000.0); }, 0.0, 5.0,
                                   step);
    CHECK(std::fabs(ext.value - 2.62) < 0.01);
    CHECK(ext.tau < 0.01);  // first interference peak sits near pi/1000
}

TEST_CASE("g12_theory peak at detuning 20 matches the dense oracle") {
    auto curve = [](double x) { return g12_theory(x, 20.0); };
    const auto oracle = dense_max(curve, 0.0, 1.0, 1e-5);
    const auto ext =
        find_extremum(curve, 0.0, 5.0, oscillation_scan_step(20.0, 0.0, 5.0));
    CHECK(std::fabs(ext.value - oracle.second) < 1e-4);
    CHECK(std::fabs(ext.value - 2.50) < 0.01);
    CHECK(std::fabs(ext.tau - std::numbers::pi / 20.0) < 0.01);
}

TEST_CASE("peak position scales inversely with detuning") {
    const auto e20 =
        find_extremum([](double x) { return g12_theory(x, 20.0); }, 0.0, 5.0,
                      oscillation_scan_step(20.0, 0.0, 5.0));
    const auto e40 =
        find_extremum([](double x) { return g12_theory(x, 40.0); }, 0.0, 5.0,
                      oscillation_scan_step(40.0, 0.0, 5.0));
    CHECK(std::fabs(e40.tau - 0.5 * e20.tau) < 0.01);
}

TEST_CASE("empirical model reduces to the base model") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> tau(-20.0, 20.0);
    const ModelParams p = ModelParams::theory(20.0);
    for (int i = 0; i < 1000; ++i) {
        const double x = tau(rng);
        REQUIRE(g12_empirical(x, p) == g12_theory(x, 20.0));
    }
    REQUIRE(g12_empirical(0.0, ModelParams{20.0, 1.58, 5.1, 21.53}) == 1.0);
}

TEST_CASE("empirical model maximum at the reference fit parameters") {
    const ModelParams p{20.0, 1.58, 5.1, 21.53};
    auto curve = [&](double x) { return g12_empirical(x, p); };
    const auto oracle = dense_max(curve, 0.0, 1.5, 1e-5);
    const auto ext = g12_empirical_max(p, 1.5);
    CHECK(std::fabs(ext.value - oracle.second) < 1e-4);
    CHECK(std::fabs(ext.value - 2.8454) < 0.005);
}

TEST_CASE("evenness and bounds") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> tau(0.0, 30.0);
    std::uniform_real_distribution<double> du(0.0, 50.0);
    std::uniform_real_distribution<double> fu(0.1, 3.0);
    std::uniform_real_distribution<double> cu(0.5, 8.0);
    for (int i = 0; i < 500; ++i) {
        const double x = tau(rng);
        const double d = du(rng);
        REQUIRE(g12_theory(x, d) == g12_theory(-x, d));
        const double g = g12_theory(x, d);
        REQUIRE(g >= 1.0);
        REQUIRE(g <= 1.0 + 4.0 * four_over_pi_sq + 1e-12);
        const ModelParams p{d, fu(rng), cu(rng), du(rng)};
        REQUIRE(g12_empirical(x, p) == g12_empirical(-x, p));
    }
}

TEST_CASE("local maxima of the base model decay with delay") {
    // For detunings of at least a couple of linewidths the interference peaks
    // ride on a decaying envelope, so successive peak heights cannot grow.
    for (double d : {2.0, 5.0, 20.0}) {
        const double period = 2.0 * std::numbers::pi / d;
        double prev_peak = 1e300;
        for (int m = 0; m < 6; ++m) {
            const double lo = (m + 0.25) * period;
            const double hi = (m + 1.0) * period;
            const auto peak = dense_max([&](double x) { return g12_theory(x, d); }, lo, hi,
                                        period / 2000.0);
            CHECK(peak.second <= prev_peak + 1e-12);
            prev_peak = peak.second;
        }
    }
}

TEST_CASE("r_model references") {
    const AutoCorrelationLevels thermal{2.0, 2.0};
    const ModelParams p{20.0, 1.58, 5.1, 21.53};
    // At zero delay the cross-correlation is exactly 1 for any parameters.
    REQUIRE(r_model(0.0, p, thermal) == 0.25);
    REQUIRE(r_model(0.0, p, AutoCorrelationLevels{1.0, 1.0}) == 1.0);

    // Large-detuning dimensionless limit of the base model.
    const ModelParams wide = ModelParams::theory(1000.0);
    const auto ext = find_extremum([&](double x) { return r_model(x, wide, thermal); }, 0.0,
                                   5.0, oscillation_scan_step(1000.0, 0.0, 5.0));
    CHECK(std::fabs(ext.value - 1.71) < 0.01);
}

TEST_CASE("r_model is the literal pointwise identity") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> tau(-5.0, 5.0);
    const ModelParams p{20.0, 1.3, 2.0, 18.0};
    const AutoCorrelationLevels autos{1.9, 2.1};
    for (int i = 0; i < 200; ++i) {
        const double x = tau(rng);
        const double g = g12_empirical(x, p);
        REQUIRE(r_model(x, p, autos) == g * g / (1.9 * 2.1));
    }
}

TEST_CASE("find_extremum handles flat curves and bad input") {
    const auto flat = find_extremum([](double) { return 3.5; }, 0.0, 2.0, 0.01);
    CHECK(flat.value == 3.5);
    CHECK((flat.tau >= 0.0 && flat.tau <= 2.0));

    CHECK(testsupport::error_code_of([] {
              find_extremum([](double x) { return x; }, 1.0, 1.0, 0.1);
          }) == errc::invalid_argument);
}

TEST_CASE("parameter validation") {
    CHECK(testsupport::error_code_of([] { ModelParams{0.0, 0.0, 1.0, 0.0}.validate(); }) ==
          errc::bad_config);
    CHECK(testsupport::error_code_of([] { ModelParams{0.0, 1.0, -2.0, 0.0}.validate(); }) ==
          errc::bad_config);
}
