#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "biphoton/pair_kernel.hpp"
#include "support/helpers.hpp"

using namespace biphoton;
using testsupport::BracketCdf;
using testsupport::ks_distance;

namespace {
const ModelParams ref_params{20.0, 1.58, 5.1, 21.53};
}

TEST_CASE("kernel draws have zero mean") {
    const auto kernel = PairKernel::build(ref_params, 1.2);
    Xoshiro256 rng(101);
    const int n = 1'000'000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = kernel.sample(rng);
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / n;
    const double sigma = std::sqrt(sum_sq / n - mean * mean);
    const double stderr_mean = sigma / std::sqrt(static_cast<double>(n));
    CHECK(std::fabs(mean) < 4.0 * stderr_mean);
}

TEST_CASE("empirical CDF of draws matches the integrated density") {
    const auto kernel = PairKernel::build(ref_params, 1.2);
    const auto oracle = BracketCdf::build(ref_params, 1.2);
    Xoshiro256 rng(7);
    std::vector<double> draws;
    draws.reserve(200'000);
    for (int i = 0; i < 200'000; ++i) draws.push_back(kernel.sample(rng));
    CHECK(ks_distance(std::move(draws), oracle) < 0.005);
}

TEST_CASE("draw histogram peaks at the first interference maximum") {
    const auto kernel = PairKernel::build(ref_params, 1.2);
    Xoshiro256 rng(23);
    const double bin_w = 0.02;
    std::vector<int> hist(static_cast<std::size_t>(2.4 / bin_w) + 1, 0);
    for (int i = 0; i < 400'000; ++i) {
        const double x = kernel.sample(rng);
        ++hist[static_cast<std::size_t>((x + 1.2) / bin_w)];
    }
    // Positive-side peak.
    std::size_t best = hist.size() / 2;
    for (std::size_t i = hist.size() / 2; i < hist.size(); ++i)
        if (hist[i] > hist[best]) best = i;
    const double peak_x = -1.2 + (static_cast<double>(best) + 0.5) * bin_w;
    CHECK(std::fabs(peak_x - std::numbers::pi / 21.53) < bin_w);
}

TEST_CASE("tabulated CDF is monotone and spans the support") {
    const auto kernel = PairKernel::build(ref_params, 1.2, 2048);
    CHECK(kernel.cdf(-1.2) == 0.0);
    CHECK(kernel.cdf(1.2) == 1.0);
    double prev = -1.0;
    for (double x = -1.2; x <= 1.2; x += 0.004) {
        const double c = kernel.cdf(x);
        REQUIRE(c >= prev);
        prev = c;
    }
    // Evenness of the density: CDF(-x) == 1 - CDF(x) on the symmetric grid.
    for (double x : {0.1, 0.33, 0.7, 1.0}) {
        CHECK(std::fabs(kernel.cdf(-x) - (1.0 - kernel.cdf(x))) < 1e-12);
    }
}

TEST_CASE("degenerate configurations are rejected") {
    CHECK(testsupport::error_code_of([] {
              PairKernel::build(ModelParams{20.0, 0.0, 5.1, 21.53}, 1.2);
          }) == errc::bad_config);
    CHECK(testsupport::error_code_of([] { PairKernel::build(ref_params, -1.0); }) ==
          errc::bad_config);
    CHECK(testsupport::error_code_of([] { PairKernel::build(ref_params, 1.2, 100); }) ==
          errc::bad_config);
}

TEST_CASE("grid honors the oscillation-density floor") {
    // 50 points per period: at delta_prime = 60 over +-2 the default 4096-point
    // table is too coarse and must be refined.
    const ModelParams fast{20.0, 1.0, 2.0, 60.0};
    const auto kernel = PairKernel::build(fast, 2.0, 1000);
    const double period = 2.0 * std::numbers::pi / 60.0;
    const double needed = 4.0 / (period / 50.0);
    CHECK(kernel.table_points() >= static_cast<std::size_t>(needed));
}
