#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "chromcc/chroma.hpp"
#include "chromcc/rng.hpp"
#include "testutil.hpp"

using namespace chromcc;

TEST_CASE("chromaticity_of normalizes to unit length") {
    const Chromaticity axis = chromaticity_of(RGB{2.0, 0.0, 0.0});
    CHECK(axis.r == 1.0);
    CHECK(axis.g == 0.0);
    CHECK(axis.b == 0.0);

    const Chromaticity gray = chromaticity_of(RGB{1.0, 1.0, 1.0});
    CHECK(gray.r == doctest::Approx(0.5773502691896258).epsilon(1e-12));
    CHECK(gray.g == doctest::Approx(gray.r).epsilon(1e-15));

    const Chromaticity mixed = chromaticity_of(RGB{3.0, 4.0, 0.0});
    CHECK(mixed.r == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(mixed.g == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(mixed.b == 0.0);

    CHECK_THROWS_AS(chromaticity_of(RGB{0.0, 0.0, 0.0}), Error);
    try {
        chromaticity_of(RGB{0.0, 0.0, 0.0});
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::zero_vector);
    }
}

TEST_CASE("angular error in degrees") {
    const Chromaticity gray = chromaticity_of(RGB{1.0, 1.0, 1.0});
    CHECK(angular_error_deg(gray, gray) == 0.0);

    const Chromaticity red = chromaticity_of(RGB{1.0, 0.0, 0.0});
    const Chromaticity green = chromaticity_of(RGB{0.0, 1.0, 0.0});
    CHECK(angular_error_deg(red, green) == doctest::Approx(90.0).epsilon(1e-12));

    const Chromaticity yellow = chromaticity_of(RGB{1.0, 1.0, 0.0});
    CHECK(angular_error_deg(gray, yellow) == doctest::Approx(35.26438968275465).epsilon(1e-12));
    CHECK(angular_error_deg(yellow, gray) == angular_error_deg(gray, yellow));
}

TEST_CASE("angular error properties on random pairs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const Chromaticity a = testutil::random_chroma(rng);
        const Chromaticity b = testutil::random_chroma(rng);
        const double e = angular_error_deg(a, b);
        CHECK(e >= 0.0);
        CHECK(e <= 90.0 + 1e-9);
        CHECK(e == angular_error_deg(b, a));
    }
}

TEST_CASE("octant_theta_norm matches atan2") {
    CHECK(octant_theta_norm(0.0, 1.0) == 0.0);
    CHECK(octant_theta_norm(1.0, 0.0) == 1.0);
    CHECK(octant_theta_norm(1.0, 1.0) == 0.5);
    CHECK(octant_theta_norm(0.0, 0.0) == 0.0);

    std::mt19937_64 rng(42);
    double worst = 0.0;
    for (int trial = 0; trial < 100000; ++trial) {
        const double b = rng::uniform_unit(rng);
        const double r = rng::uniform_unit(rng);
        if (b == 0.0 && r == 0.0) continue;
        const double ref = std::atan2(b, r) / (3.14159265358979323846 / 2.0);
        worst = std::max(worst, std::abs(octant_theta_norm(b, r) - ref));
    }
    CHECK(worst < 1e-13);
}

TEST_CASE("quantize_chroma reference bins") {
    const Chromaticity gray = chromaticity_of(RGB{1.0, 1.0, 1.0});
    CHECK(quantize_chroma(gray, 128) == ChromaBin{73, 64});

    CHECK(quantize_chroma(Chromaticity{1.0, 0.0, 0.0}, 64) == ChromaBin{0, 0});
    CHECK(quantize_chroma(Chromaticity{0.0, 0.0, 1.0}, 64) == ChromaBin{0, 63});
    CHECK(quantize_chroma(Chromaticity{0.0, 1.0, 0.0}, 64) == ChromaBin{63, 0});
}

TEST_CASE("quantize_chroma is total on random inputs") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100000; ++trial) {
        const ChromaBin bin = quantize_chroma(testutil::random_chroma(rng), kPixelRes);
        REQUIRE(bin.u_idx >= 0);
        REQUIRE(bin.u_idx < kPixelRes);
        REQUIRE(bin.theta_idx >= 0);
        REQUIRE(bin.theta_idx < kPixelRes);
        const int flat = flat_index(bin, kPixelRes);
        REQUIRE(flat >= 0);
        REQUIRE(flat < kPixelBins);
    }
}

TEST_CASE("bin_center reconstruction") {
    const Chromaticity c = bin_center(ChromaBin{0, 0}, 64);
    CHECK(c.r == doctest::Approx(0.9998941860932966).epsilon(1e-12));
    CHECK(c.g == 0.0078125);
    CHECK(c.b == doctest::Approx(0.012271163782377022).epsilon(1e-12));
    const double norm = c.r * c.r + c.g * c.g + c.b * c.b;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("quantize(bin_center) round trip at both resolutions") {
    for (const int res : {kIllumRes, kPixelRes}) {
        for (int u = 0; u < res; ++u) {
            for (int t = 0; t < res; ++t) {
                const ChromaBin bin{u, t};
                REQUIRE(quantize_chroma(bin_center(bin, res), res) == bin);
            }
        }
    }
}

TEST_CASE("quantization error distribution at R=128") {
    // Equal-area u-theta bins are angularly elongated near the green pole,
    // so the worst case approaches acos(127.5/128) ~ 5.07 deg; typical
    // errors sit well under a degree.
    std::mt19937_64 rng(12345);
    double max_err = 0.0;
    std::vector<double> errs;
    errs.reserve(10000);
    for (int trial = 0; trial < 10000; ++trial) {
        const Chromaticity x = testutil::random_chroma(rng);
        const Chromaticity back = bin_center(quantize_chroma(x, kPixelRes), kPixelRes);
        const double e = angular_error_deg(x, back);
        errs.push_back(e);
        max_err = std::max(max_err, e);
    }
    std::sort(errs.begin(), errs.end());
    CHECK(max_err < 5.1);
    CHECK(errs[static_cast<std::size_t>(errs.size() * 0.99)] < 1.0);
    double mean = 0.0;
    for (const double e : errs) mean += e;
    CHECK(mean / errs.size() < 0.35);
}

TEST_CASE("luminance bins") {
    CHECK(quantize_luminance(0.0) == 0);
    CHECK(quantize_luminance(1.0) == 5);
    CHECK(quantize_luminance(7.3) == 19);
    CHECK(quantize_luminance(0.19) == 0);
    CHECK(quantize_luminance(0.2) == 1);
    CHECK(quantize_luminance(3.99) == 19);
    CHECK(quantize_luminance(4.0) == 19);
}
