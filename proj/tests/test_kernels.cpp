#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "chromcc/kernels.hpp"
#include "chromcc/rng.hpp"
#include "testutil.hpp"

using namespace chromcc;
using kernels::Backend;

namespace {

struct TestPixels {
    std::vector<double> r, g, b, y;
    std::vector<std::uint8_t> valid;

    kernels::ImageView view() const {
        return {r.data(), g.data(), b.data(), valid.data(), r.size()};
    }
};

TestPixels make_pixels(std::size_t n, std::mt19937_64& rng) {
    TestPixels px;
    px.r.resize(n);
    px.g.resize(n);
    px.b.resize(n);
    px.y.resize(n);
    px.valid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Mix of generic colors, zero channels, all-zero pixels and
        // invalid pixels to hit every kernel branch.
        const std::uint64_t kind = rng::uniform_below(rng, 16);
        if (kind == 0) {
            px.r[i] = px.g[i] = px.b[i] = 0.0;
        } else if (kind == 1) {
            px.r[i] = 0.0;
            px.g[i] = 900.0 * rng::uniform_unit(rng);
            px.b[i] = 0.0;
        } else if (kind == 2) {
            px.r[i] = 500.0 * rng::uniform_unit(rng);
            px.g[i] = 0.0;
            px.b[i] = 500.0 * rng::uniform_unit(rng);
        } else {
            px.r[i] = 1000.0 * rng::uniform_unit(rng);
            px.g[i] = 1000.0 * rng::uniform_unit(rng);
            px.b[i] = 1000.0 * rng::uniform_unit(rng);
        }
        px.y[i] = 5.0 * rng::uniform_unit(rng);
        px.valid[i] = kind == 3 ? 0 : 1;
    }
    return px;
}

bool avx2_available() { return kernels::backend_available(Backend::avx2); }

}  // namespace

TEST_CASE("luminance kernel backends agree bit for bit") {
    std::mt19937_64 rng(101);
    const TestPixels px = make_pixels(1027, rng);
    const RGB gains{1.25, 0.8, 1.6};

    std::vector<double> scalar_out(px.r.size());
    kernels::luminance_l1(px.view(), gains, scalar_out.data(), Backend::scalar);
    for (std::size_t i = 0; i < px.r.size(); ++i) {
        CHECK(scalar_out[i] == (px.r[i] * gains.r + px.g[i] * gains.g) + px.b[i] * gains.b);
    }

    if (avx2_available()) {
        std::vector<double> simd_out(px.r.size());
        kernels::luminance_l1(px.view(), gains, simd_out.data(), Backend::avx2);
        REQUIRE(simd_out == scalar_out);
    }
}

TEST_CASE("cell kernel backends agree bit for bit") {
    std::mt19937_64 rng(202);
    for (int trial = 0; trial < 4; ++trial) {
        const TestPixels px = make_pixels(4096 + trial, rng);
        const RGB gains =
            trial % 2 == 0 ? RGB{1.0, 1.0, 1.0} : RGB{1.0 / 0.7, 1.0 / 0.55, 1.0 / 0.9};

        std::vector<std::int32_t> scalar_cells(px.r.size());
        kernels::pixel_cells(px.view(), gains, px.y.data(), scalar_cells.data(),
                             Backend::scalar);
        if (avx2_available()) {
            std::vector<std::int32_t> simd_cells(px.r.size());
            kernels::pixel_cells(px.view(), gains, px.y.data(), simd_cells.data(),
                                 Backend::avx2);
            REQUIRE(simd_cells == scalar_cells);
        }

        std::vector<std::uint32_t> scalar_counts(kTableCells, 0);
        kernels::accumulate_histogram(px.view(), gains, px.y.data(), scalar_counts.data(),
                                      Backend::scalar);
        if (avx2_available()) {
            std::vector<std::uint32_t> simd_counts(kTableCells, 0);
            kernels::accumulate_histogram(px.view(), gains, px.y.data(), simd_counts.data(),
                                          Backend::avx2);
            REQUIRE(simd_counts == scalar_counts);
        }

        // Histogram totals match the valid, nonzero pixels.
        std::uint64_t expected = 0;
        for (std::size_t i = 0; i < px.r.size(); ++i) {
            expected += px.valid[i] && (px.r[i] + px.g[i] + px.b[i]) > 0.0;
        }
        std::uint64_t total = 0;
        for (const std::uint32_t c : scalar_counts) total += c;
        CHECK(total == expected);
    }
}

TEST_CASE("pixel cells match the public single-pixel operations") {
    std::mt19937_64 rng(303);
    const TestPixels px = make_pixels(2048, rng);
    const RGB gains{1.0 / 0.62, 1.0 / 0.5, 1.0 / 0.61};

    std::vector<std::int32_t> cells(px.r.size());
    kernels::pixel_cells(px.view(), gains, px.y.data(), cells.data());

    for (std::size_t i = 0; i < px.r.size(); ++i) {
        if (!px.valid[i]) {
            CHECK(cells[i] == -1);
            continue;
        }
        const RGB scaled{px.r[i] * gains.r, px.g[i] * gains.g, px.b[i] * gains.b};
        if (scaled.r * scaled.r + scaled.g * scaled.g + scaled.b * scaled.b == 0.0) {
            CHECK(cells[i] == -1);
            continue;
        }
        const int c = flat_index(quantize_chroma(chromaticity_of(scaled), kPixelRes), kPixelRes);
        const int y = quantize_luminance(px.y[i]);
        REQUIRE(cells[i] == y * kPixelBins + c);
    }
}

TEST_CASE("score kernel backends agree within rounding") {
    std::mt19937_64 rng(404);
    const std::size_t n_cells = 3001;
    std::vector<std::int32_t> chroma_idx(n_cells);
    std::vector<std::int32_t> y_offset(n_cells);
    std::vector<double> count(n_cells);
    for (std::size_t j = 0; j < n_cells; ++j) {
        chroma_idx[j] = static_cast<std::int32_t>(rng::uniform_below(rng, kPixelBins));
        y_offset[j] =
            static_cast<std::int32_t>(rng::uniform_below(rng, kLumBins)) * kPixelBins;
        count[j] = static_cast<double>(1 + rng::uniform_below(rng, 50));
    }
    std::vector<std::int32_t> gmap_row(kPixelBins);
    for (auto& v : gmap_row) v = static_cast<std::int32_t>(rng::uniform_below(rng, kPixelBins));
    std::vector<double> table(kTableCells);
    for (auto& v : table) v = -12.0 + 10.0 * rng::uniform_unit(rng);

    const double scalar_sum = kernels::score_cells(chroma_idx.data(), y_offset.data(),
                                                   count.data(), n_cells, gmap_row.data(),
                                                   table.data(), Backend::scalar);
    double reference = 0.0;
    for (std::size_t j = 0; j < n_cells; ++j) {
        reference += count[j] * table[y_offset[j] + gmap_row[chroma_idx[j]]];
    }
    CHECK(scalar_sum == reference);

    if (avx2_available()) {
        const double simd_sum = kernels::score_cells(chroma_idx.data(), y_offset.data(),
                                                     count.data(), n_cells, gmap_row.data(),
                                                     table.data(), Backend::avx2);
        CHECK(simd_sum == doctest::Approx(scalar_sum).epsilon(1e-12));
    }
}

TEST_CASE("backend dispatch reports a usable backend") {
    const Backend active = kernels::active_backend();
    CHECK(kernels::backend_available(active));
    CHECK(kernels::backend_available(Backend::scalar));
    CHECK((std::string(kernels::backend_name(active)) == "scalar" ||
           std::string(kernels::backend_name(active)) == "avx2"));
}
