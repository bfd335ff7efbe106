#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "chromcc/image.hpp"
#include "testutil.hpp"

using namespace chromcc;

namespace {

LinearImage image_from(const std::vector<RGB>& pixels, int width, int height) {
    LinearImage img(width, height);
    for (std::size_t i = 0; i < pixels.size(); ++i) img.set_pixel(i, pixels[i]);
    return img;
}

}  // namespace

TEST_CASE("load_linear_image applies black level and validity rules") {
    const auto dir = testutil::temp_dir("image_load");
    LinearImage raw(3, 1);
    raw.set_pixel(0, RGB{129, 129, 129});
    raw.set_pixel(1, RGB{500, 300, 200});
    raw.set_pixel(2, RGB{100, 200, 300});
    write_ppm16(dir / "a.ppm", raw, 1.0);

    SUBCASE("canon 5d offset of 129") {
        const LinearImage img = load_linear_image(dir / "a.ppm", CameraId::canon_5d, 129);
        CHECK(img.pixel(0).r == 0.0);
        CHECK(img.pixel(0).g == 0.0);
        CHECK(img.pixel(0).b == 0.0);
        CHECK_FALSE(img.is_valid(0));  // zero after subtraction
        CHECK(img.pixel(2).r == 0.0);
        CHECK(img.pixel(2).g == 71.0);
        CHECK(img.pixel(2).b == 171.0);
        CHECK(img.is_valid(2));
        CHECK(img.camera() == CameraId::canon_5d);
    }
    SUBCASE("canon 1d keeps raw values") {
        const LinearImage img = load_linear_image(dir / "a.ppm", CameraId::canon_1d, 0);
        CHECK(img.pixel(1).r == 500.0);
        CHECK(img.pixel(1).g == 300.0);
        CHECK(img.pixel(1).b == 200.0);
    }

    std::filesystem::remove_all(dir);
}

TEST_CASE("near-saturated raw pixels are marked invalid") {
    const auto dir = testutil::temp_dir("image_sat");
    LinearImage raw(2, 1);
    raw.set_pixel(0, RGB{64300, 100, 100});  // above 0.98 * 65535
    raw.set_pixel(1, RGB{64000, 100, 100});  // below the threshold
    write_ppm16(dir / "s.ppm", raw, 1.0);
    const LinearImage img = load_linear_image(dir / "s.ppm", CameraId::unknown, 0);
    CHECK_FALSE(img.is_valid(0));
    CHECK(img.is_valid(1));
    std::filesystem::remove_all(dir);
}

TEST_CASE("png round trip") {
    const auto dir = testutil::temp_dir("image_png");
    std::vector<std::uint16_t> samples = {10, 20, 30, 40000, 500, 6000};
    write_png16_rgb(dir / "img.png", samples, 2, 1);
    const LinearImage img = load_linear_image(dir / "img.png", CameraId::unknown, 0);
    CHECK(img.width() == 2);
    CHECK(img.height() == 1);
    CHECK(img.pixel(0).r == 10.0);
    CHECK(img.pixel(0).g == 20.0);
    CHECK(img.pixel(0).b == 30.0);
    CHECK(img.pixel(1).r == 40000.0);
    CHECK(img.pixel(1).b == 6000.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("loader errors") {
    const auto dir = testutil::temp_dir("image_err");
    CHECK_THROWS_AS(load_linear_image(dir / "missing.ppm", CameraId::unknown, 0), Error);
    {
        std::ofstream bad(dir / "bad.ppm");
        bad << "P5\n2 2\n255\n";
    }
    try {
        load_linear_image(dir / "bad.ppm", CameraId::unknown, 0);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unsupported_format);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("apply_checker_mask") {
    LinearImage img = testutil::random_image(100, 100, *[] {
        static std::mt19937_64 rng(5);
        return &rng;
    }());

    SUBCASE("empty mask list leaves the mask unchanged") {
        apply_checker_mask(img, {});
        CHECK(img.valid_count() == 100 * 100);
    }
    SUBCASE("one 10x10 rectangle removes exactly 100 pixels") {
        const MaskRect rect{20, 30, 30, 40};
        apply_checker_mask(img, std::span<const MaskRect>(&rect, 1));
        CHECK(img.valid_count() == 9900);
    }
    SUBCASE("full-image rectangle kills every pixel and EmptyImage follows") {
        const MaskRect rect{0, 0, 100, 100};
        apply_checker_mask(img, std::span<const MaskRect>(&rect, 1));
        CHECK(img.valid_count() == 0);
        CHECK_THROWS_AS(normalize_luminance(img), Error);
    }
    SUBCASE("out-of-bounds rectangle is rejected") {
        const MaskRect rect{90, 90, 101, 100};
        try {
            apply_checker_mask(img, std::span<const MaskRect>(&rect, 1));
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::out_of_bounds);
        }
    }
}

TEST_CASE("normalize_luminance") {
    SUBCASE("constant image normalizes to one") {
        const LinearImage img = image_from({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}}, 2, 2);
        const NormalizedLuminanceMap lum = normalize_luminance(img);
        CHECK(lum.median_l1 == 3.0);
        for (const double y : lum.y) CHECK(y == 1.0);
    }
    SUBCASE("lower median for even and odd counts") {
        const LinearImage img = image_from({{1, 0, 0}, {2, 0, 0}, {3, 0, 0}}, 3, 1);
        const NormalizedLuminanceMap lum = normalize_luminance(img);
        CHECK(lum.median_l1 == 2.0);
        CHECK(lum.y[0] == 0.5);
        CHECK(lum.y[1] == 1.0);
        CHECK(lum.y[2] == 1.5);

        const LinearImage even = image_from({{1, 0, 0}, {2, 0, 0}, {3, 0, 0}, {4, 0, 0}}, 4, 1);
        CHECK(normalize_luminance(even).median_l1 == 2.0);
    }
    SUBCASE("global scaling cancels") {
        std::mt19937_64 rng(6);
        const LinearImage img = testutil::random_image(16, 16, rng);
        LinearImage scaled = img;
        for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            const RGB v = img.pixel(i);
            scaled.set_pixel(i, RGB{8.0 * v.r, 8.0 * v.g, 8.0 * v.b});
        }
        const auto a = normalize_luminance(img);
        const auto b = normalize_luminance(scaled);
        for (std::size_t i = 0; i < a.y.size(); ++i) CHECK(a.y[i] == b.y[i]);  // exact: 8 = 2^3

        LinearImage odd = img;
        for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            const RGB v = img.pixel(i);
            odd.set_pixel(i, RGB{7.0 * v.r, 7.0 * v.g, 7.0 * v.b});
        }
        const auto c = normalize_luminance(odd);
        for (std::size_t i = 0; i < a.y.size(); ++i) {
            CHECK(c.y[i] == doctest::Approx(a.y[i]).epsilon(1e-14));
        }
    }
    SUBCASE("masked pixels never influence the median") {
        std::mt19937_64 rng(7);
        LinearImage img = testutil::random_image(20, 20, rng);
        const MaskRect rect{0, 0, 10, 20};
        apply_checker_mask(img, std::span<const MaskRect>(&rect, 1));
        const auto before = normalize_luminance(img);
        // Arbitrary garbage in masked pixels must not change anything.
        for (int y = 0; y < 20; ++y) {
            for (int x = 0; x < 10; ++x) {
                img.set_pixel(img.index(x, y), RGB{1e9, 2e9, 3e9});
            }
        }
        const auto after = normalize_luminance(img);
        CHECK(after.median_l1 == before.median_l1);
        for (int y = 0; y < 20; ++y) {
            for (int x = 10; x < 20; ++x) {
                CHECK(after.y[img.index(x, y)] == before.y[img.index(x, y)]);
            }
        }
    }
}

TEST_CASE("relight") {
    const GroundTruth gray{chromaticity_of(RGB{1, 1, 1}), 3.0};
    const Chromaticity warm = chromaticity_of(RGB{2, 1, 1});

    SUBCASE("identity relight") {
        const LinearImage img = image_from({{2, 3, 4}}, 1, 1);
        const auto [out, gt] = relight(img, gray, gray.illuminant);
        CHECK(out.pixel(0).r == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(out.pixel(0).g == doctest::Approx(3.0).epsilon(1e-15));
        CHECK(gt.illuminant == gray.illuminant);
    }
    SUBCASE("relit chromaticity follows the new illuminant") {
        const LinearImage img = image_from({{2, 2, 2}}, 1, 1);
        const auto [out, gt] = relight(img, gray, warm);
        const Chromaticity c = chromaticity_of(out.pixel(0));
        CHECK(angular_error_deg(c, warm) < 1e-9);
    }
    SUBCASE("relight round trip is the identity within 1e-9") {
        std::mt19937_64 rng(8);
        const LinearImage img = testutil::random_image(8, 8, rng);
        const auto [relit, gt2] = relight(img, gray, warm);
        const auto [back, gt3] = relight(relit, gt2, gray.illuminant);
        for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            CHECK(back.pixel(i).r == doctest::Approx(img.pixel(i).r).epsilon(1e-12));
            CHECK(back.pixel(i).g == doctest::Approx(img.pixel(i).g).epsilon(1e-12));
            CHECK(back.pixel(i).b == doctest::Approx(img.pixel(i).b).epsilon(1e-12));
        }
    }
    SUBCASE("degenerate source illuminant is rejected") {
        const LinearImage img = image_from({{1, 1, 1}}, 1, 1);
        const GroundTruth bad{Chromaticity{1.0, 0.0, 0.0}, 1.0};
        try {
            relight(img, bad, warm);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::degenerate_illuminant);
        }
    }
}

TEST_CASE("correct_image") {
    const Chromaticity gray = chromaticity_of(RGB{1, 1, 1});
    const Chromaticity warm = chromaticity_of(RGB{2, 1, 1});

    SUBCASE("gray correction is proportional to the input") {
        const LinearImage img = image_from({{2, 4, 6}, {1, 1, 1}}, 2, 1);
        const LinearImage out = correct_image(img, gray);
        const double k = out.pixel(0).r / img.pixel(0).r;
        CHECK(out.pixel(0).g == doctest::Approx(k * img.pixel(0).g).epsilon(1e-12));
        CHECK(out.pixel(1).b == doctest::Approx(k * img.pixel(1).b).epsilon(1e-12));
    }
    SUBCASE("dividing out the illuminant recovers achromatic pixels") {
        const LinearImage img = image_from({{4, 2, 2}}, 1, 1);
        const LinearImage out = correct_image(img, warm);
        const Chromaticity c = chromaticity_of(out.pixel(0));
        CHECK(angular_error_deg(c, gray) < 1e-9);
    }
    SUBCASE("correcting a relit image recovers original chromaticities") {
        std::mt19937_64 rng(9);
        const LinearImage img = testutil::random_image(8, 8, rng);
        const GroundTruth gt{gray, 3.0};
        const auto [relit, new_gt] = relight(img, gt, warm);
        const LinearImage corrected = correct_image(relit, warm);
        for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            const double err = angular_error_deg(chromaticity_of(corrected.pixel(i)),
                                                 chromaticity_of(correct_image(img, gray).pixel(i)));
            CHECK(err < 1e-6);
        }
    }
    SUBCASE("maximum channel value is preserved") {
        const LinearImage img = image_from({{100, 50, 25}}, 1, 1);
        const LinearImage out = correct_image(img, warm);
        double max_out = 0.0;
        for (std::size_t i = 0; i < out.pixel_count(); ++i) {
            max_out = std::max({max_out, out.pixel(i).r, out.pixel(i).g, out.pixel(i).b});
        }
        CHECK(max_out == doctest::Approx(100.0).epsilon(1e-12));
    }
}

TEST_CASE("sidecar csv loaders") {
    const auto dir = testutil::temp_dir("image_csv");
    {
        std::ofstream gt(dir / "gt.csv");
        gt << "filename,r,g,b\nimg1.png,100,200,300\nimg2.png,50,50,50\n";
        std::ofstream masks(dir / "masks.csv");
        masks << "filename,x0,y0,x1,y1\nimg1.png,0,0,10,10\nimg1.png,5,5,20,20\n";
        std::ofstream cams(dir / "cams.csv");
        cams << "filename,camera_id,black_level\nimg1.png,canon_5d,129\nimg2.png,canon_1d,0\n";
    }
    const auto gts = load_ground_truth_csv(dir / "gt.csv");
    REQUIRE(gts.size() == 2);
    const GroundTruth& g1 = gts.at("img1.png");
    CHECK(g1.raw_magnitude == 600.0);
    CHECK(angular_error_deg(g1.illuminant, chromaticity_of(RGB{1, 2, 3})) < 1e-12);

    const auto masks = load_masks_csv(dir / "masks.csv");
    REQUIRE(masks.at("img1.png").size() == 2);
    CHECK(masks.at("img1.png")[1].x1 == 20);

    const auto cams = load_cameras_csv(dir / "cams.csv");
    CHECK(cams.at("img1.png").camera == CameraId::canon_5d);
    CHECK(cams.at("img1.png").black_level == 129);
    CHECK(cams.at("img2.png").camera == CameraId::canon_1d);
    std::filesystem::remove_all(dir);
}
