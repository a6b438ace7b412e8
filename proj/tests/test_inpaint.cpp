#include <catch2/catch.hpp>

#include "panostage/inpaint.hpp"
#include "test_helpers.hpp"

using namespace panostage;

namespace {

RadianceImage affine_image(int w, int h, vec3 base, vec3 gx, vec3 gy) {
    RadianceImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = base + gx * double(x) + gy * double(y);
    return img;
}

}  // namespace

TEST_CASE("diffusion_fill: empty mask is the identity", "[inpaint]") {
    const auto img = affine_image(16, 16, vec3(0.5), vec3(0.01, 0, 0), vec3(0, 0.02, 0));
    Mask empty(16, 16);
    const auto res = diffusion_fill(img, empty);
    for (size_t i = 0; i < img.pixels.data.size(); ++i)
        CHECK(res.image.pixels.data[i] == img.pixels.data[i]);
}

TEST_CASE("diffusion_fill: constant image stays constant", "[inpaint]") {
    RadianceImage img(24, 24);
    for (auto& p : img.pixels.data) p = vec3(0.7, 0.6, 0.5);
    Mask mask(24, 24);
    for (int y = 8; y < 16; ++y)
        for (int x = 6; x < 20; ++x) mask.set(x, y);
    const auto res = diffusion_fill(img, mask);
    for (const vec3& p : res.image.pixels.data) {
        CHECK(p.x == Approx(0.7).margin(1e-6));
        CHECK(p.z == Approx(0.5).margin(1e-6));
    }
}

TEST_CASE("diffusion_fill: harmonic fill reproduces affine fields", "[inpaint]") {
    const auto img = affine_image(32, 32, vec3(1.0, 2.0, 0.1), vec3(0.03, -0.01, 0.002),
                                  vec3(0.01, 0.02, -0.001));
    Mask mask(32, 32);
    for (int y = 10; y < 22; ++y)
        for (int x = 12; x < 24; ++x) mask.set(x, y);
    const auto res = diffusion_fill(img, mask);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            CHECK(std::abs(res.image.at(x, y).x - img.at(x, y).x) < 1e-3);
            CHECK(std::abs(res.image.at(x, y).y - img.at(x, y).y) < 1e-3);
            CHECK(std::abs(res.image.at(x, y).z - img.at(x, y).z) < 1e-3);
        }
}

TEST_CASE("diffusion_fill: unmasked pixels are bit-identical", "[inpaint]") {
    RadianceImage img(20, 20);
    rng_state rng(15, 0);
    for (auto& p : img.pixels.data) p = vec3(rng.next_double(), rng.next_double(), rng.next_double());
    Mask mask(20, 20);
    for (int y = 5; y < 12; ++y)
        for (int x = 5; x < 12; ++x) mask.set(x, y);
    const auto res = diffusion_fill(img, mask);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x)
            if (!mask.test(x, y)) {
                CHECK(res.image.at(x, y).x == img.at(x, y).x);
                CHECK(res.image.at(x, y).y == img.at(x, y).y);
                CHECK(res.image.at(x, y).z == img.at(x, y).z);
            }
}

TEST_CASE("diffusion_fill: no leakage across the wall-floor boundary", "[inpaint]") {
    // Wall occupies rows < 10 at value A, floor rows > 10 at value C, and the
    // boundary curve itself runs along row 10.
    const int w = 24, h = 24;
    RadianceImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = y < 10 ? vec3(0.9) : vec3(0.2);
    Mask boundary(w, h, MaskLabel::floor_boundary);
    for (int x = 0; x < w; ++x) boundary.set(x, 10);

    Mask mask(w, h);
    for (int y = 4; y < 18; ++y)
        for (int x = 8; x < 16; ++x) mask.set(x, y);

    const auto res = diffusion_fill(img, mask, boundary);
    for (int y = 0; y < h; ++y)
        for (int x = 8; x < 16; ++x) {
            if (y >= 4 && y < 10) CHECK(res.image.at(x, y).x == Approx(0.9).margin(1e-6));
            if (y > 10 && y < 18) CHECK(res.image.at(x, y).x == Approx(0.2).margin(1e-6));
        }
}

TEST_CASE("diffusion_fill: full mask is rejected", "[inpaint]") {
    RadianceImage img(8, 8);
    Mask full(8, 8);
    for (auto& v : full.grid.data) v = 1;
    CHECK_THROWS_AS(diffusion_fill(img, full), std::invalid_argument);
}

TEST_CASE("diffusion_fill is deterministic", "[inpaint]") {
    RadianceImage img(24, 24);
    rng_state rng(99, 1);
    for (auto& p : img.pixels.data) p = vec3(rng.next_double(), rng.next_double(), rng.next_double());
    Mask mask(24, 24);
    for (int y = 6; y < 18; ++y)
        for (int x = 3; x < 21; ++x) mask.set(x, y);
    const auto a = diffusion_fill(img, mask);
    const auto b = diffusion_fill(img, mask);
    for (size_t i = 0; i < a.image.pixels.data.size(); ++i)
        CHECK(a.image.pixels.data[i] == b.image.pixels.data[i]);
}

TEST_CASE("periodic_fill: checkerboard reconstructs exactly", "[inpaint]") {
    const int w = 96, h = 64, period = 8;
    RadianceImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = ((x / period + y / period) % 2) ? vec3(0.8) : vec3(0.2);
    Mask region(w, h);
    for (auto& v : region.grid.data) v = 1;
    Mask hole(w, h);
    for (int y = 24; y < 40; ++y)
        for (int x = 40; x < 56; ++x) hole.set(x, y);

    const auto ground_truth = img;
    RadianceImage damaged = img;
    for (int y = 24; y < 40; ++y)
        for (int x = 40; x < 56; ++x) damaged.at(x, y) = vec3(0.0);

    const auto res = periodic_fill(damaged, hole, region);
    CHECK_FALSE(res.report.used_fallback);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            CHECK(res.image.at(x, y).x == Approx(ground_truth.at(x, y).x).margin(1e-12));
}

TEST_CASE("periodic_fill: constant floor fills constant", "[inpaint]") {
    RadianceImage img(48, 32);
    for (auto& p : img.pixels.data) p = vec3(0.42);
    Mask region(48, 32);
    for (auto& v : region.grid.data) v = 1;
    Mask hole(48, 32);
    for (int y = 10; y < 20; ++y)
        for (int x = 20; x < 30; ++x) hole.set(x, y);
    const auto res = periodic_fill(img, hole, region);
    for (const vec3& p : res.image.pixels.data) CHECK(p.x == Approx(0.42).margin(1e-6));
}

TEST_CASE("periodic_fill: planted plank period is recovered within 2 px", "[inpaint]") {
    // Wood-plank style pattern, exactly periodic with (64, 0). The grain term
    // is a vertical chirp, so no vertical lag correlates and the horizontal
    // plank period is the unambiguous winner.
    const int w = 256, h = 96;
    RadianceImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int phase = x % 64;
            const double plank = 0.45 + 0.25 * std::sin(two_pi * phase / 64.0) +
                                 (phase < 3 ? -0.3 : 0.0);  // dark gap between planks
            const double grain = 0.1 * std::sin(two_pi * 3.0 * phase / 64.0 + 0.002 * y * y);
            img.at(x, y) = vec3(plank + grain, (plank + grain) * 0.8, (plank + grain) * 0.6);
        }
    Mask region(w, h);
    for (auto& v : region.grid.data) v = 1;
    Mask hole(w, h);
    for (int y = 30; y < 62; ++y)
        for (int x = 96; x < 150; ++x) hole.set(x, y);

    const auto truth = img;
    RadianceImage damaged = img;
    for (int y = 30; y < 62; ++y)
        for (int x = 96; x < 150; ++x) damaged.at(x, y) = vec3(0.0);

    const auto res = periodic_fill(damaged, hole, region);
    REQUIRE_FALSE(res.report.used_fallback);
    CHECK(std::abs(res.report.period.dx - 64) <= 2);
    CHECK(std::abs(res.report.period.dy - 0) <= 2);

    // SSIM of the filled region against ground truth.
    Image<double> got(64, 32), want(64, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 64; ++x) {
            got.at(x, y) = res.image.at(92 + x, 30 + y).x;
            want.at(x, y) = truth.at(92 + x, 30 + y).x;
        }
    CHECK(test_helpers::ssim(got, want) > 0.9);
}

TEST_CASE("periodic_fill: aperiodic content falls back to diffusion", "[inpaint]") {
    RadianceImage img(64, 48);
    rng_state rng(5, 5);
    for (auto& p : img.pixels.data) p = vec3(rng.next_double());
    Mask region(64, 48);
    for (auto& v : region.grid.data) v = 1;
    Mask hole(64, 48);
    for (int y = 20; y < 28; ++y)
        for (int x = 28; x < 36; ++x) hole.set(x, y);

    const auto res = periodic_fill(img, hole, region);
    CHECK(res.report.used_fallback);
    // Fallback still fills every hole pixel deterministically.
    const auto again = periodic_fill(img, hole, region);
    for (size_t i = 0; i < res.image.pixels.data.size(); ++i)
        CHECK(res.image.pixels.data[i] == again.image.pixels.data[i]);
}

TEST_CASE("periodic_fill: mask must sit inside the region", "[inpaint]") {
    RadianceImage img(32, 32);
    Mask region(32, 32);
    for (int y = 16; y < 32; ++y)
        for (int x = 0; x < 32; ++x) region.set(x, y);
    Mask hole(32, 32);
    hole.set(4, 4);  // outside the region
    CHECK_THROWS_AS(periodic_fill(img, hole, region), std::invalid_argument);
}
