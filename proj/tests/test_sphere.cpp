#include <catch2/catch.hpp>

#include "panostage/sphere.hpp"
#include "test_helpers.hpp"

using namespace panostage;
using test_helpers::make_band_limited_pano;
using test_helpers::rms_relative_error;
using test_helpers::smooth_field;

TEST_CASE("view window invariants", "[sphere]") {
    ViewWindow win{radians(90), 0.0, 0.0, 64, 64};
    CHECK_NOTHROW(win.validate());
    win.fov = pi;
    CHECK_THROWS_AS(win.validate(), std::invalid_argument);
    win.fov = radians(90);
    win.w = 0;
    CHECK_THROWS_AS(win.validate(), std::invalid_argument);
    win.w = 64;
    win.phi = 2.0;
    CHECK_THROWS_AS(win.validate(), std::invalid_argument);
}

TEST_CASE("front view center samples the panorama center", "[sphere]") {
    const auto pano = make_band_limited_pano(128);
    ViewWindow win{radians(90), 0.0, 0.0, 65, 65};  // odd size: the center pixel exists
    const auto view = equirect_to_perspective(pano, win);
    const vec3 expected = smooth_field(direction_from_lonlat(0.0, 0.0));
    const vec3 got = view.at(32, 32);
    CHECK(got.x == Approx(expected.x).margin(0.01));
    CHECK(got.y == Approx(expected.y).margin(0.01));
    CHECK(got.z == Approx(expected.z).margin(0.01));
}

TEST_CASE("near-zenith view samples the top rows", "[sphere]") {
    RadianceImage pano(256, 128);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 256; ++x) pano.at(x, y) = vec3(1.0);
    ViewWindow win{radians(60), 0.0, half_pi * 0.999, 33, 33};
    const auto view = equirect_to_perspective(pano, win);
    CHECK(view.at(16, 16).x == Approx(1.0));
}

TEST_CASE("right-edge pixel of a 90 degree view lands near +45 longitude", "[sphere]") {
    const int vw = 201;
    ViewWindow win{radians(90), 0.0, 0.0, vw, vw};
    // Oracle: the pixel center at x maps to u = (2(x+0.5)/w - 1) tan(fov/2)
    // and longitude atan(u).
    const double u = (2.0 * (vw - 1 + 0.5) / vw - 1.0) * std::tan(win.fov / 2.0);
    const double expected_lon = std::atan(u);

    RadianceImage pano(512, 256);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 512; ++x) pano.at(x, y) = vec3(lon_of_column(x, 512), 0, 0);
    const auto view = equirect_to_perspective(pano, win);
    CHECK(view.at(vw - 1, (vw - 1) / 2).x == Approx(expected_lon).margin(0.02));
    CHECK(expected_lon == Approx(radians(45)).margin(0.01));
}

TEST_CASE("projection rejects bad panoramas and fov", "[sphere]") {
    RadianceImage square(128, 128);
    ViewWindow win{radians(90), 0.0, 0.0, 32, 32};
    CHECK_THROWS_AS(equirect_to_perspective(square, win), std::invalid_argument);
}

TEST_CASE("direction round trip through a view frame", "[sphere][property]") {
    rng_state rng(23, 5);
    for (int trial = 0; trial < 200; ++trial) {
        ViewWindow win;
        win.fov = radians(30 + 120 * rng.next_double());
        win.theta = -pi + two_pi * rng.next_double();
        win.phi = (rng.next_double() - 0.5) * pi * 0.999;
        win.w = win.h = 64;
        const ViewFrame frame(win);
        const double x = rng.next_double() * 64.0 - 0.5;
        const double y = rng.next_double() * 64.0 - 0.5;
        const vec3 d = frame.pixel_direction(win, x, y);
        double px = 0, py = 0;
        REQUIRE(frame.project(win, d, px, py));
        const vec3 d2 = frame.pixel_direction(win, px, py);
        CHECK(std::acos(clamp(dot(d, d2), -1.0, 1.0)) < 1e-6);
    }
}

TEST_CASE("round trip pano -> views -> pano", "[sphere]") {
    const auto pano = make_band_limited_pano(128);

    SECTION("band-limited content, default plan") {
        const auto plan = plan_views(radians(90), 0.2, 256);
        const auto views = project_plan(pano, plan);
        const auto stitched = perspective_to_equirect(views, 128, 256);
        CHECK(stitched.coverage.count() == size_t(256 * 128));
        CHECK(rms_relative_error(stitched.pano.pixels, pano.pixels) < 0.01);
    }

    SECTION("constant panorama reconstructs exactly") {
        RadianceImage flat(256, 128);
        for (auto& p : flat.pixels.data) p = vec3(0.25, 0.5, 0.75);
        const auto plan = plan_views(radians(90), 0.0, 128);
        const auto views = project_plan(flat, plan);
        const auto stitched = perspective_to_equirect(views, 128, 256);
        for (const vec3& p : stitched.pano.pixels.data) {
            CHECK(p.x == Approx(0.25).epsilon(1e-12));
            CHECK(p.z == Approx(0.75).epsilon(1e-12));
        }
    }
}

TEST_CASE("single view paints only its footprint", "[sphere]") {
    RadianceImage pano(256, 128);
    for (auto& p : pano.pixels.data) p = vec3(1.0);
    ViewWindow win{radians(90), 0.0, 0.0, 128, 128};
    ViewSet<vec3> views;
    views.push_back({win, equirect_to_perspective(pano, win)});
    const auto stitched = perspective_to_equirect(views, 128, 256);

    // Analytic footprint: directions within the 90 degree square frustum.
    const ViewFrame frame(win);
    size_t mismatches = 0;
    for (int y = 0; y < 128; ++y) {
        for (int x = 0; x < 256; ++x) {
            const vec3 d =
                direction_from_lonlat(lon_of_column(x, 256), lat_of_row(y, 128));
            double px = 0, py = 0;
            const bool inside = frame.project(win, d, px, py);
            if (inside != stitched.coverage.test(x, y)) ++mismatches;
        }
    }
    // The rasterized footprint may disagree on the 1-px boundary ring only.
    CHECK(mismatches == 0);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 256; ++x)
            if (stitched.coverage.test(x, y)) CHECK(stitched.pano.at(x, y).x == Approx(1.0));
}

TEST_CASE("empty view set is rejected", "[sphere]") {
    CHECK_THROWS_AS(perspective_to_equirect(ViewSet<vec3>{}, 64, 128), std::invalid_argument);
}

TEST_CASE("plan_views produces the cube decomposition at fov 90 / overlap 0", "[sphere]") {
    const auto plan = plan_views(radians(90), 0.0, 64);
    CHECK(plan.size() == 6);
    int caps = 0, equatorial = 0;
    for (const auto& w : plan) {
        if (std::abs(w.phi) == half_pi) ++caps;
        if (w.phi == 0.0) ++equatorial;
    }
    CHECK(caps == 2);
    CHECK(equatorial == 4);
}

TEST_CASE("plan_views covers the sphere", "[sphere]") {
    for (auto [fov_deg, overlap] : {std::pair{90.0, 0.0}, {90.0, 0.2}, {60.0, 0.25}}) {
        const auto plan = plan_views(radians(fov_deg), overlap, 32);
        const auto coverage = plan_coverage(plan, 128, 256);
        INFO("fov=" << fov_deg << " overlap=" << overlap << " views=" << plan.size());
        CHECK(coverage.count() == size_t(256 * 128));
    }
}

TEST_CASE("plan_views with overlap spaces neighbors closer than the fov", "[sphere]") {
    const auto plan = plan_views(radians(90), 0.2, 32);
    CHECK(plan.size() > 6);
    // Ring neighbours must be spaced by fov*(1-overlap), guaranteeing an
    // angular overlap of at least overlap*fov.
    std::vector<double> ring_thetas;
    for (const auto& w : plan)
        if (std::abs(w.phi) < half_pi && w.phi > 0) ring_thetas.push_back(w.theta);
    std::sort(ring_thetas.begin(), ring_thetas.end());
    REQUIRE(ring_thetas.size() >= 2);
    for (size_t i = 1; i < ring_thetas.size(); ++i) {
        const double gap = ring_thetas[i] - ring_thetas[i - 1];
        CHECK(gap <= radians(90) * (1.0 - 0.2) + 1e-9);
    }
}

TEST_CASE("plan_views validates inputs", "[sphere]") {
    CHECK_THROWS_AS(plan_views(radians(90), 0.5), std::invalid_argument);
    CHECK_THROWS_AS(plan_views(radians(90), -0.1), std::invalid_argument);
    CHECK_THROWS_AS(plan_views(0.0, 0.2), std::invalid_argument);
}

TEST_CASE("wrap equivariance: cyclic shift commutes with projection", "[sphere]") {
    const auto pano = make_band_limited_pano(64);
    const int shift = 32;  // pixels; equals dtheta = shift/w * 2pi
    RadianceImage shifted(128, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 128; ++x) shifted.at(x, y) = pano.at((x + shift) % 128, y);
    const double dtheta = double(shift) / 128.0 * two_pi;

    ViewWindow base{radians(75), 0.3, 0.1, 48, 48};
    ViewWindow moved = base;
    moved.theta = wrap_angle(base.theta + dtheta);

    const auto a = equirect_to_perspective(shifted, base);
    const auto b = equirect_to_perspective(pano, moved);
    CHECK(test_helpers::rms_error(a, b) < 1e-9);
}

TEST_CASE("masks survive a projection round trip away from seams", "[sphere]") {
    // Synthetic blob mask on the panorama.
    Image<uint8_t> mask(256, 128, 0);
    for (int y = 50; y < 80; ++y)
        for (int x = 60; x < 110; ++x) mask.at(x, y) = 1;

    const auto plan = plan_views(radians(90), 0.2, 256);
    ViewSet<uint8_t> views;
    for (const auto& win : plan) views.push_back({win, equirect_to_perspective_nearest(mask, win)});
    const auto back = perspective_to_equirect_nearest(views, 128, 256);

    size_t diff = 0;
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 256; ++x)
            if (mask.at(x, y) != back.at(x, y)) {
                // Any disagreement must hug the blob boundary (1 px band).
                bool near_edge = false;
                for (int dy = -1; dy <= 1 && !near_edge; ++dy)
                    for (int dx = -1; dx <= 1 && !near_edge; ++dx) {
                        const int nx = std::min(std::max(x + dx, 0), 255);
                        const int ny = std::min(std::max(y + dy, 0), 127);
                        if (mask.at(nx, ny) != mask.at(x, y)) near_edge = true;
                    }
                CHECK(near_edge);
                ++diff;
            }
    CHECK(diff < 300);  // strictly a thin boundary band
}
