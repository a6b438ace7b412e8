#include <catch2/catch.hpp>

#include "panostage/hdr.hpp"
#include "panostage/mask_ops.hpp"
#include "test_helpers.hpp"

using namespace panostage;

TEST_CASE("sunlight_mask thresholds calibrated luminance", "[mask]") {
    RadianceImage pano(64, 32);
    for (auto& p : pano.pixels.data) p = vec3(100.0);
    pano.calibration = Calibration::absolute;

    CHECK(sunlight_mask(pano, 1000.0).count() == 0);

    for (auto& p : pano.pixels.data) p = vec3(2000.0 + 1.0);
    CHECK(sunlight_mask(pano, 1000.0).count() == size_t(64 * 32));

    RadianceImage uncalibrated(64, 32);
    CHECK_THROWS_AS(sunlight_mask(uncalibrated, 1000.0), std::invalid_argument);
}

TEST_CASE("sunlight_mask recovers a planted sun patch", "[mask]") {
    RadianceImage pano(128, 64);
    for (auto& p : pano.pixels.data) p = vec3(300.0);  // lit room surfaces
    // Planted sun: 1e5 cd/m^2 block.
    for (int y = 10; y < 20; ++y)
        for (int x = 30; x < 46; ++x) pano.at(x, y) = vec3(1e5);
    // A single hot speckle pixel that the morphological open must drop.
    pano.at(100, 50) = vec3(1e5);
    pano.calibration = Calibration::absolute;

    const Mask m = sunlight_mask(pano, 2000.0);
    CHECK(m.label == MaskLabel::sunlight);
    CHECK_FALSE(m.test(100, 50));
    // The patch interior survives; allow a 1-px morphology margin at edges.
    for (int y = 11; y < 19; ++y)
        for (int x = 31; x < 45; ++x) CHECK(m.test(x, y));
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 128; ++x)
            if (x < 29 || x > 46 || y < 9 || y > 20) CHECK_FALSE(m.test(x, y));
}

TEST_CASE("tripod_mask covers the expected row count", "[mask]") {
    const Mask m = tripod_mask(6720, 3360, pi / 12.0);
    // floor(3360 * (pi/12) / pi) = 280 rows.
    size_t masked_rows = 0;
    for (int y = 0; y < 3360; ++y) {
        bool any = m.test(0, y);
        bool all = true;
        for (int x = 0; x < 6720; x += 97) all = all && m.test(x, y);
        CHECK(any == all);  // every masked row is fully masked
        if (any) ++masked_rows;
    }
    CHECK(masked_rows == 280);
    // Rows start from the bottom.
    CHECK(m.test(0, 3359));
    CHECK_FALSE(m.test(0, 3360 - 281));
}

TEST_CASE("tripod_mask limits and degenerate cap", "[mask]") {
    CHECK_THROWS_AS(tripod_mask(64, 32, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(tripod_mask(64, 32, pi / 3.0), std::invalid_argument);
    // Tiny cap: zero full rows.
    CHECK(tripod_mask(64, 32, 1e-6).count() == 0);
}

TEST_CASE("filter_contours_by_floor keeps floor-attached components", "[mask]") {
    Mask furniture(64, 64, MaskLabel::furniture);
    // Sofa blob overlapping the floor region.
    for (int y = 40; y < 50; ++y)
        for (int x = 10; x < 25; ++x) furniture.set(x, y);
    // Wall art blob with zero floor overlap.
    for (int y = 5; y < 12; ++y)
        for (int x = 40; x < 50; ++x) furniture.set(x, y);

    Mask floor_region(64, 64, MaskLabel::floor_boundary);
    for (int y = 45; y < 64; ++y)
        for (int x = 0; x < 64; ++x) floor_region.set(x, y);

    const Mask kept = filter_contours_by_floor(furniture, floor_region);
    CHECK(kept.test(12, 42));        // sofa kept, including pixels above the floor line
    CHECK(kept.test(12, 48));
    CHECK_FALSE(kept.test(45, 8));   // wall art removed

    // Output never exceeds the input.
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (kept.test(x, y)) CHECK(furniture.test(x, y));

    Mask wrong(32, 32);
    CHECK_THROWS_AS(filter_contours_by_floor(furniture, wrong), std::invalid_argument);
}

TEST_CASE("component fully inside floor kept; disjoint removed", "[mask]") {
    Mask furniture(32, 32, MaskLabel::furniture);
    furniture.set(5, 5);
    Mask floor_region(32, 32);
    SECTION("inside") {
        floor_region.set(5, 5);
        CHECK(filter_contours_by_floor(furniture, floor_region).count() == 1);
    }
    SECTION("disjoint") {
        floor_region.set(20, 20);
        CHECK(filter_contours_by_floor(furniture, floor_region).count() == 0);
    }
}

TEST_CASE("combine_masks unions and dilates", "[mask]") {
    Mask a(40, 40), b(40, 40);
    for (int y = 10; y < 20; ++y)
        for (int x = 10; x < 20; ++x) a.set(x, y);

    SECTION("union with empty is identity") {
        const Mask u = combine_masks({a, b}, 0);
        CHECK(u.count() == a.count());
    }
    SECTION("disjoint areas add") {
        for (int y = 25; y < 30; ++y)
            for (int x = 25; x < 30; ++x) b.set(x, y);
        CHECK(combine_masks({a, b}, 0).count() == a.count() + b.count());
    }
    SECTION("dilation by 5 grows a 10x10 square to 20x20") {
        const Mask d = combine_masks({a}, 5);
        CHECK(d.count() == 400);
        CHECK(d.test(5, 5));
        CHECK(d.test(24, 24));
        CHECK_FALSE(d.test(4, 5));
    }
    SECTION("empty list rejected") {
        CHECK_THROWS_AS(combine_masks({}, 0), std::invalid_argument);
    }
}

TEST_CASE("mask ops are monotone in their inputs", "[mask][property]") {
    rng_state rng(77, 0);
    for (int trial = 0; trial < 10; ++trial) {
        Mask small(24, 24), large(24, 24), floor_region(24, 24);
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x) {
                const bool s = rng.next_double() < 0.2;
                small.set(x, y, s);
                large.set(x, y, s || rng.next_double() < 0.2);
                floor_region.set(x, y, rng.next_double() < 0.3);
            }
        const Mask fs = filter_contours_by_floor(small, floor_region);
        const Mask fl = filter_contours_by_floor(large, floor_region);
        // Enlarging the furniture mask can only grow the kept set.
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x)
                if (fs.test(x, y)) CHECK(fl.test(x, y));

        const Mask cs = combine_masks({small, floor_region}, 1);
        const Mask cl = combine_masks({large, floor_region}, 1);
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x)
                if (cs.test(x, y)) CHECK(cl.test(x, y));
    }
}

TEST_CASE("floor_boundary_from_layout matches the analytic box room", "[mask]") {
    // Square 4x4 m room, camera centered at height 1.6 m. Floor corners at
    // distance sqrt(8), depression angle atan(1.6 / sqrt(8)).
    const int pano_w = 512, pano_h = 256;
    const double cam_h = 1.6, half = 2.0;
    std::vector<PanoCorner> corners;
    for (double az : {-0.75 * pi, -0.25 * pi, 0.25 * pi, 0.75 * pi}) {
        const double d = std::hypot(half, half);
        const double phi = -std::atan(cam_h / d);
        corners.push_back({column_of_lon(az, pano_w), row_of_lat(phi, pano_h)});
    }
    const Mask floor_region = floor_boundary_from_layout(corners, pano_w, pano_h);

    // Analytic boundary: phi(theta) = -atan(cam_h / d(theta)) with d the
    // distance to the square wall along azimuth theta.
    for (int x = 0; x < pano_w; x += 3) {
        const double theta = lon_of_column(x, pano_w);
        const double c = std::cos(theta), s = std::sin(theta);
        const double d = half / std::max(std::abs(c), std::abs(s));
        const double phi_b = -std::atan(cam_h / d);
        const double y_b = row_of_lat(phi_b, pano_h);
        for (int y = 0; y < pano_h; ++y) {
            const bool expect = y > y_b + 1.0;
            const bool forbid = y < y_b - 1.0;
            if (expect) CHECK(floor_region.test(x, y));
            if (forbid) CHECK_FALSE(floor_region.test(x, y));
        }
    }

    // Square room, centered camera: mask symmetric under 90 deg shifts.
    for (int y = 0; y < pano_h; ++y)
        for (int x = 0; x < pano_w; x += 7)
            CHECK(floor_region.test(x, y) == floor_region.test((x + pano_w / 4) % pano_w, y));

    // Floor occupies the bottom of each column.
    for (int x = 0; x < pano_w; x += 11) {
        bool seen = false;
        for (int y = 0; y < pano_h; ++y) {
            if (floor_region.test(x, y)) seen = true;
            else CHECK_FALSE(seen);  // once floor starts it never stops
        }
        CHECK(seen);
    }
}

TEST_CASE("floor_boundary_from_layout rejects bad corner sets", "[mask]") {
    CHECK_THROWS_AS(floor_boundary_from_layout({{0, 0}, {1, 1}}, 64, 32), std::invalid_argument);
    // Corners above the horizon are impossible floor points.
    std::vector<PanoCorner> above = {{10, 5}, {30, 5}, {50, 5}};
    CHECK_THROWS_AS(floor_boundary_from_layout(above, 64, 32), std::invalid_argument);
    // All corners on one side leave most columns without a wall segment.
    std::vector<PanoCorner> open = {{10, 28}, {12, 28}, {14, 28}};
    CHECK_THROWS_AS(floor_boundary_from_layout(open, 64, 32), std::invalid_argument);
}
