#include <catch2/catch.hpp>

#include "panostage/fisheye.hpp"
#include "test_helpers.hpp"

using namespace panostage;

namespace {

// Synthetic sky sampled through a fisheye projection; value is a smooth
// function of the sky direction.
FisheyeImage make_sky_fisheye(int size, Projection proj,
                              vec3 (*sky)(double theta_off, double azimuth)) {
    FisheyeImage img(size, size, proj);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = x + 0.5 - img.center_x;
            const double dy = y + 0.5 - img.center_y;
            const double r = std::sqrt(dx * dx + dy * dy);
            if (r > img.image_radius) continue;
            const double theta = img.off_axis_angle(r);
            const double azimuth = std::atan2(-dy, dx);
            img.pixels.at(x, y) = sky(theta, azimuth);
        }
    }
    return img;
}

vec3 uniform_sky(double, double) { return vec3(1.0); }

vec3 smooth_sky(double theta, double azimuth) {
    return {1.0 + 0.3 * std::cos(theta), 0.8 + 0.2 * std::sin(azimuth) * std::sin(theta),
            0.9 + 0.1 * std::cos(2.0 * azimuth) * std::sin(theta)};
}

}  // namespace

TEST_CASE("vignetting: identity model leaves the image unchanged", "[fisheye]") {
    auto img = make_sky_fisheye(64, Projection::fisheye_equidistant, smooth_sky);
    const auto out = correct_vignetting(img, VignettingModel{});
    for (size_t i = 0; i < img.pixels.pixels.data.size(); ++i)
        CHECK(out.pixels.pixels.data[i].x == img.pixels.pixels.data[i].x);
}

TEST_CASE("vignetting: quartic falloff model scales the 60 deg rim by 16", "[fisheye]") {
    // Quartic inverse gain pinned to the cos^4 law at 60 degrees:
    // 1/cos^4(60 deg) = 16, so inv_gain(pi/3) must be exactly 16.
    VignettingModel model;
    model.coeffs[4] = 15.0 / std::pow(pi / 3.0, 4.0);
    CHECK(model.inv_gain(pi / 3.0) == Approx(16.0).margin(1e-9));

    // A rim pixel at off-axis 60 degrees gets scaled by 16.
    FisheyeImage img(128, 128, Projection::fisheye_equidistant);
    const double r60 = img.radius_of_angle(pi / 3.0);
    const int px = int(img.center_x + r60 - 0.5), py = int(img.center_y);
    img.pixels.at(px, py) = vec3(0.5);
    const auto out = correct_vignetting(img, model);
    const double r_actual = std::hypot(px + 0.5 - img.center_x, py + 0.5 - img.center_y);
    const double expected = 0.5 * model.inv_gain(img.off_axis_angle(r_actual));
    CHECK(out.pixels.at(px, py).x == Approx(expected).epsilon(1e-12));
    CHECK(expected == Approx(8.0).margin(0.5));  // 0.5 * ~16
}

TEST_CASE("vignetting: forward falloff then correction restores uniformity", "[fisheye]") {
    // Quadratic falloff model; gain = 1/P stays positive over the range.
    VignettingModel model;
    model.coeffs[1] = 0.4;
    model.coeffs[2] = 0.9;
    auto img = make_sky_fisheye(96, Projection::fisheye_hemispherical, uniform_sky);
    // Apply the simulated falloff gain = 1 / inv_gain.
    FisheyeImage faded = img;
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x) {
            const double dx = x + 0.5 - img.center_x, dy = y + 0.5 - img.center_y;
            const double r = std::sqrt(dx * dx + dy * dy);
            if (r > img.image_radius) continue;
            faded.pixels.at(x, y) =
                img.pixels.at(x, y) * (1.0 / model.inv_gain(img.off_axis_angle(r)));
        }
    const auto restored = correct_vignetting(faded, model);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x) {
            const double dx = x + 0.5 - img.center_x, dy = y + 0.5 - img.center_y;
            if (std::sqrt(dx * dx + dy * dy) > img.image_radius) continue;
            CHECK(restored.pixels.at(x, y).x == Approx(1.0).epsilon(0.001));
        }
}

TEST_CASE("vignetting model validation", "[fisheye]") {
    VignettingModel bad;
    bad.coeffs[0] = 0.9;  // gain(0) != 1
    FisheyeImage img(16, 16, Projection::fisheye_equidistant);
    CHECK_THROWS_AS(correct_vignetting(img, bad), std::invalid_argument);

    VignettingModel negative;
    negative.coeffs[1] = -2.0;  // inv gain goes negative before pi/2
    CHECK_THROWS_AS(correct_vignetting(img, negative), std::invalid_argument);
}

TEST_CASE("nd color correction: identity, scalar recovery, and cast inversion", "[fisheye]") {
    auto img = make_sky_fisheye(32, Projection::fisheye_hemispherical, smooth_sky);

    const auto same = correct_nd_color(img, ColorCorrection{});
    CHECK(same.pixels.at(16, 16).x == img.pixels.at(16, 16).x);

    // A perfect ND 3.0 attenuates by 10^3; the nominal recovery undoes it.
    FisheyeImage attenuated = img;
    for (auto& p : attenuated.pixels.pixels.data) p = p * 1e-3;
    const auto recovered = correct_nd_color(attenuated, ColorCorrection::nd_recovery(3.0));
    for (size_t i = 0; i < img.pixels.pixels.data.size(); ++i)
        CHECK(recovered.pixels.pixels.data[i].y ==
              Approx(img.pixels.pixels.data[i].y).epsilon(1e-12));

    // Gray-world cast: apply the inverse filter response, then correct.
    const auto cast = ColorCorrection::diagonal(1100.0, 1000.0, 950.0);
    const auto filtered = correct_nd_color(img, cast.inverse());
    const auto back = correct_nd_color(filtered, cast);
    for (size_t i = 0; i < img.pixels.pixels.data.size(); ++i) {
        CHECK(back.pixels.pixels.data[i].x == Approx(img.pixels.pixels.data[i].x).margin(1e-6));
        CHECK(back.pixels.pixels.data[i].z == Approx(img.pixels.pixels.data[i].z).margin(1e-6));
    }
}

TEST_CASE("singular color matrices are rejected", "[fisheye]") {
    ColorCorrection singular = ColorCorrection::diagonal(1.0, 0.0, 1.0);
    FisheyeImage img(8, 8, Projection::fisheye_hemispherical);
    CHECK_THROWS_AS(correct_nd_color(img, singular), std::invalid_argument);
}

TEST_CASE("vignetting and diagonal color correction commute", "[fisheye][property]") {
    auto img = make_sky_fisheye(48, Projection::fisheye_equidistant, smooth_sky);
    VignettingModel vig;
    vig.coeffs[2] = 0.7;
    const auto cc = ColorCorrection::diagonal(1.1, 1.0, 0.95);
    const auto ab = correct_nd_color(correct_vignetting(img, vig), cc);
    const auto ba = correct_vignetting(correct_nd_color(img, cc), vig);
    for (size_t i = 0; i < ab.pixels.pixels.data.size(); ++i) {
        CHECK(ab.pixels.pixels.data[i].x == Approx(ba.pixels.pixels.data[i].x).margin(1e-12));
        CHECK(ab.pixels.pixels.data[i].y == Approx(ba.pixels.pixels.data[i].y).margin(1e-12));
    }
}

TEST_CASE("equidistant to hemispherical: fixed points and the pi/4 mapping", "[fisheye]") {
    auto img = make_sky_fisheye(256, Projection::fisheye_equidistant, smooth_sky);
    const auto out = equidistant_to_hemispherical(img);
    CHECK(out.pixels.projection == Projection::fisheye_hemispherical);

    // Center ray: theta = 0 maps center to center.
    CHECK(out.pixels.at(128, 128).x == Approx(img.pixels.at(128, 128).x).epsilon(0.01));

    // The destination pixel at r = R sin(pi/4) pulls from the source at R/2:
    // both represent off-axis angle pi/4.
    const double r_dst = img.image_radius * std::sin(pi / 4.0);
    CHECK(r_dst == Approx(0.7071 * img.image_radius).epsilon(1e-3));
    const int x_dst = int(std::floor(img.center_x + r_dst));
    const int y_dst = int(img.center_y);
    const vec3 expected = smooth_sky(
        out.off_axis_angle(std::hypot(x_dst + 0.5 - img.center_x, y_dst + 0.5 - img.center_y)),
        std::atan2(-(y_dst + 0.5 - img.center_y), x_dst + 0.5 - img.center_x));
    CHECK(out.pixels.at(x_dst, y_dst).x == Approx(expected.x).margin(0.01));

    CHECK_THROWS_AS(equidistant_to_hemispherical(out), std::invalid_argument);
}

TEST_CASE("equisolid model: rim fixed point and mid-angle mapping", "[fisheye]") {
    FisheyeImage img(128, 128, Projection::fisheye_equisolid);
    // Normalized so image_radius covers 90 deg: r = sqrt(2) R sin(theta/2).
    CHECK(img.radius_of_angle(half_pi) == Approx(img.image_radius).epsilon(1e-12));
    CHECK(img.radius_of_angle(0.0) == 0.0);
    const double r45 = img.radius_of_angle(pi / 4.0);
    CHECK(r45 == Approx(std::sqrt(2.0) * 64.0 * std::sin(pi / 8.0)).epsilon(1e-12));
    CHECK(img.off_axis_angle(r45) == Approx(pi / 4.0).epsilon(1e-12));

    // Remap equisolid -> hemispherical preserves a smooth sky.
    auto sky = make_sky_fisheye(160, Projection::fisheye_equisolid, smooth_sky);
    const auto hemi = fisheye_remap(sky, Projection::fisheye_hemispherical);
    CHECK(hemi.pixels.projection == Projection::fisheye_hemispherical);
    // Compare against the directly generated hemispherical sky away from the rim.
    auto direct = make_sky_fisheye(160, Projection::fisheye_hemispherical, smooth_sky);
    double acc = 0.0;
    size_t n = 0;
    for (int y = 0; y < 160; ++y)
        for (int x = 0; x < 160; ++x) {
            const double dx = x + 0.5 - sky.center_x, dy = y + 0.5 - sky.center_y;
            if (std::hypot(dx, dy) > sky.image_radius * 0.95) continue;
            const vec3 d = hemi.pixels.at(x, y) - direct.pixels.at(x, y);
            acc += dot(d, d) / 3.0;
            ++n;
        }
    CHECK(std::sqrt(acc / double(n)) < 0.01);

    // Same-projection remap is the identity; non-fisheye targets are rejected.
    const auto same = fisheye_remap(sky, Projection::fisheye_equisolid);
    CHECK(same.pixels.at(80, 80).x == sky.pixels.at(80, 80).x);
    CHECK_THROWS_AS(fisheye_remap(sky, Projection::equirectangular), std::invalid_argument);
}

TEST_CASE("hemispherical round trip returns the image within tolerance", "[fisheye]") {
    auto img = make_sky_fisheye(192, Projection::fisheye_hemispherical, smooth_sky);
    const auto there = hemispherical_to_equidistant(img);
    const auto back = equidistant_to_hemispherical(there);

    double acc = 0.0;
    size_t n = 0;
    for (int y = 0; y < 192; ++y)
        for (int x = 0; x < 192; ++x) {
            const double dx = x + 0.5 - img.center_x, dy = y + 0.5 - img.center_y;
            // Skip the rim, where sin saturates and resampling is ill-posed.
            if (std::sqrt(dx * dx + dy * dy) > img.image_radius * 0.97) continue;
            const vec3 d = back.pixels.at(x, y) - img.pixels.at(x, y);
            acc += dot(d, d) / 3.0;
            ++n;
        }
    CHECK(std::sqrt(acc / double(n)) < 0.01);
}

TEST_CASE("remap conserves hemisphere energy on smooth skies", "[fisheye]") {
    auto img = make_sky_fisheye(256, Projection::fisheye_equidistant, smooth_sky);
    const double before = fisheye_hemisphere_energy(img);
    const auto out = equidistant_to_hemispherical(img);
    const double after = fisheye_hemisphere_energy(out);
    CHECK(after == Approx(before).epsilon(0.01));
}

TEST_CASE("fisheye_to_latlong: zenith, uniform sky, and energy report", "[fisheye]") {
    auto img = make_sky_fisheye(256, Projection::fisheye_hemispherical, uniform_sky);
    const auto res = fisheye_to_latlong(img, 128);
    REQUIRE(res.pano.width() == 256);
    REQUIRE(res.pano.height() == 128);

    // Zenith row comes from the fisheye center.
    for (int x = 0; x < 256; x += 16) CHECK(res.pano.at(x, 0).x == Approx(1.0).epsilon(0.01));
    // Uniform sky: entire upper half uniform.
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 256; x += 8) CHECK(res.pano.at(x, y).x == Approx(1.0).epsilon(0.01));
    // Horizon extension fills the lower half with the last sky row.
    for (int x = 0; x < 256; x += 8) CHECK(res.pano.at(x, 100).x == Approx(1.0).epsilon(0.01));

    CHECK(res.energy_out == Approx(res.energy_in).epsilon(0.01));

    const auto zero_fill = fisheye_to_latlong(img, 128, {1.0, 0.0}, LowerFill::zero);
    CHECK(zero_fill.pano.at(10, 100).x == 0.0);

    CHECK_THROWS_AS(fisheye_to_latlong(img, 1), std::invalid_argument);
    FisheyeImage equi(64, 64, Projection::fisheye_equidistant);
    CHECK_THROWS_AS(fisheye_to_latlong(equi, 64), std::invalid_argument);
}

TEST_CASE("fisheye_to_latlong places a synthetic sun analytically", "[fisheye]") {
    // Sun disk at azimuth 120 deg (counted from column 0), elevation 45 deg.
    const double sun_azimuth = radians(120);        // column (120/360) * w
    const double sun_lon = sun_azimuth - pi;        // longitude convention
    const double sun_elev = radians(45);

    FisheyeImage img(512, 512, Projection::fisheye_hemispherical);
    const double off_axis = half_pi - sun_elev;
    const double r = img.radius_of_angle(off_axis);
    const double cx = img.center_x + std::cos(sun_lon) * r;
    const double cy = img.center_y - std::sin(sun_lon) * r;
    for (int y = 0; y < 512; ++y)
        for (int x = 0; x < 512; ++x)
            if (std::hypot(x + 0.5 - cx, y + 0.5 - cy) < 6.0) img.pixels.at(x, y) = vec3(100.0);

    const auto res = fisheye_to_latlong(img, 256, {1.0, 0.0}, LowerFill::zero);
    // Find the brightest pixel of the latlong map.
    int bx = 0, by = 0;
    double bmax = -1.0;
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 512; ++x)
            if (res.pano.at(x, y).x > bmax) {
                bmax = res.pano.at(x, y).x;
                bx = x;
                by = y;
            }
    REQUIRE(bmax > 50.0);
    const double expected_col = 120.0 / 360.0 * 512.0;
    const double expected_row = (1.0 - (45.0 + 90.0) / 180.0) * 256.0;
    CHECK(std::abs(bx - expected_col) <= 2.0);
    CHECK(std::abs(by - expected_row) <= 2.0);
}
