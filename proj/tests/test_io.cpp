#include <catch2/catch.hpp>

#include "panostage/image_io.hpp"
#include "panostage/rgbe.hpp"
#include "test_helpers.hpp"

using namespace panostage;
using test_helpers::scratch_dir;

TEST_CASE("rgbe round trip preserves values within mantissa precision", "[io]") {
    RadianceImage img(64, 32);
    rng_state rng(42, 0);
    for (auto& p : img.pixels.data) {
        const double L = std::pow(10.0, -3.0 + 8.0 * rng.next_double());
        p = vec3(L, L * (0.5 + rng.next_double()), L * (0.5 + rng.next_double()));
    }
    const auto path = (scratch_dir() / "roundtrip.hdr").string();
    write_hdr(path, img);
    const auto back = read_hdr(path);

    REQUIRE(back.width() == img.width());
    REQUIRE(back.height() == img.height());
    CHECK(back.calibration == Calibration::relative);
    for (size_t i = 0; i < img.pixels.data.size(); ++i) {
        const vec3& a = img.pixels.data[i];
        const vec3& b = back.pixels.data[i];
        const double scale = std::max({a.x, a.y, a.z, 1e-30});
        CHECK(std::abs(a.x - b.x) / scale < 1.0 / 128.0);
        CHECK(std::abs(a.y - b.y) / scale < 1.0 / 128.0);
        CHECK(std::abs(a.z - b.z) / scale < 1.0 / 128.0);
    }
}

TEST_CASE("rgbe EXPOSURE header carries the calibration factor", "[io]") {
    RadianceImage img(16, 8);
    for (auto& p : img.pixels.data) p = vec3(1.0);
    img.calibration = Calibration::absolute;
    img.k_applied = 437.25;

    const auto path = (scratch_dir() / "calibrated.hdr").string();
    write_hdr(path, img);
    const auto back = read_hdr(path);
    CHECK(back.is_absolute());
    CHECK(back.k_applied == Approx(437.25).epsilon(1e-15));

    // Relative images carry no EXPOSURE line.
    RadianceImage rel(16, 8);
    const auto rel_path = (scratch_dir() / "relative.hdr").string();
    write_hdr(rel_path, rel);
    CHECK_FALSE(read_hdr(rel_path).is_absolute());
}

TEST_CASE("rgbe writer emits the RADIANCE magic and RLE format line", "[io]") {
    RadianceImage img(16, 8);
    const auto path = (scratch_dir() / "magic.hdr").string();
    write_hdr(path, img);
    std::ifstream is(path, std::ios::binary);
    std::string first, second;
    std::getline(is, first);
    std::getline(is, second);
    CHECK(first == "#?RADIANCE");
    CHECK(second == "FORMAT=32-bit_rle_rgbe");
}

TEST_CASE("rgbe rejects files without the magic", "[io]") {
    const auto path = (scratch_dir() / "bogus.hdr").string();
    std::ofstream(path) << "not radiance\n";
    CHECK_THROWS_AS(read_hdr(path), std::runtime_error);
    CHECK_THROWS_AS(read_hdr((scratch_dir() / "missing.hdr").string()), std::runtime_error);
}

TEST_CASE("rgbe rejects unsupported pixel formats", "[io]") {
    const auto path = (scratch_dir() / "xyze.hdr").string();
    std::ofstream(path) << "#?RADIANCE\nFORMAT=32-bit_rle_xyze\n\n-Y 2 +X 4\n";
    CHECK_THROWS_AS(read_hdr(path), std::runtime_error);
}

TEST_CASE("rgbe handles hard-to-compress and constant scanlines", "[io]") {
    // Constant rows exercise long runs; noise rows exercise literal chains.
    RadianceImage img(512, 4);
    rng_state rng(7, 7);
    for (int x = 0; x < 512; ++x) {
        img.at(x, 0) = vec3(1.0);
        img.at(x, 1) = vec3(rng.next_double(), rng.next_double(), rng.next_double());
        img.at(x, 2) = vec3(0.0);
        img.at(x, 3) = (x % 2) ? vec3(2.0) : vec3(0.25);
    }
    const auto path = (scratch_dir() / "rle.hdr").string();
    write_hdr(path, img);
    const auto back = read_hdr(path);
    for (size_t i = 0; i < img.pixels.data.size(); ++i) {
        const double scale = std::max(img.pixels.data[i].max_component(), 1e-30);
        CHECK(std::abs(img.pixels.data[i].x - back.pixels.data[i].x) / scale < 1.0 / 128.0);
    }
}

TEST_CASE("narrow images fall back to flat scanlines", "[io]") {
    RadianceImage img(4, 4);  // below the RLE width threshold
    for (auto& p : img.pixels.data) p = vec3(0.5, 1.0, 2.0);
    const auto path = (scratch_dir() / "narrow.hdr").string();
    write_hdr(path, img);
    const auto back = read_hdr(path);
    CHECK(back.width() == 4);
    CHECK(back.at(0, 0).y == Approx(1.0).epsilon(0.01));
}

TEST_CASE("mask png round trip is exact", "[io]") {
    Mask m(33, 17, MaskLabel::furniture);
    rng_state rng(9, 0);
    for (auto& v : m.grid.data) v = rng.next_double() > 0.5;
    const auto path = (scratch_dir() / "mask.png").string();
    write_mask_png(path, m);
    const auto back = read_mask_png(path, MaskLabel::furniture);
    REQUIRE(back.width() == m.width());
    REQUIRE(back.height() == m.height());
    for (size_t i = 0; i < m.grid.data.size(); ++i)
        CHECK(int(back.grid.data[i]) == int(m.grid.data[i]));
}

TEST_CASE("rgb png round trip is exact", "[io]") {
    LdrImage img(21, 13);
    rng_state rng(13, 0);
    for (auto& b : img.rgb) b = uint8_t(rng.next_int(256));
    const auto path = (scratch_dir() / "rgb.png").string();
    write_png(path, img);
    const auto back = read_png(path);
    REQUIRE(back.width == img.width);
    CHECK(back.rgb == img.rgb);
}

TEST_CASE("label png round trip keeps class indices", "[io]") {
    Image<uint8_t> labels(16, 16, 0);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) labels.at(x, y) = uint8_t((x / 4) + 4 * (y / 4));
    const auto path = (scratch_dir() / "labels.png").string();
    write_label_png(path, labels);
    const auto back = read_label_png(path);
    REQUIRE(back.width == 16);
    for (size_t i = 0; i < labels.data.size(); ++i)
        CHECK(int(back.data[i]) == int(labels.data[i]));
}
