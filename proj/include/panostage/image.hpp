#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "panostage/math.hpp"

namespace panostage {

// Row-major 2D grid. (0,0) is the top-left pixel.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * size_t(h), fill) {
        if (w < 0 || h < 0) throw std::invalid_argument("image dimensions must be non-negative");
    }

    bool empty() const { return width == 0 || height == 0; }
    size_t pixel_count() const { return data.size(); }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    T& at(int x, int y) { return data[size_t(y) * width + x]; }
    const T& at(int x, int y) const { return data[size_t(y) * width + x]; }

    template <typename U>
    bool same_dims(const Image<U>& o) const { return width == o.width && height == o.height; }
};

using ScalarImage = Image<double>;

enum class Projection {
    equirectangular,
    fisheye_equidistant,
    fisheye_hemispherical,
    fisheye_equisolid,
    perspective,
};

inline const char* to_string(Projection p) {
    switch (p) {
        case Projection::equirectangular: return "equirectangular";
        case Projection::fisheye_equidistant: return "fisheye-equidistant";
        case Projection::fisheye_hemispherical: return "fisheye-hemispherical";
        case Projection::fisheye_equisolid: return "fisheye-equisolid";
        case Projection::perspective: return "perspective";
    }
    return "unknown";
}

enum class Calibration { relative, absolute };

// Capture settings kept for provenance only; no operation depends on them.
struct CaptureMeta {
    int iso = 0;
    double aperture = 0.0;
    std::string white_balance;
};

// Linear RGB radiance grid. When calibration == absolute, luminance derived
// from the pixels is in cd/m^2 and `k_applied` is the accumulated scale.
struct RadianceImage {
    Image<vec3> pixels;
    Calibration calibration = Calibration::relative;
    double k_applied = 1.0;
    Projection projection = Projection::equirectangular;
    CaptureMeta meta;

    RadianceImage() = default;
    RadianceImage(int w, int h, Projection proj = Projection::equirectangular)
        : pixels(w, h), projection(proj) {}

    int width() const { return pixels.width; }
    int height() const { return pixels.height; }
    bool is_absolute() const { return calibration == Calibration::absolute; }

    vec3& at(int x, int y) { return pixels.at(x, y); }
    const vec3& at(int x, int y) const { return pixels.at(x, y); }
};

enum class MaskLabel { generic, furniture, tripod, sunlight, floor_boundary };

inline const char* to_string(MaskLabel l) {
    switch (l) {
        case MaskLabel::generic: return "generic";
        case MaskLabel::furniture: return "furniture";
        case MaskLabel::tripod: return "tripod";
        case MaskLabel::sunlight: return "sunlight";
        case MaskLabel::floor_boundary: return "floor-boundary";
    }
    return "unknown";
}

// Binary grid aligned to a panorama; 1 = selected.
struct Mask {
    Image<uint8_t> grid;
    MaskLabel label = MaskLabel::generic;

    Mask() = default;
    Mask(int w, int h, MaskLabel l = MaskLabel::generic) : grid(w, h, 0), label(l) {}

    int width() const { return grid.width; }
    int height() const { return grid.height; }
    bool test(int x, int y) const { return grid.at(x, y) != 0; }
    void set(int x, int y, bool on = true) { grid.at(x, y) = on ? 1 : 0; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t v : grid.data) n += (v != 0);
        return n;
    }
    bool same_dims(const Mask& o) const { return grid.same_dims(o.grid); }
};

// 8-bit display image (sRGB-ish, interleaved RGB).
struct LdrImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;

    LdrImage() = default;
    LdrImage(int w, int h) : width(w), height(h), rgb(size_t(w) * size_t(h) * 3, 0) {}

    uint8_t* pixel(int x, int y) { return &rgb[(size_t(y) * width + x) * 3]; }
    const uint8_t* pixel(int x, int y) const { return &rgb[(size_t(y) * width + x) * 3]; }
};

// Equirectangular pixel <-> angle mapping. Pixel centers sit at half-integer
// offsets; column 0 starts at longitude -pi, row 0 at latitude +pi/2.
inline double lon_of_column(double x, int width) { return (x + 0.5) / width * two_pi - pi; }
inline double lat_of_row(double y, int height) { return half_pi - (y + 0.5) / height * pi; }
inline double column_of_lon(double theta, int width) { return (theta + pi) / two_pi * width - 0.5; }
inline double row_of_lat(double phi, int height) { return (half_pi - phi) / pi * height - 0.5; }

// Solid angle subtended by the pixel in row y of an equirectangular grid.
inline double equirect_pixel_solid_angle(int y, int width, int height) {
    const double phi_top = half_pi - double(y) / height * pi;
    const double phi_bot = half_pi - double(y + 1) / height * pi;
    return (std::sin(phi_top) - std::sin(phi_bot)) * (two_pi / width);
}

// Bilinear sample with horizontal wrap (longitude) and vertical clamp.
inline vec3 sample_equirect(const Image<vec3>& img, double x, double y) {
    const int w = img.width, h = img.height;
    double fx = std::floor(x), fy = std::floor(y);
    double ax = x - fx, ay = y - fy;
    int x0 = int(fx), y0 = int(fy);
    int x1 = x0 + 1, y1 = y0 + 1;
    auto wrap_x = [w](int x_) {
        x_ %= w;
        return x_ < 0 ? x_ + w : x_;
    };
    auto clamp_y = [h](int y_) { return std::min(std::max(y_, 0), h - 1); };
    x0 = wrap_x(x0);
    x1 = wrap_x(x1);
    y0 = clamp_y(y0);
    y1 = clamp_y(y1);
    return img.at(x0, y0) * ((1 - ax) * (1 - ay)) + img.at(x1, y0) * (ax * (1 - ay)) +
           img.at(x0, y1) * ((1 - ax) * ay) + img.at(x1, y1) * (ax * ay);
}

// Bilinear sample with clamped borders (non-panoramic content).
inline vec3 sample_clamped(const Image<vec3>& img, double x, double y) {
    const int w = img.width, h = img.height;
    x = clamp(x, 0.0, double(w - 1));
    y = clamp(y, 0.0, double(h - 1));
    int x0 = int(std::floor(x)), y0 = int(std::floor(y));
    int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    double ax = x - x0, ay = y - y0;
    return img.at(x0, y0) * ((1 - ax) * (1 - ay)) + img.at(x1, y0) * (ax * (1 - ay)) +
           img.at(x0, y1) * ((1 - ax) * ay) + img.at(x1, y1) * (ax * ay);
}

inline void require_equirect(const RadianceImage& pano, const char* what) {
    if (pano.width() != 2 * pano.height())
        throw std::invalid_argument(std::string(what) + ": panorama must be 2:1 equirectangular");
}

}  // namespace panostage
