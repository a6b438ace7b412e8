#pragma once

#include <cmath>
#include <stdexcept>

#include "panostage/hdr.hpp"
#include "panostage/image.hpp"

namespace panostage {

// Circular fisheye capture. image_radius is the pixel radius of the circle
// covering off-axis angles up to 90 degrees; pixels outside it are zero.
struct FisheyeImage {
    RadianceImage pixels;
    double center_x = 0.0, center_y = 0.0;
    double image_radius = 0.0;

    FisheyeImage() = default;
    FisheyeImage(int w, int h, Projection proj) : pixels(w, h, proj) {
        center_x = w / 2.0;
        center_y = h / 2.0;
        image_radius = std::min(w, h) / 2.0;
    }

    void validate() const {
        if (pixels.projection != Projection::fisheye_equidistant &&
            pixels.projection != Projection::fisheye_hemispherical &&
            pixels.projection != Projection::fisheye_equisolid)
            throw std::invalid_argument("fisheye image must carry a fisheye projection tag");
        if (!(image_radius > 0.0)) throw std::invalid_argument("fisheye: image_radius must be > 0");
        if (center_x < 0 || center_x > pixels.width() || center_y < 0 || center_y > pixels.height())
            throw std::invalid_argument("fisheye: optical center outside the image");
    }

    // Off-axis angle of a pixel radius under this image's projection. All
    // three models are normalized so image_radius covers theta = 90 deg:
    // equidistant r = R theta/(pi/2), hemispherical r = R sin(theta),
    // equisolid r = sqrt(2) R sin(theta/2).
    double off_axis_angle(double r) const {
        const double rr = std::min(r / image_radius, 1.0);
        switch (pixels.projection) {
            case Projection::fisheye_equidistant: return rr * half_pi;
            case Projection::fisheye_equisolid: return 2.0 * std::asin(rr / std::sqrt(2.0));
            default: return std::asin(rr);
        }
    }

    // Pixel radius of an off-axis angle under this image's projection.
    double radius_of_angle(double theta) const {
        switch (pixels.projection) {
            case Projection::fisheye_equidistant: return image_radius * theta / half_pi;
            case Projection::fisheye_equisolid:
                return image_radius * std::sqrt(2.0) * std::sin(theta / 2.0);
            default: return image_radius * std::sin(theta);
        }
    }
};

// Radial light falloff model: a degree-4 polynomial in the off-axis angle
// evaluating the inverse gain 1/g(theta). a0 = 1 so the center is unchanged.
struct VignettingModel {
    double coeffs[5] = {1.0, 0.0, 0.0, 0.0, 0.0};

    double inv_gain(double theta) const {
        double p = 0.0;
        for (int i = 4; i >= 0; --i) p = p * theta + coeffs[i];
        return p;
    }

    void validate() const {
        if (std::abs(coeffs[0] - 1.0) > 1e-12)
            throw std::invalid_argument("vignetting: a0 must be 1 (gain(0) = 1)");
        for (int i = 0; i <= 256; ++i) {
            if (!(inv_gain(half_pi * i / 256.0) > 0.0))
                throw std::invalid_argument("vignetting: gain must stay positive on [0, pi/2]");
        }
    }

    bool is_identity() const {
        return coeffs[0] == 1.0 && coeffs[1] == 0.0 && coeffs[2] == 0.0 && coeffs[3] == 0.0 &&
               coeffs[4] == 0.0;
    }
};

// Linear color mix compensating the ND filter cast; applied in radiance space.
struct ColorCorrection {
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

    static ColorCorrection diagonal(double r, double g, double b) {
        ColorCorrection cc;
        cc.m[0][0] = r;
        cc.m[1][1] = g;
        cc.m[2][2] = b;
        return cc;
    }

    // Nominal recovery for an ND filter of the given density: x10^d.
    static ColorCorrection nd_recovery(double density) {
        const double s = std::pow(10.0, density);
        return diagonal(s, s, s);
    }

    bool is_diagonal() const {
        return m[0][1] == 0 && m[0][2] == 0 && m[1][0] == 0 && m[1][2] == 0 && m[2][0] == 0 &&
               m[2][1] == 0;
    }

    double determinant() const {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }

    void validate() const {
        if (std::abs(determinant()) < 1e-12)
            throw std::invalid_argument("color correction matrix is singular");
    }

    vec3 apply(const vec3& c) const {
        return {m[0][0] * c.x + m[0][1] * c.y + m[0][2] * c.z,
                m[1][0] * c.x + m[1][1] * c.y + m[1][2] * c.z,
                m[2][0] * c.x + m[2][1] * c.y + m[2][2] * c.z};
    }

    ColorCorrection inverse() const {
        validate();
        const double d = determinant();
        ColorCorrection inv;
        inv.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
        inv.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
        inv.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
        inv.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
        inv.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
        inv.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
        inv.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
        inv.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
        inv.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
        return inv;
    }
};

// Multiply each pixel by the inverse lens gain at its off-axis angle.
inline FisheyeImage correct_vignetting(const FisheyeImage& img, const VignettingModel& model) {
    img.validate();
    model.validate();
    FisheyeImage out = img;
    for (int y = 0; y < img.pixels.height(); ++y) {
        for (int x = 0; x < img.pixels.width(); ++x) {
            const double dx = x + 0.5 - img.center_x;
            const double dy = y + 0.5 - img.center_y;
            const double r = std::sqrt(dx * dx + dy * dy);
            if (r > img.image_radius) continue;
            out.pixels.at(x, y) = img.pixels.at(x, y) * model.inv_gain(img.off_axis_angle(r));
        }
    }
    return out;
}

// Per-pixel color matrix compensating the ND filter cast.
inline FisheyeImage correct_nd_color(const FisheyeImage& img, const ColorCorrection& cc) {
    img.validate();
    cc.validate();
    FisheyeImage out = img;
    for (vec3& p : out.pixels.pixels.data) p = cc.apply(p);
    return out;
}

namespace fisheye_detail {

// Shared radial resampling between the two fisheye projections. angle_of_dst
// maps a destination radius to the off-axis angle it represents.
inline FisheyeImage remap_radial(const FisheyeImage& src, Projection dst_proj) {
    FisheyeImage out = src;
    out.pixels.projection = dst_proj;
    FisheyeImage dst_geom = out;  // for radius_of_angle under the dst projection
    for (int y = 0; y < src.pixels.height(); ++y) {
        for (int x = 0; x < src.pixels.width(); ++x) {
            const double dx = x + 0.5 - src.center_x;
            const double dy = y + 0.5 - src.center_y;
            const double r = std::sqrt(dx * dx + dy * dy);
            if (r > src.image_radius) {
                out.pixels.at(x, y) = vec3(0.0);
                continue;
            }
            const double theta = dst_geom.off_axis_angle(r);
            // Sample no closer than one pixel to the rim so bilinear taps do
            // not mix in the zeros outside the circle.
            const double r_src =
                std::min(src.radius_of_angle(theta), src.image_radius - 1.5);
            if (r < 1e-12) {
                out.pixels.at(x, y) = src.pixels.at(x, y);
                continue;
            }
            const double sx = src.center_x + dx / r * r_src - 0.5;
            const double sy = src.center_y + dy / r * r_src - 0.5;
            out.pixels.at(x, y) = sample_clamped(src.pixels.pixels, sx, sy);
        }
    }
    return out;
}

}  // namespace fisheye_detail

// r = R * theta / (pi/2)  ->  r = R * sin(theta). Center and rim are fixed
// points of the remap; interpolation is bilinear.
inline FisheyeImage equidistant_to_hemispherical(const FisheyeImage& img) {
    img.validate();
    if (img.pixels.projection != Projection::fisheye_equidistant)
        throw std::invalid_argument("equidistant_to_hemispherical: input must be equidistant");
    return fisheye_detail::remap_radial(img, Projection::fisheye_hemispherical);
}

// Inverse remap, mainly used to validate the forward one.
inline FisheyeImage hemispherical_to_equidistant(const FisheyeImage& img) {
    img.validate();
    if (img.pixels.projection != Projection::fisheye_hemispherical)
        throw std::invalid_argument("hemispherical_to_equidistant: input must be hemispherical");
    return fisheye_detail::remap_radial(img, Projection::fisheye_equidistant);
}

// General radial remap between the supported fisheye models.
inline FisheyeImage fisheye_remap(const FisheyeImage& img, Projection dst) {
    img.validate();
    if (dst != Projection::fisheye_equidistant && dst != Projection::fisheye_hemispherical &&
        dst != Projection::fisheye_equisolid)
        throw std::invalid_argument("fisheye_remap: destination must be a fisheye projection");
    if (dst == img.pixels.projection) return img;
    return fisheye_detail::remap_radial(img, dst);
}

// Radiance integrated against solid angle over the captured hemisphere.
inline double fisheye_hemisphere_energy(const FisheyeImage& img) {
    img.validate();
    double total = 0.0;
    for (int y = 0; y < img.pixels.height(); ++y) {
        for (int x = 0; x < img.pixels.width(); ++x) {
            const double dx = x + 0.5 - img.center_x;
            const double dy = y + 0.5 - img.center_y;
            const double r = std::sqrt(dx * dx + dy * dy);
            if (r > img.image_radius || r < 1e-9) continue;
            const double theta = img.off_axis_angle(std::min(r, img.image_radius * (1 - 1e-12)));
            double domega;
            if (img.pixels.projection == Projection::fisheye_hemispherical) {
                // r = R sin(theta): dA = R^2 sin cos dtheta dpsi, dw = sin dtheta dpsi
                domega = 1.0 / (img.image_radius * img.image_radius * std::cos(theta));
            } else {
                // r = R theta/(pi/2): dA = c^2 theta dtheta dpsi with c = 2R/pi
                const double c = img.image_radius / half_pi;
                domega = std::sin(theta) / (c * c * std::max(theta, 1e-12));
            }
            total += pixel_luminance(img.pixels.at(x, y)) * domega;
        }
    }
    return total;
}

// Radiance integrated against solid angle over the upper half of a latlong map.
inline double latlong_upper_energy(const RadianceImage& pano) {
    double total = 0.0;
    for (int y = 0; y < pano.height() / 2; ++y) {
        const double domega = equirect_pixel_solid_angle(y, pano.width(), pano.height());
        for (int x = 0; x < pano.width(); ++x)
            total += pixel_luminance(pano.at(x, y)) * domega;
    }
    return total;
}

enum class LowerFill { horizon_extension, zero };

struct LatlongResult {
    RadianceImage pano;
    double energy_in = 0.0;   // hemisphere integral of the fisheye input
    double energy_out = 0.0;  // upper-half integral of the latlong output
};

// Upward-looking hemispherical fisheye -> 2:1 equirectangular environment
// map. up_direction is the fisheye image-plane direction of azimuth zero
// (growing counter-clockwise in a bottom-up view of the sky). The lower
// hemisphere has no data; it is filled per `fill`.
inline LatlongResult fisheye_to_latlong(const FisheyeImage& img, int out_h,
                                        vec2 up_direction = {1.0, 0.0},
                                        LowerFill fill = LowerFill::horizon_extension) {
    img.validate();
    if (img.pixels.projection != Projection::fisheye_hemispherical)
        throw std::invalid_argument("fisheye_to_latlong: input must be hemispherical");
    if (out_h < 2) throw std::invalid_argument("fisheye_to_latlong: out_h must be >= 2");
    if (!(length(up_direction) > 0.0))
        throw std::invalid_argument("fisheye_to_latlong: up_direction must be non-zero");

    const double azimuth0 = std::atan2(up_direction.y, up_direction.x);
    const int out_w = 2 * out_h;
    LatlongResult res;
    res.pano = RadianceImage(out_w, out_h);
    res.pano.calibration = img.pixels.calibration;
    res.pano.k_applied = img.pixels.k_applied;

    const int equator_row = out_h / 2 - 1;  // last row of the upper hemisphere
    for (int y = 0; y < out_h; ++y) {
        const double phi = lat_of_row(std::min(y, equator_row), out_h);
        const bool lower = y > equator_row;
        for (int x = 0; x < out_w; ++x) {
            if (lower && fill == LowerFill::zero) {
                res.pano.at(x, y) = vec3(0.0);
                continue;
            }
            if (lower && fill == LowerFill::horizon_extension) {
                res.pano.at(x, y) = res.pano.at(x, equator_row);
                continue;
            }
            const double theta_lon = lon_of_column(x, out_w);
            const double off_axis = half_pi - phi;  // angle from zenith
            const double r = std::min(img.radius_of_angle(off_axis), img.image_radius - 1.5);
            const double alpha = theta_lon - azimuth0;
            const double sx = img.center_x + std::cos(alpha) * r - 0.5;
            const double sy = img.center_y - std::sin(alpha) * r - 0.5;
            res.pano.at(x, y) = sample_clamped(img.pixels.pixels, sx, sy);
        }
    }
    res.energy_in = fisheye_hemisphere_energy(img);
    res.energy_out = latlong_upper_energy(res.pano);
    return res;
}

}  // namespace panostage
