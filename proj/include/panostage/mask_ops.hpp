#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "panostage/hdr.hpp"
#include "panostage/image.hpp"

namespace panostage {

namespace mask_detail {

inline Mask erode3x3(const Mask& in) {
    Mask out(in.width(), in.height(), in.label);
    for (int y = 0; y < in.height(); ++y) {
        for (int x = 0; x < in.width(); ++x) {
            bool all = true;
            for (int dy = -1; dy <= 1 && all; ++dy)
                for (int dx = -1; dx <= 1 && all; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (!in.grid.in_bounds(nx, ny) || !in.test(nx, ny)) all = false;
                }
            out.set(x, y, all);
        }
    }
    return out;
}

inline Mask dilate_square(const Mask& in, int radius) {
    if (radius <= 0) return in;
    // Separable: horizontal then vertical max filter.
    Mask tmp(in.width(), in.height(), in.label);
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x) {
            bool on = false;
            for (int dx = -radius; dx <= radius && !on; ++dx) {
                const int nx = x + dx;
                if (nx >= 0 && nx < in.width() && in.test(nx, y)) on = true;
            }
            tmp.set(x, y, on);
        }
    Mask out(in.width(), in.height(), in.label);
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x) {
            bool on = false;
            for (int dy = -radius; dy <= radius && !on; ++dy) {
                const int ny = y + dy;
                if (ny >= 0 && ny < in.height() && tmp.test(x, ny)) on = true;
            }
            out.set(x, y, on);
        }
    return out;
}

}  // namespace mask_detail

// Connected components under 8-connectivity. Returns a label grid (0 =
// background, components numbered from 1) and the component count.
inline int connected_components(const Mask& mask, Image<int>& labels) {
    labels = Image<int>(mask.width(), mask.height(), 0);
    int next = 0;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.test(x, y) || labels.at(x, y) != 0) continue;
            ++next;
            stack.push_back({x, y});
            labels.at(x, y) = next;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx, ny = cy + dy;
                        if (!labels.in_bounds(nx, ny)) continue;
                        if (!mask.test(nx, ny) || labels.at(nx, ny) != 0) continue;
                        labels.at(nx, ny) = next;
                        stack.push_back({nx, ny});
                    }
            }
        }
    }
    return next;
}

// Luminance threshold on a calibrated panorama, followed by a 3x3
// morphological open to drop speckle.
inline Mask sunlight_mask(const RadianceImage& pano, double threshold_cd_m2) {
    const ScalarImage lum = luminance_map(pano);  // rejects uncalibrated input
    Mask raw(pano.width(), pano.height(), MaskLabel::sunlight);
    for (int y = 0; y < pano.height(); ++y)
        for (int x = 0; x < pano.width(); ++x) raw.set(x, y, lum.at(x, y) > threshold_cd_m2);
    Mask opened = mask_detail::dilate_square(mask_detail::erode3x3(raw), 1);
    opened.label = MaskLabel::sunlight;
    return opened;
}

// Nadir cap standing in for the tripod: all rows below latitude
// -(pi/2 - cap_angle). In equirectangular coordinates that is the bottom
// floor(h * cap_angle / pi) rows, fully masked.
inline Mask tripod_mask(int pano_w, int pano_h, double cap_angle) {
    if (!(cap_angle > 0.0 && cap_angle <= pi / 4.0))
        throw std::invalid_argument("tripod_mask: cap_angle must be in (0, pi/4]");
    Mask m(pano_w, pano_h, MaskLabel::tripod);
    const int rows = int(std::floor(double(pano_h) * cap_angle / pi + 1e-9));
    for (int y = pano_h - rows; y < pano_h; ++y)
        for (int x = 0; x < pano_w; ++x) m.set(x, y);
    return m;
}

// Keep only the furniture components that touch the floor region; contours
// floating on walls or the ceiling are dropped.
inline Mask filter_contours_by_floor(const Mask& furniture, const Mask& floor_region) {
    if (!furniture.same_dims(floor_region))
        throw std::invalid_argument("filter_contours_by_floor: dimension mismatch");
    Image<int> labels;
    const int n = connected_components(furniture, labels);
    std::vector<uint8_t> touches(size_t(n) + 1, 0);
    for (int y = 0; y < furniture.height(); ++y)
        for (int x = 0; x < furniture.width(); ++x)
            if (labels.at(x, y) != 0 && floor_region.test(x, y)) touches[labels.at(x, y)] = 1;
    Mask out(furniture.width(), furniture.height(), furniture.label);
    for (int y = 0; y < furniture.height(); ++y)
        for (int x = 0; x < furniture.width(); ++x)
            out.set(x, y, labels.at(x, y) != 0 && touches[labels.at(x, y)]);
    return out;
}

// Pixelwise union of the parts, then dilation by `dilation` pixels with a
// square structuring element.
inline Mask combine_masks(const std::vector<Mask>& parts, int dilation = 0) {
    if (parts.empty()) throw std::invalid_argument("combine_masks: empty mask list");
    for (const Mask& m : parts)
        if (!m.same_dims(parts.front()))
            throw std::invalid_argument("combine_masks: dimension mismatch");
    Mask out(parts.front().width(), parts.front().height(), MaskLabel::generic);
    for (const Mask& m : parts)
        for (size_t i = 0; i < out.grid.data.size(); ++i)
            out.grid.data[i] = out.grid.data[i] || m.grid.data[i];
    return mask_detail::dilate_square(out, dilation);
}

// Floor corner in panorama pixel coordinates, as exported by layout
// estimators: one "x y" pair per line, ordered around the room.
struct PanoCorner {
    double x = 0.0, y = 0.0;
};

// Floor region of an equirectangular panorama from the estimated floor
// corners. Corners are lifted to floor points through the camera ray (the
// camera height cancels), adjacent corners are joined by straight wall
// segments in plan view, and each pixel column gets the boundary latitude of
// the segment it faces, sampled per column.
inline Mask floor_boundary_from_layout(const std::vector<PanoCorner>& corners, int pano_w,
                                       int pano_h) {
    if (corners.size() < 3)
        throw std::invalid_argument("floor_boundary_from_layout: need at least 3 corners");

    std::vector<vec2> pts;
    pts.reserve(corners.size());
    for (const PanoCorner& c : corners) {
        const double theta = lon_of_column(c.x, pano_w);
        const double phi = lat_of_row(c.y, pano_h);
        if (!(phi < 0.0))
            throw std::invalid_argument(
                "floor_boundary_from_layout: corner above the horizon cannot lie on the floor");
        // Unit camera height: horizontal distance = 1 / tan(-phi).
        const double d = 1.0 / std::tan(-phi);
        pts.push_back({std::cos(theta) * d, std::sin(theta) * d});
    }

    Mask out(pano_w, pano_h, MaskLabel::floor_boundary);
    for (int x = 0; x < pano_w; ++x) {
        const double theta = lon_of_column(x, pano_w);
        const vec2 dir{std::cos(theta), std::sin(theta)};
        // First crossing of the azimuth ray with the wall polygon.
        double best_t = -1.0;
        for (size_t i = 0; i < pts.size(); ++i) {
            const vec2 a = pts[i];
            const vec2 b = pts[(i + 1) % pts.size()];
            const vec2 e = b - a;
            const double denom = cross(dir, e);
            if (std::abs(denom) < 1e-15) continue;
            const double t = cross(a, e) / denom;       // distance along the ray
            const double s = cross(a, dir) / denom;     // position along the segment
            if (t > 1e-12 && s >= -1e-9 && s <= 1.0 + 1e-9) {
                if (best_t < 0.0 || t < best_t) best_t = t;
            }
        }
        if (best_t <= 0.0)
            throw std::invalid_argument(
                "floor_boundary_from_layout: open polygon (a column sees no wall segment)");
        const double phi_boundary = -std::atan(1.0 / best_t);
        // Floor occupies latitudes below the boundary curve.
        for (int y = 0; y < pano_h; ++y) {
            if (lat_of_row(y, pano_h) < phi_boundary) out.set(x, y);
        }
    }
    return out;
}

}  // namespace panostage
