#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "panostage/image.hpp"

namespace panostage {

// One perspective crop of a panorama: horizontal field of view, view center
// direction (theta = longitude, phi = latitude) and output dimensions.
struct ViewWindow {
    double fov = half_pi;  // radians, horizontal
    double theta = 0.0;
    double phi = 0.0;
    int h = 0;
    int w = 0;

    void validate() const {
        if (!(fov > 0.0 && fov < pi)) throw std::invalid_argument("view: fov must be in (0, pi)");
        if (!(theta >= -pi && theta <= pi)) throw std::invalid_argument("view: theta out of range");
        // phi = +-pi/2 is allowed so zenith/nadir cap views exist; theta then
        // acts as the roll of the view.
        if (!(phi >= -half_pi && phi <= half_pi)) throw std::invalid_argument("view: phi out of range");
        if (h < 1 || w < 1) throw std::invalid_argument("view: dimensions must be >= 1");
    }
};

// Orthonormal camera frame of a view: pan by theta, then tilt by phi.
struct ViewFrame {
    vec3 forward, right, up;

    explicit ViewFrame(const ViewWindow& win) {
        const double ct = std::cos(win.theta), st = std::sin(win.theta);
        const double cp = std::cos(win.phi), sp = std::sin(win.phi);
        forward = {cp * ct, cp * st, sp};
        right = {-st, ct, 0.0};
        up = cross(forward, right);  // (-ct*sp, -st*sp, cp)
    }

    // Direction of the pixel center (x, y) of the view image.
    vec3 pixel_direction(const ViewWindow& win, double x, double y) const {
        const double tan_half = std::tan(win.fov / 2.0);
        const double u = (2.0 * (x + 0.5) / win.w - 1.0) * tan_half;
        const double v = (1.0 - 2.0 * (y + 0.5) / win.h) * tan_half * (double(win.h) / win.w);
        return normalize(forward + right * u + up * v);
    }

    // Inverse: image-plane coordinates of a world direction, and whether the
    // direction lies inside the view frustum.
    bool project(const ViewWindow& win, const vec3& d, double& x, double& y) const {
        const double z = dot(d, forward);
        if (z <= 1e-12) return false;
        const double tan_half = std::tan(win.fov / 2.0);
        const double u = dot(d, right) / z;
        const double v = dot(d, up) / z;
        const double v_half = tan_half * (double(win.h) / win.w);
        x = (u / tan_half + 1.0) * 0.5 * win.w - 0.5;
        y = (1.0 - v / v_half) * 0.5 * win.h - 0.5;
        const double eps = 1e-9;
        return u >= -tan_half - eps && u <= tan_half + eps && v >= -v_half - eps &&
               v <= v_half + eps;
    }
};

// Pinhole view of an equirectangular panorama along (theta, phi). Bilinear
// sampling with seamless wrap at the +-pi longitude seam.
inline Image<vec3> equirect_to_perspective(const RadianceImage& pano, const ViewWindow& win) {
    require_equirect(pano, "equirect_to_perspective");
    win.validate();
    const ViewFrame frame(win);
    Image<vec3> out(win.w, win.h);
    for (int y = 0; y < win.h; ++y) {
        for (int x = 0; x < win.w; ++x) {
            const vec3 d = frame.pixel_direction(win, x, y);
            const double px = column_of_lon(longitude_of(d), pano.width());
            const double py = row_of_lat(latitude_of(d), pano.height());
            out.at(x, y) = sample_equirect(pano.pixels, px, py);
        }
    }
    return out;
}

// Nearest-neighbour variant used for masks and label maps, which must stay
// binary through a projection round trip.
inline Image<uint8_t> equirect_to_perspective_nearest(const Image<uint8_t>& pano,
                                                      const ViewWindow& win) {
    if (pano.width != 2 * pano.height)
        throw std::invalid_argument("equirect_to_perspective: panorama must be 2:1 equirectangular");
    win.validate();
    const ViewFrame frame(win);
    Image<uint8_t> out(win.w, win.h);
    for (int y = 0; y < win.h; ++y) {
        for (int x = 0; x < win.w; ++x) {
            const vec3 d = frame.pixel_direction(win, x, y);
            int px = int(std::lround(column_of_lon(longitude_of(d), pano.width)));
            int py = int(std::lround(row_of_lat(latitude_of(d), pano.height)));
            px %= pano.width;
            if (px < 0) px += pano.width;
            py = std::min(std::max(py, 0), pano.height - 1);
            out.at(x, y) = pano.at(px, py);
        }
    }
    return out;
}

template <typename Pixel>
struct View {
    ViewWindow window;
    Image<Pixel> image;
};

template <typename Pixel>
using ViewSet = std::vector<View<Pixel>>;

struct StitchResult {
    RadianceImage pano;
    Mask coverage;
};

// Inverse of the view mapping: every panorama pixel looks up the view whose
// center is nearest among those containing its direction (hard assignment,
// deterministic) and samples it. Unpainted pixels are reported in coverage.
inline StitchResult perspective_to_equirect(const ViewSet<vec3>& views, int pano_h, int pano_w) {
    if (views.empty()) throw std::invalid_argument("perspective_to_equirect: empty view set");
    for (const auto& v : views) {
        v.window.validate();
        if (v.image.width != v.window.w || v.image.height != v.window.h)
            throw std::invalid_argument("perspective_to_equirect: view image does not match window");
    }
    std::vector<ViewFrame> frames;
    frames.reserve(views.size());
    for (const auto& v : views) frames.emplace_back(v.window);

    StitchResult out;
    out.pano = RadianceImage(pano_w, pano_h);
    out.coverage = Mask(pano_w, pano_h);
    for (int y = 0; y < pano_h; ++y) {
        const double phi = lat_of_row(y, pano_h);
        for (int x = 0; x < pano_w; ++x) {
            const vec3 d = direction_from_lonlat(lon_of_column(x, pano_w), phi);
            int best = -1;
            double best_align = -2.0;
            double bx = 0, by = 0;
            for (size_t i = 0; i < views.size(); ++i) {
                double vx, vy;
                if (!frames[i].project(views[i].window, d, vx, vy)) continue;
                const double align = dot(d, frames[i].forward);
                if (align > best_align) {
                    best_align = align;
                    best = int(i);
                    bx = vx;
                    by = vy;
                }
            }
            if (best >= 0) {
                out.pano.at(x, y) = sample_clamped(views[size_t(best)].image, bx, by);
                out.coverage.set(x, y);
            }
        }
    }
    return out;
}

// Same assignment rule with nearest sampling, for label/mask stitching.
inline Image<uint8_t> perspective_to_equirect_nearest(const ViewSet<uint8_t>& views, int pano_h,
                                                      int pano_w) {
    if (views.empty()) throw std::invalid_argument("perspective_to_equirect: empty view set");
    std::vector<ViewFrame> frames;
    frames.reserve(views.size());
    for (const auto& v : views) {
        v.window.validate();
        frames.emplace_back(v.window);
    }
    Image<uint8_t> out(pano_w, pano_h, 0);
    for (int y = 0; y < pano_h; ++y) {
        const double phi = lat_of_row(y, pano_h);
        for (int x = 0; x < pano_w; ++x) {
            const vec3 d = direction_from_lonlat(lon_of_column(x, pano_w), phi);
            int best = -1;
            double best_align = -2.0;
            double bx = 0, by = 0;
            for (size_t i = 0; i < views.size(); ++i) {
                double vx, vy;
                if (!frames[i].project(views[i].window, d, vx, vy)) continue;
                const double align = dot(d, frames[i].forward);
                if (align > best_align) {
                    best_align = align;
                    best = int(i);
                    bx = vx;
                    by = vy;
                }
            }
            if (best >= 0) {
                const auto& img = views[size_t(best)].image;
                const int nx = std::min(std::max(int(std::lround(bx)), 0), img.width - 1);
                const int ny = std::min(std::max(int(std::lround(by)), 0), img.height - 1);
                out.at(x, y) = img.at(nx, ny);
            }
        }
    }
    return out;
}

// Ring-based sphere coverage plan: evenly spaced latitude rings of square
// views plus zenith and nadir caps. fov = 90 deg with zero overlap yields the
// 6-view cube decomposition.
inline std::vector<ViewWindow> plan_views(double fov, double overlap, int view_size = 512) {
    if (!(fov > 0.0 && fov < pi)) throw std::invalid_argument("plan_views: fov must be in (0, pi)");
    if (!(overlap >= 0.0 && overlap < 0.5))
        throw std::invalid_argument("plan_views: overlap must be in [0, 0.5)");

    const double step = fov * (1.0 - overlap);
    std::vector<ViewWindow> plan;

    // Latitude band the rings must cover; the caps own the poles.
    const double band = pi - fov;
    const int nrings = std::max(1, int(std::ceil(band / step - 1e-9)));
    const int nviews = std::max(1, int(std::ceil(two_pi / step - 1e-9)));
    for (int j = 0; j < nrings; ++j) {
        const double phi = (j - (nrings - 1) * 0.5) * step;
        for (int i = 0; i < nviews; ++i) {
            ViewWindow win;
            win.fov = fov;
            // Axis-aligned start so the fov=90/overlap=0 ring plus caps tile
            // the sphere as an exact cube.
            win.theta = wrap_angle(-pi + i * two_pi / nviews);
            win.phi = phi;
            win.w = win.h = view_size;
            plan.push_back(win);
        }
    }
    for (double cap : {half_pi, -half_pi}) {
        ViewWindow win;
        win.fov = fov;
        win.theta = 0.0;
        win.phi = cap;
        win.w = win.h = view_size;
        plan.push_back(win);
    }
    return plan;
}

// Rasterized coverage of a plan at the given panorama resolution.
inline Mask plan_coverage(const std::vector<ViewWindow>& plan, int pano_h, int pano_w) {
    std::vector<ViewFrame> frames;
    frames.reserve(plan.size());
    for (const auto& w : plan) frames.emplace_back(w);
    Mask cover(pano_w, pano_h);
    for (int y = 0; y < pano_h; ++y) {
        const double phi = lat_of_row(y, pano_h);
        for (int x = 0; x < pano_w; ++x) {
            const vec3 d = direction_from_lonlat(lon_of_column(x, pano_w), phi);
            for (size_t i = 0; i < plan.size(); ++i) {
                double vx, vy;
                if (frames[i].project(plan[i], d, vx, vy)) {
                    cover.set(x, y);
                    break;
                }
            }
        }
    }
    return cover;
}

// Project a panorama through every window of a plan.
inline ViewSet<vec3> project_plan(const RadianceImage& pano, const std::vector<ViewWindow>& plan) {
    ViewSet<vec3> views;
    views.reserve(plan.size());
    for (const auto& win : plan) views.push_back({win, equirect_to_perspective(pano, win)});
    return views;
}

}  // namespace panostage
