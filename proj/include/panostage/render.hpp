#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "panostage/hdr.hpp"
#include "panostage/image.hpp"
#include "panostage/inpaint.hpp"
#include "panostage/layout.hpp"
#include "panostage/obj.hpp"

namespace panostage {

// Planar polygon surface of the room shell. `corners` are ordered so the
// polygon normal (right-hand rule) faces the room interior. Textured surfaces
// carry a radiance map sampled from the captured panorama and the albedo map
// derived from it; untextured ones fall back to the constant albedo.
struct Surface {
    std::string name;
    std::vector<vec3> corners;
    vec3 normal;
    vec3 uv_origin;
    vec3 uv_u, uv_v;  // unit axes in the plane; (u, v) measured in meters
    double u_extent = 0.0, v_extent = 0.0;
    vec3 albedo{0.5, 0.5, 0.5};
    Image<vec3> radiance_map;  // texels as captured (cd/m^2), for reprojection
    Image<vec3> albedo_map;    // texels scaled into [0,1] reflectance
    bool has_window = false;
    double win_u0 = 0, win_v0 = 0, win_u1 = 0, win_v1 = 0;
    std::vector<vec2> poly_uv;  // corners in the uv frame, for non-rect hit tests

    void build_frame() {
        const vec3 e0 = corners[1] - corners[0];
        vec3 e1 = corners.back() - corners[0];
        normal = normalize(cross(e0, e1));
        uv_origin = corners[0];
        uv_u = normalize(e0);
        uv_v = normalize(cross(normal, uv_u));
        finalize();
    }

    // Call after the frame fields are set; derives extents and the 2D outline.
    void finalize() {
        u_extent = v_extent = 0.0;
        poly_uv.clear();
        for (const vec3& c : corners) {
            const vec2 uv = {dot(c - uv_origin, uv_u), dot(c - uv_origin, uv_v)};
            poly_uv.push_back(uv);
            u_extent = std::max(u_extent, uv.x);
            v_extent = std::max(v_extent, uv.y);
        }
    }

    vec2 uv_of(const vec3& p) const {
        return {dot(p - uv_origin, uv_u), dot(p - uv_origin, uv_v)};
    }

    bool in_window(const vec2& uv) const {
        return has_window && uv.x >= win_u0 && uv.x <= win_u1 && uv.y >= win_v0 && uv.y <= win_v1;
    }

    vec3 albedo_at(const vec2& uv) const {
        if (albedo_map.empty()) return albedo;
        const double tx = clamp(uv.x / u_extent * albedo_map.width - 0.5, 0.0, albedo_map.width - 1.0);
        const double ty = clamp(uv.y / v_extent * albedo_map.height - 0.5, 0.0, albedo_map.height - 1.0);
        return sample_clamped(albedo_map, tx, ty);
    }

    vec3 radiance_at(const vec2& uv) const {
        const double tx =
            clamp(uv.x / u_extent * radiance_map.width - 0.5, 0.0, radiance_map.width - 1.0);
        const double ty =
            clamp(uv.y / v_extent * radiance_map.height - 0.5, 0.0, radiance_map.height - 1.0);
        return sample_clamped(radiance_map, tx, ty);
    }
};

struct SceneTriangle {
    vec3 a, b, c;
    int material = 0;
};

struct SceneDescription {
    std::vector<Surface> surfaces;
    std::vector<SceneTriangle> triangles;
    std::vector<vec3> materials;  // diffuse albedo per triangle material
    RadianceImage env;            // equirectangular, calibrated
    double env_rotation = 0.0;    // radians, azimuth offset applied to lookups
    vec3 camera_pos{0.0, 0.0, 1.6};
    int out_width = 2048, out_height = 1024;
    std::array<vec3, 4> window_corners{};  // world-space portal rectangle
    bool has_window = false;

    void validate() const {
        for (const vec3& m : materials)
            if (m.x < 0 || m.x > 1 || m.y < 0 || m.y > 1 || m.z < 0 || m.z > 1)
                throw std::invalid_argument("scene: albedos must lie in [0,1]^3");
        for (const Surface& s : surfaces)
            if (s.corners.size() < 3) throw std::invalid_argument("scene: degenerate surface");
        if (env.pixels.empty()) throw std::invalid_argument("scene: environment map required");
    }
};

struct RenderSettings {
    int samples_per_pixel = 256;
    int max_bounces = 4;
    uint64_t seed = 0;

    void validate() const {
        if (samples_per_pixel < 1) throw std::invalid_argument("render: spp must be >= 1");
        if (max_bounces < 1) throw std::invalid_argument("render: bounces must be >= 1");
    }
};

namespace render_detail {

struct Hit {
    double t = -1.0;
    vec3 point;
    vec3 normal;
    vec3 albedo;
    bool valid() const { return t > 0.0; }
};

inline double ray_surface(const Surface& s, const vec3& o, const vec3& d, vec2& uv_out) {
    const double denom = dot(d, s.normal);
    if (std::abs(denom) < 1e-12) return -1.0;
    const double t = dot(s.uv_origin - o, s.normal) / denom;
    if (t <= 1e-9) return -1.0;
    const vec3 p = o + d * t;
    const vec2 uv = s.uv_of(p);
    if (s.corners.size() == 4) {
        // Rectangles are the common case; the frame makes this a box test.
        if (uv.x < -1e-9 || uv.x > s.u_extent + 1e-9 || uv.y < -1e-9 || uv.y > s.v_extent + 1e-9)
            return -1.0;
    } else if (!poly::point_in_polygon(s.poly_uv, uv, 1e-9)) {
        return -1.0;
    }
    if (s.in_window(uv)) return -1.0;  // the aperture is a hole
    uv_out = uv;
    return t;
}

inline double ray_triangle(const SceneTriangle& tri, const vec3& o, const vec3& d) {
    const vec3 e1 = tri.b - tri.a, e2 = tri.c - tri.a;
    const vec3 pv = cross(d, e2);
    const double det = dot(e1, pv);
    if (std::abs(det) < 1e-14) return -1.0;
    const double inv = 1.0 / det;
    const vec3 tv = o - tri.a;
    const double u = dot(tv, pv) * inv;
    if (u < 0.0 || u > 1.0) return -1.0;
    const vec3 qv = cross(tv, e1);
    const double v = dot(d, qv) * inv;
    if (v < 0.0 || u + v > 1.0) return -1.0;
    const double t = dot(e2, qv) * inv;
    return t > 1e-9 ? t : -1.0;
}

inline Hit intersect(const SceneDescription& scene, const vec3& o, const vec3& d) {
    Hit best;
    for (const Surface& s : scene.surfaces) {
        vec2 uv;
        const double t = ray_surface(s, o, d, uv);
        if (t > 0.0 && (!best.valid() || t < best.t)) {
            best.t = t;
            best.point = o + d * t;
            best.normal = dot(d, s.normal) < 0 ? s.normal : -s.normal;
            best.albedo = s.albedo_at(uv);
        }
    }
    for (const SceneTriangle& tri : scene.triangles) {
        const double t = ray_triangle(tri, o, d);
        if (t > 0.0 && (!best.valid() || t < best.t)) {
            const vec3 n = normalize(cross(tri.b - tri.a, tri.c - tri.a));
            best.t = t;
            best.point = o + d * t;
            best.normal = dot(d, n) < 0 ? n : -n;
            best.albedo = scene.materials.empty() ? vec3(0.5) : scene.materials[tri.material];
        }
    }
    return best;
}

inline bool occluded(const SceneDescription& scene, const vec3& o, const vec3& d, double max_t) {
    for (const Surface& s : scene.surfaces) {
        vec2 uv;
        const double t = ray_surface(s, o, d, uv);
        if (t > 0.0 && t < max_t) return true;
    }
    for (const SceneTriangle& tri : scene.triangles) {
        const double t = ray_triangle(tri, o, d);
        if (t > 0.0 && t < max_t) return true;
    }
    return false;
}

inline vec3 env_lookup(const SceneDescription& scene, const vec3& d) {
    const double theta = wrap_angle(longitude_of(d) - scene.env_rotation);
    const double phi = latitude_of(d);
    const double x = column_of_lon(theta, scene.env.width());
    const double y = row_of_lat(phi, scene.env.height());
    return sample_equirect(scene.env.pixels, x, y);
}

// Discrete importance table over environment texels, weighted by
// luminance * solid angle. Sampling returns a direction within the chosen
// texel and its solid-angle pdf.
struct EnvTable {
    const SceneDescription* scene = nullptr;
    std::vector<double> cdf;      // over all texels, normalized
    std::vector<double> pdf_w;    // per texel: probability / solid angle
    int w = 0, h = 0;
    bool usable = false;

    void build(const SceneDescription& s) {
        scene = &s;
        w = s.env.width();
        h = s.env.height();
        cdf.assign(size_t(w) * h, 0.0);
        pdf_w.assign(size_t(w) * h, 0.0);
        double total = 0.0;
        for (int y = 0; y < h; ++y) {
            const double dw = equirect_pixel_solid_angle(y, w, h);
            for (int x = 0; x < w; ++x) {
                const double lw = pixel_luminance(s.env.at(x, y)) * dw;
                total += lw;
                cdf[size_t(y) * w + x] = total;
            }
        }
        if (!(total > 0.0)) return;
        for (int y = 0; y < h; ++y) {
            const double dw = equirect_pixel_solid_angle(y, w, h);
            for (int x = 0; x < w; ++x) {
                const size_t i = size_t(y) * w + x;
                cdf[i] /= total;
                pdf_w[i] = (pixel_luminance(s.env.at(x, y)) * dw / total) / dw;
            }
        }
        usable = true;
    }

    vec3 sample(rng_state& rng, double& pdf) const {
        const double u = rng.next_double();
        const size_t i =
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        const size_t idx = std::min(i, cdf.size() - 1);
        const int y = int(idx) / w, x = int(idx) % w;
        // Uniform jitter inside the texel footprint.
        const double lon = lon_of_column(x - 0.5 + rng.next_double(), w) + scene->env_rotation;
        const double lat_top = half_pi - double(y) / h * pi;
        const double lat_bot = half_pi - double(y + 1) / h * pi;
        const double z = std::sin(lat_bot) + (std::sin(lat_top) - std::sin(lat_bot)) * rng.next_double();
        const double lat = std::asin(clamp(z, -1.0, 1.0));
        pdf = pdf_w[idx];
        return direction_from_lonlat(wrap_angle(lon), lat);
    }

    // Solid-angle pdf of sampling the given direction.
    double pdf_of(const vec3& d) const {
        if (!usable) return 0.0;
        const double theta = wrap_angle(longitude_of(d) - scene->env_rotation);
        const double phi = latitude_of(d);
        int x = int(std::floor(column_of_lon(theta, w) + 0.5)) % w;
        if (x < 0) x += w;
        int y = int(std::floor(row_of_lat(phi, h) + 0.5));
        y = std::min(std::max(y, 0), h - 1);
        return pdf_w[size_t(y) * w + x];
    }
};

struct Portal {
    vec3 origin, edge_u, edge_v, normal;
    double area = 0.0;
    bool usable = false;

    void build(const SceneDescription& s) {
        if (!s.has_window) return;
        origin = s.window_corners[0];
        edge_u = s.window_corners[1] - s.window_corners[0];
        edge_v = s.window_corners[3] - s.window_corners[0];
        const vec3 cr = cross(edge_u, edge_v);
        area = length(cr);
        if (!(area > 1e-12)) return;
        normal = cr / area;
        usable = true;
    }

    vec3 sample(rng_state& rng, const vec3& from, double& pdf, double& dist) const {
        const vec3 q = origin + edge_u * rng.next_double() + edge_v * rng.next_double();
        vec3 d = q - from;
        dist = length(d);
        d = d / dist;
        const double cos_q = std::abs(dot(d, normal));
        pdf = cos_q > 1e-9 ? dist * dist / (area * cos_q) : 0.0;
        return d;
    }

    // Solid-angle pdf of reaching the portal along direction d from `from`.
    double pdf_of(const vec3& from, const vec3& d) const {
        if (!usable) return 0.0;
        const double denom = dot(d, normal);
        if (std::abs(denom) < 1e-12) return 0.0;
        const double t = dot(origin - from, normal) / denom;
        if (t <= 1e-9) return 0.0;
        const vec3 p = from + d * t;
        const vec3 rel = p - origin;
        const double lu = dot(rel, edge_u) / dot(edge_u, edge_u);
        const double lv = dot(rel, edge_v) / dot(edge_v, edge_v);
        if (lu < 0 || lu > 1 || lv < 0 || lv > 1) return 0.0;
        return t * t / (area * std::abs(denom));
    }
};

// Cosine-weighted hemisphere around n.
inline vec3 sample_cosine(rng_state& rng, const vec3& n, double& pdf) {
    const double u1 = rng.next_double(), u2 = rng.next_double();
    const double r = std::sqrt(u1);
    const double az = two_pi * u2;
    const double z = std::sqrt(std::max(0.0, 1.0 - u1));
    vec3 t = std::abs(n.x) < 0.9 ? vec3(1, 0, 0) : vec3(0, 1, 0);
    const vec3 b1 = normalize(cross(n, t));
    const vec3 b2 = cross(n, b1);
    const vec3 d = b1 * (r * std::cos(az)) + b2 * (r * std::sin(az)) + n * z;
    pdf = std::max(z, 1e-12) / pi;
    return d;
}

}  // namespace render_detail

struct RenderResult {
    RadianceImage image;
    std::vector<std::string> warnings;
};

// Unbiased path tracing with a diffuse BRDF. Direct light uses one-sample MIS
// between window-portal sampling and an environment texel importance table;
// BSDF continuations that escape are weighted with the balance heuristic.
// Determinism: the RNG stream is keyed by (seed, pixel, sample), so results
// are bit-identical regardless of thread count.
inline RenderResult render_panorama(const SceneDescription& scene, const RenderSettings& settings) {
    scene.validate();
    settings.validate();
    using namespace render_detail;

    RenderResult result;
    result.image = RadianceImage(scene.out_width, scene.out_height);
    result.image.calibration = scene.env.calibration;
    result.image.k_applied = scene.env.k_applied;

    const bool closed_scene = !scene.surfaces.empty();
    EnvTable env_table;
    env_table.build(scene);
    Portal portal;
    portal.build(scene);
    if (closed_scene && !portal.usable && scene.has_window)
        result.warnings.push_back("window portal has zero area; output may be black");
    if (closed_scene && !scene.has_window)
        result.warnings.push_back("closed scene without a window has no light source");

    const double p_portal = portal.usable ? 0.5 : 0.0;

    // Mixture pdf of the two light strategies for a direction.
    auto light_pdf = [&](const vec3& from, const vec3& d) {
        double p = (1.0 - p_portal) * env_table.pdf_of(d);
        if (portal.usable) p += p_portal * portal.pdf_of(from, d);
        return p;
    };

    auto env_visible = [&](const vec3& from, const vec3& d) -> bool {
        return !occluded(scene, from, d, std::numeric_limits<double>::infinity());
    };

    auto trace = [&](vec3 origin, vec3 dir, rng_state& rng) -> vec3 {
        vec3 radiance(0.0);
        vec3 throughput(1.0);
        bool from_camera = true;
        double prev_bsdf_pdf = 0.0;
        for (int bounce = 0; bounce <= settings.max_bounces; ++bounce) {
            const Hit hit = intersect(scene, origin, dir);
            if (!hit.valid()) {
                // Escaped to the environment. Camera rays take it whole;
                // bounced rays weigh it against the light-sampling strategy.
                const vec3 env_l = env_lookup(scene, dir);
                if (from_camera) {
                    radiance += throughput * env_l;
                } else {
                    const double lp = light_pdf(origin, dir);
                    const double w = prev_bsdf_pdf / (prev_bsdf_pdf + lp);
                    radiance += throughput * env_l * w;
                }
                break;
            }
            if (bounce == settings.max_bounces) break;

            const vec3 p = hit.point + hit.normal * 1e-7;

            // Next-event estimation: one sample from the 50/50 portal/env
            // mixture, divided by the mixture pdf and weighted against the
            // BSDF strategy (balance heuristic).
            if (env_table.usable) {
                double pdf = 0.0;
                vec3 ld;
                if (portal.usable && rng.next_double() < p_portal) {
                    double dist = 0.0;
                    ld = portal.sample(rng, p, pdf, dist);
                } else {
                    ld = env_table.sample(rng, pdf);
                }
                const double cos_l = dot(ld, hit.normal);
                const double mix_pdf = light_pdf(p, ld);
                if (cos_l > 0.0 && pdf > 0.0 && mix_pdf > 0.0 && env_visible(p, ld)) {
                    const vec3 f = hit.albedo / pi;
                    const double bsdf_pdf = cos_l / pi;
                    const double w = mix_pdf / (mix_pdf + bsdf_pdf);
                    radiance += throughput * f * env_lookup(scene, ld) * (cos_l / mix_pdf * w);
                }
            }

            // Diffuse continuation: (albedo/pi) * cos / (cos/pi) = albedo.
            double bsdf_pdf = 0.0;
            const vec3 nd = sample_cosine(rng, hit.normal, bsdf_pdf);
            throughput = throughput * hit.albedo;

            // Russian roulette keeps long paths unbiased but finite.
            if (bounce >= 5) {
                const double q = std::min(0.99, throughput.max_component());
                if (rng.next_double() >= q) break;
                throughput = throughput / q;
            }

            origin = p;
            dir = nd;
            from_camera = false;
            prev_bsdf_pdf = bsdf_pdf;
        }
        return radiance;
    };

    const int w = scene.out_width, h = scene.out_height;
    std::atomic<int> next_row{0};
    auto worker = [&]() {
        for (;;) {
            const int y = next_row.fetch_add(1);
            if (y >= h) return;
            for (int x = 0; x < w; ++x) {
                const uint64_t pixel_index = uint64_t(y) * uint64_t(w) + uint64_t(x);
                vec3 acc(0.0);
                for (int s = 0; s < settings.samples_per_pixel; ++s) {
                    rng_state rng(settings.seed,
                                  pixel_index * 0x100000ull + uint64_t(s));
                    const double jx = rng.next_double(), jy = rng.next_double();
                    const double theta = lon_of_column(x - 0.5 + jx, w);
                    const double phi = lat_of_row(y - 0.5 + jy, h);
                    const vec3 dir = direction_from_lonlat(theta, phi);
                    acc += trace(scene.camera_pos, dir, rng);
                }
                result.image.at(x, y) = acc / double(settings.samples_per_pixel);
            }
        }
    };
    const unsigned n_threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    return result;
}

// Reinhard-style global curve on exposure-scaled radiance, then gamma 2.2.
// A pure function of (pixel * exposure): doubling the exposure while halving
// the radiance leaves the output unchanged.
inline LdrImage tone_map_preview(const RadianceImage& pano, double exposure) {
    if (!(exposure > 0.0)) throw std::invalid_argument("tone_map_preview: exposure must be > 0");
    LdrImage out(pano.width(), pano.height());
    for (int y = 0; y < pano.height(); ++y) {
        for (int x = 0; x < pano.width(); ++x) {
            const vec3 c = pano.at(x, y) * exposure;
            uint8_t* px = out.pixel(x, y);
            auto map = [](double v) {
                const double m = v / (1.0 + v);
                return uint8_t(std::lround(clamp(std::pow(m, 1.0 / 2.2), 0.0, 1.0) * 255.0));
            };
            px[0] = map(c.x);
            px[1] = map(c.y);
            px[2] = map(c.z);
        }
    }
    return out;
}

}  // namespace panostage
