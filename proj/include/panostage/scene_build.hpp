#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "panostage/inpaint.hpp"
#include "panostage/layout.hpp"
#include "panostage/obj.hpp"
#include "panostage/render.hpp"

namespace panostage {

// Rectangular aperture on one wall: u runs along the wall edge from its first
// vertex, v runs up from the floor, all in meters.
struct WindowSpec {
    size_t edge = 0;
    double u0 = 0.0, v0 = 0.0;
    double width = 0.0, height = 0.0;
};

// Irradiance arriving on a plane with the given outward normal from the
// environment map (direct sky only). Used as the albedo normalization
// constant when converting pano texels to reflectance.
inline double plane_irradiance(const RadianceImage& env, double env_rotation, const vec3& normal) {
    double total = 0.0;
    for (int y = 0; y < env.height(); ++y) {
        const double dw = equirect_pixel_solid_angle(y, env.width(), env.height());
        const double phi = lat_of_row(y, env.height());
        for (int x = 0; x < env.width(); ++x) {
            const double theta = wrap_angle(lon_of_column(x, env.width()) + env_rotation);
            const vec3 d = direction_from_lonlat(theta, phi);
            const double cosw = dot(d, normal);
            if (cosw > 0.0) total += pixel_luminance(env.at(x, y)) * cosw * dw;
        }
    }
    return total;
}

struct BuildSceneResult {
    SceneDescription scene;
    std::vector<std::string> warnings;
    size_t inpainted_texels = 0;  // texels not visible from the camera, filled by diffusion
    double irradiance_constant = 0.0;
};

namespace build_detail {

// Bake one surface's radiance texture from the panorama by casting the texel
// center back to the camera, then derive the albedo map. Texels occluded by
// other room surfaces (non-convex rooms) are filled by diffusion and counted;
// texels outside the outline or inside the window aperture are filled too but
// are expected, so they are not reported.
inline size_t bake_surface(Surface& s, const std::vector<Surface>& room,
                           const RadianceImage& pano, const vec3& camera,
                           double texels_per_meter, double albedo_denom) {
    const int tw = std::max(2, int(std::ceil(s.u_extent * texels_per_meter)));
    const int th = std::max(2, int(std::ceil(s.v_extent * texels_per_meter)));
    s.radiance_map = Image<vec3>(tw, th);
    Mask missing(tw, th);
    size_t occluded_count = 0;

    for (int ty = 0; ty < th; ++ty) {
        for (int tx = 0; tx < tw; ++tx) {
            const double u = (tx + 0.5) / tw * s.u_extent;
            const double v = (ty + 0.5) / th * s.v_extent;
            if (s.corners.size() != 4 && !poly::point_in_polygon(s.poly_uv, {u, v}, 1e-9)) {
                missing.set(tx, ty);  // outside the floor outline; fill for clean sampling
                continue;
            }
            if (s.in_window({u, v})) {
                missing.set(tx, ty);  // aperture texels would store sky; fill from the frame
                continue;
            }
            vec3 p = s.uv_origin + s.uv_u * u + s.uv_v * v;
            double dist = length(p - camera);
            if (dist < 1e-9) {
                missing.set(tx, ty);
                continue;
            }
            // Panorama pixels straddling a surface junction or the window
            // aperture blend the two sides; pull edge-adjacent samples away
            // by the local pano footprint so they stay on this surface.
            const double margin = 1.5 * dist * pi / pano.height();
            if (2.0 * margin < s.u_extent && 2.0 * margin < s.v_extent) {
                double us = clamp(u, margin, s.u_extent - margin);
                double vs = clamp(v, margin, s.v_extent - margin);
                if (s.has_window && us > s.win_u0 - margin && us < s.win_u1 + margin &&
                    vs > s.win_v0 - margin && vs < s.win_v1 + margin) {
                    // Push out of the window's bleed band along the cheapest axis.
                    const double costs[4] = {us - (s.win_u0 - margin), (s.win_u1 + margin) - us,
                                             vs - (s.win_v0 - margin), (s.win_v1 + margin) - vs};
                    int k = 0;
                    for (int c = 1; c < 4; ++c)
                        if (costs[c] < costs[k]) k = c;
                    if (k == 0) us = s.win_u0 - margin;
                    if (k == 1) us = s.win_u1 + margin;
                    if (k == 2) vs = s.win_v0 - margin;
                    if (k == 3) vs = s.win_v1 + margin;
                    us = clamp(us, 0.0, s.u_extent);
                    vs = clamp(vs, 0.0, s.v_extent);
                }
                p = s.uv_origin + s.uv_u * us + s.uv_v * vs;
                dist = length(p - camera);
            }
            vec3 dir = (p - camera) / dist;
            // Occlusion against the other room surfaces.
            bool occluded_texel = false;
            for (const Surface& other : room) {
                if (&other == &s) continue;
                vec2 uv_hit;
                const double t = render_detail::ray_surface(other, camera, dir, uv_hit);
                if (t > 0.0 && t < dist - 1e-6) {
                    occluded_texel = true;
                    break;
                }
            }
            if (occluded_texel) {
                missing.set(tx, ty);
                ++occluded_count;
                continue;
            }
            const double px = column_of_lon(longitude_of(dir), pano.width());
            const double py = row_of_lat(latitude_of(dir), pano.height());
            s.radiance_map.at(tx, ty) = sample_equirect(pano.pixels, px, py);
        }
    }

    const size_t filled = missing.count();
    if (filled > 0 && filled < s.radiance_map.pixel_count()) {
        RadianceImage wrap;
        wrap.pixels = s.radiance_map;
        s.radiance_map = diffusion_fill(wrap, missing).image.pixels;
    }

    s.albedo_map = Image<vec3>(tw, th);
    for (size_t i = 0; i < s.radiance_map.data.size(); ++i) {
        const vec3& texel = s.radiance_map.data[i];
        s.albedo_map.data[i] = {clamp(texel.x / albedo_denom, 0.0, 1.0),
                                clamp(texel.y / albedo_denom, 0.0, 1.0),
                                clamp(texel.z / albedo_denom, 0.0, 1.0)};
    }
    return occluded_count;
}

}  // namespace build_detail

// Assemble the render scene: room shell from the floor polygon with one wall
// carrying the window aperture, surface textures re-projected from the
// (inpainted) panorama taken at the camera point, and furniture meshes placed
// by their rigid transforms. Pass an empty pano to skip texturing (surfaces
// then use their constant albedo).
inline BuildSceneResult build_scene(const FloorPolygon& floor, double room_height,
                                    const RadianceImage& pano,
                                    const std::vector<PlacedItem>& placed,
                                    const std::vector<TriangleMesh>& meshes,
                                    const RadianceImage& env, const WindowSpec& window,
                                    double env_rotation = 0.0, double texels_per_meter = 32.0) {
    if (!(room_height > 0.0)) throw std::invalid_argument("build_scene: room height must be > 0");
    if (window.edge >= floor.edge_count())
        throw std::invalid_argument("build_scene: window edge index out of range");
    if (!placed.empty() && meshes.size() != placed.size())
        throw std::invalid_argument("build_scene: one mesh per placed item required");

    const double edge_len = floor.edge_length(window.edge);
    if (window.u0 < -1e-9 || window.v0 < -1e-9 || window.width < 0 || window.height < 0 ||
        window.u0 + window.width > edge_len + 1e-9 ||
        window.v0 + window.height > room_height + 1e-9)
        throw std::invalid_argument("build_scene: window does not lie within its wall");

    BuildSceneResult result;
    SceneDescription& scene = result.scene;
    scene.env = env;
    scene.env_rotation = env_rotation;
    scene.camera_pos = floor.camera;

    const size_t n = floor.vertices.size();

    // Floor: polygon at z=0, normal up, frame aligned to the world axes.
    {
        Surface s;
        s.name = "floor";
        for (const vec2& v : floor.vertices) s.corners.push_back({v.x, v.y, 0.0});
        s.normal = {0, 0, 1};
        vec2 lo = floor.vertices[0];
        for (const vec2& v : floor.vertices) {
            lo.x = std::min(lo.x, v.x);
            lo.y = std::min(lo.y, v.y);
        }
        s.uv_origin = {lo.x, lo.y, 0.0};
        s.uv_u = {1, 0, 0};
        s.uv_v = {0, 1, 0};
        s.finalize();
        scene.surfaces.push_back(std::move(s));
    }
    // Ceiling: same outline at z=h, normal down.
    {
        Surface s;
        s.name = "ceiling";
        for (const vec2& v : floor.vertices) s.corners.push_back({v.x, v.y, room_height});
        s.normal = {0, 0, -1};
        const Surface& f = scene.surfaces[0];
        s.uv_origin = {f.uv_origin.x, f.uv_origin.y, room_height};
        s.uv_u = {1, 0, 0};
        s.uv_v = {0, 1, 0};
        s.finalize();
        scene.surfaces.push_back(std::move(s));
    }
    // Walls, one per polygon edge; edge `window.edge` gets the aperture.
    for (size_t i = 0; i < n; ++i) {
        const vec2 a = floor.edge_start(i), b = floor.edge_end(i);
        const vec2 tangent = normalize(b - a);
        Surface s;
        s.name = "wall" + std::to_string(i);
        s.corners = {{a.x, a.y, 0}, {b.x, b.y, 0}, {b.x, b.y, room_height}, {a.x, a.y, room_height}};
        const vec2 inward = perp_ccw(tangent);
        s.normal = {inward.x, inward.y, 0.0};
        s.uv_origin = {a.x, a.y, 0.0};
        s.uv_u = {tangent.x, tangent.y, 0.0};
        s.uv_v = {0, 0, 1};
        s.finalize();
        if (i == window.edge && window.width > 0 && window.height > 0) {
            s.has_window = true;
            s.win_u0 = window.u0;
            s.win_v0 = window.v0;
            s.win_u1 = window.u0 + window.width;
            s.win_v1 = window.v0 + window.height;
            scene.has_window = true;
            auto at = [&](double u, double v) {
                return vec3{a.x + tangent.x * u, a.y + tangent.y * u, v};
            };
            scene.window_corners = {at(s.win_u0, s.win_v0), at(s.win_u1, s.win_v0),
                                    at(s.win_u1, s.win_v1), at(s.win_u0, s.win_v1)};
        }
        scene.surfaces.push_back(std::move(s));
    }

    // Albedo normalization: mean irradiance on the window plane from the env.
    vec3 window_outward{0, 0, 1};
    if (scene.has_window) {
        const vec2 a = floor.edge_start(window.edge), b = floor.edge_end(window.edge);
        const vec2 inward = perp_ccw(normalize(b - a));
        window_outward = {-inward.x, -inward.y, 0.0};
    }
    result.irradiance_constant = plane_irradiance(env, env_rotation, window_outward);
    const double denom = pi * std::max(result.irradiance_constant, 1e-9);

    if (!pano.pixels.empty()) {
        require_equirect(pano, "build_scene");
        for (Surface& s : scene.surfaces) {
            result.inpainted_texels += build_detail::bake_surface(
                s, scene.surfaces, pano, scene.camera_pos, texels_per_meter, denom);
        }
        if (result.inpainted_texels > 0)
            result.warnings.push_back(std::to_string(result.inpainted_texels) +
                                      " texels had no camera coverage; diffusion-filled");
    }

    // Furniture: transform each mesh by its placement.
    for (size_t i = 0; i < placed.size(); ++i) {
        const PlacedItem& item = placed[i];
        const TriangleMesh& mesh = meshes[i];
        const int material = int(scene.materials.size());
        scene.materials.push_back(item.item.albedo);
        for (const auto& f : mesh.faces) {
            SceneTriangle tri;
            tri.a = apply_rigid(mesh.positions[f[0]], item.theta, item.t);
            tri.b = apply_rigid(mesh.positions[f[1]], item.theta, item.t);
            tri.c = apply_rigid(mesh.positions[f[2]], item.theta, item.t);
            tri.material = material;
            scene.triangles.push_back(tri);
        }
    }

    return result;
}

// Re-render the surface radiance textures back to the camera point; the
// round trip against the input panorama bounds the texel assignment error.
// Directions that hit nothing (the window aperture) fall back to the env.
inline RadianceImage reproject_scene_textures(const SceneDescription& scene, int pano_w,
                                              int pano_h) {
    RadianceImage out(pano_w, pano_h);
    for (int y = 0; y < pano_h; ++y) {
        const double phi = lat_of_row(y, pano_h);
        for (int x = 0; x < pano_w; ++x) {
            const vec3 dir = direction_from_lonlat(lon_of_column(x, pano_w), phi);
            double best_t = -1.0;
            const Surface* best = nullptr;
            vec2 best_uv;
            for (const Surface& s : scene.surfaces) {
                vec2 uv;
                const double t = render_detail::ray_surface(s, scene.camera_pos, dir, uv);
                if (t > 0.0 && (best_t < 0.0 || t < best_t)) {
                    best_t = t;
                    best = &s;
                    best_uv = uv;
                }
            }
            if (best && !best->radiance_map.empty())
                out.at(x, y) = best->radiance_at(best_uv);
            else
                out.at(x, y) = render_detail::env_lookup(scene, dir);
        }
    }
    return out;
}

// Radiance scene export (.rad): room polygons and furniture triangles as
// diffuse plastic with each surface's mean albedo, and the environment as a
// glow source sphere. Intended for cross-checks with an external renderer.
inline void export_radiance_scene(const SceneDescription& scene, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_radiance_scene: cannot open " + path);
    os << "# panostage scene export\n";
    os << "# units: meters; z up\n\n";

    auto mean_albedo = [](const Surface& s) {
        if (s.albedo_map.empty()) return s.albedo;
        vec3 acc(0.0);
        for (const vec3& a : s.albedo_map.data) acc += a;
        return acc / double(s.albedo_map.data.size());
    };

    int mat_id = 0;
    for (const Surface& s : scene.surfaces) {
        const vec3 a = mean_albedo(s);
        const std::string mat = "mat_" + std::to_string(mat_id++);
        os << "void plastic " << mat << "\n0\n0\n5 " << a.x << " " << a.y << " " << a.z
           << " 0 0\n\n";
        if (s.has_window) {
            // Split the wall around the aperture into four panels.
            const double u0 = s.win_u0, u1 = s.win_u1, v0 = s.win_v0, v1 = s.win_v1;
            const double panels[4][4] = {{0, 0, s.u_extent, v0},
                                         {0, v1, s.u_extent, s.v_extent},
                                         {0, v0, u0, v1},
                                         {u1, v0, s.u_extent, v1}};
            int part = 0;
            for (const auto& p : panels) {
                if (p[2] - p[0] < 1e-9 || p[3] - p[1] < 1e-9) continue;
                os << mat << " polygon " << s.name << "_p" << part++ << "\n0\n0\n12\n";
                const double us[4] = {p[0], p[2], p[2], p[0]};
                const double vs[4] = {p[1], p[1], p[3], p[3]};
                for (int k = 0; k < 4; ++k) {
                    const vec3 c = s.uv_origin + s.uv_u * us[k] + s.uv_v * vs[k];
                    os << "  " << c.x << " " << c.y << " " << c.z << "\n";
                }
                os << "\n";
            }
        } else {
            os << mat << " polygon " << s.name << "\n0\n0\n" << 3 * s.corners.size() << "\n";
            for (const vec3& c : s.corners) os << "  " << c.x << " " << c.y << " " << c.z << "\n";
            os << "\n";
        }
    }

    for (size_t m = 0; m < scene.materials.size(); ++m) {
        const vec3& a = scene.materials[m];
        os << "void plastic item_mat_" << m << "\n0\n0\n5 " << a.x << " " << a.y << " " << a.z
           << " 0 0\n\n";
    }
    int tri_id = 0;
    for (const SceneTriangle& t : scene.triangles) {
        os << "item_mat_" << t.material << " polygon tri_" << tri_id++ << "\n0\n0\n9\n";
        for (const vec3* v : {&t.a, &t.b, &t.c})
            os << "  " << v->x << " " << v->y << " " << v->z << "\n";
        os << "\n";
    }

    // Environment as a mean-radiance glow dome; per-texel detail needs an
    // image-based source, which external tools attach from the .hdr directly.
    vec3 env_mean(0.0);
    for (const vec3& p : scene.env.pixels.data) env_mean += p;
    if (!scene.env.pixels.data.empty()) env_mean = env_mean / double(scene.env.pixels.data.size());
    os << "void glow env_glow\n0\n0\n4 " << env_mean.x << " " << env_mean.y << " " << env_mean.z
       << " 0\n\n";
    os << "env_glow source sky\n0\n0\n4 0 0 1 360\n";
}

}  // namespace panostage
