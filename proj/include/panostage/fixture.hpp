#pragma once

#include <filesystem>
#include <fstream>

#include "panostage/pipeline.hpp"

namespace panostage {

// Synthetic box-room capture used by the demos and the end-to-end tests:
// a 4x4x2.8 m room with a window, a plank floor, a white measurement patch,
// one furniture box on the floor plus a wall-art decoy, photographed from the
// room center through the 9-stop shutter ladder, together with an outdoor
// equidistant fisheye of the matching sky. Everything is computed
// analytically, so regenerating the fixture is bit-stable.
struct FixtureOptions {
    std::filesystem::path dir;
    int pano_height = 256;   // ground-truth panorama rows (width = 2x)
    int render_height = 128; // staged render rows in the manifest
    int render_spp = 24;
    int env_height = 128;
    uint64_t seed = 1;
};

namespace fixture_detail {

// Geometry constants of the synthetic room.
inline constexpr double room_x = 4.0, room_y = 4.0, room_h = 2.8;
inline constexpr double cam_x = 2.0, cam_y = 2.0, cam_z = 1.6;
// Window on edge 2 of the CCW square (from (4,4) to (0,4), facing +y).
inline constexpr double win_u0 = 1.0, win_v0 = 0.8, win_w = 2.0, win_h = 1.4;
// Furniture box on the floor and the wall-art decoy on wall y=0.
inline constexpr double box_x0 = 2.3, box_x1 = 3.3, box_y0 = 2.3, box_y1 = 2.9, box_z1 = 0.5;
inline constexpr double art_x0 = 0.5, art_x1 = 1.1, art_z0 = 1.8, art_z1 = 2.2;
// White measurement patch on wall y=0.
inline constexpr double patch_x0 = 1.8, patch_x1 = 2.2, patch_z0 = 1.4, patch_z1 = 1.8;
// Indoor sensor scale: LDR value = radiance * shutter / sensor_scale.
inline constexpr double sensor_scale = 2000.0;
inline constexpr double outdoor_scale = 500000.0;
inline constexpr double nd_attenuation = 1e-3;

inline vec3 sky_radiance(const vec3& d) {
    // Smooth gradient sky with a sun disk at longitude 90 deg, elevation 45.
    const vec3 sun = direction_from_lonlat(half_pi, radians(45.0));
    const double elevation = std::max(d.z, 0.0);
    vec3 sky = vec3(3000.0, 3500.0, 5000.0) * (0.6 + 0.4 * elevation);
    if (dot(d, sun) > std::cos(radians(2.5))) sky = vec3(1e5, 1e5, 0.95e5);
    return sky;
}

enum class HitKind { none, floor, ceiling, wall, window_sky, furniture, art, patch };

struct FixtureHit {
    HitKind kind = HitKind::none;
    vec3 point;
    double t = 1e30;
};

// Analytic ray cast against the box room, the window aperture, and the
// furniture box; independent of the renderer's intersection code.
inline FixtureHit cast_room(const vec3& o, const vec3& d) {
    FixtureHit best;
    auto consider = [&](double t, HitKind kind, const vec3& p) {
        if (t > 1e-9 && t < best.t) {
            best.t = t;
            best.kind = kind;
            best.point = p;
        }
    };
    // Furniture box (axis-aligned slab test).
    {
        double t0 = 0.0, t1 = 1e30;
        const double lo[3] = {box_x0, box_y0, 0.0}, hi[3] = {box_x1, box_y1, box_z1};
        const double oo[3] = {o.x, o.y, o.z}, dd[3] = {d.x, d.y, d.z};
        bool ok = true;
        for (int a = 0; a < 3 && ok; ++a) {
            if (std::abs(dd[a]) < 1e-12) {
                if (oo[a] < lo[a] || oo[a] > hi[a]) ok = false;
                continue;
            }
            double ta = (lo[a] - oo[a]) / dd[a], tb = (hi[a] - oo[a]) / dd[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) ok = false;
        }
        if (ok && t0 > 1e-9) consider(t0, HitKind::furniture, o + d * t0);
    }
    // Floor and ceiling.
    if (d.z < -1e-12) {
        const double t = -o.z / d.z;
        const vec3 p = o + d * t;
        if (p.x >= 0 && p.x <= room_x && p.y >= 0 && p.y <= room_y)
            consider(t, HitKind::floor, p);
    }
    if (d.z > 1e-12) {
        const double t = (room_h - o.z) / d.z;
        const vec3 p = o + d * t;
        if (p.x >= 0 && p.x <= room_x && p.y >= 0 && p.y <= room_y)
            consider(t, HitKind::ceiling, p);
    }
    // Walls x=0, x=4, y=0, y=4.
    auto wall_hit = [&](double t, const vec3& p, HitKind kind) {
        if (p.z < 0 || p.z > room_h) return;
        consider(t, kind, p);
    };
    if (std::abs(d.x) > 1e-12) {
        for (double wx : {0.0, room_x}) {
            const double t = (wx - o.x) / d.x;
            if (t > 1e-9) {
                const vec3 p = o + d * t;
                if (p.y >= 0 && p.y <= room_y) wall_hit(t, p, HitKind::wall);
            }
        }
    }
    if (std::abs(d.y) > 1e-12) {
        // y = 0: plain wall carrying the art decoy and the white patch.
        double t = (0.0 - o.y) / d.y;
        if (t > 1e-9) {
            const vec3 p = o + d * t;
            if (p.x >= 0 && p.x <= room_x && p.z >= 0 && p.z <= room_h) {
                HitKind kind = HitKind::wall;
                if (p.x >= art_x0 && p.x <= art_x1 && p.z >= art_z0 && p.z <= art_z1)
                    kind = HitKind::art;
                if (p.x >= patch_x0 && p.x <= patch_x1 && p.z >= patch_z0 && p.z <= patch_z1)
                    kind = HitKind::patch;
                wall_hit(t, p, kind);
            }
        }
        // y = 4: the window wall. u runs from (4,4) toward (0,4): u = 4 - x.
        t = (room_y - o.y) / d.y;
        if (t > 1e-9) {
            const vec3 p = o + d * t;
            if (p.x >= 0 && p.x <= room_x && p.z >= 0 && p.z <= room_h) {
                const double u = room_x - p.x;
                const bool in_window =
                    u >= win_u0 && u <= win_u0 + win_w && p.z >= win_v0 && p.z <= win_v0 + win_h;
                wall_hit(t, p, in_window ? HitKind::window_sky : HitKind::wall);
            }
        }
    }
    return best;
}

inline vec3 ground_truth_radiance(const FixtureHit& hit, const vec3& d) {
    switch (hit.kind) {
        case HitKind::window_sky:
        case HitKind::none:
            return sky_radiance(d);
        case HitKind::floor: {
            // Plank floor: 0.5 m planks along x with dark gaps.
            const double phase = std::fmod(hit.point.x, 0.5) / 0.5;
            const double plank = 110.0 + 30.0 * std::sin(two_pi * phase) - (phase < 0.06 ? 60.0 : 0.0);
            return vec3(plank * 1.0, plank * 0.72, plank * 0.5);
        }
        case HitKind::ceiling:
            return vec3(170.0, 168.0, 160.0);
        case HitKind::wall: {
            const double g = 130.0 + 18.0 * std::sin(0.9 * hit.point.x + 1.3 * hit.point.y) +
                             12.0 * hit.point.z;
            return vec3(g, g * 0.95, g * 0.88);
        }
        case HitKind::furniture:
            return vec3(32.0, 26.0, 22.0);
        case HitKind::art:
            return vec3(55.0, 40.0, 95.0);
        case HitKind::patch:
            return vec3(400.0, 400.0, 400.0);
    }
    return vec3(0.0);
}

}  // namespace fixture_detail

struct FixtureSummary {
    std::filesystem::path manifest;
    double measured_luminance = 0.0;  // ground-truth patch luminance
    double k2 = 0.0;
};

inline FixtureSummary write_fixture(const FixtureOptions& options) {
    using namespace fixture_detail;
    namespace fs = std::filesystem;
    const fs::path dir = options.dir;
    fs::create_directories(dir);

    const int ph = options.pano_height, pw = 2 * ph;

    // Ground-truth panorama plus label and target-patch masks.
    RadianceImage truth(pw, ph);
    Image<uint8_t> labels(pw, ph, 0);
    Mask patch_mask(pw, ph);
    for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
            const vec3 d = direction_from_lonlat(lon_of_column(x, pw), lat_of_row(y, ph));
            const FixtureHit hit = cast_room({cam_x, cam_y, cam_z}, d);
            truth.at(x, y) = ground_truth_radiance(hit, d);
            if (hit.kind == HitKind::furniture) labels.at(x, y) = 5;
            if (hit.kind == HitKind::art) labels.at(x, y) = 7;
            if (hit.kind == HitKind::patch) patch_mask.set(x, y);
        }
    }
    // Erode the patch mask so bracket-edge pixels do not bias the target mean.
    patch_mask = mask_detail::erode3x3(patch_mask);

    // Exposure brackets through the 9-stop shutter ladder, 8-bit PNG.
    const std::vector<double> shutters = {4.0,        1.0,         1.0 / 4.0, 1.0 / 15.0,
                                          1.0 / 60.0, 1.0 / 250.0, 1.0 / 1000.0,
                                          1.0 / 4000.0, 1.0 / 8000.0};
    {
        std::ofstream sidecar(dir / "shutters.txt");
        sidecar << "# seconds, one exposure per line, matching bracket order\n";
        for (double s : shutters) sidecar << s << "\n";
    }
    for (size_t i = 0; i < shutters.size(); ++i) {
        LdrImage ldr(pw, ph);
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x) {
                const vec3 v = truth.at(x, y) * (shutters[i] / sensor_scale);
                uint8_t* px = ldr.pixel(x, y);
                px[0] = uint8_t(std::lround(clamp(v.x, 0.0, 1.0) * 255.0));
                px[1] = uint8_t(std::lround(clamp(v.y, 0.0, 1.0) * 255.0));
                px[2] = uint8_t(std::lround(clamp(v.z, 0.0, 1.0) * 255.0));
            }
        write_png((dir / ("bracket_" + std::to_string(i) + ".png")).string(), ldr);
    }

    write_mask_png((dir / "target_mask.png").string(), patch_mask);
    write_label_png((dir / "labels.png").string(), labels);
    {
        json classes;
        classes["furniture_classes"] = {5, 7};
        std::ofstream(dir / "classes.json") << classes.dump(2) << "\n";
    }

    // Ground-truth patch luminance = the measured meter reading.
    double measured = 0.0;
    {
        size_t n = 0;
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x)
                if (patch_mask.test(x, y)) {
                    measured += pixel_luminance(truth.at(x, y));
                    ++n;
                }
        measured /= double(n);
    }

    // Floor corners in panorama pixel coordinates.
    {
        std::ofstream corners(dir / "corners.txt");
        corners << "# floor corners, panorama pixel coordinates (x y per line)\n";
        for (auto [cx, cy] : {std::pair{0.0, 0.0}, {room_x, 0.0}, {room_x, room_y}, {0.0, room_y}}) {
            const vec3 d = normalize(vec3{cx - cam_x, cy - cam_y, -cam_z});
            corners << column_of_lon(longitude_of(d), pw) << " " << row_of_lat(latitude_of(d), ph)
                    << "\n";
        }
    }

    // Floor polygon and furniture rules.
    {
        json floor;
        floor["vertices"] = {{0.0, 0.0}, {room_x, 0.0}, {room_x, room_y}, {0.0, room_y}};
        floor["edge_labels"] = {"wall", "wall", "window", "wall"};
        floor["camera"] = {cam_x, cam_y, cam_z};
        std::ofstream(dir / "floor.json") << floor.dump(2) << "\n";
    }
    write_obj((dir / "bed.obj").string(), make_box_mesh(1.8, 1.4, 0.55));
    write_obj((dir / "table.obj").string(), make_box_mesh(0.8, 0.8, 0.7));
    {
        json rules;
        rules["items"] = json::array();
        rules["items"].push_back({{"id", "bed"},
                                  {"depth_x", 1.8},
                                  {"width_y", 1.4},
                                  {"mesh", "bed.obj"},
                                  {"albedo", {0.55, 0.48, 0.40}}});
        rules["items"].push_back({{"id", "table"},
                                  {"depth_x", 0.8},
                                  {"width_y", 0.8},
                                  {"mesh", "table.obj"},
                                  {"albedo", {0.35, 0.25, 0.18}}});
        rules["items"].push_back({{"id", "wardrobe"},
                                  {"depth_x", 5.0},
                                  {"width_y", 0.8},
                                  {"albedo", {0.3, 0.3, 0.3}}});
        rules["rules"] = json::array();
        rules["rules"].push_back(
            {{"item", "bed"}, {"edge", 0}, {"orientation", "face-interior"}, {"u", 0.35}, {"v", 0.0}});
        rules["rules"].push_back({{"item", "table"},
                                  {"edge", "window"},
                                  {"orientation", "face-window"},
                                  {"u", 0.5},
                                  {"v", 0.1}});
        // Oversized on purpose: exercises the skip-and-report path.
        rules["rules"].push_back(
            {{"item", "wardrobe"}, {"edge", 1}, {"orientation", "face-interior"}, {"u", 0.5}, {"v", 0.0}});
        std::ofstream(dir / "rules.json") << rules.dump(2) << "\n";
    }

    // Outdoor capture: equidistant fisheye of the sky with a quartic lens
    // falloff and an ND 3.0 filter, in the outdoor camera's relative units.
    VignettingModel vig;
    vig.coeffs[2] = 0.35;
    vig.coeffs[4] = 0.25;
    {
        const int fsize = 2 * options.env_height;
        FisheyeImage fish(fsize, fsize, Projection::fisheye_equidistant);
        for (int y = 0; y < fsize; ++y)
            for (int x = 0; x < fsize; ++x) {
                const double dx = x + 0.5 - fish.center_x;
                const double dy = y + 0.5 - fish.center_y;
                const double r = std::sqrt(dx * dx + dy * dy);
                if (r > fish.image_radius) continue;
                const double off = fish.off_axis_angle(r);
                const double lon = std::atan2(-dy, dx);
                const vec3 d = direction_from_lonlat(lon, half_pi - off);
                const double falloff = 1.0 / vig.inv_gain(off);
                fish.pixels.at(x, y) =
                    sky_radiance(d) * (falloff * nd_attenuation / outdoor_scale);
            }
        write_hdr((dir / "sky_fisheye.hdr").string(), fish.pixels);

        json vj;
        vj["coefficients"] = {vig.coeffs[0], vig.coeffs[1], vig.coeffs[2], vig.coeffs[3],
                              vig.coeffs[4]};
        std::ofstream(dir / "vignetting.json") << vj.dump(2) << "\n";
        json cj;
        cj["nd_density"] = 3.0;
        std::ofstream(dir / "nd_color.json") << cj.dump(2) << "\n";
    }

    // Cross-camera constant: indoor k1 recovers sensor_scale, so k2 must
    // supply the remaining outdoor factor.
    const double k2 = outdoor_scale / sensor_scale;

    // Manifest wiring all stages together.
    {
        json m;
        m["seed"] = options.seed;
        json cal;
        cal["brackets"] = json::array();
        for (size_t i = 0; i < shutters.size(); ++i)
            cal["brackets"].push_back("bracket_" + std::to_string(i) + ".png");
        cal["shutter_sidecar"] = "shutters.txt";
        cal["target_mask"] = "target_mask.png";
        cal["measured_luminance"] = measured;
        m["calibrate"] = cal;

        json fish;
        fish["input"] = "sky_fisheye.hdr";
        fish["projection"] = "equidistant";
        fish["vignetting"] = "vignetting.json";
        fish["color"] = "nd_color.json";
        fish["out_height"] = options.env_height;
        fish["k2"] = k2;
        m["fisheye"] = fish;

        json mask;
        mask["labels"] = "labels.png";
        mask["classes"] = "classes.json";
        mask["corners"] = "corners.txt";
        mask["sunlight_threshold"] = 2000.0;
        mask["tripod_cap_deg"] = 15.0;
        mask["dilation"] = 3;
        m["mask"] = mask;

        m["inpaint"] = json::object();

        json layout;
        layout["floor"] = "floor.json";
        layout["rules"] = "rules.json";
        m["layout"] = layout;

        json render;
        render["floor"] = "floor.json";
        render["room_height"] = room_h;
        render["window"] = {{"edge", 2}, {"u0", win_u0}, {"v0", win_v0}, {"width", win_w},
                            {"height", win_h}};
        render["spp"] = options.render_spp;
        render["bounces"] = 6;
        render["width"] = 2 * options.render_height;
        render["height"] = options.render_height;
        render["texels_per_meter"] = 24.0;
        m["render"] = render;

        m["preview"] = json::object();

        std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
    }

    FixtureSummary summary;
    summary.manifest = dir / "manifest.json";
    summary.measured_luminance = measured;
    summary.k2 = k2;
    return summary;
}

}  // namespace panostage
