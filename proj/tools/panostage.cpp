// panostage: turn exposure-bracketed panoramic captures into calibrated HDR
// scenes, remove furniture, lay out new pieces on the recovered floor, and
// re-render the staged room under a captured sky.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "panostage/fixture.hpp"
#include "panostage/pipeline.hpp"
#include "panostage/sphere.hpp"

using namespace panostage;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"panostage: calibrated panoramic HDR capture, furniture removal, and re-staging"};
    app.require_subcommand(1);

    // ---- merge ----
    auto* merge_cmd = app.add_subcommand("merge", "merge an exposure bracket into a relative HDR");
    std::vector<std::string> merge_inputs;
    std::string merge_sidecar, merge_response, merge_out = "merged.hdr";
    merge_cmd->add_option("--brackets", merge_inputs, "LDR files, dark to bright order matching the sidecar")->required();
    merge_cmd->add_option("--shutters", merge_sidecar, "sidecar text file, one shutter (s) per line")->required();
    merge_cmd->add_option("--response", merge_response, "response curve table (value -> relative exposure)");
    merge_cmd->add_option("--out", merge_out, "output .hdr");
    merge_cmd->callback([&]() {
        ExposureBracket bracket;
        for (const auto& f : merge_inputs) bracket.images.push_back(read_ldr_linear(f));
        bracket.shutter_speeds = parse_shutter_sidecar(merge_sidecar);
        if (!merge_response.empty()) bracket.response_curve = parse_response_curve(merge_response);
        auto res = merge_exposures(bracket);
        write_hdr(merge_out, res.hdr);
        std::printf("merged %zu exposures -> %s (%zu saturated pixels flagged)\n",
                    bracket.images.size(), merge_out.c_str(), res.flagged_pixels);
    });

    // ---- calibrate ----
    auto* cal_cmd = app.add_subcommand("calibrate", "scale an HDR to absolute luminance via a measured target");
    std::string cal_in, cal_mask, cal_out = "calibrated.hdr";
    double cal_measured = 0.0, cal_k = 0.0;
    bool cal_median = false;
    cal_cmd->add_option("--in", cal_in, "input .hdr")->required();
    cal_cmd->add_option("--target", cal_mask, "target region mask (PNG)");
    cal_cmd->add_option("--measured", cal_measured, "measured luminance at the target, cd/m^2");
    cal_cmd->add_option("--k", cal_k, "apply an explicit factor instead of a target");
    cal_cmd->add_flag("--median", cal_median, "use the median instead of the mean over the target");
    cal_cmd->add_option("--out", cal_out, "output .hdr");
    cal_cmd->callback([&]() {
        RadianceImage hdr = read_hdr(cal_in);
        double k = cal_k;
        if (!(k > 0.0)) {
            if (cal_mask.empty() || !(cal_measured > 0.0))
                throw ValidationError("calibrate: need --k, or --target with --measured");
            const Mask target = read_mask_png(cal_mask);
            const auto f = compute_k1(hdr, target, cal_measured,
                                      cal_median ? TargetStatistic::median : TargetStatistic::mean);
            k = f.k1;
            std::printf("k1 = %.9g (displayed %.6g, measured %.6g)\n", f.k1,
                        f.source.displayed_luminance, cal_measured);
        }
        write_hdr(cal_out, apply_calibration(hdr, k));
        std::printf("wrote %s\n", cal_out.c_str());
    });

    // ---- fisheye ----
    auto* fish_cmd = app.add_subcommand("fisheye", "correct an outdoor fisheye and remap it for environment lighting");
    std::string fish_in, fish_out = "env.hdr", fish_proj = "equidistant";
    std::string fish_vig, fish_color, fish_fill = "horizon";
    int fish_h = 512;
    double fish_azimuth = 0.0, fish_k = 1.0;
    bool fish_correct = false, fish_to_latlong = false;
    fish_cmd->add_option("--in", fish_in, "input fisheye .hdr")->required();
    fish_cmd->add_option("--projection", fish_proj, "equidistant | hemispherical | equisolid");
    fish_cmd->add_flag("--correct", fish_correct, "apply vignetting/color corrections");
    fish_cmd->add_option("--vignetting", fish_vig, "vignetting model JSON");
    fish_cmd->add_option("--color", fish_color, "color correction JSON");
    fish_cmd->add_flag("--to-latlong", fish_to_latlong, "remap to a 2:1 environment map");
    fish_cmd->add_option("--height", fish_h, "latlong output rows");
    fish_cmd->add_option("--azimuth-deg", fish_azimuth, "world azimuth of the fisheye +x axis");
    fish_cmd->add_option("--lower-fill", fish_fill, "horizon | zero");
    fish_cmd->add_option("--k", fish_k, "calibration factor to apply (e.g. k1*k2)");
    fish_cmd->add_option("--out", fish_out, "output .hdr");
    fish_cmd->callback([&]() {
        FisheyeImage fish;
        fish.pixels = read_hdr(fish_in);
        if (fish_proj == "hemispherical")
            fish.pixels.projection = Projection::fisheye_hemispherical;
        else if (fish_proj == "equisolid")
            fish.pixels.projection = Projection::fisheye_equisolid;
        else if (fish_proj == "equidistant")
            fish.pixels.projection = Projection::fisheye_equidistant;
        else
            throw ValidationError("fisheye: unknown projection '" + fish_proj + "'");
        fish.center_x = fish.pixels.width() / 2.0;
        fish.center_y = fish.pixels.height() / 2.0;
        fish.image_radius = std::min(fish.pixels.width(), fish.pixels.height()) / 2.0;
        if (fish_correct) {
            if (!fish_vig.empty())
                fish = correct_vignetting(fish, parse_vignetting(load_json(fish_vig)));
            if (!fish_color.empty())
                fish = correct_nd_color(fish, parse_color_correction(load_json(fish_color)));
        }
        fish = fisheye_remap(fish, Projection::fisheye_hemispherical);
        if (fish_to_latlong) {
            const double az = radians(fish_azimuth);
            auto res = fisheye_to_latlong(fish, fish_h, {std::cos(az), std::sin(az)},
                                          fish_fill == "zero" ? LowerFill::zero
                                                              : LowerFill::horizon_extension);
            RadianceImage env = res.pano;
            if (fish_k != 1.0) env = apply_calibration(env, fish_k);
            write_hdr(fish_out, env);
            std::printf("energy in/out: %.6g / %.6g (ratio %.4f)\n", res.energy_in, res.energy_out,
                        res.energy_in > 0 ? res.energy_out / res.energy_in : 0.0);
        } else {
            write_hdr(fish_out, fish.pixels);
        }
        std::printf("wrote %s\n", fish_out.c_str());
    });

    // ---- project ----
    auto* proj_cmd = app.add_subcommand("project", "cut perspective views out of an equirectangular panorama");
    std::string proj_in, proj_out = "view.hdr", proj_out_dir;
    double proj_fov = 90.0, proj_theta = 0.0, proj_phi = 0.0, proj_overlap = -1.0;
    std::vector<int> proj_size = {512, 512};
    proj_cmd->add_option("--in", proj_in, "input 2:1 panorama .hdr")->required();
    proj_cmd->add_option("--fov", proj_fov, "horizontal field of view, degrees");
    proj_cmd->add_option("--theta", proj_theta, "view longitude, degrees");
    proj_cmd->add_option("--phi", proj_phi, "view latitude, degrees");
    proj_cmd->add_option("--size", proj_size, "view width height")->expected(2);
    proj_cmd->add_option("--plan-overlap", proj_overlap,
                         "emit a full sphere plan with this overlap fraction instead of one view");
    proj_cmd->add_option("--out", proj_out, "output view .hdr (single view mode)");
    proj_cmd->add_option("--out-dir", proj_out_dir, "output directory (plan mode)");
    proj_cmd->callback([&]() {
        const RadianceImage pano = read_hdr(proj_in);
        if (proj_overlap >= 0.0) {
            if (proj_out_dir.empty()) throw ValidationError("project: plan mode needs --out-dir");
            fs::create_directories(proj_out_dir);
            const auto plan = plan_views(radians(proj_fov), proj_overlap, proj_size[0]);
            json plan_json;
            plan_json["pano_width"] = pano.width();
            plan_json["pano_height"] = pano.height();
            plan_json["views"] = json::array();
            for (size_t i = 0; i < plan.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "view_%03zu.hdr", i);
                RadianceImage view;
                view.pixels = equirect_to_perspective(pano, plan[i]);
                view.projection = Projection::perspective;
                view.calibration = pano.calibration;
                view.k_applied = pano.k_applied;
                write_hdr((fs::path(proj_out_dir) / name).string(), view);
                json vj;
                vj["fov_deg"] = degrees(plan[i].fov);
                vj["theta_deg"] = degrees(plan[i].theta);
                vj["phi_deg"] = degrees(plan[i].phi);
                vj["w"] = plan[i].w;
                vj["h"] = plan[i].h;
                vj["image"] = std::string(name);
                plan_json["views"].push_back(vj);
            }
            std::ofstream(fs::path(proj_out_dir) / "plan.json") << plan_json.dump(2) << "\n";
            std::printf("wrote %zu views + plan.json to %s\n", plan.size(), proj_out_dir.c_str());
        } else {
            ViewWindow win{radians(proj_fov), radians(proj_theta), radians(proj_phi), proj_size[1],
                           proj_size[0]};
            RadianceImage view;
            view.pixels = equirect_to_perspective(pano, win);
            view.projection = Projection::perspective;
            view.calibration = pano.calibration;
            view.k_applied = pano.k_applied;
            write_hdr(proj_out, view);
            std::printf("wrote %s\n", proj_out.c_str());
        }
    });

    // ---- stitch ----
    auto* stitch_cmd = app.add_subcommand("stitch", "re-assemble a panorama from annotated perspective views");
    std::string stitch_plan, stitch_out = "stitched.hdr", stitch_cov;
    stitch_cmd->add_option("--plan", stitch_plan, "plan.json listing views and their windows")->required();
    stitch_cmd->add_option("--out", stitch_out, "output panorama .hdr");
    stitch_cmd->add_option("--coverage-out", stitch_cov, "optional coverage mask PNG");
    stitch_cmd->callback([&]() {
        const json plan = load_json(stitch_plan);
        const fs::path base = fs::absolute(fs::path(stitch_plan)).parent_path();
        ViewSet<vec3> views;
        for (const auto& vj : plan.at("views")) {
            ViewWindow win{radians(vj.at("fov_deg").get<double>()),
                           radians(vj.at("theta_deg").get<double>()),
                           radians(vj.at("phi_deg").get<double>()), vj.at("h"), vj.at("w")};
            const RadianceImage img = read_hdr((base / vj.at("image").get<std::string>()).string());
            views.push_back({win, img.pixels});
        }
        auto res = perspective_to_equirect(views, plan.at("pano_height"), plan.at("pano_width"));
        write_hdr(stitch_out, res.pano);
        if (!stitch_cov.empty()) write_mask_png(stitch_cov, res.coverage);
        const double covered = 100.0 * double(res.coverage.count()) /
                               double(res.coverage.grid.pixel_count());
        std::printf("wrote %s (%.2f%% covered)\n", stitch_out.c_str(), covered);
    });

    // ---- mask ----
    auto* mask_cmd = app.add_subcommand("mask", "build the furniture/tripod/sunlight target mask");
    std::string mask_pano, mask_labels, mask_classes, mask_corners;
    std::string mask_out = "target_mask.png", mask_floor_out;
    double mask_threshold = 2000.0, mask_cap = 15.0;
    int mask_dilation = 4;
    mask_cmd->add_option("--pano", mask_pano, "calibrated panorama .hdr")->required();
    mask_cmd->add_option("--labels", mask_labels, "segmentation label map PNG")->required();
    mask_cmd->add_option("--classes", mask_classes, "JSON listing furniture class ids")->required();
    mask_cmd->add_option("--corners", mask_corners, "floor corner file (x y per line)")->required();
    mask_cmd->add_option("--sunlight-threshold", mask_threshold, "cd/m^2");
    mask_cmd->add_option("--tripod-cap-deg", mask_cap, "nadir cap angle");
    mask_cmd->add_option("--dilation", mask_dilation, "mask dilation radius, px");
    mask_cmd->add_option("--out", mask_out, "target mask PNG");
    mask_cmd->add_option("--floor-out", mask_floor_out, "optional floor region PNG");
    mask_cmd->callback([&]() {
        const RadianceImage pano = read_hdr(mask_pano);
        const auto labels = read_label_png(mask_labels);
        const json classes = load_json(mask_classes);
        Mask furniture(pano.width(), pano.height(), MaskLabel::furniture);
        for (int y = 0; y < pano.height(); ++y)
            for (int x = 0; x < pano.width(); ++x)
                for (const auto& id : classes.at("furniture_classes"))
                    if (labels.at(x, y) == id.get<int>()) furniture.set(x, y);
        const Mask floor_region =
            floor_boundary_from_layout(parse_corners(mask_corners), pano.width(), pano.height());
        const Mask attached = filter_contours_by_floor(furniture, floor_region);
        const Mask sun = sunlight_mask(pano, mask_threshold);
        const Mask tripod = tripod_mask(pano.width(), pano.height(), radians(mask_cap));
        const Mask target = combine_masks({attached, sun, tripod}, mask_dilation);
        write_mask_png(mask_out, target);
        if (!mask_floor_out.empty()) write_mask_png(mask_floor_out, floor_region);
        std::printf("wrote %s (%.2f%% coverage)\n", mask_out.c_str(),
                    100.0 * double(target.count()) / double(target.grid.pixel_count()));
    });

    // ---- inpaint ----
    auto* inp_cmd = app.add_subcommand("inpaint", "fill masked regions (diffusion + near-periodic floor fill)");
    std::string inp_in, inp_mask, inp_floor, inp_out = "empty.hdr", inp_external;
    uint64_t inp_seed = 0;
    inp_cmd->add_option("--in", inp_in, "input .hdr")->required();
    inp_cmd->add_option("--mask", inp_mask, "target mask PNG")->required();
    inp_cmd->add_option("--floor", inp_floor, "floor region PNG (enables the periodic floor fill)");
    inp_cmd->add_option("--external", inp_external,
                        "external inpainter: <cmd> <input> <mask> <output>; falls back on failure");
    inp_cmd->add_option("--seed", inp_seed, "fill seed");
    inp_cmd->add_option("--out", inp_out, "output .hdr");
    inp_cmd->callback([&]() {
        const RadianceImage pano = read_hdr(inp_in);
        const Mask target = read_mask_png(inp_mask);
        if (!inp_external.empty()) {
            const std::string full =
                inp_external + " \"" + inp_in + "\" \"" + inp_mask + "\" \"" + inp_out + "\"";
            if (std::system(full.c_str()) == 0 && fs::exists(inp_out)) {
                std::printf("external inpainter wrote %s\n", inp_out.c_str());
                return;
            }
            std::fprintf(stderr, "warning: external inpainter failed; using the built-in fill\n");
        }
        RadianceImage filled = pano;
        if (!inp_floor.empty()) {
            const Mask floor_region = read_mask_png(inp_floor);
            Mask boundary(pano.width(), pano.height(), MaskLabel::floor_boundary);
            for (int x = 0; x < pano.width(); ++x)
                for (int y = 1; y < pano.height(); ++y)
                    if (floor_region.test(x, y) && !floor_region.test(x, y - 1)) {
                        boundary.set(x, y);
                        break;
                    }
            Mask floor_part(pano.width(), pano.height()), rest(pano.width(), pano.height());
            for (int y = 0; y < pano.height(); ++y)
                for (int x = 0; x < pano.width(); ++x) {
                    if (!target.test(x, y)) continue;
                    if (floor_region.test(x, y) && !boundary.test(x, y))
                        floor_part.set(x, y);
                    else
                        rest.set(x, y);
                }
            if (floor_part.count() > 0) {
                auto per = periodic_fill(filled, floor_part, floor_region, inp_seed);
                filled = std::move(per.image);
                if (per.report.used_fallback)
                    std::printf("floor fill: no confident period, diffusion fallback used\n");
                else
                    std::printf("floor fill: period (%d, %d), confidence %.2f\n",
                                per.report.period.dx, per.report.period.dy,
                                per.report.period.confidence);
            }
            if (rest.count() > 0) filled = diffusion_fill(filled, rest, boundary).image;
        } else {
            filled = diffusion_fill(filled, target).image;
        }
        write_hdr(inp_out, filled);
        std::printf("wrote %s\n", inp_out.c_str());
    });

    // ---- layout ----
    auto* lay_cmd = app.add_subcommand("layout", "place furniture on the floor polygon by rules");
    std::string lay_floor, lay_rules, lay_out = "placed.json";
    lay_cmd->add_option("--floor", lay_floor, "floor polygon JSON")->required();
    lay_cmd->add_option("--rules", lay_rules, "item catalog + placement rules JSON")->required();
    lay_cmd->add_option("--out", lay_out, "output placements JSON");
    lay_cmd->callback([&]() {
        FloorPolygon floor = parse_floor(load_json(lay_floor));
        const RuleSet rules = parse_rules(load_json(lay_rules));
        const GeneratedLayout layout = generate_layout(floor, rules.items, rules.rules);
        const LayoutReport report = validate_layout(floor, layout.placed);
        const fs::path rules_dir = fs::absolute(fs::path(lay_rules)).parent_path();
        const fs::path out_dir = fs::absolute(fs::path(lay_out)).parent_path();
        json out;
        out["placed"] = json::array();
        for (const PlacedItem& p : layout.placed) {
            out["placed"].push_back({{"item_id", p.item.id},
                                     {"depth_x", p.item.depth_x},
                                     {"width_y", p.item.width_y},
                                     {"mesh", relocate_mesh_ref(p.item.mesh_ref, rules_dir, out_dir)},
                                     {"albedo", {p.item.albedo.x, p.item.albedo.y, p.item.albedo.z}},
                                     {"theta", p.theta},
                                     {"t", {p.t.x, p.t.y}}});
        }
        out["outcomes"] = json::array();
        for (const PlacementOutcome& o : layout.outcomes) {
            json oj{{"item_id", o.item_id}, {"placed", o.placed}};
            if (!o.reason.empty()) oj["reason"] = o.reason;
            out["outcomes"].push_back(oj);
        }
        out["all_valid"] = report.all_valid;
        std::ofstream(lay_out) << out.dump(2) << "\n";
        std::printf("placed %zu of %zu items -> %s\n", layout.placed.size(), layout.outcomes.size(),
                    lay_out.c_str());
        for (const PlacementOutcome& o : layout.outcomes)
            if (!o.placed) std::printf("  skipped %s: %s\n", o.item_id.c_str(), o.reason.c_str());
    });

    // ---- render ----
    auto* ren_cmd = app.add_subcommand("render", "path-trace the staged room as a 360 HDR panorama");
    std::string ren_scene, ren_out = "staged.hdr", ren_rad;
    int ren_spp = 0, ren_bounces = 0;
    uint64_t ren_seed = 0;
    ren_cmd->add_option("--scene", ren_scene, "scene JSON")->required();
    ren_cmd->add_option("--spp", ren_spp, "samples per pixel (overrides the scene file)");
    ren_cmd->add_option("--bounces", ren_bounces, "path depth (overrides the scene file)");
    ren_cmd->add_option("--seed", ren_seed, "render seed");
    ren_cmd->add_option("--export-rad", ren_rad, "also export the scene as Radiance .rad");
    ren_cmd->add_option("--out", ren_out, "output .hdr");
    ren_cmd->callback([&]() {
        const json sj = load_json(ren_scene);
        reject_unknown_keys(sj,
                            {"floor", "room_height", "pano", "placed", "env", "env_rotation_deg",
                             "window", "width", "height", "texels_per_meter", "spp", "bounces"},
                            "scene");
        const fs::path base = fs::absolute(fs::path(ren_scene)).parent_path();
        auto resolve = [&](const std::string& rel) {
            fs::path p(rel);
            return p.is_absolute() ? p : base / p;
        };
        FloorPolygon floor = sj.at("floor").is_string()
                                 ? parse_floor(load_json(resolve(sj.at("floor"))))
                                 : parse_floor(sj.at("floor"));
        RadianceImage pano;
        if (sj.contains("pano")) pano = read_hdr(resolve(sj.at("pano")).string());
        const RadianceImage env = read_hdr(resolve(sj.at("env")).string());
        LoadedPlacements lp;
        if (sj.contains("placed")) {
            if (sj.at("placed").is_string()) {
                const fs::path placed_path = resolve(sj.at("placed"));
                lp = load_placements(load_json(placed_path), placed_path.parent_path());
            } else {
                lp = load_placements(sj.at("placed"), base);
            }
        }
        auto built = build_scene(floor, sj.value("room_height", 2.8), pano, lp.placed, lp.meshes,
                                 env, parse_window(sj.at("window")),
                                 radians(sj.value("env_rotation_deg", 0.0)),
                                 sj.value("texels_per_meter", 32.0));
        built.scene.out_width = sj.value("width", 2048);
        built.scene.out_height = sj.value("height", 1024);
        RenderSettings settings;
        settings.samples_per_pixel = ren_spp > 0 ? ren_spp : sj.value("spp", 256);
        settings.max_bounces = ren_bounces > 0 ? ren_bounces : sj.value("bounces", 4);
        settings.seed = ren_seed;
        const auto res = render_panorama(built.scene, settings);
        for (const auto& w : built.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        write_hdr(ren_out, res.image);
        if (!ren_rad.empty()) export_radiance_scene(built.scene, ren_rad);
        std::printf("wrote %s (%dx%d, %d spp)\n", ren_out.c_str(), built.scene.out_width,
                    built.scene.out_height, settings.samples_per_pixel);
    });

    // ---- stage (end to end) ----
    auto* stage_cmd = app.add_subcommand("stage", "run the full pipeline from a manifest");
    std::string stage_manifest, stage_out = "staged_out", stage_ext;
    bool stage_force = false;
    stage_cmd->add_option("--manifest", stage_manifest, "pipeline manifest JSON")->required();
    stage_cmd->add_option("--out", stage_out, "artifact directory");
    stage_cmd->add_flag("--force", stage_force, "ignore stage hashes and re-run everything");
    stage_cmd->add_option("--external-inpaint", stage_ext,
                          "external inpainter command (or set PANOSTAGE_INPAINT_CMD)");
    int stage_exit = exit_ok;
    stage_cmd->callback([&]() {
        PipelineOptions opt;
        opt.manifest_path = stage_manifest;
        opt.output_dir = stage_out;
        opt.force = stage_force;
        opt.external_inpaint_cmd = stage_ext;
        const PipelineResult result = run_pipeline(opt);
        for (const auto& s : result.stages) {
            const char* state = s.failed    ? "FAILED"
                                : s.skipped ? "skipped (up to date)"
                                : s.ran     ? "done"
                                            : "not run";
            std::printf("%-10s %s%s%s\n", s.name.c_str(), state, s.message.empty() ? "" : ": ",
                        s.message.c_str());
        }
        stage_exit = result.exit_code;
    });

    // ---- inspect ----
    auto* inspect_cmd = app.add_subcommand(
        "inspect",
        "summarize an .hdr/.png/.json/.txt file (dimensions, calibration state, luminance "
        "min/mean/max; a 2:1 aspect is reported as an equirectangular projection guess)");
    std::string inspect_path;
    inspect_cmd->add_option("file", inspect_path, "file to inspect")->required();
    inspect_cmd->callback([&]() { std::printf("%s\n", inspect_file(inspect_path).c_str()); });

    // ---- fixture ----
    auto* fix_cmd = app.add_subcommand("fixture", "generate the synthetic box-room demo fixture");
    std::string fix_out = "fixture";
    int fix_pano_h = 256, fix_render_h = 128, fix_spp = 24;
    fix_cmd->add_option("--out", fix_out, "fixture directory");
    fix_cmd->add_option("--pano-height", fix_pano_h, "ground-truth panorama rows");
    fix_cmd->add_option("--render-height", fix_render_h, "staged render rows");
    fix_cmd->add_option("--spp", fix_spp, "staged render samples per pixel");
    fix_cmd->callback([&]() {
        FixtureOptions opt;
        opt.dir = fix_out;
        opt.pano_height = fix_pano_h;
        opt.render_height = fix_render_h;
        opt.render_spp = fix_spp;
        const auto summary = write_fixture(opt);
        std::printf("fixture in %s\n  manifest: %s\n  measured luminance: %.4f cd/m^2\n  k2: %g\n",
                    fix_out.c_str(), summary.manifest.string().c_str(), summary.measured_luminance,
                    summary.k2);
        std::printf("run: panostage stage --manifest %s --out %s\n",
                    summary.manifest.string().c_str(), (fs::path(fix_out) / "out").string().c_str());
    });

    // Subcommand callbacks throw; translate to the documented exit codes
    // (0 success, 2 validation error, 3 stage/runtime failure).
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_stage_failure;
    }
    return stage_exit;
}
