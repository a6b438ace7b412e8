#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "panostage/fisheye.hpp"
#include "panostage/hdr.hpp"
#include "panostage/image_io.hpp"
#include "panostage/inpaint.hpp"
#include "panostage/layout.hpp"
#include "panostage/mask_ops.hpp"
#include "panostage/obj.hpp"
#include "panostage/render.hpp"
#include "panostage/rgbe.hpp"
#include "panostage/scene_build.hpp"

namespace panostage {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Exit codes shared by the pipeline and the CLI.
inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 2;
inline constexpr int exit_stage_failure = 3;

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config file parsing

inline json load_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open config " + path.string());
    json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw ValidationError("bad JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

inline void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                                const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw ValidationError(where + ": unknown key '" + it.key() + "'");
    }
}

inline FloorPolygon parse_floor(const json& j) {
    reject_unknown_keys(j, {"vertices", "edge_labels", "camera", "height"}, "floor");
    FloorPolygon floor;
    for (const auto& v : j.at("vertices")) floor.vertices.push_back({v.at(0), v.at(1)});
    for (const auto& l : j.at("edge_labels")) {
        const std::string s = l;
        if (s == "wall")
            floor.edge_labels.push_back(EdgeLabel::wall);
        else if (s == "window")
            floor.edge_labels.push_back(EdgeLabel::window);
        else
            throw ValidationError("floor: edge label must be wall or window, got '" + s + "'");
    }
    if (j.contains("camera")) {
        const auto& c = j.at("camera");
        floor.camera = {c.at(0), c.at(1), c.size() > 2 ? double(c.at(2)) : 1.6};
    }
    try {
        floor.validate();
    } catch (const std::exception& e) {
        throw ValidationError(e.what());
    }
    return floor;
}

struct RuleSet {
    std::vector<FurnitureItem> items;
    std::vector<PlacementRule> rules;
};

inline RuleSet parse_rules(const json& j) {
    reject_unknown_keys(j, {"items", "rules"}, "rules");
    RuleSet out;
    for (const auto& ij : j.at("items")) {
        reject_unknown_keys(ij, {"id", "depth_x", "width_y", "mesh", "albedo"}, "item");
        FurnitureItem item;
        item.id = ij.at("id");
        item.depth_x = ij.at("depth_x");
        item.width_y = ij.at("width_y");
        if (ij.contains("mesh")) item.mesh_ref = ij.at("mesh");
        if (ij.contains("albedo")) {
            const auto& a = ij.at("albedo");
            item.albedo = {a.at(0), a.at(1), a.at(2)};
        }
        item.validate();
        out.items.push_back(std::move(item));
    }
    for (const auto& rj : j.at("rules")) {
        reject_unknown_keys(rj, {"item", "edge", "orientation", "u", "v"}, "rule");
        PlacementRule rule;
        rule.item_id = rj.at("item");
        const auto& e = rj.at("edge");
        if (e.is_number_unsigned() || e.is_number_integer())
            rule.target_edge = size_t(e.get<int64_t>());
        else if (e == "wall")
            rule.target_edge = EdgeLabel::wall;
        else if (e == "window")
            rule.target_edge = EdgeLabel::window;
        else
            throw ValidationError("rule: edge must be an index, 'wall', or 'window'");
        if (rj.contains("orientation")) {
            const std::string o = rj.at("orientation");
            if (o == "face-window")
                rule.orientation = Orientation::face_window;
            else if (o == "face-interior")
                rule.orientation = Orientation::face_interior;
            else if (o == "align-edge")
                rule.orientation = Orientation::align_edge;
            else
                throw ValidationError("rule: unknown orientation '" + o + "'");
        }
        rule.u = rj.value("u", 0.5);
        rule.v = rj.value("v", 0.0);
        rule.validate();
        out.rules.push_back(std::move(rule));
    }
    return out;
}

inline WindowSpec parse_window(const json& j) {
    reject_unknown_keys(j, {"edge", "u0", "v0", "width", "height"}, "window");
    WindowSpec w;
    w.edge = j.at("edge");
    w.u0 = j.value("u0", 0.0);
    w.v0 = j.value("v0", 0.0);
    w.width = j.at("width");
    w.height = j.at("height");
    return w;
}

inline VignettingModel parse_vignetting(const json& j) {
    reject_unknown_keys(j, {"coefficients"}, "vignetting");
    VignettingModel m;
    const auto& c = j.at("coefficients");
    if (c.size() > 5) throw ValidationError("vignetting: at most 5 coefficients");
    for (size_t i = 0; i < c.size(); ++i) m.coeffs[i] = c.at(i);
    return m;
}

inline ColorCorrection parse_color_correction(const json& j) {
    reject_unknown_keys(j, {"matrix", "diagonal", "nd_density"}, "color correction");
    if (j.contains("matrix")) {
        ColorCorrection cc;
        const auto& m = j.at("matrix");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cc.m[r][c] = m.at(r).at(c);
        return cc;
    }
    if (j.contains("diagonal")) {
        const auto& d = j.at("diagonal");
        return ColorCorrection::diagonal(d.at(0), d.at(1), d.at(2));
    }
    if (j.contains("nd_density")) return ColorCorrection::nd_recovery(j.at("nd_density"));
    throw ValidationError("color correction: need matrix, diagonal, or nd_density");
}

// Shutter sidecar: one exposure time per line, seconds, fractions allowed
// ("1/250"); order matches the bracket file list.
inline std::vector<double> parse_shutter_sidecar(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open shutter sidecar " + path.string());
    std::vector<double> shutters;
    std::string line;
    while (std::getline(is, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto slash = line.find('/');
        if (slash != std::string::npos) {
            const double num = std::stod(line.substr(0, slash));
            const double den = std::stod(line.substr(slash + 1));
            shutters.push_back(num / den);
        } else {
            shutters.push_back(std::stod(line));
        }
    }
    return shutters;
}

// Response curve table: N lines of 1 (shared) or 3 (per-channel) relative
// exposure values, sampled uniformly over pixel values 0..1.
inline ResponseCurve parse_response_curve(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open response curve " + path.string());
    ResponseCurve curve;
    std::string line;
    while (std::getline(is, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        double r = 0, g = 0, b = 0;
        if (!(ss >> r)) throw ValidationError("bad response curve line: " + line);
        if (ss >> g) {
            if (!(ss >> b)) throw ValidationError("response curve lines need 1 or 3 values");
        } else {
            g = b = r;
        }
        curve.table_r.push_back(r);
        curve.table_g.push_back(g);
        curve.table_b.push_back(b);
    }
    if (curve.table_r.size() < 2)
        throw ValidationError("response curve needs at least 2 samples: " + path.string());
    curve.validate();
    return curve;
}

// Corner file: one "x y" pair per line in panorama pixel coordinates.
inline std::vector<PanoCorner> parse_corners(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open corner file " + path.string());
    std::vector<PanoCorner> corners;
    std::string line;
    while (std::getline(is, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        PanoCorner c;
        if (ss >> c.x >> c.y) corners.push_back(c);
    }
    return corners;
}

// ---------------------------------------------------------------------------
// Content hashing for stage resume

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t hash_file(const fs::path& path, uint64_t h) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot hash missing file " + path.string());
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof buf);
        h = fnv1a(buf, size_t(is.gcount()), h);
    }
    return h;
}

inline std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Pipeline

struct StageStatus {
    std::string name;
    bool ran = false;
    bool skipped = false;   // hash hit, outputs reused
    bool failed = false;
    std::string message;
};

struct PipelineResult {
    std::vector<StageStatus> stages;
    int exit_code = exit_ok;

    const StageStatus* find(const std::string& name) const {
        for (const auto& s : stages)
            if (s.name == name) return &s;
        return nullptr;
    }
};

struct PipelineOptions {
    fs::path manifest_path;
    fs::path output_dir;
    bool force = false;                // ignore stage hashes, re-run everything
    std::string external_inpaint_cmd;  // overrides the env var when set
};

namespace pipeline_detail {

struct Context {
    json manifest;
    fs::path base;  // directory of the manifest, for relative inputs
    fs::path out;
    uint64_t seed = 0;
    bool force = false;
    std::string inpaint_cmd;
    json run_state;  // stage name -> input hash, persisted for resume
    json run_log;    // parameters recorded per stage

    fs::path resolve(const std::string& rel) const {
        fs::path p(rel);
        return p.is_absolute() ? p : base / p;
    }

    fs::path artifact(const std::string& name) const { return out / name; }

    void require_input(const std::string& stage, const fs::path& p) const {
        if (!fs::exists(p))
            throw std::runtime_error("stage '" + stage + "': missing input " + p.string());
    }
};

inline uint64_t hash_stage(const Context& ctx, const std::string& stage, const json& config,
                           const std::vector<fs::path>& files) {
    const std::string dump = config.dump();
    uint64_t h = fnv1a(stage.data(), stage.size());
    h = fnv1a(dump.data(), dump.size(), h);
    h = fnv1a(&ctx.seed, sizeof ctx.seed, h);
    for (const auto& f : files) h = hash_file(f, h);
    return h;
}

// True when the stage's recorded hash matches and every output still exists.
inline bool can_skip(Context& ctx, const std::string& stage, uint64_t hash,
                     const std::vector<fs::path>& outputs) {
    if (ctx.force) return false;
    if (!ctx.run_state.contains(stage)) return false;
    if (ctx.run_state[stage] != hash_hex(hash)) return false;
    for (const auto& o : outputs)
        if (!fs::exists(o)) return false;
    return true;
}

}  // namespace pipeline_detail

// Mesh references inside placed.json are stored relative to the placed.json
// file itself, so the artifact stays relocatable and byte-stable.
inline std::string relocate_mesh_ref(const std::string& mesh_ref, const fs::path& from_dir,
                                     const fs::path& to_dir) {
    if (mesh_ref.empty() || fs::path(mesh_ref).is_absolute()) return mesh_ref;
    std::error_code ec;
    const fs::path rel = fs::relative(from_dir / mesh_ref, to_dir, ec);
    if (ec || rel.empty()) return mesh_ref;
    return rel.generic_string();
}

// Placement list as written by the layout stage (placed.json). Items without
// a mesh reference get a fallback box extruded from their footprint.
struct LoadedPlacements {
    std::vector<PlacedItem> placed;
    std::vector<TriangleMesh> meshes;
    std::vector<fs::path> mesh_paths;  // empty path = fallback box
};

inline LoadedPlacements load_placements(const json& placed_json, const fs::path& base) {
    LoadedPlacements out;
    for (const auto& pj : placed_json.at("placed")) {
        PlacedItem p;
        p.item.id = pj.at("item_id");
        p.item.depth_x = pj.at("depth_x");
        p.item.width_y = pj.at("width_y");
        p.item.mesh_ref = pj.value("mesh", "");
        const auto& a = pj.at("albedo");
        p.item.albedo = {a.at(0), a.at(1), a.at(2)};
        p.theta = pj.at("theta");
        p.t = {pj.at("t").at(0), pj.at("t").at(1)};
        if (!p.item.mesh_ref.empty()) {
            fs::path mp(p.item.mesh_ref);
            if (!mp.is_absolute()) mp = base / mp;
            out.mesh_paths.push_back(mp);
            out.meshes.push_back(read_obj(mp.string()));
        } else {
            out.mesh_paths.push_back({});
            out.meshes.push_back(make_box_mesh(p.item.depth_x, p.item.width_y, 0.75));
        }
        out.placed.push_back(std::move(p));
    }
    return out;
}

// Summaries for `inspect`.
inline std::string inspect_file(const fs::path& path) {
    std::ostringstream os;
    const std::string ext = path.extension().string();
    if (!fs::exists(path)) throw std::runtime_error("inspect: no such file " + path.string());
    if (ext == ".hdr") {
        const RadianceImage img = read_hdr(path.string());
        os << path.filename().string() << ": Radiance RGBE " << img.width() << "x" << img.height();
        if (img.is_absolute())
            os << ", Absolute, k=" << img.k_applied;
        else
            os << ", Relative";
        double lo = 1e300, hi = 0.0, sum = 0.0;
        for (const vec3& p : img.pixels.data) {
            const double l = pixel_luminance(p);
            lo = std::min(lo, l);
            hi = std::max(hi, l);
            sum += l;
        }
        os << ", luminance min/mean/max = " << lo << "/" << sum / double(img.pixels.pixel_count())
           << "/" << hi;
        // Aspect heuristic: 2:1 panoramas are almost always equirectangular.
        if (img.width() == 2 * img.height()) os << ", projection guess: equirectangular";
        return os.str();
    }
    if (ext == ".png") {
        const auto d = png_detail::read_png_bytes(path.string(), false);
        os << path.filename().string() << ": PNG " << d.width << "x" << d.height << ", "
           << d.channels << " channel(s)";
        if (d.channels == 1) {
            size_t on = 0;
            for (int y = 0; y < d.height; ++y)
                for (int x = 0; x < d.width; ++x)
                    if (d.bytes[size_t(y) * d.width + x] > 127) ++on;
            os << ", mask coverage " << 100.0 * double(on) / (double(d.width) * d.height) << "%";
        }
        return os.str();
    }
    if (ext == ".json") {
        const json j = load_json(path);
        os << path.filename().string() << ": JSON with keys [";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) os << ", ";
            os << it.key();
            first = false;
        }
        os << "]";
        return os.str();
    }
    if (ext == ".txt") {
        std::ifstream is(path);
        size_t lines = 0;
        std::string line;
        while (std::getline(is, line))
            if (!line.empty()) ++lines;
        os << path.filename().string() << ": text, " << lines << " non-empty line(s)";
        return os.str();
    }
    throw std::runtime_error("inspect: unknown format " + path.string());
}

// Run the staged pipeline described by a manifest. Stages execute in order
// (calibrate, fisheye, mask, inpaint, layout, render, preview); a stage with
// no manifest block is skipped cleanly together with everything downstream
// that needs its artifact. Finished stages are resumed via content hashes.
inline PipelineResult run_pipeline(const PipelineOptions& options) {
    using namespace pipeline_detail;
    PipelineResult result;

    Context ctx;
    ctx.manifest = load_json(options.manifest_path);
    ctx.base = fs::absolute(options.manifest_path).parent_path();
    ctx.out = options.output_dir;
    ctx.force = options.force;
    ctx.inpaint_cmd = options.external_inpaint_cmd;
    if (ctx.inpaint_cmd.empty()) {
        if (const char* env_cmd = std::getenv("PANOSTAGE_INPAINT_CMD")) ctx.inpaint_cmd = env_cmd;
    }

    reject_unknown_keys(ctx.manifest,
                        {"seed", "calibrate", "fisheye", "mask", "inpaint", "layout", "render",
                         "preview"},
                        "manifest");
    ctx.seed = ctx.manifest.value("seed", 0);

    fs::create_directories(ctx.out);
    const fs::path state_path = ctx.out / "run_state.json";
    const fs::path log_path = ctx.out / "run_log.json";
    if (fs::exists(state_path) && !ctx.force) ctx.run_state = load_json(state_path);
    // Keep parameters of previously finished stages across resumed runs.
    if (fs::exists(log_path) && !ctx.force) ctx.run_log = load_json(log_path);
    ctx.run_log["seed"] = ctx.seed;

    auto save_state = [&]() {
        std::ofstream(state_path) << ctx.run_state.dump(2) << "\n";
        std::ofstream(log_path) << ctx.run_log.dump(2) << "\n";
    };

    bool halted = false;
    auto run_stage = [&](const std::string& name, const json* config, auto&& body) {
        StageStatus status;
        status.name = name;
        if (halted) {
            status.message = "halted by an upstream failure";
            result.stages.push_back(status);
            return;
        }
        if (config == nullptr) {
            status.message = "no manifest block; stage skipped";
            result.stages.push_back(status);
            return;
        }
        try {
            body(status);
            status.ran = !status.skipped;
        } catch (const ValidationError& e) {
            status.failed = true;
            status.message = e.what();
            result.exit_code = exit_validation;
            halted = true;
        } catch (const std::exception& e) {
            status.failed = true;
            status.message = e.what();
            result.exit_code = exit_stage_failure;
            halted = true;
        }
        result.stages.push_back(status);
        save_state();
    };

    const json* cal_cfg = ctx.manifest.contains("calibrate") ? &ctx.manifest["calibrate"] : nullptr;
    const json* fish_cfg = ctx.manifest.contains("fisheye") ? &ctx.manifest["fisheye"] : nullptr;
    const json* mask_cfg = ctx.manifest.contains("mask") ? &ctx.manifest["mask"] : nullptr;
    const json* inp_cfg = ctx.manifest.contains("inpaint") ? &ctx.manifest["inpaint"] : nullptr;
    const json* lay_cfg = ctx.manifest.contains("layout") ? &ctx.manifest["layout"] : nullptr;
    const json* ren_cfg = ctx.manifest.contains("render") ? &ctx.manifest["render"] : nullptr;
    const json* pre_cfg = ctx.manifest.contains("preview") ? &ctx.manifest["preview"] : nullptr;

    // -- calibrate: brackets (or a merged .hdr) -> calibrated.hdr ------------
    run_stage("calibrate", cal_cfg, [&](StageStatus& status) {
        const json& cfg = *cal_cfg;
        reject_unknown_keys(cfg,
                            {"brackets", "shutter_sidecar", "response_curve", "hdr", "target_mask",
                             "measured_luminance", "statistic"},
                            "calibrate");
        std::vector<fs::path> inputs;
        if (cfg.contains("brackets")) {
            for (const auto& b : cfg.at("brackets")) inputs.push_back(ctx.resolve(b));
            inputs.push_back(ctx.resolve(cfg.at("shutter_sidecar")));
            if (cfg.contains("response_curve")) inputs.push_back(ctx.resolve(cfg.at("response_curve")));
        } else if (cfg.contains("hdr")) {
            inputs.push_back(ctx.resolve(cfg.at("hdr")));
        } else {
            throw ValidationError("calibrate: need 'brackets' or 'hdr'");
        }
        if (cfg.contains("target_mask")) inputs.push_back(ctx.resolve(cfg.at("target_mask")));
        for (const auto& p : inputs) ctx.require_input("calibrate", p);

        const uint64_t h = hash_stage(ctx, "calibrate", cfg, inputs);
        const fs::path out_path = ctx.artifact("calibrated.hdr");
        if (can_skip(ctx, "calibrate", h, {out_path})) {
            status.skipped = true;
            return;
        }

        RadianceImage hdr;
        if (cfg.contains("brackets")) {
            ExposureBracket bracket;
            for (const auto& b : cfg.at("brackets"))
                bracket.images.push_back(read_ldr_linear(ctx.resolve(b).string()));
            bracket.shutter_speeds = parse_shutter_sidecar(ctx.resolve(cfg.at("shutter_sidecar")));
            if (cfg.contains("response_curve"))
                bracket.response_curve = parse_response_curve(ctx.resolve(cfg.at("response_curve")));
            if (bracket.shutter_speeds.size() != bracket.images.size())
                throw ValidationError("calibrate: sidecar shutter count != bracket count");
            auto merged = merge_exposures(bracket);
            hdr = std::move(merged.hdr);
            ctx.run_log["calibrate"]["flagged_pixels"] = merged.flagged_pixels;
        } else {
            hdr = read_hdr(ctx.resolve(cfg.at("hdr")).string());
        }
        if (hdr.width() == 2 * hdr.height()) hdr.projection = Projection::equirectangular;

        if (cfg.contains("target_mask")) {
            const Mask target = read_mask_png(ctx.resolve(cfg.at("target_mask")).string());
            const double measured = cfg.at("measured_luminance");
            const TargetStatistic stat = cfg.value("statistic", "mean") == std::string("median")
                                             ? TargetStatistic::median
                                             : TargetStatistic::mean;
            const auto factor = compute_k1(hdr, target, measured, stat);
            hdr = apply_calibration(hdr, factor.k1);
            ctx.run_log["calibrate"]["k1"] = factor.k1;
            ctx.run_log["calibrate"]["displayed_luminance"] = factor.source.displayed_luminance;
            ctx.run_log["calibrate"]["measured_luminance"] = measured;
        }
        write_hdr(out_path.string(), hdr);
        ctx.run_state["calibrate"] = hash_hex(h);
    });

    // -- fisheye: outdoor capture -> env.hdr ---------------------------------
    run_stage("fisheye", fish_cfg, [&](StageStatus& status) {
        const json& cfg = *fish_cfg;
        reject_unknown_keys(cfg,
                            {"input", "projection", "vignetting", "color", "out_height",
                             "azimuth_deg", "lower_fill", "k2"},
                            "fisheye");
        std::vector<fs::path> inputs = {ctx.resolve(cfg.at("input"))};
        if (cfg.contains("vignetting")) inputs.push_back(ctx.resolve(cfg.at("vignetting")));
        if (cfg.contains("color")) inputs.push_back(ctx.resolve(cfg.at("color")));
        for (const auto& p : inputs) ctx.require_input("fisheye", p);
        const fs::path cal_path = ctx.artifact("calibrated.hdr");
        const bool have_k1 = fs::exists(cal_path);
        if (have_k1) inputs.push_back(cal_path);

        const uint64_t h = hash_stage(ctx, "fisheye", cfg, inputs);
        const fs::path out_path = ctx.artifact("env.hdr");
        if (can_skip(ctx, "fisheye", h, {out_path})) {
            status.skipped = true;
            return;
        }

        FisheyeImage fish;
        fish.pixels = read_hdr(ctx.resolve(cfg.at("input")).string());
        const std::string proj = cfg.value("projection", "equidistant");
        if (proj == "hemispherical")
            fish.pixels.projection = Projection::fisheye_hemispherical;
        else if (proj == "equisolid")
            fish.pixels.projection = Projection::fisheye_equisolid;
        else if (proj == "equidistant")
            fish.pixels.projection = Projection::fisheye_equidistant;
        else
            throw ValidationError("fisheye: unknown projection '" + proj + "'");
        fish.center_x = fish.pixels.width() / 2.0;
        fish.center_y = fish.pixels.height() / 2.0;
        fish.image_radius = std::min(fish.pixels.width(), fish.pixels.height()) / 2.0;

        if (cfg.contains("vignetting"))
            fish = correct_vignetting(fish, parse_vignetting(load_json(ctx.resolve(cfg.at("vignetting")))));
        if (cfg.contains("color"))
            fish = correct_nd_color(fish, parse_color_correction(load_json(ctx.resolve(cfg.at("color")))));
        fish = fisheye_remap(fish, Projection::fisheye_hemispherical);

        const int out_h = cfg.value("out_height", 256);
        const double azimuth = radians(cfg.value("azimuth_deg", 0.0));
        const LowerFill fill = cfg.value("lower_fill", "horizon") == std::string("zero")
                                   ? LowerFill::zero
                                   : LowerFill::horizon_extension;
        auto latlong = fisheye_to_latlong(fish, out_h, {std::cos(azimuth), std::sin(azimuth)}, fill);

        // Outdoor chain: k1 from the indoor calibration, k2 from the manifest.
        const double k2 = cfg.value("k2", 1.0);
        double k1 = 1.0;
        if (have_k1) {
            const RadianceImage cal = read_hdr(cal_path.string());
            if (cal.is_absolute()) k1 = cal.k_applied;
        }
        if (k1 * k2 != 1.0) latlong.pano = apply_calibration(latlong.pano, k1 * k2);
        ctx.run_log["fisheye"]["k1"] = k1;
        ctx.run_log["fisheye"]["k2"] = k2;
        ctx.run_log["fisheye"]["energy_ratio"] =
            latlong.energy_in > 0 ? latlong.energy_out / latlong.energy_in : 0.0;

        write_hdr(out_path.string(), latlong.pano);
        ctx.run_state["fisheye"] = hash_hex(h);
    });

    // -- mask: labels + corners + calibrated pano -> target_mask.png ---------
    run_stage("mask", mask_cfg, [&](StageStatus& status) {
        const json& cfg = *mask_cfg;
        reject_unknown_keys(cfg,
                            {"labels", "classes", "corners", "sunlight_threshold",
                             "tripod_cap_deg", "dilation"},
                            "mask");
        const fs::path labels_path = ctx.resolve(cfg.at("labels"));
        const fs::path classes_path = ctx.resolve(cfg.at("classes"));
        const fs::path corners_path = ctx.resolve(cfg.at("corners"));
        const fs::path cal_path = ctx.artifact("calibrated.hdr");
        for (const auto& p : {labels_path, classes_path, corners_path})
            ctx.require_input("mask", p);
        ctx.require_input("mask", cal_path);

        const uint64_t h =
            hash_stage(ctx, "mask", cfg, {labels_path, classes_path, corners_path, cal_path});
        const fs::path out_path = ctx.artifact("target_mask.png");
        const fs::path floor_path = ctx.artifact("floor_region.png");
        if (can_skip(ctx, "mask", h, {out_path, floor_path})) {
            status.skipped = true;
            return;
        }

        const RadianceImage pano = read_hdr(cal_path.string());
        const auto labels = read_label_png(labels_path.string());
        if (!labels.same_dims(pano.pixels))
            throw std::runtime_error("mask: label map does not match the panorama size");

        const json classes = load_json(classes_path);
        reject_unknown_keys(classes, {"furniture_classes"}, "classes");
        std::vector<int> furniture_ids;
        for (const auto& c : classes.at("furniture_classes")) furniture_ids.push_back(c);

        Mask furniture(pano.width(), pano.height(), MaskLabel::furniture);
        for (int y = 0; y < pano.height(); ++y)
            for (int x = 0; x < pano.width(); ++x)
                for (int id : furniture_ids)
                    if (labels.at(x, y) == id) furniture.set(x, y);

        const Mask floor_region =
            floor_boundary_from_layout(parse_corners(corners_path), pano.width(), pano.height());
        const Mask attached = filter_contours_by_floor(furniture, floor_region);

        const double threshold = cfg.value("sunlight_threshold", 2000.0);
        const double cap = radians(cfg.value("tripod_cap_deg", 15.0));
        const int dilation = cfg.value("dilation", 4);
        const Mask sun = sunlight_mask(pano, threshold);
        const Mask tripod = tripod_mask(pano.width(), pano.height(), cap);
        const Mask target = combine_masks({attached, sun, tripod}, dilation);

        ctx.run_log["mask"]["sunlight_threshold"] = threshold;
        ctx.run_log["mask"]["tripod_cap_deg"] = degrees(cap);
        ctx.run_log["mask"]["dilation"] = dilation;
        ctx.run_log["mask"]["furniture_pixels"] = attached.count();
        ctx.run_log["mask"]["target_pixels"] = target.count();

        write_mask_png(out_path.string(), target);
        write_mask_png(floor_path.string(), floor_region);
        ctx.run_state["mask"] = hash_hex(h);
    });

    // -- inpaint: calibrated.hdr + target_mask.png -> empty.hdr --------------
    run_stage("inpaint", inp_cfg, [&](StageStatus& status) {
        const json& cfg = *inp_cfg;
        reject_unknown_keys(cfg, {"external_cmd", "seed"}, "inpaint");
        const fs::path cal_path = ctx.artifact("calibrated.hdr");
        const fs::path mask_path = ctx.artifact("target_mask.png");
        const fs::path floor_path = ctx.artifact("floor_region.png");
        for (const auto& p : {cal_path, mask_path, floor_path}) ctx.require_input("inpaint", p);

        std::string cmd = cfg.value("external_cmd", "");
        if (cmd.empty()) cmd = ctx.inpaint_cmd;

        json cfg_hashed = cfg;
        cfg_hashed["resolved_cmd"] = cmd;
        const uint64_t h = hash_stage(ctx, "inpaint", cfg_hashed, {cal_path, mask_path, floor_path});
        const fs::path out_path = ctx.artifact("empty.hdr");
        if (can_skip(ctx, "inpaint", h, {out_path})) {
            status.skipped = true;
            return;
        }

        const RadianceImage pano = read_hdr(cal_path.string());
        const Mask target = read_mask_png(mask_path.string());
        const Mask floor_region = read_mask_png(floor_path.string());

        bool external_done = false;
        if (!cmd.empty()) {
            // External inpainter contract: <cmd> <input> <mask> <output>;
            // any nonzero exit falls back to the built-in fill.
            const fs::path ext_out = ctx.out / "inpaint_external.hdr";
            const std::string full = cmd + " \"" + cal_path.string() + "\" \"" +
                                     mask_path.string() + "\" \"" + ext_out.string() + "\"";
            const int rc = std::system(full.c_str());
            if (rc == 0 && fs::exists(ext_out)) {
                fs::copy_file(ext_out, out_path, fs::copy_options::overwrite_existing);
                external_done = true;
                ctx.run_log["inpaint"]["external_cmd"] = cmd;
            } else {
                status.message = "external inpainter failed (exit " + std::to_string(rc) +
                                 "); built-in fill used";
                ctx.run_log["inpaint"]["external_failed"] = true;
            }
        }

        if (!external_done) {
            // Floor boundary curve: the top edge row of the floor region.
            Mask boundary(pano.width(), pano.height(), MaskLabel::floor_boundary);
            for (int x = 0; x < pano.width(); ++x)
                for (int y = 1; y < pano.height(); ++y)
                    if (floor_region.test(x, y) && !floor_region.test(x, y - 1)) {
                        boundary.set(x, y);
                        break;
                    }

            // Floor part of the target: near-periodic fill inside the floor
            // region; everything else: boundary-aware diffusion.
            Mask floor_part(pano.width(), pano.height());
            Mask rest(pano.width(), pano.height());
            for (int y = 0; y < pano.height(); ++y)
                for (int x = 0; x < pano.width(); ++x) {
                    if (!target.test(x, y)) continue;
                    if (floor_region.test(x, y) && !boundary.test(x, y))
                        floor_part.set(x, y);
                    else
                        rest.set(x, y);
                }

            const uint64_t fill_seed = cfg.value("seed", ctx.seed);
            RadianceImage filled = pano;
            if (floor_part.count() > 0) {
                auto per = periodic_fill(filled, floor_part, floor_region, fill_seed);
                filled = std::move(per.image);
                ctx.run_log["inpaint"]["floor_period_found"] = per.report.period.found;
                ctx.run_log["inpaint"]["floor_period"] = {per.report.period.dx,
                                                          per.report.period.dy};
                ctx.run_log["inpaint"]["floor_fallback"] = per.report.used_fallback;
            }
            if (rest.count() > 0) {
                auto diff = diffusion_fill(filled, rest, boundary);
                filled = std::move(diff.image);
                ctx.run_log["inpaint"]["diffusion_iterations"] = diff.report.iterations;
            }
            write_hdr(out_path.string(), filled);
        }
        ctx.run_state["inpaint"] = hash_hex(h);
    });

    // -- layout: floor + rules -> placed.json --------------------------------
    run_stage("layout", lay_cfg, [&](StageStatus& status) {
        const json& cfg = *lay_cfg;
        reject_unknown_keys(cfg, {"floor", "rules"}, "layout");
        const fs::path floor_path = ctx.resolve(cfg.at("floor"));
        const fs::path rules_path = ctx.resolve(cfg.at("rules"));
        for (const auto& p : {floor_path, rules_path}) ctx.require_input("layout", p);

        const uint64_t h = hash_stage(ctx, "layout", cfg, {floor_path, rules_path});
        const fs::path out_path = ctx.artifact("placed.json");
        if (can_skip(ctx, "layout", h, {out_path})) {
            status.skipped = true;
            return;
        }

        FloorPolygon floor = parse_floor(load_json(floor_path));
        const RuleSet rules = parse_rules(load_json(rules_path));
        const GeneratedLayout layout = generate_layout(floor, rules.items, rules.rules);
        const LayoutReport report = validate_layout(floor, layout.placed);

        json out;
        out["placed"] = json::array();
        for (const PlacedItem& p : layout.placed) {
            json pj;
            pj["item_id"] = p.item.id;
            pj["depth_x"] = p.item.depth_x;
            pj["width_y"] = p.item.width_y;
            pj["mesh"] = relocate_mesh_ref(p.item.mesh_ref, rules_path.parent_path(),
                                           out_path.parent_path());
            pj["albedo"] = {p.item.albedo.x, p.item.albedo.y, p.item.albedo.z};
            pj["theta"] = p.theta;
            pj["t"] = {p.t.x, p.t.y};
            out["placed"].push_back(pj);
        }
        out["outcomes"] = json::array();
        for (const PlacementOutcome& o : layout.outcomes) {
            json oj;
            oj["item_id"] = o.item_id;
            oj["placed"] = o.placed;
            if (!o.reason.empty()) oj["reason"] = o.reason;
            out["outcomes"].push_back(oj);
        }
        out["all_valid"] = report.all_valid;
        std::ofstream(out_path) << out.dump(2) << "\n";
        ctx.run_log["layout"]["placed_count"] = layout.placed.size();
        ctx.run_state["layout"] = hash_hex(h);
    });

    // -- render: empty.hdr + placed.json + env -> staged.hdr -----------------
    run_stage("render", ren_cfg, [&](StageStatus& status) {
        const json& cfg = *ren_cfg;
        reject_unknown_keys(cfg,
                            {"env", "env_rotation_deg", "floor", "room_height", "window", "spp",
                             "bounces", "width", "height", "texels_per_meter", "export_rad"},
                            "render");
        const fs::path empty_path = ctx.artifact("empty.hdr");
        const fs::path placed_path = ctx.artifact("placed.json");
        const fs::path floor_path = ctx.resolve(cfg.at("floor"));
        ctx.require_input("render", empty_path);
        ctx.require_input("render", placed_path);
        ctx.require_input("render", floor_path);
        const fs::path env_path =
            cfg.contains("env") ? ctx.resolve(cfg.at("env")) : ctx.artifact("env.hdr");
        ctx.require_input("render", env_path);

        std::vector<fs::path> hashed = {empty_path, placed_path, floor_path, env_path};
        const json placed_json = load_json(placed_path);
        for (const auto& pj : placed_json.at("placed")) {
            const std::string mesh = pj.value("mesh", "");
            if (!mesh.empty()) {
                fs::path mp(mesh);
                if (!mp.is_absolute()) mp = placed_path.parent_path() / mp;
                ctx.require_input("render", mp);
                hashed.push_back(mp);
            }
        }

        const uint64_t h = hash_stage(ctx, "render", cfg, hashed);
        const fs::path out_path = ctx.artifact("staged.hdr");
        if (can_skip(ctx, "render", h, {out_path})) {
            status.skipped = true;
            return;
        }

        FloorPolygon floor = parse_floor(load_json(floor_path));
        const double room_height = cfg.value("room_height", 2.8);
        const WindowSpec window = parse_window(cfg.at("window"));
        const RadianceImage pano = read_hdr(empty_path.string());
        const RadianceImage env = read_hdr(env_path.string());

        const LoadedPlacements lp = load_placements(placed_json, placed_path.parent_path());

        auto built = build_scene(floor, room_height, pano, lp.placed, lp.meshes, env, window,
                                 radians(cfg.value("env_rotation_deg", 0.0)),
                                 cfg.value("texels_per_meter", 32.0));
        built.scene.out_width = cfg.value("width", 2048);
        built.scene.out_height = cfg.value("height", 1024);

        RenderSettings settings;
        settings.samples_per_pixel = cfg.value("spp", 256);
        settings.max_bounces = cfg.value("bounces", 4);
        settings.seed = ctx.seed;
        const auto res = render_panorama(built.scene, settings);

        for (const auto& w : built.warnings) ctx.run_log["render"]["warnings"].push_back(w);
        for (const auto& w : res.warnings) ctx.run_log["render"]["warnings"].push_back(w);
        ctx.run_log["render"]["spp"] = settings.samples_per_pixel;
        ctx.run_log["render"]["bounces"] = settings.max_bounces;
        ctx.run_log["render"]["irradiance_constant"] = built.irradiance_constant;

        write_hdr(out_path.string(), res.image);
        if (cfg.value("export_rad", false))
            export_radiance_scene(built.scene, ctx.artifact("scene.rad").string());
        ctx.run_state["render"] = hash_hex(h);
    });

    // -- preview: staged.hdr -> preview.png -----------------------------------
    run_stage("preview", pre_cfg, [&](StageStatus& status) {
        const json& cfg = *pre_cfg;
        reject_unknown_keys(cfg, {"exposure"}, "preview");
        const fs::path staged_path = ctx.artifact("staged.hdr");
        ctx.require_input("preview", staged_path);

        const uint64_t h = hash_stage(ctx, "preview", cfg, {staged_path});
        const fs::path out_path = ctx.artifact("preview.png");
        if (can_skip(ctx, "preview", h, {out_path})) {
            status.skipped = true;
            return;
        }

        const RadianceImage staged = read_hdr(staged_path.string());
        double exposure = cfg.value("exposure", 0.0);
        if (!(exposure > 0.0)) {
            // Key the middle gray to the mean luminance; deterministic.
            double mean = 0.0;
            for (const vec3& p : staged.pixels.data) mean += pixel_luminance(p);
            mean /= double(staged.pixels.pixel_count());
            exposure = mean > 0.0 ? 0.18 / mean : 1.0;
        }
        ctx.run_log["preview"]["exposure"] = exposure;
        write_png(out_path.string(), tone_map_preview(staged, exposure));
        ctx.run_state["preview"] = hash_hex(h);
    });

    save_state();
    return result;
}

}  // namespace panostage
