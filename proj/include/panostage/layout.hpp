#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "panostage/math.hpp"

namespace panostage {

enum class EdgeLabel { wall, window };

inline const char* to_string(EdgeLabel l) { return l == EdgeLabel::wall ? "wall" : "window"; }

// Polygon geometry helpers shared by placement and validation.
namespace poly {

inline double signed_area(const std::vector<vec2>& v) {
    double a = 0.0;
    for (size_t i = 0; i < v.size(); ++i) a += cross(v[i], v[(i + 1) % v.size()]);
    return 0.5 * a;
}

// Inside-or-on test with tolerance; crossing number plus an explicit
// on-segment check so edge-touch counts as contained.
inline bool point_in_polygon(const std::vector<vec2>& v, const vec2& p, double eps = 1e-9) {
    bool inside = false;
    for (size_t i = 0; i < v.size(); ++i) {
        const vec2& a = v[i];
        const vec2& b = v[(i + 1) % v.size()];
        const vec2 e = b - a;
        const double len = length(e);
        if (len > 0) {
            const double t = clamp(dot(p - a, e) / (len * len), 0.0, 1.0);
            const vec2 closest = a + e * t;
            if (length(p - closest) <= eps) return true;
        }
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

inline bool point_strictly_inside(const std::vector<vec2>& v, const vec2& p, double eps = 1e-9) {
    for (size_t i = 0; i < v.size(); ++i) {
        const vec2& a = v[i];
        const vec2& b = v[(i + 1) % v.size()];
        const vec2 e = b - a;
        const double len = length(e);
        if (len > 0) {
            const double t = clamp(dot(p - a, e) / (len * len), 0.0, 1.0);
            if (length(p - (a + e * t)) <= eps) return false;
        }
    }
    return point_in_polygon(v, p, 0.0);
}

// Proper crossing of open segments (shared endpoints do not count).
inline bool segments_cross(const vec2& a, const vec2& b, const vec2& c, const vec2& d) {
    auto orient = [](const vec2& p, const vec2& q, const vec2& r) {
        return cross(q - p, r - p);
    };
    const double o1 = orient(a, b, c), o2 = orient(a, b, d);
    const double o3 = orient(c, d, a), o4 = orient(c, d, b);
    return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 &&
           o4 != 0;
}

inline bool is_simple(const std::vector<vec2>& v) {
    const size_t n = v.size();
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;  // adjacent share a vertex
            if (segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
        }
    }
    return true;
}

// First exit of the ray origin + t*dir from the polygon, ignoring hits
// closer than t_min (the origin typically sits on an edge).
inline double ray_exit_distance(const std::vector<vec2>& v, const vec2& origin, const vec2& dir,
                                double t_min = 1e-9) {
    double best = -1.0;
    for (size_t i = 0; i < v.size(); ++i) {
        const vec2& a = v[i];
        const vec2& b = v[(i + 1) % v.size()];
        const vec2 e = b - a;
        const double denom = cross(dir, e);
        if (std::abs(denom) < 1e-15) continue;
        const double t = cross(a - origin, e) / denom;
        const double s = cross(a - origin, dir) / denom;
        if (t > t_min && s >= -1e-9 && s <= 1.0 + 1e-9)
            if (best < 0.0 || t < best) best = t;
    }
    return best;
}

// Area of the intersection of two convex polygons (Sutherland-Hodgman).
inline double convex_overlap_area(std::vector<vec2> subject, const std::vector<vec2>& clip) {
    for (size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
        const vec2& a = clip[i];
        const vec2& b = clip[(i + 1) % clip.size()];
        const vec2 e = b - a;
        std::vector<vec2> out;
        out.reserve(subject.size() + 2);
        for (size_t j = 0; j < subject.size(); ++j) {
            const vec2& p = subject[j];
            const vec2& q = subject[(j + 1) % subject.size()];
            const double dp = cross(e, p - a);
            const double dq = cross(e, q - a);
            if (dp >= 0) out.push_back(p);
            if ((dp > 0 && dq < 0) || (dp < 0 && dq > 0)) {
                const double t = dp / (dp - dq);
                out.push_back(p + (q - p) * t);
            }
        }
        subject = std::move(out);
    }
    return subject.size() < 3 ? 0.0 : std::abs(signed_area(subject));
}

}  // namespace poly

// Floor region on the z = 0 plane, in meters, with a label per edge
// (edge i joins vertex i to vertex i+1). Vertices are counter-clockwise;
// clockwise input is normalized on validate().
struct FloorPolygon {
    std::vector<vec2> vertices;
    std::vector<EdgeLabel> edge_labels;
    vec3 camera{0.0, 0.0, 1.6};

    void validate() {
        if (vertices.size() < 3) throw std::invalid_argument("floor: need at least 3 vertices");
        if (edge_labels.size() != vertices.size())
            throw std::invalid_argument("floor: one edge label per edge required");
        if (!poly::is_simple(vertices))
            throw std::invalid_argument("floor: polygon must be simple (non-self-intersecting)");
        if (poly::signed_area(vertices) < 0) {
            // Flip to counter-clockwise, keeping labels attached to edges.
            const size_t n = vertices.size();
            std::vector<vec2> rv(vertices.rbegin(), vertices.rend());
            std::vector<EdgeLabel> rl(n);
            for (size_t j = 0; j < n; ++j) rl[j] = edge_labels[(2 * n - 2 - j) % n];
            vertices = std::move(rv);
            edge_labels = std::move(rl);
        }
        if (!poly::point_strictly_inside(vertices, {camera.x, camera.y}))
            throw std::invalid_argument("floor: camera must be strictly inside the polygon");
    }

    size_t edge_count() const { return vertices.size(); }
    vec2 edge_start(size_t i) const { return vertices[i]; }
    vec2 edge_end(size_t i) const { return vertices[(i + 1) % vertices.size()]; }
    double edge_length(size_t i) const { return length(edge_end(i) - edge_start(i)); }

    std::optional<size_t> first_edge_with(EdgeLabel label) const {
        for (size_t i = 0; i < edge_labels.size(); ++i)
            if (edge_labels[i] == label) return i;
        return std::nullopt;
    }
};

// Furniture footprint: axis-aligned rectangle in the object frame, centered
// at the origin, depth along x and width along y; the front is +y.
struct FurnitureItem {
    std::string id;
    double depth_x = 0.0;
    double width_y = 0.0;
    std::string mesh_ref;
    vec3 albedo{0.5, 0.5, 0.5};

    void validate() const {
        if (!(depth_x > 0.0 && width_y > 0.0))
            throw std::invalid_argument("furniture '" + id + "': dimensions must be positive");
    }
};

enum class Orientation { face_window, face_interior, align_edge };

inline const char* to_string(Orientation o) {
    switch (o) {
        case Orientation::face_window: return "face-window";
        case Orientation::face_interior: return "face-interior";
        case Orientation::align_edge: return "align-edge";
    }
    return "unknown";
}

// Where one item goes: an edge (by index or by label), an orientation, and
// normalized coordinates u (along the edge) and v (clearance from it).
// v = 0 is flush against the edge, v = 1 flush against the opposite boundary.
struct PlacementRule {
    std::string item_id;
    std::variant<size_t, EdgeLabel> target_edge = EdgeLabel::wall;
    Orientation orientation = Orientation::face_interior;
    double u = 0.5;
    double v = 0.0;

    void validate() const {
        if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("placement rule: u and v must be in [0, 1]");
    }
};

struct PlacedItem {
    FurnitureItem item;
    double theta = 0.0;  // rotation about z
    vec2 t{0.0, 0.0};    // translation in the floor plane

    std::array<vec2, 4> footprint_corners() const {
        const double hx = item.depth_x / 2.0, hy = item.width_y / 2.0;
        const double c = std::cos(theta), s = std::sin(theta);
        auto map = [&](double x, double y) { return vec2{c * x - s * y + t.x, s * x + c * y + t.y}; };
        return {map(hx, hy), map(-hx, hy), map(-hx, -hy), map(hx, -hy)};
    }
};

// x' = R_z(theta) x + t, z preserved.
inline std::vector<vec3> apply_rigid(const std::vector<vec3>& points, double theta, vec2 t) {
    const double c = std::cos(theta), s = std::sin(theta);
    std::vector<vec3> out;
    out.reserve(points.size());
    for (const vec3& p : points) out.push_back({c * p.x - s * p.y + t.x, s * p.x + c * p.y + t.y, p.z});
    return out;
}

inline vec3 apply_rigid(const vec3& p, double theta, vec2 t) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * p.x - s * p.y + t.x, s * p.x + c * p.y + t.y, p.z};
}

struct InfeasiblePlacement : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Resolve a rule against the floor: the item's back goes parallel to the
// target edge, the front faces per the orientation, u slides between the two
// flush-against-the-endpoints positions and v between edge-flush and
// opposite-boundary-flush along the edge normal.
inline PlacedItem place_item(const FloorPolygon& floor, const FurnitureItem& item,
                             const PlacementRule& rule) {
    item.validate();
    rule.validate();

    size_t edge;
    if (std::holds_alternative<size_t>(rule.target_edge)) {
        edge = std::get<size_t>(rule.target_edge);
        if (edge >= floor.edge_count())
            throw std::invalid_argument("placement rule: edge index out of range");
    } else {
        auto found = floor.first_edge_with(std::get<EdgeLabel>(rule.target_edge));
        if (!found)
            throw std::invalid_argument(std::string("placement rule: floor has no ") +
                                        to_string(std::get<EdgeLabel>(rule.target_edge)) + " edge");
        edge = *found;
    }

    const vec2 a = floor.edge_start(edge);
    const vec2 b = floor.edge_end(edge);
    const double edge_len = length(b - a);
    const vec2 tangent = (b - a) / edge_len;
    const vec2 normal = perp_ccw(tangent);  // interior side for a CCW polygon

    vec2 front;
    switch (rule.orientation) {
        case Orientation::face_interior: front = normal; break;
        case Orientation::face_window: front = vec2{0, 0} - normal; break;
        case Orientation::align_edge: front = tangent; break;
    }
    const double theta = std::atan2(-front.x, front.y);

    // Rotated half-extents along the edge tangent and normal.
    const double c = std::cos(theta), s = std::sin(theta);
    const vec2 rx{c, s}, ry{-s, c};
    const double hx = item.depth_x / 2.0, hy = item.width_y / 2.0;
    const double extent_t = hx * std::abs(dot(tangent, rx)) + hy * std::abs(dot(tangent, ry));
    const double extent_n = hx * std::abs(dot(normal, rx)) + hy * std::abs(dot(normal, ry));

    if (edge_len < 2.0 * extent_t - 1e-9)
        throw InfeasiblePlacement("item '" + item.id + "' does not fit along edge " +
                                  std::to_string(edge));
    const double along = extent_t + rule.u * (edge_len - 2.0 * extent_t);
    const vec2 anchor = a + tangent * along;

    const double exit = poly::ray_exit_distance(floor.vertices, anchor, normal);
    if (exit < 0.0 || exit < 2.0 * extent_n - 1e-9)
        throw InfeasiblePlacement("item '" + item.id + "' does not fit across the room from edge " +
                                  std::to_string(edge));
    const double across = extent_n + rule.v * (exit - 2.0 * extent_n);

    PlacedItem placed;
    placed.item = item;
    placed.theta = theta;
    placed.t = anchor + normal * across;
    return placed;
}

struct ItemCheck {
    std::string item_id;
    bool contained = true;
    double max_overlap_area = 0.0;     // against any other placed item
    double camera_clearance = 0.0;     // distance from camera to footprint
    bool camera_too_close = false;     // clearance < 0.5 m
};

struct LayoutReport {
    std::vector<ItemCheck> items;
    bool all_valid = true;
};

inline double distance_point_to_rect(const std::array<vec2, 4>& corners, const vec2& p) {
    double best = std::numeric_limits<double>::max();
    bool inside = true;
    for (size_t i = 0; i < 4; ++i) {
        const vec2& a = corners[i];
        const vec2& b = corners[(i + 1) % 4];
        const vec2 e = b - a;
        const double t = clamp(dot(p - a, e) / dot(e, e), 0.0, 1.0);
        best = std::min(best, length(p - (a + e * t)));
        if (cross(e, p - a) < 0) inside = false;
    }
    return inside ? 0.0 : best;
}

// Containment, pairwise overlap, and camera clearance, report-only.
// Edge-touch counts as contained and as zero overlap.
inline LayoutReport validate_layout(const FloorPolygon& floor,
                                    const std::vector<PlacedItem>& placed) {
    LayoutReport report;
    std::vector<std::array<vec2, 4>> rects;
    rects.reserve(placed.size());
    for (const auto& p : placed) rects.push_back(p.footprint_corners());

    for (size_t i = 0; i < placed.size(); ++i) {
        ItemCheck check;
        check.item_id = placed[i].item.id;

        check.contained = true;
        for (const vec2& corner : rects[i])
            if (!poly::point_in_polygon(floor.vertices, corner, 1e-7)) check.contained = false;
        if (check.contained) {
            // A polygon edge crossing the footprint would mean a notch pokes in.
            const size_t n = floor.vertices.size();
            for (size_t e = 0; e < n && check.contained; ++e)
                for (size_t r = 0; r < 4; ++r)
                    if (poly::segments_cross(floor.vertices[e], floor.vertices[(e + 1) % n],
                                             rects[i][r], rects[i][(r + 1) % 4])) {
                        check.contained = false;
                        break;
                    }
        }

        for (size_t j = 0; j < placed.size(); ++j) {
            if (j == i) continue;
            const std::vector<vec2> a(rects[i].begin(), rects[i].end());
            const std::vector<vec2> b(rects[j].begin(), rects[j].end());
            double area = poly::convex_overlap_area(a, b);
            if (area < 1e-9) area = 0.0;  // measure-zero touch
            check.max_overlap_area = std::max(check.max_overlap_area, area);
        }

        check.camera_clearance = distance_point_to_rect(rects[i], {floor.camera.x, floor.camera.y});
        check.camera_too_close = check.camera_clearance < 0.5;

        if (!check.contained || check.max_overlap_area > 0.0) report.all_valid = false;
        report.items.push_back(std::move(check));
    }
    return report;
}

struct PlacementOutcome {
    std::string item_id;
    bool placed = false;
    std::string reason;  // empty when placed
};

struct GeneratedLayout {
    std::vector<PlacedItem> placed;
    std::vector<PlacementOutcome> outcomes;
};

// Greedy placement in rule order. A placement that is infeasible, escapes the
// floor, or overlaps an accepted item is skipped and reported; the result
// always passes validate_layout with no violations.
inline GeneratedLayout generate_layout(const FloorPolygon& floor, const std::vector<FurnitureItem>& items,
                                       const std::vector<PlacementRule>& rules) {
    GeneratedLayout out;
    for (const PlacementRule& rule : rules) {
        PlacementOutcome outcome;
        outcome.item_id = rule.item_id;
        const FurnitureItem* item = nullptr;
        for (const auto& candidate : items)
            if (candidate.id == rule.item_id) item = &candidate;
        if (!item) {
            outcome.reason = "unknown item id";
            out.outcomes.push_back(std::move(outcome));
            continue;
        }
        try {
            PlacedItem placed = place_item(floor, *item, rule);
            std::vector<PlacedItem> trial = out.placed;
            trial.push_back(placed);
            const LayoutReport report = validate_layout(floor, trial);
            const ItemCheck& check = report.items.back();
            if (!check.contained) {
                outcome.reason = "footprint escapes the floor polygon";
            } else if (check.max_overlap_area > 0.0) {
                outcome.reason = "overlaps an already placed item";
            } else {
                out.placed.push_back(std::move(placed));
                outcome.placed = true;
            }
        } catch (const InfeasiblePlacement& e) {
            outcome.reason = e.what();
        }
        out.outcomes.push_back(std::move(outcome));
    }
    return out;
}

}  // namespace panostage
