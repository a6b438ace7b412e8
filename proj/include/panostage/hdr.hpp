#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "panostage/image.hpp"

namespace panostage {

// Luminance weights for linear RGB, used for every photometric quantity in
// the toolkit. They sum to 1 exactly in double precision.
inline constexpr double lum_r = 0.2127;
inline constexpr double lum_g = 0.7151;
inline constexpr double lum_b = 0.0722;

inline double pixel_luminance(const vec3& rgb) {
    return lum_r * rgb.x + lum_g * rgb.y + lum_b * rgb.z;
}

// Monotone non-decreasing map from pixel value in [0,1] to relative exposure.
// Identity models a linear sensor; a measured curve can be loaded as a table.
struct ResponseCurve {
    // Sample points of the curve at uniform pixel values 0..1. Empty = identity.
    std::vector<double> table_r, table_g, table_b;

    bool is_identity() const { return table_r.empty() && table_g.empty() && table_b.empty(); }

    static double eval_table(const std::vector<double>& t, double v) {
        if (t.empty()) return v;
        const double pos = clamp(v, 0.0, 1.0) * (t.size() - 1);
        const size_t i = std::min(size_t(pos), t.size() - 2);
        const double a = pos - double(i);
        return t[i] * (1 - a) + t[i + 1] * a;
    }

    vec3 linearize(const vec3& v) const {
        if (is_identity()) return v;
        return {eval_table(table_r, v.x), eval_table(table_g, v.y), eval_table(table_b, v.z)};
    }

    void validate() const {
        for (const auto* t : {&table_r, &table_g, &table_b}) {
            for (size_t i = 1; i < t->size(); ++i)
                if ((*t)[i] < (*t)[i - 1])
                    throw std::invalid_argument("response curve must be monotone non-decreasing");
        }
    }
};

struct ExposureBracket {
    std::vector<Image<vec3>> images;  // per-channel values in [0,1]
    std::vector<double> shutter_speeds;  // seconds
    ResponseCurve response_curve;

    void validate() const {
        if (images.empty()) throw std::invalid_argument("bracket has no images");
        if (images.size() != shutter_speeds.size())
            throw std::invalid_argument("bracket: image count != shutter count");
        for (const auto& img : images)
            if (!img.same_dims(images.front()))
                throw std::invalid_argument("bracket: mismatched image dimensions");
        for (double t : shutter_speeds)
            if (!(t > 0.0)) throw std::invalid_argument("bracket: shutter speeds must be positive");
        response_curve.validate();
    }
};

// Hat weighting for exposure merging. Samples within `cutoff` of 0 or 1 are
// treated as under/over-exposed and carry no weight.
struct MergeWeighting {
    double cutoff = 0.005;

    double operator()(double v) const {
        if (v < cutoff || v > 1.0 - cutoff) return 0.0;
        return std::min(v, 1.0 - v);
    }
};

struct MergeResult {
    RadianceImage hdr;       // tagged relative
    Mask saturation;         // pixels where some channel had no usable sample
    size_t flagged_pixels = 0;
};

// Weighted-average radiance recovery from an exposure bracket. Channels merge
// independently; a channel with no usable sample falls back to the estimate
// from the shortest exposure (all-bright) or longest exposure (all-dark) and
// the pixel is flagged in the saturation mask.
inline MergeResult merge_exposures(const ExposureBracket& bracket,
                                   const MergeWeighting& weighting = {}) {
    bracket.validate();
    const int w = bracket.images.front().width;
    const int h = bracket.images.front().height;
    const size_t n = bracket.images.size();

    // Index of the longest and shortest exposure for fallback estimates.
    size_t longest = 0, shortest = 0;
    for (size_t i = 1; i < n; ++i) {
        if (bracket.shutter_speeds[i] > bracket.shutter_speeds[longest]) longest = i;
        if (bracket.shutter_speeds[i] < bracket.shutter_speeds[shortest]) shortest = i;
    }

    MergeResult out;
    out.hdr = RadianceImage(w, h);
    out.saturation = Mask(w, h, MaskLabel::generic);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            vec3 weight_sum(0.0), value_sum(0.0);
            // max_v decides, per channel, whether an all-clipped pixel was
            // bright (use shortest exposure) or dark (use longest).
            vec3 max_v(0.0);
            for (size_t i = 0; i < n; ++i) {
                const vec3 v = bracket.images[i].at(x, y);
                const vec3 lin = bracket.response_curve.linearize(v);
                const double dt = bracket.shutter_speeds[i];
                const double wr = weighting(v.x), wg = weighting(v.y), wb = weighting(v.z);
                value_sum += vec3(wr * lin.x / dt, wg * lin.y / dt, wb * lin.z / dt);
                weight_sum += vec3(wr, wg, wb);
                max_v.x = std::max(max_v.x, v.x);
                max_v.y = std::max(max_v.y, v.y);
                max_v.z = std::max(max_v.z, v.z);
            }

            vec3 merged;
            bool flagged = false;
            auto resolve = [&](double ws, double vs, double maxv, int channel) {
                if (ws > 0.0) return vs / ws;
                flagged = true;
                // All samples clipped. Bright pixels are best approximated by
                // the shortest exposure, dark ones by the longest.
                const size_t src = maxv > 0.5 ? shortest : longest;
                const vec3 lin = bracket.response_curve.linearize(bracket.images[src].at(x, y));
                const double c = channel == 0 ? lin.x : channel == 1 ? lin.y : lin.z;
                return c / bracket.shutter_speeds[src];
            };
            merged.x = resolve(weight_sum.x, value_sum.x, max_v.x, 0);
            merged.y = resolve(weight_sum.y, value_sum.y, max_v.y, 1);
            merged.z = resolve(weight_sum.z, value_sum.z, max_v.z, 2);

            out.hdr.at(x, y) = merged;
            if (flagged) {
                out.saturation.set(x, y);
                ++out.flagged_pixels;
            }
        }
    }
    out.hdr.calibration = Calibration::relative;
    return out;
}

struct CalibrationSource {
    size_t target_pixel_count = 0;
    double displayed_luminance = 0.0;  // mean over the target before scaling
    double measured_luminance = 0.0;   // meter reading, cd/m^2 (k1 only)
};

// k1: measured/displayed luminance ratio for one camera.
// k2: fixed cross-camera constant (white patch ratio between two rigs).
struct CalibrationFactor {
    double k1 = 1.0;
    double k2 = 1.0;
    CalibrationSource source;

    double combined() const { return k1 * k2; }
};

enum class TargetStatistic { mean, median };

inline double masked_luminance_statistic(const RadianceImage& hdr, const Mask& mask,
                                         TargetStatistic stat = TargetStatistic::mean) {
    if (!mask.grid.same_dims(hdr.pixels))
        throw std::invalid_argument("target mask dimensions do not match image");
    std::vector<double> values;
    double sum = 0.0;
    size_t count = 0;
    for (int y = 0; y < hdr.height(); ++y) {
        for (int x = 0; x < hdr.width(); ++x) {
            if (!mask.test(x, y)) continue;
            const double l = pixel_luminance(hdr.at(x, y));
            if (stat == TargetStatistic::median) values.push_back(l);
            sum += l;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("target mask selects no pixels");
    if (stat == TargetStatistic::median) {
        std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
        return values[values.size() / 2];
    }
    return sum / double(count);
}

// Calibration factor from a measured target: k1 = measured / displayed.
inline CalibrationFactor compute_k1(const RadianceImage& hdr, const Mask& target,
                                    double measured_luminance,
                                    TargetStatistic stat = TargetStatistic::mean) {
    const double displayed = masked_luminance_statistic(hdr, target, stat);
    if (!(displayed > 0.0))
        throw std::invalid_argument("degenerate target: displayed luminance is zero");
    if (!(measured_luminance > 0.0))
        throw std::invalid_argument("measured luminance must be positive");
    CalibrationFactor f;
    f.k1 = measured_luminance / displayed;
    f.source.target_pixel_count = target.count();
    f.source.displayed_luminance = displayed;
    f.source.measured_luminance = measured_luminance;
    return f;
}

// Cross-camera constant from a shared white patch: k2 = mean_a / mean_b.
// Applying k2 to camera b's image brings the two patches into agreement.
inline CalibrationFactor compute_k2(const RadianceImage& hdr_cam_a, const Mask& patch_a,
                                    const RadianceImage& hdr_cam_b, const Mask& patch_b) {
    const double mean_a = masked_luminance_statistic(hdr_cam_a, patch_a);
    const double mean_b = masked_luminance_statistic(hdr_cam_b, patch_b);
    if (!(mean_a > 0.0) || !(mean_b > 0.0))
        throw std::invalid_argument("degenerate patch: zero mean luminance");
    CalibrationFactor f;
    f.k2 = mean_a / mean_b;
    f.source.target_pixel_count = patch_a.count();
    f.source.displayed_luminance = mean_b;
    f.source.measured_luminance = mean_a;
    return f;
}

// Scale every channel by k and mark the image absolute. Composes
// multiplicatively: applying k then k' equals applying k*k'.
inline RadianceImage apply_calibration(const RadianceImage& hdr, double k) {
    if (!(k > 0.0)) throw std::invalid_argument("calibration factor must be positive");
    RadianceImage out = hdr;
    for (vec3& p : out.pixels.data) p *= k;
    out.calibration = Calibration::absolute;
    out.k_applied = hdr.k_applied * k;
    return out;
}

// Per-pixel luminance of a relative image (no calibration check).
inline ScalarImage luminance_map_relative(const RadianceImage& hdr) {
    ScalarImage out(hdr.width(), hdr.height());
    for (size_t i = 0; i < hdr.pixels.data.size(); ++i)
        out.data[i] = pixel_luminance(hdr.pixels.data[i]);
    return out;
}

// Per-pixel luminance in cd/m^2. Requires a calibrated image.
inline ScalarImage luminance_map(const RadianceImage& hdr) {
    if (!hdr.is_absolute())
        throw std::invalid_argument("luminance_map requires a calibrated image; run apply_calibration first");
    return luminance_map_relative(hdr);
}

// Log-scaled false color ramp (blue -> cyan -> green -> yellow -> red)
// between lo and hi cd/m^2, clamped at the ends.
inline LdrImage false_color(const ScalarImage& lum, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("false_color: lo must be < hi");
    if (!(lo > 0.0)) throw std::invalid_argument("false_color: lo must be positive for a log scale");
    const double log_lo = std::log(lo), log_hi = std::log(hi);

    auto ramp = [](double t) -> vec3 {
        // Piecewise-linear thermal ramp over [0,1].
        static const vec3 stops[5] = {
            {0.0, 0.0, 1.0}, {0.0, 1.0, 1.0}, {0.0, 1.0, 0.0}, {1.0, 1.0, 0.0}, {1.0, 0.0, 0.0}};
        const double pos = clamp(t, 0.0, 1.0) * 4.0;
        const int i = std::min(int(pos), 3);
        const double a = pos - i;
        return stops[i] * (1 - a) + stops[i + 1] * a;
    };

    LdrImage out(lum.width, lum.height);
    for (int y = 0; y < lum.height; ++y) {
        for (int x = 0; x < lum.width; ++x) {
            const double l = std::max(lum.at(x, y), 1e-30);
            const double t = (std::log(l) - log_lo) / (log_hi - log_lo);
            const vec3 c = ramp(t);
            uint8_t* px = out.pixel(x, y);
            px[0] = uint8_t(std::lround(clamp(c.x, 0.0, 1.0) * 255.0));
            px[1] = uint8_t(std::lround(clamp(c.y, 0.0, 1.0) * 255.0));
            px[2] = uint8_t(std::lround(clamp(c.z, 0.0, 1.0) * 255.0));
        }
    }
    return out;
}

}  // namespace panostage
