#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "panostage/image.hpp"

namespace panostage {

struct DiffusionFillReport {
    int iterations = 0;
    double residual = 0.0;
    int unanchored_components = 0;  // filled with the known mean instead of solved
};

struct DiffusionFillResult {
    RadianceImage image;
    DiffusionFillReport report;
};

// Fill masked pixels by solving the discrete Laplace equation with Dirichlet
// data from unmasked neighbours. The wall-floor boundary mask partitions the
// stencil: edges between a boundary pixel and a non-boundary pixel are
// removed, so no fill leaks across the curve. Unmasked pixels pass through
// bit-identical.
inline DiffusionFillResult diffusion_fill(const RadianceImage& img, const Mask& mask,
                                          const Mask& boundary = {}, double tolerance = 1e-6,
                                          int max_iterations = 10000) {
    if (!mask.grid.same_dims(img.pixels))
        throw std::invalid_argument("diffusion_fill: mask dimensions do not match image");
    const bool has_boundary = !boundary.grid.empty();
    if (has_boundary && !boundary.grid.same_dims(img.pixels))
        throw std::invalid_argument("diffusion_fill: boundary dimensions do not match image");

    const int w = img.width(), h = img.height();
    size_t n_unknown = mask.count();
    if (n_unknown == img.pixels.pixel_count())
        throw std::invalid_argument("diffusion_fill: mask covers the whole image (no boundary data)");

    DiffusionFillResult res;
    res.image = img;
    if (n_unknown == 0) return res;

    auto boundary_class = [&](int x, int y) -> uint8_t {
        return has_boundary && boundary.test(x, y) ? 1 : 0;
    };

    // Index the unknowns.
    Image<int> index(w, h, -1);
    std::vector<std::pair<int, int>> coords;
    coords.reserve(n_unknown);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask.test(x, y)) {
                index.at(x, y) = int(coords.size());
                coords.push_back({x, y});
            }

    static constexpr int dx4[4] = {1, -1, 0, 0};
    static constexpr int dy4[4] = {0, 0, 1, -1};

    // Assemble the graph Laplacian rows: diag = allowed degree, off-diagonal
    // -1 toward unknown neighbours, Dirichlet values accumulate into b.
    const size_t n = coords.size();
    std::vector<double> diag(n, 0.0);
    std::vector<std::array<int, 4>> nbr(n, {-1, -1, -1, -1});
    std::vector<vec3> b(n, vec3(0.0));
    for (size_t i = 0; i < n; ++i) {
        auto [x, y] = coords[i];
        const uint8_t cls = boundary_class(x, y);
        for (int k = 0; k < 4; ++k) {
            const int nx = x + dx4[k], ny = y + dy4[k];
            if (!index.in_bounds(nx, ny)) continue;
            if (boundary_class(nx, ny) != cls) continue;  // wall between classes
            diag[i] += 1.0;
            if (index.at(nx, ny) >= 0)
                nbr[i][k] = index.at(nx, ny);
            else
                b[i] += img.at(nx, ny);
        }
    }

    // Flood the unknown graph to find components without any Dirichlet edge;
    // those are filled with the mean of the known pixels and excluded from
    // the solve (their rows would make the system singular).
    std::vector<uint8_t> excluded(n, 0);
    {
        std::vector<int> comp(n, -1);
        int ncomp = 0;
        std::vector<int> stack;
        std::vector<uint8_t> anchored;
        for (size_t i = 0; i < n; ++i) {
            if (comp[i] >= 0) continue;
            const int c = ncomp++;
            anchored.push_back(0);
            stack.push_back(int(i));
            comp[i] = c;
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                auto [x, y] = coords[p];
                const uint8_t cls = boundary_class(x, y);
                for (int k = 0; k < 4; ++k) {
                    const int nx = x + dx4[k], ny = y + dy4[k];
                    if (!index.in_bounds(nx, ny)) continue;
                    if (boundary_class(nx, ny) != cls) continue;
                    const int j = index.at(nx, ny);
                    if (j < 0)
                        anchored[c] = 1;
                    else if (comp[j] < 0) {
                        comp[j] = c;
                        stack.push_back(j);
                    }
                }
            }
        }
        vec3 known_mean(0.0);
        size_t known_count = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (!mask.test(x, y)) {
                    known_mean += img.at(x, y);
                    ++known_count;
                }
        if (known_count > 0) known_mean = known_mean / double(known_count);
        for (size_t i = 0; i < n; ++i) {
            if (!anchored[comp[i]]) {
                excluded[i] = 1;
                auto [x, y] = coords[i];
                res.image.at(x, y) = known_mean;
            }
        }
        for (uint8_t a : anchored)
            if (!a) ++res.report.unanchored_components;
    }

    auto apply_A = [&](const std::vector<double>& x_, std::vector<double>& out) {
        for (size_t i = 0; i < n; ++i) {
            if (excluded[i]) {
                out[i] = 0.0;
                continue;
            }
            double v = diag[i] * x_[i];
            for (int k = 0; k < 4; ++k) {
                const int j = nbr[i][k];
                if (j >= 0 && !excluded[j]) v -= x_[j];
            }
            out[i] = v;
        }
    };

    // Conjugate gradient, one channel at a time (same matrix, three RHS).
    std::vector<double> xsol(n), r(n), p(n), Ap(n), rhs(n);
    for (int ch = 0; ch < 3; ++ch) {
        auto channel = [ch](const vec3& v) { return ch == 0 ? v.x : ch == 1 ? v.y : v.z; };
        double bnorm = 0.0;
        for (size_t i = 0; i < n; ++i) {
            rhs[i] = excluded[i] ? 0.0 : channel(b[i]);
            xsol[i] = 0.0;
            bnorm += rhs[i] * rhs[i];
        }
        bnorm = std::sqrt(bnorm);
        const double target = tolerance * std::max(bnorm, 1e-300);

        r = rhs;
        p = r;
        double rs = 0.0;
        for (size_t i = 0; i < n; ++i) rs += r[i] * r[i];
        int it = 0;
        while (std::sqrt(rs) > target && it < max_iterations) {
            apply_A(p, Ap);
            double pAp = 0.0;
            for (size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
            if (pAp <= 0.0) break;
            const double alpha = rs / pAp;
            double rs_new = 0.0;
            for (size_t i = 0; i < n; ++i) {
                xsol[i] += alpha * p[i];
                r[i] -= alpha * Ap[i];
                rs_new += r[i] * r[i];
            }
            const double beta = rs_new / rs;
            for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
            rs = rs_new;
            ++it;
        }
        res.report.iterations = std::max(res.report.iterations, it);
        res.report.residual = std::max(res.report.residual, std::sqrt(rs));
        for (size_t i = 0; i < n; ++i) {
            if (excluded[i]) continue;
            auto [x, y] = coords[i];
            vec3& px = res.image.at(x, y);
            if (ch == 0) px.x = xsol[i];
            if (ch == 1) px.y = xsol[i];
            if (ch == 2) px.z = xsol[i];
        }
    }
    return res;
}

struct PeriodEstimate {
    int dx = 0, dy = 0;
    double confidence = 0.0;  // normalized autocorrelation peak in [-1, 1]
    bool found = false;
};

// Dominant repeat vector of the unmasked pixels of `region`, by brute-force
// normalized autocorrelation over the region's bounding box. Lags shorter
// than min_lag are ignored as trivial.
inline PeriodEstimate estimate_period(const RadianceImage& img, const Mask& mask,
                                      const Mask& region, int min_lag = 4, int max_lag = 0) {
    int x0 = img.width(), y0 = img.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (region.test(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    PeriodEstimate best;
    if (x1 < x0) return best;
    const int bw = x1 - x0 + 1, bh = y1 - y0 + 1;

    // Luminance of known region pixels, mean-subtracted.
    Image<double> val(bw, bh, 0.0);
    Image<uint8_t> known(bw, bh, 0);
    double mean = 0.0;
    size_t count = 0;
    for (int y = 0; y < bh; ++y)
        for (int x = 0; x < bw; ++x) {
            const int gx = x0 + x, gy = y0 + y;
            if (!region.test(gx, gy) || mask.test(gx, gy)) continue;
            const vec3& p = img.at(gx, gy);
            val.at(x, y) = 0.2127 * p.x + 0.7151 * p.y + 0.0722 * p.z;
            known.at(x, y) = 1;
            mean += val.at(x, y);
            ++count;
        }
    if (count < 16) return best;
    mean /= double(count);
    double var = 0.0;
    for (int y = 0; y < bh; ++y)
        for (int x = 0; x < bw; ++x)
            if (known.at(x, y)) {
                val.at(x, y) -= mean;
                var += val.at(x, y) * val.at(x, y);
            }
    var /= double(count);
    if (!(var > 0.0)) return best;

    const int lag_x = max_lag > 0 ? std::min(max_lag, bw - 1) : bw / 2;
    const int lag_y = max_lag > 0 ? std::min(max_lag, bh - 1) : bh / 2;
    const size_t min_pairs = std::max<size_t>(32, count / 8);

    // Among near-maximal peaks prefer the shortest lag: an exact period p is
    // also correlated at every multiple of p, and the fundamental fills best.
    const double tie_band = 1e-3;
    for (int dy = 0; dy <= lag_y; ++dy) {
        for (int dx = -lag_x; dx <= lag_x; ++dx) {
            if (dy == 0 && dx <= 0) continue;  // half-plane; (d) ~ (-d)
            if (dx * dx + dy * dy < min_lag * min_lag) continue;
            // Masked normalized cross-correlation with per-lag statistics, so
            // an exact period scores 1 regardless of how the hole clips pairs.
            double s1 = 0, s2 = 0, q1 = 0, q2 = 0, sp = 0;
            size_t pairs = 0;
            const int ys = std::max(0, -dy), ye = std::min(bh, bh - dy);
            const int xs = std::max(0, -dx), xe = std::min(bw, bw - dx);
            for (int y = ys; y < ye; ++y) {
                const double* row = &val.at(0, y);
                const double* row2 = &val.at(0, y + dy);
                const uint8_t* k1 = &known.at(0, y);
                const uint8_t* k2 = &known.at(0, y + dy);
                for (int x = xs; x < xe; ++x) {
                    if (!k1[x] || !k2[x + dx]) continue;
                    const double a = row[x], b2 = row2[x + dx];
                    s1 += a;
                    s2 += b2;
                    q1 += a * a;
                    q2 += b2 * b2;
                    sp += a * b2;
                    ++pairs;
                }
            }
            if (pairs < min_pairs) continue;
            const double n2 = double(pairs);
            const double cov = sp / n2 - (s1 / n2) * (s2 / n2);
            const double v1 = q1 / n2 - (s1 / n2) * (s1 / n2);
            const double v2 = q2 / n2 - (s2 / n2) * (s2 / n2);
            if (v1 < 1e-12 * var || v2 < 1e-12 * var) continue;
            const double rho = cov / std::sqrt(v1 * v2);
            const long mag = long(dx) * dx + long(dy) * dy;
            const long best_mag = long(best.dx) * best.dx + long(best.dy) * best.dy;
            const bool better = rho > best.confidence + tie_band ||
                                (rho > best.confidence - tie_band && best.found && mag < best_mag);
            if (!best.found ? rho > best.confidence : better) {
                best.confidence = std::max(best.confidence, rho);
                best.dx = dx;
                best.dy = dy;
                best.found = true;
            }
        }
    }
    return best;
}

struct PeriodicFillReport {
    PeriodEstimate period;
    bool used_fallback = false;       // no confident period: diffusion fill instead
    size_t diffused_pixels = 0;       // pixels with no periodic source
};

struct PeriodicFillResult {
    RadianceImage image;
    PeriodicFillReport report;
};

inline constexpr double periodic_confidence_threshold = 0.35;

// Fill the masked pixels of a near-periodic region by tiling along the
// estimated repeat vector; the two nearest valid sources in each direction
// blend with inverse-distance weights, which hides tile seams. Pixels with no
// periodic source, or the whole mask when no period is confident, fall back
// to diffusion_fill. Deterministic for a fixed seed (the seed only feeds the
// fallback path, which is itself deterministic).
inline PeriodicFillResult periodic_fill(const RadianceImage& img, const Mask& mask,
                                        const Mask& region, uint64_t seed = 0) {
    (void)seed;
    if (!mask.grid.same_dims(img.pixels) || !region.grid.same_dims(img.pixels))
        throw std::invalid_argument("periodic_fill: mask/region dimensions do not match image");
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (mask.test(x, y) && !region.test(x, y))
                throw std::invalid_argument("periodic_fill: mask must lie inside the region");

    PeriodicFillResult res;
    res.report.period = estimate_period(img, mask, region);

    if (!res.report.period.found ||
        res.report.period.confidence < periodic_confidence_threshold) {
        auto diff = diffusion_fill(img, mask);
        res.image = std::move(diff.image);
        res.report.used_fallback = true;
        return res;
    }

    res.image = img;
    const int pdx = res.report.period.dx, pdy = res.report.period.dy;
    Mask remaining(img.width(), img.height());
    size_t n_remaining = 0;

    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (!mask.test(x, y)) continue;
            // Nearest valid source along +period and -period.
            vec3 acc(0.0);
            double wsum = 0.0;
            for (int dir : {+1, -1}) {
                for (int k = 1; k < 64; ++k) {
                    const int sx = x + dir * k * pdx;
                    const int sy = y + dir * k * pdy;
                    if (!img.pixels.in_bounds(sx, sy)) break;
                    if (!region.test(sx, sy)) break;
                    if (mask.test(sx, sy)) continue;
                    const double wgt = 1.0 / double(k);
                    acc += img.at(sx, sy) * wgt;
                    wsum += wgt;
                    break;
                }
            }
            if (wsum > 0.0) {
                res.image.at(x, y) = acc / wsum;
            } else {
                remaining.set(x, y);
                ++n_remaining;
            }
        }
    }

    if (n_remaining > 0) {
        auto diff = diffusion_fill(res.image, remaining);
        res.image = std::move(diff.image);
        res.report.diffused_pixels = n_remaining;
    }
    return res;
}

}  // namespace panostage
