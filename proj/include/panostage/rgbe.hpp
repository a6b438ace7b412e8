#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "panostage/image.hpp"

namespace panostage {

// Radiance RGBE (.hdr) reader/writer. Scanlines use the new RLE encoding for
// widths in [8, 32768), raw RGBE quadruples otherwise. The calibration factor
// travels in an EXPOSURE= header line: pixels are stored as-is and EXPOSURE
// records the accumulated k, so files written here round-trip exactly.

namespace rgbe_detail {

inline std::array<uint8_t, 4> encode(const vec3& v) {
    // Negative values (e.g. solver ringing at 1e-9 scale) clamp to zero.
    const vec3 c{std::max(v.x, 0.0), std::max(v.y, 0.0), std::max(v.z, 0.0)};
    const double maxc = std::max(c.x, std::max(c.y, c.z));
    if (maxc < 1e-32) return {0, 0, 0, 0};
    int e = 0;
    const double m = std::frexp(maxc, &e);
    const double scale = m * 256.0 / maxc;
    return {uint8_t(c.x * scale), uint8_t(c.y * scale), uint8_t(c.z * scale), uint8_t(e + 128)};
}

inline vec3 decode(uint8_t r, uint8_t g, uint8_t b, uint8_t e) {
    if (e == 0) return {0, 0, 0};
    const double f = std::ldexp(1.0, int(e) - (128 + 8));
    return {r * f, g * f, b * f};
}

inline void write_rle_component(std::ostream& os, const std::vector<uint8_t>& line) {
    const int n = int(line.size());
    int i = 0;
    while (i < n) {
        // Find a run of >= 4 identical bytes.
        int run_start = i;
        int run_len = 0;
        while (run_start < n) {
            run_len = 1;
            while (run_len < 127 && run_start + run_len < n &&
                   line[run_start + run_len] == line[run_start])
                ++run_len;
            if (run_len >= 4) break;
            run_start += run_len;
        }
        if (run_start >= n) run_len = 0;

        // Emit literals up to the run (chunks of <= 128).
        int lit = (run_len >= 4 ? run_start : n) - i;
        while (lit > 0) {
            const int chunk = std::min(lit, 128);
            os.put(char(chunk));
            os.write(reinterpret_cast<const char*>(&line[i]), chunk);
            i += chunk;
            lit -= chunk;
        }
        if (run_len >= 4) {
            os.put(char(128 + run_len));
            os.put(char(line[run_start]));
            i = run_start + run_len;
        }
    }
}

inline void read_rle_component(std::istream& is, std::vector<uint8_t>& line) {
    size_t i = 0;
    while (i < line.size()) {
        const int code = is.get();
        if (code == EOF) throw std::runtime_error("rgbe: truncated scanline");
        if (code > 128) {
            const int count = code - 128;
            const int value = is.get();
            if (value == EOF || i + count > line.size())
                throw std::runtime_error("rgbe: bad RLE run");
            std::memset(&line[i], value, count);
            i += count;
        } else {
            if (code == 0 || i + code > line.size())
                throw std::runtime_error("rgbe: bad literal run");
            is.read(reinterpret_cast<char*>(&line[i]), code);
            if (!is) throw std::runtime_error("rgbe: truncated literal run");
            i += code;
        }
    }
}

}  // namespace rgbe_detail

inline void write_hdr(const std::string& path, const RadianceImage& img) {
    if (img.width() <= 0 || img.height() <= 0)
        throw std::invalid_argument("write_hdr: empty image");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_hdr: cannot open " + path);

    os << "#?RADIANCE\n";
    os << "FORMAT=32-bit_rle_rgbe\n";
    if (img.is_absolute()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "EXPOSURE=%.17g\n", img.k_applied);
        os << buf;
    }
    os << "\n";
    os << "-Y " << img.height() << " +X " << img.width() << "\n";

    const int w = img.width();
    const bool rle = w >= 8 && w < 32768;
    std::vector<uint8_t> comp(static_cast<size_t>(w));
    for (int y = 0; y < img.height(); ++y) {
        std::vector<std::array<uint8_t, 4>> row(static_cast<size_t>(w));
        for (int x = 0; x < w; ++x) row[x] = rgbe_detail::encode(img.at(x, y));
        if (rle) {
            const uint8_t header[4] = {2, 2, uint8_t(w >> 8), uint8_t(w & 0xff)};
            os.write(reinterpret_cast<const char*>(header), 4);
            for (int c = 0; c < 4; ++c) {
                for (int x = 0; x < w; ++x) comp[x] = row[x][c];
                rgbe_detail::write_rle_component(os, comp);
            }
        } else {
            for (int x = 0; x < w; ++x)
                os.write(reinterpret_cast<const char*>(row[x].data()), 4);
        }
    }
    if (!os) throw std::runtime_error("write_hdr: write failed for " + path);
}

inline RadianceImage read_hdr(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_hdr: cannot open " + path);

    std::string line;
    if (!std::getline(is, line) || line.rfind("#?", 0) != 0)
        throw std::runtime_error("read_hdr: missing #?RADIANCE magic in " + path);

    double exposure = 0.0;
    bool has_exposure = false;
    while (std::getline(is, line)) {
        if (line.empty()) break;
        if (line.rfind("EXPOSURE=", 0) == 0) {
            // Radiance semantics allow multiple EXPOSURE lines that multiply.
            const double e = std::stod(line.substr(9));
            exposure = has_exposure ? exposure * e : e;
            has_exposure = true;
        } else if (line.rfind("FORMAT=", 0) == 0) {
            if (line != "FORMAT=32-bit_rle_rgbe")
                throw std::runtime_error("read_hdr: unsupported pixel format '" + line.substr(7) +
                                         "' in " + path);
        }
    }
    if (!std::getline(is, line)) throw std::runtime_error("read_hdr: missing resolution line");
    int w = 0, h = 0;
    if (std::sscanf(line.c_str(), "-Y %d +X %d", &h, &w) != 2 || w <= 0 || h <= 0)
        throw std::runtime_error("read_hdr: unsupported resolution line '" + line + "'");

    RadianceImage img(w, h);
    std::vector<uint8_t> comp[4];
    for (auto& c : comp) c.resize(size_t(w));

    for (int y = 0; y < h; ++y) {
        uint8_t head[4];
        is.read(reinterpret_cast<char*>(head), 4);
        if (!is) throw std::runtime_error("read_hdr: truncated file");
        const bool new_rle = head[0] == 2 && head[1] == 2 && ((head[2] << 8) | head[3]) == w &&
                             w >= 8 && w < 32768;
        if (new_rle) {
            for (auto& c : comp) rgbe_detail::read_rle_component(is, c);
            for (int x = 0; x < w; ++x)
                img.at(x, y) = rgbe_detail::decode(comp[0][x], comp[1][x], comp[2][x], comp[3][x]);
        } else {
            // Flat scanline; the first quadruple was already consumed.
            img.at(0, y) = rgbe_detail::decode(head[0], head[1], head[2], head[3]);
            for (int x = 1; x < w; ++x) {
                uint8_t q[4];
                is.read(reinterpret_cast<char*>(q), 4);
                if (!is) throw std::runtime_error("read_hdr: truncated file");
                img.at(x, y) = rgbe_detail::decode(q[0], q[1], q[2], q[3]);
            }
        }
    }

    if (has_exposure) {
        img.calibration = Calibration::absolute;
        img.k_applied = exposure;
    }
    if (w == 2 * h) img.projection = Projection::equirectangular;
    return img;
}

}  // namespace panostage
