#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace panostage {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr double half_pi = 0.5 * pi;

struct vec2 {
    double x = 0.0, y = 0.0;

    vec2() = default;
    vec2(double x_, double y_) : x(x_), y(y_) {}

    vec2 operator+(const vec2& o) const { return {x + o.x, y + o.y}; }
    vec2 operator-(const vec2& o) const { return {x - o.x, y - o.y}; }
    vec2 operator*(double s) const { return {x * s, y * s}; }
    vec2 operator/(double s) const { return {x / s, y / s}; }
    vec2& operator+=(const vec2& o) { x += o.x; y += o.y; return *this; }
};

inline double dot(const vec2& a, const vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const vec2& a, const vec2& b) { return a.x * b.y - a.y * b.x; }
inline double length(const vec2& v) { return std::sqrt(dot(v, v)); }
inline vec2 normalize(const vec2& v) { return v / length(v); }
// 90 degree counter-clockwise turn; left normal of a direction.
inline vec2 perp_ccw(const vec2& v) { return {-v.y, v.x}; }

struct vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    vec3() = default;
    vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}
    explicit vec3(double s) : x(s), y(s), z(s) {}

    vec3 operator+(const vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    vec3 operator-(const vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    vec3 operator*(const vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
    vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    vec3 operator-() const { return {-x, -y, -z}; }
    vec3& operator+=(const vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    bool operator==(const vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double max_component() const { return std::max(x, std::max(y, z)); }
};

inline vec3 operator*(double s, const vec3& v) { return v * s; }
inline double dot(const vec3& a, const vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline vec3 cross(const vec3& a, const vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length(const vec3& v) { return std::sqrt(dot(v, v)); }
inline vec3 normalize(const vec3& v) { return v / length(v); }

inline double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }
inline double radians(double deg) { return deg * pi / 180.0; }
inline double degrees(double rad) { return rad * 180.0 / pi; }

// Longitude/latitude on the unit sphere, z up. theta in [-pi, pi), phi in [-pi/2, pi/2].
inline vec3 direction_from_lonlat(double theta, double phi) {
    const double c = std::cos(phi);
    return {c * std::cos(theta), c * std::sin(theta), std::sin(phi)};
}

inline double longitude_of(const vec3& d) { return std::atan2(d.y, d.x); }
inline double latitude_of(const vec3& d) { return std::asin(clamp(d.z, -1.0, 1.0)); }

// Wrap an angle into [-pi, pi).
inline double wrap_angle(double a) {
    a = std::fmod(a + pi, two_pi);
    if (a < 0) a += two_pi;
    return a - pi;
}

// Counter-based RNG: stateless hash of (seed, index) streams, so parallel
// tiling cannot change the per-pixel sample sequence.
struct rng_state {
    uint64_t state = 0;

    static uint64_t split_mix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    rng_state() = default;
    rng_state(uint64_t seed, uint64_t stream) {
        state = split_mix(seed ^ split_mix(stream + 0x632be59bd9b4e019ull));
        if (state == 0) state = 0x853c49e6748fea9bull;
    }

    uint64_t next_u64() {
        state = split_mix(state);
        return state;
    }

    // Uniform in [0, 1).
    double next_double() {
        return double(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    int next_int(int n) { return int(next_u64() % uint64_t(n)); }
};

}  // namespace panostage
