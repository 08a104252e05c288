#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace chantwin {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kEpsilon0 = 8.8541878128e-12;

// Right-handed, meters, z up.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalize(const Vec3& v) { return v / norm(v); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

inline Vec3 min(const Vec3& a, const Vec3& b) {
    return {std::fmin(a.x, b.x), std::fmin(a.y, b.y), std::fmin(a.z, b.z)};
}
inline Vec3 max(const Vec3& a, const Vec3& b) {
    return {std::fmax(a.x, b.x), std::fmax(a.y, b.y), std::fmax(a.z, b.z)};
}

/// Mirror `p` across the plane through `on_plane` with unit normal `n`.
inline Vec3 mirror_point(const Vec3& p, const Vec3& on_plane, const Vec3& n) {
    return p - n * (2.0 * dot(p - on_plane, n));
}

inline Vec3 reflect_direction(const Vec3& d, const Vec3& n) { return d - n * (2.0 * dot(d, n)); }

// Complex-valued field vector.
struct CVec3 {
    Complex x, y, z;

    CVec3 operator+(const CVec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    CVec3 operator-(const CVec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    CVec3 operator*(Complex s) const { return {x * s, y * s, z * s}; }
};

inline CVec3 to_complex(const Vec3& v) { return {v.x, v.y, v.z}; }
inline Complex dot(const CVec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline CVec3 scaled(const Vec3& v, Complex s) { return {v.x * s, v.y * s, v.z * s}; }

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    bool empty() const { return lo.x > hi.x; }
    void extend(const Vec3& p) { lo = min(lo, p); hi = max(hi, p); }
    void extend(const Aabb& b) { lo = min(lo, b.lo); hi = max(hi, b.hi); }
    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    bool contains(const Vec3& p, double tol = 0.0) const {
        return p.x >= lo.x - tol && p.y >= lo.y - tol && p.z >= lo.z - tol && p.x <= hi.x + tol &&
               p.y <= hi.y + tol && p.z <= hi.z + tol;
    }
    bool operator==(const Aabb&) const = default;
};

/// Azimuth (CCW from +x) and elevation (from horizontal), degrees.
struct Angles {
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
};

inline Angles direction_angles(const Vec3& d) {
    const double horiz = std::hypot(d.x, d.y);
    return {std::atan2(d.y, d.x) * 180.0 / kPi, std::atan2(d.z, horiz) * 180.0 / kPi};
}

inline Vec3 direction_from_angles(double azimuth_deg, double elevation_deg) {
    const double az = azimuth_deg * kPi / 180.0;
    const double el = elevation_deg * kPi / 180.0;
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

/// Spherical unit vectors (theta-hat, phi-hat) at direction `d`.
inline std::array<Vec3, 2> spherical_basis(const Vec3& d) {
    const double theta = std::acos(std::clamp(d.z, -1.0, 1.0));
    double phi = std::atan2(d.y, d.x);
    // At the poles the azimuth is undefined; pick phi = 0 consistently.
    if (std::hypot(d.x, d.y) < 1e-15) phi = 0.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cp = std::cos(phi), sp = std::sin(phi);
    return {Vec3{ct * cp, ct * sp, -st}, Vec3{-sp, cp, 0.0}};
}

}  // namespace chantwin
