#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace krv {

inline constexpr double pi = std::numbers::pi;
inline constexpr double inv_2pi = 1.0 / (2.0 * std::numbers::pi);

/// Planar vector.
struct Vec2 {
    double v1 = 0.0;
    double v2 = 0.0;

    constexpr Vec2 &operator+=(const Vec2 &o) { v1 += o.v1; v2 += o.v2; return *this; }
    constexpr Vec2 &operator-=(const Vec2 &o) { v1 -= o.v1; v2 -= o.v2; return *this; }
    constexpr Vec2 &operator*=(double s) { v1 *= s; v2 *= s; return *this; }
    friend constexpr Vec2 operator+(Vec2 a, const Vec2 &b) { return a += b; }
    friend constexpr Vec2 operator-(Vec2 a, const Vec2 &b) { return a -= b; }
    friend constexpr Vec2 operator-(const Vec2 &a) { return {-a.v1, -a.v2}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
    friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.v1 / s, a.v2 / s}; }
    friend constexpr bool operator==(const Vec2 &, const Vec2 &) = default;
};

/// Point of the plane, x = (x1, x2).
struct Point2 {
    double x1 = 0.0;
    double x2 = 0.0;

    constexpr Point2 &operator+=(const Vec2 &v) { x1 += v.v1; x2 += v.v2; return *this; }
    friend constexpr Point2 operator+(Point2 p, const Vec2 &v) { return p += v; }
    friend constexpr Point2 operator-(Point2 p, const Vec2 &v) { return {p.x1 - v.v1, p.x2 - v.v2}; }
    friend constexpr Vec2 operator-(const Point2 &a, const Point2 &b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
    friend constexpr bool operator==(const Point2 &, const Point2 &) = default;
};

constexpr double dot(const Vec2 &a, const Vec2 &b) { return a.v1 * b.v1 + a.v2 * b.v2; }
constexpr double norm2(const Vec2 &a) { return dot(a, a); }
inline double norm(const Vec2 &a) { return std::hypot(a.v1, a.v2); }
inline double distance(const Point2 &a, const Point2 &b) { return norm(a - b); }

/// Clockwise rotation through pi/2: perp(b) = (b2, -b1).
constexpr Vec2 perp(const Vec2 &b) { return {b.v2, -b.v1}; }

constexpr Vec2 as_vec(const Point2 &p) { return {p.x1, p.x2}; }
constexpr Point2 as_point(const Vec2 &v) { return {v.v1, v.v2}; }

inline bool is_finite(const Point2 &p) { return std::isfinite(p.x1) && std::isfinite(p.x2); }
inline bool is_finite(const Vec2 &v) { return std::isfinite(v.v1) && std::isfinite(v.v2); }

using Complex = std::complex<double>;

inline Complex to_complex(const Point2 &p) { return {p.x1, p.x2}; }
inline Complex to_complex(const Vec2 &v) { return {v.v1, v.v2}; }
inline Point2 to_point(const Complex &z) { return {z.real(), z.imag()}; }
inline Vec2 to_vec(const Complex &z) { return {z.real(), z.imag()}; }

/// Axis-aligned rectangle [lo.x1, hi.x1] x [lo.x2, hi.x2].
struct Box {
    Point2 lo;
    Point2 hi;

    double width() const { return hi.x1 - lo.x1; }
    double height() const { return hi.x2 - lo.x2; }
    bool contains(const Point2 &p) const {
        return p.x1 >= lo.x1 && p.x1 <= hi.x1 && p.x2 >= lo.x2 && p.x2 <= hi.x2;
    }
};

/// Distance from p to the segment [a, b].
inline double segment_distance(const Point2 &p, const Point2 &a, const Point2 &b) {
    const Vec2 ab = b - a;
    const double len2 = norm2(ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
}

/// Proper or touching intersection test for segments [a, b] and [c, d].
inline bool segments_intersect(const Point2 &a, const Point2 &b, const Point2 &c, const Point2 &d) {
    auto orient = [](const Point2 &p, const Point2 &q, const Point2 &r) {
        const double v = (q.x1 - p.x1) * (r.x2 - p.x2) - (q.x2 - p.x2) * (r.x1 - p.x1);
        return (v > 0.0) - (v < 0.0);
    };
    auto on_segment = [](const Point2 &p, const Point2 &q, const Point2 &r) {
        return std::min(p.x1, r.x1) <= q.x1 && q.x1 <= std::max(p.x1, r.x1) &&
               std::min(p.x2, r.x2) <= q.x2 && q.x2 <= std::max(p.x2, r.x2);
    };
    const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, c, b)) return true;
    if (o2 == 0 && on_segment(a, d, b)) return true;
    if (o3 == 0 && on_segment(c, a, d)) return true;
    if (o4 == 0 && on_segment(c, b, d)) return true;
    return false;
}

} // namespace krv
