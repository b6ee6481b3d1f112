#pragma once

#include <cmath>
#include <stdexcept>

namespace elsi {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

/// Rotated ellipse boundary: t -> R(theta) * (a cos t, b sin t).
struct Ellipse {
    double a = 1.0;
    double b = 1.0;
    double theta = 0.0;

    Ellipse() = default;
    Ellipse(double a_, double b_, double theta_) : a(a_), b(b_), theta(theta_) {
        if (a <= 0.0 || b <= 0.0)
            throw std::invalid_argument("Ellipse: semi-axes must be positive");
    }

    Vec2 boundary_point(double t) const {
        const double ct = std::cos(theta), st = std::sin(theta);
        const double px = a * std::cos(t), py = b * std::sin(t);
        return {px * ct - py * st, px * st + py * ct};
    }

    /// Map into the axis-aligned frame of the ellipse.
    Vec2 to_local(Vec2 p) const {
        const double ct = std::cos(theta), st = std::sin(theta);
        return {p.x * ct + p.y * st, -p.x * st + p.y * ct};
    }

    Vec2 from_local(Vec2 q) const {
        const double ct = std::cos(theta), st = std::sin(theta);
        return {q.x * ct - q.y * st, q.x * st + q.y * ct};
    }

    /// Level of (x/a)^2 + (y/b)^2; 1 on the boundary.
    double level(Vec2 p) const {
        const Vec2 q = to_local(p);
        const double u = q.x / a, v = q.y / b;
        return u * u + v * v;
    }

    bool contains(Vec2 p, double tol = 0.0) const {
        const Vec2 q = to_local(p);
        const double u = q.x / (a + tol), v = q.y / (b + tol);
        return u * u + v * v <= 1.0;
    }

    double area() const {
        return M_PI * a * b;
    }

    /// Closest point on the boundary, by Newton on the stationarity
    /// condition of |E(t) - p|^2 in the local frame.
    Vec2 project_to_boundary(Vec2 p) const {
        const Vec2 q = to_local(p);
        double t = std::atan2(a * q.y, b * q.x);
        for (int it = 0; it < 50; ++it) {
            const double c = std::cos(t), s = std::sin(t);
            const double ex = a * c - q.x, ey = b * s - q.y;
            const double g = -ex * a * s + ey * b * c;
            const double dg = ex * (-a * c) + a * a * s * s + ey * (-b * s) + b * b * c * c;
            if (std::abs(dg) < 1e-300) break;
            const double step = g / dg;
            t -= step;
            if (std::abs(step) < 1e-15) break;
        }
        return from_local({a * std::cos(t), b * std::sin(t)});
    }

    double distance_to_boundary(Vec2 p) const {
        return dist(p, project_to_boundary(p));
    }
};

}  // namespace elsi
