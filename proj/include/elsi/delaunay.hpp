#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "elsi/geometry.hpp"

namespace elsi {

namespace detail {

// True when d lies strictly inside the circumcircle of the CCW triangle
// (a, b, c). Evaluated in extended precision on point-relative coordinates;
// determinants below a relative noise floor count as outside, so exactly
// cocircular configurations (e.g. nodes sampled from one circle) resolve to
// some valid triangulation instead of an inconsistent cavity.
inline bool incircle_strict(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const long double adx = a.x - d.x, ady = a.y - d.y;
    const long double bdx = b.x - d.x, bdy = b.y - d.y;
    const long double cdx = c.x - d.x, cdy = c.y - d.y;
    const long double ad = adx * adx + ady * ady;
    const long double bd = bdx * bdx + bdy * bdy;
    const long double cd = cdx * cdx + cdy * cdy;
    const long double t1 = adx * (bdy * cd - bd * cdy);
    const long double t2 = ady * (bdx * cd - bd * cdx);
    const long double t3 = ad * (bdx * cdy - bdy * cdx);
    const long double det = t1 - t2 + t3;
    const long double mag = std::abs(t1) + std::abs(t2) + std::abs(t3);
    return det > 1e-15L * mag;
}

inline long double orient(Vec2 a, Vec2 b, Vec2 c) {
    return static_cast<long double>(b.x - a.x) * (c.y - a.y) -
           static_cast<long double>(b.y - a.y) * (c.x - a.x);
}

}  // namespace detail

/// Bowyer-Watson Delaunay triangulation. Returns CCW triangles over the
/// input points; the triangulated region is their convex hull.
inline std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& pts) {
    const int n = static_cast<int>(pts.size());
    if (n < 3) throw std::invalid_argument("delaunay_triangulate: need at least 3 points");

    double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
    for (const Vec2& p : pts) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);

    std::vector<Vec2> v(pts);
    v.push_back({cx - 40.0 * span, cy - 20.0 * span});
    v.push_back({cx + 40.0 * span, cy - 20.0 * span});
    v.push_back({cx, cy + 40.0 * span});

    struct Tri {
        int a, b, c;
        bool alive;
    };
    std::vector<Tri> tris;
    tris.push_back({n, n + 1, n + 2, true});

    std::vector<int> bad;
    std::map<std::pair<int, int>, int> edge_count;
    for (int ip = 0; ip < n; ++ip) {
        const Vec2 p = v[ip];
        bad.clear();
        for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
            if (!tris[t].alive) continue;
            if (detail::incircle_strict(v[tris[t].a], v[tris[t].b], v[tris[t].c], p))
                bad.push_back(t);
        }
        if (bad.empty())
            throw std::invalid_argument("delaunay_triangulate: duplicate or degenerate input point");

        // Cavity boundary: directed edges whose reverse is not in the cavity.
        edge_count.clear();
        auto add_edge = [&](int i, int j) { ++edge_count[{std::min(i, j), std::max(i, j)}]; };
        for (int t : bad) {
            add_edge(tris[t].a, tris[t].b);
            add_edge(tris[t].b, tris[t].c);
            add_edge(tris[t].c, tris[t].a);
            tris[t].alive = false;
        }
        for (int t : bad) {
            const Tri& tr = tris[t];
            const int e[3][2] = {{tr.a, tr.b}, {tr.b, tr.c}, {tr.c, tr.a}};
            for (const auto& ed : e) {
                if (edge_count[{std::min(ed[0], ed[1]), std::max(ed[0], ed[1])}] == 1)
                    tris.push_back({ed[0], ed[1], ip, true});
            }
        }

        // Periodic compaction keeps the full scan proportional to live triangles.
        if (tris.size() > 64 && tris.size() > 3 * static_cast<size_t>(2 * ip + 4)) {
            std::vector<Tri> live;
            live.reserve(2 * static_cast<size_t>(ip) + 8);
            for (const Tri& t : tris)
                if (t.alive) live.push_back(t);
            tris.swap(live);
        }
    }

    std::vector<std::array<int, 3>> out;
    out.reserve(2 * static_cast<size_t>(n));
    for (const Tri& t : tris) {
        if (!t.alive || t.a >= n || t.b >= n || t.c >= n) continue;
        std::array<int, 3> tri = {t.a, t.b, t.c};
        if (detail::orient(v[tri[0]], v[tri[1]], v[tri[2]]) < 0.0L) std::swap(tri[1], tri[2]);
        out.push_back(tri);
    }
    return out;
}

}  // namespace elsi
