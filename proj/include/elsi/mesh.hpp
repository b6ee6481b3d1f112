#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "elsi/delaunay.hpp"
#include "elsi/errors.hpp"
#include "elsi/geometry.hpp"
#include "elsi/rng.hpp"

namespace elsi {

/// Triangulated planar domain. Nodes are stored boundary-first (in boundary
/// curve order), then interior points row by row; elements are CCW triples.
/// Immutable after construction.
struct Mesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> elements;
    std::vector<std::uint8_t> boundary_mask;
    std::optional<Ellipse> domain;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int element_count() const { return static_cast<int>(elements.size()); }

    double element_area(int e) const {
        const auto& t = elements[e];
        return 0.5 * cross(nodes[t[1]] - nodes[t[0]], nodes[t[2]] - nodes[t[0]]);
    }

    double total_area() const {
        double s = 0.0;
        for (int e = 0; e < element_count(); ++e) s += element_area(e);
        return s;
    }

    int interior_count() const {
        int k = 0;
        for (auto f : boundary_mask) k += (f == 0);
        return k;
    }
};

struct Located {
    int element = -1;
    std::array<double, 3> bary = {0.0, 0.0, 0.0};
};

namespace detail {

inline std::optional<std::array<double, 3>> barycentric(const Mesh& mesh, int e, Vec2 p,
                                                        double tol = 1e-9) {
    const auto& t = mesh.elements[e];
    const Vec2 p0 = mesh.nodes[t[0]], p1 = mesh.nodes[t[1]], p2 = mesh.nodes[t[2]];
    const double denom = cross(p1 - p0, p2 - p0);
    if (denom <= 0.0) return std::nullopt;
    double w0 = cross(p1 - p, p2 - p) / denom;
    double w1 = cross(p2 - p, p0 - p) / denom;
    double w2 = cross(p0 - p, p1 - p) / denom;
    if (w0 < -tol || w1 < -tol || w2 < -tol) return std::nullopt;
    w0 = std::max(w0, 0.0);
    w1 = std::max(w1, 0.0);
    w2 = std::max(w2, 0.0);
    const double s = w0 + w1 + w2;
    return std::array<double, 3>{w0 / s, w1 / s, w2 / s};
}

}  // namespace detail

inline std::optional<Located> locate(const Mesh& mesh, Vec2 p) {
    for (int e = 0; e < mesh.element_count(); ++e)
        if (auto w = detail::barycentric(mesh, e, p)) return Located{e, *w};
    return std::nullopt;
}

/// Uniform-grid acceleration for repeated point location.
class GridLocator {
public:
    explicit GridLocator(const Mesh& mesh) : mesh_(&mesh) {
        xmin_ = ymin_ = 1e300;
        double xmax = -1e300, ymax = -1e300;
        for (const Vec2& p : mesh.nodes) {
            xmin_ = std::min(xmin_, p.x);
            ymin_ = std::min(ymin_, p.y);
            xmax = std::max(xmax, p.x);
            ymax = std::max(ymax, p.y);
        }
        const double area = std::max(mesh.total_area(), 1e-300);
        cell_ = 2.0 * std::sqrt(area / std::max(mesh.element_count(), 1));
        nx_ = std::max(1, static_cast<int>((xmax - xmin_) / cell_) + 1);
        ny_ = std::max(1, static_cast<int>((ymax - ymin_) / cell_) + 1);
        cells_.resize(static_cast<size_t>(nx_) * ny_);
        for (int e = 0; e < mesh.element_count(); ++e) {
            const auto& t = mesh.elements[e];
            double exmin = 1e300, exmax = -1e300, eymin = 1e300, eymax = -1e300;
            for (int k = 0; k < 3; ++k) {
                const Vec2& p = mesh.nodes[t[k]];
                exmin = std::min(exmin, p.x);
                exmax = std::max(exmax, p.x);
                eymin = std::min(eymin, p.y);
                eymax = std::max(eymax, p.y);
            }
            for (int i = clamp_x(exmin); i <= clamp_x(exmax); ++i)
                for (int j = clamp_y(eymin); j <= clamp_y(eymax); ++j)
                    cells_[static_cast<size_t>(j) * nx_ + i].push_back(e);
        }
    }

    std::optional<Located> operator()(Vec2 p) const {
        const int i = static_cast<int>((p.x - xmin_) / cell_);
        const int j = static_cast<int>((p.y - ymin_) / cell_);
        if (i < 0 || i >= nx_ || j < 0 || j >= ny_) return std::nullopt;
        for (int e : cells_[static_cast<size_t>(j) * nx_ + i])
            if (auto w = detail::barycentric(*mesh_, e, p)) return Located{e, *w};
        return std::nullopt;
    }

private:
    int clamp_x(double x) const { return std::clamp(static_cast<int>((x - xmin_) / cell_), 0, nx_ - 1); }
    int clamp_y(double y) const { return std::clamp(static_cast<int>((y - ymin_) / cell_), 0, ny_ - 1); }

    const Mesh* mesh_;
    double xmin_, ymin_, cell_;
    int nx_, ny_;
    std::vector<std::vector<int>> cells_;
};

inline double interpolate(const Mesh& mesh, std::span<const double> nodal_values, Vec2 p) {
    if (static_cast<int>(nodal_values.size()) != mesh.node_count())
        throw std::invalid_argument("interpolate: nodal value count does not match mesh");
    const auto loc = locate(mesh, p);
    if (!loc) throw OutOfDomainError("interpolate: point outside mesh");
    const auto& t = mesh.elements[loc->element];
    return loc->bary[0] * nodal_values[t[0]] + loc->bary[1] * nodal_values[t[1]] +
           loc->bary[2] * nodal_values[t[2]];
}

namespace detail {

// Arc-length parameterization of the ellipse boundary, inverted on a dense
// parameter table.
inline std::vector<double> equal_arc_parameters(const Ellipse& ell, int count) {
    constexpr int kSamples = 8192;
    std::vector<double> cum(kSamples + 1, 0.0);
    Vec2 prev = ell.boundary_point(0.0);
    for (int i = 1; i <= kSamples; ++i) {
        const Vec2 p = ell.boundary_point(2.0 * M_PI * i / kSamples);
        cum[i] = cum[i - 1] + dist(prev, p);
        prev = p;
    }
    const double total = cum[kSamples];
    std::vector<double> ts(count);
    int seg = 0;
    for (int k = 0; k < count; ++k) {
        const double target = total * k / count;
        while (seg < kSamples && cum[seg + 1] < target) ++seg;
        const double frac = (target - cum[seg]) / std::max(cum[seg + 1] - cum[seg], 1e-300);
        ts[k] = 2.0 * M_PI * (seg + frac) / kSamples;
    }
    return ts;
}

}  // namespace detail

/// Triangulates the closed ellipse interior: boundary nodes sampled at arc
/// spacing h_target, interior nodes on a jittered grid of the same pitch,
/// then Delaunay. The jitter stream is fixed, so the mesh is a deterministic
/// function of (a, b, theta, h_target).
inline Mesh build_ellipse_mesh(double a, double b, double theta, double h_target) {
    if (a <= 0.0 || b <= 0.0 || h_target <= 0.0)
        throw std::invalid_argument("build_ellipse_mesh: geometry parameters must be positive");
    const Ellipse ell(a, b, theta);

    Mesh mesh;
    mesh.domain = ell;

    // Boundary ring.
    double perimeter = 0.0;
    {
        Vec2 prev = ell.boundary_point(0.0);
        for (int i = 1; i <= 1024; ++i) {
            const Vec2 p = ell.boundary_point(2.0 * M_PI * i / 1024);
            perimeter += dist(prev, p);
            prev = p;
        }
    }
    const int nb = std::max(12, static_cast<int>(std::lround(perimeter / h_target)));
    RngStream jitter(0x9d2c5680u);
    for (double t : detail::equal_arc_parameters(ell, nb)) {
        // A small parameter jitter keeps the nodes exactly on the curve but
        // breaks the exact cocircularity a symmetric sampling produces
        // (fatal for incircle tests on the a = b case).
        const double dt = (jitter.uniform() - 0.5) * 0.2 * (2.0 * M_PI / nb);
        mesh.nodes.push_back(ell.boundary_point(t + dt));
        mesh.boundary_mask.push_back(1);
    }

    // Interior points, row-major over a jittered grid, kept clear of the ring.
    const double r = std::max(a, b);
    const double clearance = 0.55 * h_target;
    const int jmin = static_cast<int>(std::floor(-r / h_target)) - 1;
    const int jmax = static_cast<int>(std::ceil(r / h_target)) + 1;
    for (int j = jmin; j <= jmax; ++j) {
        for (int i = jmin; i <= jmax; ++i) {
            const double dx = 0.5 * h_target * (jitter.uniform() - 0.5);
            const double dy = 0.5 * h_target * (jitter.uniform() - 0.5);
            const Vec2 p{i * h_target + dx, j * h_target + dy};
            if (ell.level(p) >= 1.0) continue;
            if (ell.distance_to_boundary(p) < clearance) continue;
            mesh.nodes.push_back(p);
            mesh.boundary_mask.push_back(0);
        }
    }

    mesh.elements = delaunay_triangulate(mesh.nodes);
    return mesh;
}

/// Picks h for an approximate node-count target (one corrective rebuild).
inline Mesh build_ellipse_mesh_with_node_target(double a, double b, double theta,
                                                int target_nodes) {
    if (target_nodes < 16)
        throw std::invalid_argument("build_ellipse_mesh_with_node_target: target too small");
    double h = std::sqrt(M_PI * a * b / target_nodes);
    Mesh mesh = build_ellipse_mesh(a, b, theta, h);
    for (int pass = 0; pass < 3; ++pass) {
        const double ratio = static_cast<double>(mesh.node_count()) / target_nodes;
        if (std::abs(ratio - 1.0) < 0.02) break;
        h *= std::sqrt(ratio);
        mesh = build_ellipse_mesh(a, b, theta, h);
    }
    return mesh;
}

/// Uniform 4-way refinement; midpoints of boundary edges are projected back
/// onto the ellipse when the mesh carries its domain.
inline Mesh refine(const Mesh& mesh) {
    if (mesh.element_count() == 0) throw std::invalid_argument("refine: empty mesh");

    std::map<std::pair<int, int>, int> edge_use;
    auto key = [](int i, int j) { return std::make_pair(std::min(i, j), std::max(i, j)); };
    for (const auto& t : mesh.elements)
        for (int k = 0; k < 3; ++k) ++edge_use[key(t[k], t[(k + 1) % 3])];

    Mesh out;
    out.domain = mesh.domain;
    out.nodes = mesh.nodes;
    out.boundary_mask = mesh.boundary_mask;

    std::map<std::pair<int, int>, int> midpoint;
    auto midpoint_of = [&](int i, int j) {
        const auto k = key(i, j);
        auto it = midpoint.find(k);
        if (it != midpoint.end()) return it->second;
        Vec2 p = 0.5 * (mesh.nodes[i] + mesh.nodes[j]);
        const bool on_boundary = edge_use.at(k) == 1;
        if (on_boundary && mesh.domain) p = mesh.domain->project_to_boundary(p);
        const int idx = static_cast<int>(out.nodes.size());
        out.nodes.push_back(p);
        out.boundary_mask.push_back(on_boundary ? 1 : 0);
        midpoint.emplace(k, idx);
        return idx;
    };

    out.elements.reserve(4 * mesh.elements.size());
    for (const auto& t : mesh.elements) {
        const int ab = midpoint_of(t[0], t[1]);
        const int bc = midpoint_of(t[1], t[2]);
        const int ca = midpoint_of(t[2], t[0]);
        out.elements.push_back({t[0], ab, ca});
        out.elements.push_back({ab, t[1], bc});
        out.elements.push_back({ca, bc, t[2]});
        out.elements.push_back({ab, bc, ca});
    }
    return out;
}

inline void write_mesh(std::ostream& os, const Mesh& mesh) {
    os << "nodes " << mesh.node_count() << " elements " << mesh.element_count() << "\n";
    char buf[80];
    for (int i = 0; i < mesh.node_count(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %d\n", mesh.nodes[i].x, mesh.nodes[i].y,
                      static_cast<int>(mesh.boundary_mask[i]));
        os << buf;
    }
    for (const auto& t : mesh.elements) os << t[0] << " " << t[1] << " " << t[2] << "\n";
}

inline void write_mesh(const std::string& path, const Mesh& mesh) {
    std::ofstream os(path);
    if (!os) throw std::invalid_argument("write_mesh: cannot open " + path);
    write_mesh(os, mesh);
}

inline Mesh read_mesh(std::istream& is) {
    std::string word;
    int n = 0, e = 0;
    if (!(is >> word >> n) || word != "nodes" || !(is >> word >> e) || word != "elements")
        throw std::invalid_argument("read_mesh: malformed header");
    Mesh mesh;
    mesh.nodes.resize(n);
    mesh.boundary_mask.resize(n);
    for (int i = 0; i < n; ++i) {
        int flag = 0;
        if (!(is >> mesh.nodes[i].x >> mesh.nodes[i].y >> flag))
            throw std::invalid_argument("read_mesh: truncated node section");
        mesh.boundary_mask[i] = static_cast<std::uint8_t>(flag != 0);
    }
    mesh.elements.resize(e);
    for (int k = 0; k < e; ++k) {
        auto& t = mesh.elements[k];
        if (!(is >> t[0] >> t[1] >> t[2]))
            throw std::invalid_argument("read_mesh: truncated element section");
        for (int v : t)
            if (v < 0 || v >= n) throw std::invalid_argument("read_mesh: node index out of range");
    }
    return mesh;
}

inline Mesh read_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("read_mesh: cannot open " + path);
    return read_mesh(is);
}

}  // namespace elsi
