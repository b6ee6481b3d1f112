#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <sstream>

#include "elsi/mesh.hpp"

using namespace elsi;

namespace {

// Structural invariants: index ranges, orientation, boundary placement,
// interior edges shared by exactly two triangles, disc topology.
void check_mesh_invariants(const Mesh& mesh) {
    const int n = mesh.node_count();
    std::map<std::pair<int, int>, int> edge_use;
    for (const auto& t : mesh.elements) {
        REQUIRE(t[0] != t[1]);
        REQUIRE(t[1] != t[2]);
        REQUIRE(t[0] != t[2]);
        for (int v : t) {
            REQUIRE(v >= 0);
            REQUIRE(v < n);
        }
        for (int k = 0; k < 3; ++k) {
            const int i = t[k], j = t[(k + 1) % 3];
            ++edge_use[{std::min(i, j), std::max(i, j)}];
        }
    }
    for (int e = 0; e < mesh.element_count(); ++e) REQUIRE(mesh.element_area(e) > 0.0);

    std::set<int> used;
    for (const auto& t : mesh.elements) used.insert(t.begin(), t.end());
    REQUIRE(static_cast<int>(used.size()) == n);

    int boundary_edges = 0;
    for (const auto& [edge, count] : edge_use) {
        REQUIRE((count == 1 || count == 2));
        if (count == 1) {
            ++boundary_edges;
            REQUIRE(mesh.boundary_mask[edge.first] == 1);
            REQUIRE(mesh.boundary_mask[edge.second] == 1);
        }
    }
    // Euler characteristic of a disc.
    REQUIRE(n - static_cast<int>(edge_use.size()) + mesh.element_count() == 1);

    if (mesh.domain) {
        for (int i = 0; i < n; ++i)
            if (mesh.boundary_mask[i])
                REQUIRE(mesh.domain->distance_to_boundary(mesh.nodes[i]) < 1e-8);
    }
    REQUIRE(boundary_edges > 0);
}

}  // namespace

TEST_CASE("ellipse mesh construction", "[mesh]") {
    SECTION("rejects bad parameters") {
        REQUIRE_THROWS_AS(build_ellipse_mesh(-1.0, 0.75, 0.0, 0.05), std::invalid_argument);
        REQUIRE_THROWS_AS(build_ellipse_mesh(1.0, 0.0, 0.0, 0.05), std::invalid_argument);
        REQUIRE_THROWS_AS(build_ellipse_mesh(1.0, 0.75, 0.0, -0.1), std::invalid_argument);
    }

    SECTION("unit disk boundary nodes sit on the circle") {
        const Mesh mesh = build_ellipse_mesh(1.0, 1.0, 0.0, 0.25);
        check_mesh_invariants(mesh);
        for (int i = 0; i < mesh.node_count(); ++i)
            if (mesh.boundary_mask[i])
                REQUIRE(std::abs(norm(mesh.nodes[i]) - 1.0) < 1e-8);
    }

    SECTION("node count grows as the pitch shrinks") {
        const int n1 = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.20).node_count();
        const int n2 = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.12).node_count();
        const int n3 = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.07).node_count();
        REQUIRE(n1 < n2);
        REQUIRE(n2 < n3);
    }

    SECTION("total area approaches pi a b") {
        const Mesh mesh = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.05);
        check_mesh_invariants(mesh);
        const double exact = M_PI * 0.75;
        REQUIRE(std::abs(mesh.total_area() - exact) / exact < 0.01);
    }

    SECTION("node-count targeting lands near the request") {
        const Mesh mesh = build_ellipse_mesh_with_node_target(1.0, 0.75, M_PI / 6, 1200);
        REQUIRE(std::abs(mesh.node_count() - 1200) < 0.05 * 1200);
        check_mesh_invariants(mesh);
    }
}

TEST_CASE("uniform refinement", "[mesh]") {
    const Mesh mesh = build_ellipse_mesh(1.0, 1.0, 0.0, 0.35);
    const Mesh fine = refine(mesh);
    check_mesh_invariants(fine);

    SECTION("element count quadruples") {
        REQUIRE(fine.element_count() == 4 * mesh.element_count());
    }

    SECTION("area error against the disk shrinks") {
        const Mesh finer = refine(fine);
        const double e0 = std::abs(mesh.total_area() - M_PI);
        const double e1 = std::abs(fine.total_area() - M_PI);
        const double e2 = std::abs(finer.total_area() - M_PI);
        REQUIRE(e1 < e0);
        REQUIRE(e2 < e1);
    }

    SECTION("boundary mask survives refinement") {
        for (int i = 0; i < fine.node_count(); ++i)
            if (fine.boundary_mask[i])
                REQUIRE(std::abs(norm(fine.nodes[i]) - 1.0) < 1e-8);
    }
}

TEST_CASE("point location", "[mesh]") {
    const Mesh mesh = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.12);

    SECTION("vertex query returns an incident element with unit weight") {
        const int node = mesh.node_count() / 2;
        const auto loc = locate(mesh, mesh.nodes[node]);
        REQUIRE(loc.has_value());
        const auto& t = mesh.elements[loc->element];
        double w = 0.0;
        for (int k = 0; k < 3; ++k)
            if (t[k] == node) w = loc->bary[k];
        REQUIRE(w == Catch::Approx(1.0).margin(1e-12));
    }

    SECTION("centroid query recovers its element") {
        const int e = mesh.element_count() / 3;
        const auto& t = mesh.elements[e];
        const Vec2 c = (1.0 / 3.0) * (mesh.nodes[t[0]] + mesh.nodes[t[1]] + mesh.nodes[t[2]]);
        const auto loc = locate(mesh, c);
        REQUIRE(loc.has_value());
        REQUIRE(loc->element == e);
        for (double w : loc->bary) REQUIRE(w == Catch::Approx(1.0 / 3.0).margin(1e-10));
    }

    SECTION("far exterior point is not found") {
        REQUIRE_FALSE(locate(mesh, Vec2{10.0, 10.0}).has_value());
    }

    SECTION("grid locator agrees with the linear scan") {
        const GridLocator locator(mesh);
        RngStream rng(11);
        for (int k = 0; k < 200; ++k) {
            const Vec2 p{2.2 * (rng.uniform() - 0.5), 2.2 * (rng.uniform() - 0.5)};
            const auto a = locate(mesh, p);
            const auto b = locator(p);
            REQUIRE(a.has_value() == b.has_value());
            if (a) {
                const auto& ta = mesh.elements[a->element];
                const auto& tb = mesh.elements[b->element];
                // Elements can differ on shared edges; the reproduced point may not.
                Vec2 pa{0, 0}, pb{0, 0};
                for (int i = 0; i < 3; ++i) {
                    pa = pa + a->bary[i] * mesh.nodes[ta[i]];
                    pb = pb + b->bary[i] * mesh.nodes[tb[i]];
                }
                REQUIRE(dist(pa, pb) < 1e-9);
            }
        }
    }
}

TEST_CASE("piecewise linear interpolation", "[mesh]") {
    const Mesh mesh = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.1);
    std::vector<double> values(mesh.node_count());

    SECTION("reproduces affine functions exactly") {
        for (int i = 0; i < mesh.node_count(); ++i)
            values[i] = 2.0 * mesh.nodes[i].x + mesh.nodes[i].y;
        RngStream rng(3);
        for (int k = 0; k < 50; ++k) {
            Vec2 p{rng.uniform() - 0.5, rng.uniform() - 0.5};
            if (!mesh.domain->contains(p)) continue;
            const double v = interpolate(mesh, values, p);
            REQUIRE(v == Catch::Approx(2.0 * p.x + p.y).margin(1e-12));
        }
    }

    SECTION("hat function property at nodes") {
        const int m = mesh.node_count() / 4;
        std::fill(values.begin(), values.end(), 0.0);
        values[m] = 1.0;
        REQUIRE(interpolate(mesh, values, mesh.nodes[m]) == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(interpolate(mesh, values, mesh.nodes[(m + 7) % mesh.node_count()]) ==
                Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("zero field interpolates to zero, outside point throws") {
        std::fill(values.begin(), values.end(), 0.0);
        REQUIRE(interpolate(mesh, values, Vec2{0.1, 0.1}) == 0.0);
        REQUIRE_THROWS_AS(interpolate(mesh, values, Vec2{10.0, 10.0}), OutOfDomainError);
    }

    SECTION("interpolation at nodes returns nodal values") {
        RngStream rng(5);
        for (int i = 0; i < mesh.node_count(); ++i) values[i] = rng.normal();
        for (int i = 0; i < mesh.node_count(); i += 17)
            REQUIRE(interpolate(mesh, values, mesh.nodes[i]) ==
                    Catch::Approx(values[i]).margin(1e-10));
    }
}

TEST_CASE("mesh file round trip", "[mesh]") {
    const Mesh mesh = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.2);
    std::ostringstream first;
    write_mesh(first, mesh);

    std::istringstream in(first.str());
    const Mesh reread = read_mesh(in);
    std::ostringstream second;
    write_mesh(second, reread);

    REQUIRE(first.str() == second.str());
    REQUIRE(reread.node_count() == mesh.node_count());
    REQUIRE(reread.element_count() == mesh.element_count());
    for (int i = 0; i < mesh.node_count(); ++i) {
        REQUIRE(reread.nodes[i].x == mesh.nodes[i].x);
        REQUIRE(reread.nodes[i].y == mesh.nodes[i].y);
        REQUIRE(reread.boundary_mask[i] == mesh.boundary_mask[i]);
    }
}
