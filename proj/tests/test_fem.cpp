#include <catch2/catch_amalgamated.hpp>

#include "elsi/fem.hpp"
#include "elsi/rng.hpp"

using namespace elsi;

namespace {

Mesh unit_right_triangle() {
    Mesh mesh;
    mesh.nodes = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    mesh.elements = {{0, 1, 2}};
    mesh.boundary_mask = {1, 1, 1};
    return mesh;
}

}  // namespace

TEST_CASE("stiffness assembly", "[fem]") {
    const Mesh tri = unit_right_triangle();

    SECTION("unit coefficient local matrix") {
        const Eigen::MatrixXd K = Eigen::MatrixXd(assemble_stiffness(tri, 1.0));
        Eigen::MatrixXd expected(3, 3);
        expected << 2, -1, -1, -1, 1, 0, -1, 0, 1;
        expected *= 0.5;
        REQUIRE((K - expected).cwiseAbs().maxCoeff() < 1e-14);
    }

    SECTION("linearity in the coefficient") {
        const Eigen::MatrixXd K1 = Eigen::MatrixXd(assemble_stiffness(tri, 1.0));
        const Eigen::MatrixXd K2 = Eigen::MatrixXd(assemble_stiffness(tri, 2.0));
        REQUIRE((K2 - 2.0 * K1).cwiseAbs().maxCoeff() < 1e-14);
    }

    SECTION("rejects non-positive coefficient") {
        REQUIRE_THROWS_AS(assemble_stiffness(tri, [](Vec2) { return 0.0; }),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(assemble_stiffness(tri, [](Vec2) { return -3.0; }),
                          std::invalid_argument);
    }

    SECTION("row sums vanish on an unconstrained mesh") {
        const Mesh mesh = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.15);
        const SparseMat K =
            assemble_stiffness(mesh, [](Vec2 p) { return 1.5 + 0.5 * std::sin(p.x); });
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.node_count());
        REQUIRE((K * ones).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("mass assembly", "[fem]") {
    SECTION("unit right triangle local matrix") {
        const Eigen::MatrixXd M = Eigen::MatrixXd(assemble_mass(unit_right_triangle()));
        Eigen::MatrixXd expected(3, 3);
        expected << 2, 1, 1, 1, 2, 1, 1, 1, 2;
        expected /= 24.0;
        REQUIRE((M - expected).cwiseAbs().maxCoeff() < 1e-15);
    }

    SECTION("entries sum to the mesh area") {
        const Mesh mesh = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.12);
        const SparseMat M = assemble_mass(mesh);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.node_count());
        REQUIRE(ones.dot(M * ones) == Catch::Approx(mesh.total_area()).margin(1e-10));
    }

    SECTION("positive definiteness on random directions") {
        const Mesh mesh = build_ellipse_mesh(1.0, 1.0, 0.0, 0.25);
        const SparseMat M = assemble_mass(mesh);
        RngStream rng(17);
        for (int k = 0; k < 100; ++k) {
            Eigen::VectorXd v(mesh.node_count());
            for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
            REQUIRE(v.dot(M * v) > 0.0);
        }
    }
}

TEST_CASE("forward solve", "[fem]") {
    const Mesh mesh = build_ellipse_mesh(1.0, 1.0, 0.0, 0.08);
    const ForwardSolver solver(mesh, [](Vec2) { return 1.0; });

    SECTION("disk oracle for a constant source") {
        const Eigen::VectorXd f = Eigen::VectorXd::Ones(mesh.node_count());
        const Eigen::VectorXd u = solver.solve(f);
        double max_err = 0.0;
        for (int i = 0; i < mesh.node_count(); ++i) {
            const Vec2 p = mesh.nodes[i];
            const double exact = (p.x * p.x + p.y * p.y - 1.0) / 4.0;
            max_err = std::max(max_err, std::abs(u[i] - exact));
        }
        REQUIRE(max_err < 5e-3);
        REQUIRE(std::abs(interpolate(mesh, u, Vec2{0.0, 0.0}) + 0.25) < 2e-3);
    }

    SECTION("zero source gives the zero solution") {
        const Eigen::VectorXd u = solver.solve(Eigen::VectorXd::Zero(mesh.node_count()));
        REQUIRE(u.cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("solution operator is linear") {
        RngStream rng(23);
        Eigen::VectorXd f1(mesh.node_count()), f2(mesh.node_count());
        for (int i = 0; i < mesh.node_count(); ++i) {
            f1[i] = rng.normal();
            f2[i] = rng.normal();
        }
        const Eigen::VectorXd lhs = solver.solve(f1 + f2);
        const Eigen::VectorXd rhs = solver.solve(f1) + solver.solve(f2);
        REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
    }

    SECTION("boundary values are exactly zero") {
        const Eigen::VectorXd u = solver.solve(sample_on_nodes(mesh, [](Vec2 p) {
            return std::sin(3.0 * p.x) + p.y;
        }));
        for (int i = 0; i < mesh.node_count(); ++i)
            if (mesh.boundary_mask[i]) REQUIRE(u[i] == 0.0);
    }
}

TEST_CASE("discrete weak-form identity", "[fem]") {
    const Mesh mesh = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.15);
    const CoeffFn c = [](Vec2 p) { return 2.0 + std::sin(p.x) * std::sin(p.x); };
    const SparseMat K = assemble_stiffness(mesh, c);

    RngStream rng(29);
    Eigen::VectorXd u(mesh.node_count()), v(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) {
        u[i] = rng.normal();
        v[i] = rng.normal();
    }

    // Independent element-loop quadrature of the weak form.
    double integral = 0.0;
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& t = mesh.elements[e];
        const Vec2 p0 = mesh.nodes[t[0]], p1 = mesh.nodes[t[1]], p2 = mesh.nodes[t[2]];
        const double area = mesh.element_area(e);
        const Vec2 g0{(p1.y - p2.y) / (2 * area), (p2.x - p1.x) / (2 * area)};
        const Vec2 g1{(p2.y - p0.y) / (2 * area), (p0.x - p2.x) / (2 * area)};
        const Vec2 g2{(p0.y - p1.y) / (2 * area), (p1.x - p0.x) / (2 * area)};
        const Vec2 grad_u = u[t[0]] * g0 + u[t[1]] * g1 + u[t[2]] * g2;
        const Vec2 grad_v = v[t[0]] * g0 + v[t[1]] * g1 + v[t[2]] * g2;
        integral += c((1.0 / 3.0) * (p0 + p1 + p2)) * area * dot(grad_u, grad_v);
    }
    REQUIRE(v.dot(K * u) == Catch::Approx(integral).margin(1e-10));
}

TEST_CASE("forward matrix", "[fem]") {
    const Mesh mesh = build_ellipse_mesh(1.0, 0.75, M_PI / 6, 0.2);
    const ForwardSolver solver(mesh, [](Vec2) { return 1.0; });
    const ForwardSolver solver2(mesh, [](Vec2) { return 2.0; });

    SECTION("zero basis member gives a zero column") {
        Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(mesh.node_count(), 2);
        basis.col(1) = Eigen::VectorXd::Ones(mesh.node_count());
        const Eigen::MatrixXd G = build_forward_matrix(solver, basis, mesh.nodes);
        REQUIRE(G.col(0).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(G.col(1).cwiseAbs().maxCoeff() > 0.0);
    }

    SECTION("doubling the coefficient halves every column") {
        RngStream rng(31);
        Eigen::MatrixXd basis(mesh.node_count(), 3);
        for (int i = 0; i < basis.size(); ++i) basis(i / 3, i % 3) = rng.normal();
        const Eigen::MatrixXd G1 = build_forward_matrix(solver, basis, mesh.nodes);
        const Eigen::MatrixXd G2 = build_forward_matrix(solver2, basis, mesh.nodes);
        REQUIRE((G1 - 2.0 * G2).cwiseAbs().maxCoeff() < 1e-9);
    }

    SECTION("with all-node observations, M G is symmetric") {
        Eigen::SparseMatrix<double> identity(mesh.node_count(), mesh.node_count());
        identity.setIdentity();
        const Eigen::MatrixXd G = build_forward_matrix(solver, identity, mesh.nodes);
        const Eigen::MatrixXd MG = Eigen::MatrixXd(solver.mass()) * G;
        REQUIRE((MG - MG.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    }

    SECTION("observation point outside the domain is rejected") {
        const Eigen::MatrixXd basis = Eigen::MatrixXd::Ones(mesh.node_count(), 1);
        REQUIRE_THROWS_AS(build_forward_matrix(solver, basis, std::vector<Vec2>{{5.0, 5.0}}),
                          OutOfDomainError);
    }
}

TEST_CASE("solution convergence order on the disk", "[fem]") {
    Mesh mesh = build_ellipse_mesh(1.0, 1.0, 0.0, 0.3);
    std::vector<double> log_h, log_err;
    for (int level = 0; level < 3; ++level) {
        const ForwardSolver solver(mesh, [](Vec2) { return 1.0; });
        const Eigen::VectorXd u = solver.solve(Eigen::VectorXd::Ones(mesh.node_count()));
        double max_err = 0.0;
        for (int i = 0; i < mesh.node_count(); ++i) {
            const Vec2 p = mesh.nodes[i];
            max_err = std::max(max_err, std::abs(u[i] - (p.x * p.x + p.y * p.y - 1.0) / 4.0));
        }
        log_h.push_back(std::log(std::sqrt(M_PI / mesh.element_count())));
        log_err.push_back(std::log(max_err));
        mesh = refine(mesh);
    }
    const double order = (log_err[2] - log_err[0]) / (log_h[2] - log_h[0]);
    REQUIRE(order > 1.5);
    REQUIRE(order < 2.6);
}
