#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <functional>
#include <string>
#include <vector>

#include "elsi/errors.hpp"
#include "elsi/mesh.hpp"

namespace elsi {

using SparseMat = Eigen::SparseMatrix<double>;
using CoeffFn = std::function<double(Vec2)>;

enum class BasisTag { fem_nodal, laplacian_eigen };

struct EigenBasis;

/// A function on the domain: coefficients against either the nodal hat
/// basis of a mesh or a computed eigenbasis.
struct Field {
    BasisTag basis = BasisTag::fem_nodal;
    Eigen::VectorXd coeffs;
    const Mesh* mesh = nullptr;
    const EigenBasis* eigen = nullptr;
};

inline Field nodal_field(const Mesh& mesh, Eigen::VectorXd coeffs) {
    if (coeffs.size() != mesh.node_count())
        throw std::invalid_argument("nodal_field: coefficient length does not match mesh");
    return Field{BasisTag::fem_nodal, std::move(coeffs), &mesh, nullptr};
}

inline Eigen::VectorXd sample_on_nodes(const Mesh& mesh, const CoeffFn& f) {
    Eigen::VectorXd v(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) v[i] = f(mesh.nodes[i]);
    return v;
}

inline double interpolate(const Mesh& mesh, const Eigen::VectorXd& nodal_values, Vec2 p) {
    return interpolate(mesh, std::span<const double>(nodal_values.data(),
                                                     static_cast<size_t>(nodal_values.size())),
                       p);
}

/// Stiffness matrix (c grad phi_p, grad phi_q) over all nodes, with the
/// diffusivity frozen at element centroids. Exact for element-wise constant c.
inline SparseMat assemble_stiffness(const Mesh& mesh, const CoeffFn& c) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * mesh.elements.size());
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& t = mesh.elements[e];
        const Vec2 p0 = mesh.nodes[t[0]], p1 = mesh.nodes[t[1]], p2 = mesh.nodes[t[2]];
        const double area = 0.5 * cross(p1 - p0, p2 - p0);
        if (area <= 0.0) throw std::invalid_argument("assemble_stiffness: degenerate element");
        const double ce = c((1.0 / 3.0) * (p0 + p1 + p2));
        if (ce <= 0.0)
            throw std::invalid_argument("assemble_stiffness: diffusivity not positive at centroid");
        // grad of hat i is the inward normal of the opposite edge over 2*area
        const Vec2 g[3] = {{(p1.y - p2.y) / (2 * area), (p2.x - p1.x) / (2 * area)},
                           {(p2.y - p0.y) / (2 * area), (p0.x - p2.x) / (2 * area)},
                           {(p0.y - p1.y) / (2 * area), (p1.x - p0.x) / (2 * area)}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(t[i], t[j], ce * area * dot(g[i], g[j]));
    }
    SparseMat K(mesh.node_count(), mesh.node_count());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

inline SparseMat assemble_stiffness(const Mesh& mesh, double c = 1.0) {
    return assemble_stiffness(mesh, [c](Vec2) { return c; });
}

/// Mass matrix (phi_p, phi_q); the discrete L2 inner product.
inline SparseMat assemble_mass(const Mesh& mesh) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * mesh.elements.size());
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& t = mesh.elements[e];
        const double area = mesh.element_area(e);
        if (area <= 0.0) throw std::invalid_argument("assemble_mass: degenerate element");
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(t[i], t[j], area / 12.0 * (i == j ? 2.0 : 1.0));
    }
    SparseMat M(mesh.node_count(), mesh.node_count());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

/// Index bookkeeping for the zero-Dirichlet reduction.
struct InteriorMap {
    std::vector<int> interior;     // interior node ids in mesh order
    std::vector<int> full_to_int;  // -1 on boundary nodes

    explicit InteriorMap(const Mesh& mesh) : full_to_int(mesh.node_count(), -1) {
        for (int i = 0; i < mesh.node_count(); ++i) {
            if (!mesh.boundary_mask[i]) {
                full_to_int[i] = static_cast<int>(interior.size());
                interior.push_back(i);
            }
        }
    }

    int size() const { return static_cast<int>(interior.size()); }

    SparseMat restrict_matrix(const SparseMat& A) const {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(A.nonZeros());
        for (int k = 0; k < A.outerSize(); ++k) {
            for (SparseMat::InnerIterator it(A, k); it; ++it) {
                const int r = full_to_int[static_cast<int>(it.row())];
                const int c = full_to_int[static_cast<int>(it.col())];
                if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
            }
        }
        SparseMat R(size(), size());
        R.setFromTriplets(trip.begin(), trip.end());
        return R;
    }

    Eigen::VectorXd restrict_vector(const Eigen::VectorXd& v) const {
        Eigen::VectorXd r(size());
        for (int i = 0; i < size(); ++i) r[i] = v[interior[i]];
        return r;
    }

    Eigen::VectorXd extend_with_zeros(const Eigen::VectorXd& v, int n_full) const {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(n_full);
        for (int i = 0; i < size(); ++i) r[interior[i]] = v[i];
        return r;
    }
};

/// Factorized solver for div(c grad u) = f with zero Dirichlet data:
/// K_c u = -M f on interior nodes. One factorization serves any number of
/// right-hand sides; the object is immutable after construction.
class ForwardSolver {
public:
    ForwardSolver(const Mesh& mesh, const CoeffFn& c)
        : mesh_(&mesh),
          stiffness_(assemble_stiffness(mesh, c)),
          mass_(assemble_mass(mesh)),
          interior_(mesh),
          k_int_(interior_.restrict_matrix(stiffness_)) {
        ldlt_.compute(k_int_);
        if (ldlt_.info() != Eigen::Success)
            throw NumericalError("ForwardSolver: stiffness factorization failed");
    }

    const Mesh& mesh() const { return *mesh_; }
    const SparseMat& stiffness() const { return stiffness_; }
    const SparseMat& mass() const { return mass_; }
    const InteriorMap& interior() const { return interior_; }

    /// Nodal solution (zero on boundary nodes) for nodal source values f.
    Eigen::VectorXd solve(const Eigen::VectorXd& f_nodal) const {
        if (f_nodal.size() != mesh_->node_count())
            throw std::invalid_argument("ForwardSolver::solve: source length mismatch");
        const Eigen::VectorXd rhs = interior_.restrict_vector(-(mass_ * f_nodal));
        Eigen::VectorXd u = ldlt_.solve(rhs);
        const double rhs_norm = rhs.norm();
        if (rhs_norm > 0.0) {
            Eigen::VectorXd res = rhs - k_int_ * u;
            if (res.norm() > 1e-10 * rhs_norm) {
                u += ldlt_.solve(res);
                res = rhs - k_int_ * u;
                if (res.norm() > 1e-10 * rhs_norm)
                    throw NumericalError("ForwardSolver::solve: residual above tolerance");
            }
        }
        return interior_.extend_with_zeros(u, mesh_->node_count());
    }

    /// Interior-reduced solve K_int x = rhs_int, no sign or mass applied.
    Eigen::VectorXd solve_reduced(const Eigen::VectorXd& rhs_int) const {
        return ldlt_.solve(rhs_int);
    }

private:
    const Mesh* mesh_;
    SparseMat stiffness_;
    SparseMat mass_;
    InteriorMap interior_;
    SparseMat k_int_;
    Eigen::SimplicialLDLT<SparseMat> ldlt_;
};

/// One-shot convenience around ForwardSolver.
inline Eigen::VectorXd solve_forward(const Mesh& mesh, const CoeffFn& c,
                                     const Eigen::VectorXd& f_nodal) {
    return ForwardSolver(mesh, c).solve(f_nodal);
}

/// Sparse interpolation operator rows: value at point i = row_i . nodal values.
inline SparseMat observation_operator(const Mesh& mesh, const std::vector<Vec2>& points) {
    const GridLocator locator(mesh);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(3 * points.size());
    for (int i = 0; i < static_cast<int>(points.size()); ++i) {
        const auto loc = locator(points[i]);
        if (!loc) throw OutOfDomainError("observation_operator: point outside mesh");
        const auto& t = mesh.elements[loc->element];
        for (int k = 0; k < 3; ++k) trip.emplace_back(i, t[k], loc->bary[k]);
    }
    SparseMat O(static_cast<int>(points.size()), mesh.node_count());
    O.setFromTriplets(trip.begin(), trip.end());
    return O;
}

/// Interpolation of coarse-mesh hat functions at the nodes of `mesh`:
/// column m holds the m-th coarse hat evaluated at every node. Nodes not
/// covered by the coarse triangulation get zeros.
inline SparseMat hat_interpolation_matrix(const Mesh& mesh, const Mesh& coarse) {
    const GridLocator locator(coarse);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(3 * mesh.nodes.size());
    for (int i = 0; i < mesh.node_count(); ++i) {
        const auto loc = locator(mesh.nodes[i]);
        if (!loc) continue;
        const auto& t = coarse.elements[loc->element];
        for (int k = 0; k < 3; ++k)
            if (loc->bary[k] != 0.0) trip.emplace_back(i, t[k], loc->bary[k]);
    }
    SparseMat P(mesh.node_count(), coarse.node_count());
    P.setFromTriplets(trip.begin(), trip.end());
    return P;
}

/// Forward matrix G: entry (i, j) = solution for basis column j evaluated at
/// observation point i. Columns of `basis_nodal` are nodal source values on
/// the solver's mesh; all solves reuse the solver's single factorization.
template <class DenseOrSparse>
inline Eigen::MatrixXd build_forward_matrix(const ForwardSolver& solver,
                                            const DenseOrSparse& basis_nodal,
                                            const std::vector<Vec2>& obs_points) {
    if (basis_nodal.rows() != solver.mesh().node_count())
        throw std::invalid_argument("build_forward_matrix: basis rows do not match mesh");
    const SparseMat O = observation_operator(solver.mesh(), obs_points);
    const int n_basis = static_cast<int>(basis_nodal.cols());
    Eigen::MatrixXd G(static_cast<int>(obs_points.size()), n_basis);
    const Eigen::MatrixXd rhs_all = -(solver.mass() * basis_nodal);
    const InteriorMap& im = solver.interior();
    for (int j = 0; j < n_basis; ++j) {
        const Eigen::VectorXd u_int = solver.solve_reduced(im.restrict_vector(rhs_all.col(j)));
        G.col(j) = O * im.extend_with_zeros(u_int, solver.mesh().node_count());
    }
    return G;
}

}  // namespace elsi
