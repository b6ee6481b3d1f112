#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "elsi/fem.hpp"
#include "elsi/rng.hpp"

namespace elsi {

/// Eigenpairs of K x = lambda M x on a mesh, extended to full nodal vectors
/// (zeros on the boundary) and M-orthonormal. Eigenvalues ascend; the sign
/// of each eigenfunction puts its largest-magnitude nodal value positive.
struct EigenBasis {
    enum class Weight { laplacian, weighted_by_c };

    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd functions;  // node_count x count
    Weight weight = Weight::laplacian;
    const Mesh* mesh = nullptr;

    int count() const { return static_cast<int>(eigenvalues.size()); }
};

namespace detail {

struct ReducedEigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;  // interior-reduced, M-orthonormal
};

// Lowest `count` eigenpairs of the reduced pencil (K, M), both SPD.
// Dense solve for small systems; otherwise shift-invert subspace iteration
// with Rayleigh-Ritz, reusing one LDLT factorization of K.
inline ReducedEigenPairs lowest_generalized_eigenpairs(const SparseMat& K, const SparseMat& M,
                                                       int count, double residual_tol = 1e-8) {
    const int n = static_cast<int>(K.rows());
    if (count < 1 || count > n)
        throw std::invalid_argument("lowest_generalized_eigenpairs: bad count");

    if (n <= 700) {
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
            Eigen::MatrixXd(K), Eigen::MatrixXd(M));
        if (solver.info() != Eigen::Success)
            throw NumericalError("dense generalized eigensolver failed");
        return {solver.eigenvalues().head(count), solver.eigenvectors().leftCols(count)};
    }

    Eigen::SimplicialLDLT<SparseMat> ldlt(K);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("eigensolver: stiffness factorization failed");

    const int p = std::min(n, count + std::max(40, count / 2));
    RngStream rng(0x51b5bacdULL);
    Eigen::MatrixXd X(n, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) X(i, j) = rng.normal();

    Eigen::VectorXd theta;
    double worst = 1e300;
    constexpr int kMaxIter = 400;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        const Eigen::MatrixXd Z = ldlt.solve(M * X);
        // M-orthonormalize via the Gram factor.
        Eigen::MatrixXd G = Z.transpose() * (M * Z);
        G = 0.5 * (G + G.transpose());
        Eigen::LLT<Eigen::MatrixXd> llt(G);
        if (llt.info() != Eigen::Success) {
            G.diagonal().array() += 1e-14 * G.diagonal().maxCoeff();
            llt.compute(G);
            if (llt.info() != Eigen::Success)
                throw NumericalError("eigensolver: subspace Gram factorization failed");
        }
        const Eigen::MatrixXd Linv =
            llt.matrixL().solve(Eigen::MatrixXd::Identity(p, p));
        const Eigen::MatrixXd Q = Z * Linv.transpose();

        Eigen::MatrixXd H = Q.transpose() * (K * Q);
        H = 0.5 * (H + H.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(H);
        theta = ritz.eigenvalues();
        X = Q * ritz.eigenvectors();

        const Eigen::MatrixXd KX = K * X.leftCols(count);
        const Eigen::MatrixXd MX = M * X.leftCols(count);
        worst = 0.0;
        for (int j = 0; j < count; ++j) {
            const double res = (KX.col(j) - theta[j] * MX.col(j)).norm();
            worst = std::max(worst, res / std::max(theta[j] * MX.col(j).norm(), 1e-300));
        }
        if (worst <= residual_tol)
            return {theta.head(count), X.leftCols(count)};
    }
    throw NumericalError("eigensolver: no convergence after " + std::to_string(kMaxIter) +
                         " iterations (worst residual " + std::to_string(worst) + ")");
}

inline void fix_signs(Eigen::MatrixXd& funcs) {
    for (int j = 0; j < funcs.cols(); ++j) {
        int idx = 0;
        funcs.col(j).cwiseAbs().maxCoeff(&idx);
        if (funcs(idx, j) < 0.0) funcs.col(j) = -funcs.col(j);
    }
}

inline EigenBasis make_basis(const Mesh& mesh, const InteriorMap& im, ReducedEigenPairs pairs,
                             EigenBasis::Weight weight) {
    EigenBasis basis;
    basis.eigenvalues = std::move(pairs.values);
    basis.functions.resize(mesh.node_count(), pairs.vectors.cols());
    basis.functions.setZero();
    for (int i = 0; i < im.size(); ++i) basis.functions.row(im.interior[i]) = pairs.vectors.row(i);
    fix_signs(basis.functions);
    basis.weight = weight;
    basis.mesh = &mesh;
    return basis;
}

}  // namespace detail

/// All Dirichlet-Laplacian eigenpairs with eigenvalue in (0, lambda_max].
inline EigenBasis laplacian_eigenpairs(const Mesh& mesh, double lambda_max) {
    if (lambda_max <= 0.0) throw std::invalid_argument("laplacian_eigenpairs: lambda_max <= 0");
    const SparseMat K = assemble_stiffness(mesh, 1.0);
    const SparseMat M = assemble_mass(mesh);
    const InteriorMap im(mesh);
    const SparseMat K_int = im.restrict_matrix(K), M_int = im.restrict_matrix(M);

    // Two-term Weyl count without the boundary correction overestimates,
    // which is what we want for a request size.
    const double area = mesh.total_area();
    int request = std::min(im.size(), static_cast<int>(std::ceil(area * lambda_max / (4.0 * M_PI))) + 10);
    for (;;) {
        auto pairs = detail::lowest_generalized_eigenpairs(K_int, M_int, request);
        if (pairs.values[request - 1] > lambda_max || request == im.size()) {
            int keep = 0;
            while (keep < request && pairs.values[keep] <= lambda_max) ++keep;
            if (keep == 0)
                throw NumericalError("laplacian_eigenpairs: no eigenvalues below lambda_max");
            pairs.values.conservativeResize(keep);
            pairs.vectors.conservativeResize(Eigen::NoChange, keep);
            return detail::make_basis(mesh, im, std::move(pairs), EigenBasis::Weight::laplacian);
        }
        request = std::min(im.size(), request + request / 2 + 10);
    }
}

/// First `count` eigenpairs of the c-weighted pencil K_c x = eta M x.
inline EigenBasis weighted_eigenpairs(const Mesh& mesh, const CoeffFn& c, int count) {
    const InteriorMap im(mesh);
    if (count < 1 || count > im.size())
        throw std::invalid_argument("weighted_eigenpairs: count out of range");
    const SparseMat K = assemble_stiffness(mesh, c);
    const SparseMat M = assemble_mass(mesh);
    auto pairs = detail::lowest_generalized_eigenpairs(im.restrict_matrix(K), im.restrict_matrix(M),
                                                       count);
    return detail::make_basis(mesh, im, std::move(pairs), EigenBasis::Weight::weighted_by_c);
}

struct AsymptoticVariance {
    double value = 0.0;
    /// Share contributed by the last decile of retained eigenpairs; a
    /// truncation-quality report for the caller.
    double tail_fraction = 0.0;
};

/// Spectral evaluation of || div(c grad psi) ||_2^2 = sum eta_k^2 <psi, xi_k>^2
/// over the retained weighted eigenpairs.
inline AsymptoticVariance asymptotic_variance(const Eigen::VectorXd& psi_nodal,
                                              const EigenBasis& basis, const SparseMat& mass) {
    if (basis.count() == 0) throw std::invalid_argument("asymptotic_variance: empty basis");
    if (basis.weight != EigenBasis::Weight::weighted_by_c)
        throw std::invalid_argument("asymptotic_variance: basis must be weighted by c");
    if (psi_nodal.size() != basis.functions.rows())
        throw std::invalid_argument("asymptotic_variance: psi length mismatch");
    const Eigen::VectorXd a = basis.functions.transpose() * (mass * psi_nodal);
    const Eigen::ArrayXd terms = basis.eigenvalues.array().square() * a.array().square();
    AsymptoticVariance out;
    out.value = terms.sum();
    const int k = basis.count();
    const int tail = std::max(1, k / 10);
    out.tail_fraction = out.value > 0.0 ? terms.tail(tail).sum() / out.value : 0.0;
    return out;
}

/// Nodal synthesis of a Field on the mesh it lives on.
inline Eigen::VectorXd nodal_values(const Field& f) {
    if (f.basis == BasisTag::fem_nodal) return f.coeffs;
    if (!f.eigen) throw std::invalid_argument("nodal_values: eigen field without basis");
    if (f.coeffs.size() != f.eigen->count())
        throw std::invalid_argument("nodal_values: coefficient length mismatch");
    return f.eigen->functions * f.coeffs;
}

inline Field eigen_field(const EigenBasis& basis, Eigen::VectorXd coeffs) {
    if (coeffs.size() != basis.count())
        throw std::invalid_argument("eigen_field: coefficient length mismatch");
    return Field{BasisTag::laplacian_eigen, std::move(coeffs), basis.mesh, &basis};
}

/// Forward matrix columns for every member of an eigenbasis.
inline Eigen::MatrixXd build_forward_matrix(const ForwardSolver& solver, const EigenBasis& basis,
                                            const std::vector<Vec2>& obs_points) {
    return build_forward_matrix(solver, basis.functions, obs_points);
}

inline void write_field(std::ostream& os, const Field& f) {
    os << "field basis=" << (f.basis == BasisTag::fem_nodal ? "fem-nodal" : "laplacian-eigen")
       << " size=" << f.coeffs.size() << "\n";
    char buf[40];
    for (Eigen::Index i = 0; i < f.coeffs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g\n", f.coeffs[i]);
        os << buf;
    }
}

inline Field read_field(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw std::invalid_argument("read_field: empty stream");
    Field f;
    long size = -1;
    if (header.rfind("field ", 0) != 0)
        throw std::invalid_argument("read_field: malformed header");
    if (header.find("basis=fem-nodal") != std::string::npos)
        f.basis = BasisTag::fem_nodal;
    else if (header.find("basis=laplacian-eigen") != std::string::npos)
        f.basis = BasisTag::laplacian_eigen;
    else
        throw std::invalid_argument("read_field: unknown basis tag");
    const auto pos = header.find("size=");
    if (pos == std::string::npos || std::sscanf(header.c_str() + pos, "size=%ld", &size) != 1 ||
        size < 0)
        throw std::invalid_argument("read_field: missing size");
    f.coeffs.resize(size);
    for (long i = 0; i < size; ++i)
        if (!(is >> f.coeffs[i])) throw std::invalid_argument("read_field: truncated data");
    return f;
}

/// Persists an eigenbasis as a directory: eigenvalues.csv plus one field
/// file per eigenfunction.
inline void write_eigenbasis(const std::string& dir, const EigenBasis& basis) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream os(fs::path(dir) / "eigenvalues.csv");
        os << "index,value\n";
        char buf[48];
        for (int j = 0; j < basis.count(); ++j) {
            std::snprintf(buf, sizeof(buf), "%d,%.17g\n", j + 1, basis.eigenvalues[j]);
            os << buf;
        }
    }
    char name[40];
    for (int j = 0; j < basis.count(); ++j) {
        std::snprintf(name, sizeof(name), "eigenfunction_%04d.field", j + 1);
        std::ofstream os(fs::path(dir) / name);
        write_field(os, Field{BasisTag::fem_nodal, basis.functions.col(j), basis.mesh, nullptr});
    }
}

}  // namespace elsi
