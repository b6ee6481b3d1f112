#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "elsi/bessel.hpp"
#include "elsi/geometry.hpp"
#include "elsi/rng.hpp"
#include "elsi/spectral.hpp"

namespace elsi {

/// Stationary Matern correlation at distance r with smoothness alpha and
/// length scale ell; 1 at r = 0.
inline double matern_kernel(double r, double alpha, double ell) {
    if (r < 0.0 || alpha <= 0.0 || ell <= 0.0)
        throw std::invalid_argument("matern_kernel: need r >= 0, alpha > 0, ell > 0");
    const double z = r * std::sqrt(2.0 * alpha) / ell;
    if (z < 1e-18) return 1.0;
    const double value =
        std::pow(2.0, 1.0 - alpha) / std::tgamma(alpha) * std::pow(z, alpha) * bessel_k(alpha, z);
    // Clamp roundoff excursions above the exact r = 0 limit.
    return std::min(value, 1.0);
}

/// Zero-mean Gaussian prior covariance in one of the two supported shapes:
/// a diagonal over an eigenbasis (entries lambda_j^-alpha) or a dense
/// Matern matrix over mesh nodes. The factor L (cov = L L^T, jittered for
/// the dense case) is precomputed; conjugate updates and sampling go
/// through it rather than through any explicit inverse.
struct PriorCovariance {
    enum class Kind { series_diagonal, matern_dense };

    Kind kind = Kind::series_diagonal;
    Eigen::VectorXd diagonal;        // series case
    Eigen::MatrixXd dense;           // matern case, unit diagonal
    Eigen::MatrixXd dense_factor;    // lower Cholesky of dense + jitter
    double alpha = 0.0;
    double ell = 0.0;                // unused for series
    const EigenBasis* basis = nullptr;
    const Mesh* mesh = nullptr;      // set when built over mesh nodes

    static constexpr double kJitter = 1e-10;

    int dim() const {
        return kind == Kind::series_diagonal ? static_cast<int>(diagonal.size())
                                             : static_cast<int>(dense.rows());
    }

    /// Factor column action: L * z.
    Eigen::VectorXd factor_apply(const Eigen::VectorXd& z) const {
        if (kind == Kind::series_diagonal) return diagonal.cwiseSqrt().asDiagonal() * z;
        return dense_factor.template triangularView<Eigen::Lower>() * z;
    }

    Eigen::MatrixXd factor_apply(const Eigen::MatrixXd& z) const {
        if (kind == Kind::series_diagonal) return diagonal.cwiseSqrt().asDiagonal() * z;
        return dense_factor.template triangularView<Eigen::Lower>() * z;
    }

    /// Row action: A * L.
    Eigen::MatrixXd right_factor_apply(const Eigen::MatrixXd& a) const {
        if (kind == Kind::series_diagonal) return a * diagonal.cwiseSqrt().asDiagonal();
        return a * dense_factor.template triangularView<Eigen::Lower>();
    }

    /// Quadratic form v^T cov v (jittered covariance for the dense case).
    double quad(const Eigen::VectorXd& v) const {
        if (kind == Kind::series_diagonal) return v.dot(diagonal.asDiagonal() * v);
        const Eigen::VectorXd w = dense_factor.template triangularView<Eigen::Lower>().transpose() * v;
        return w.squaredNorm();
    }
};

inline PriorCovariance series_prior_covariance(const EigenBasis& basis, double alpha) {
    if (basis.count() == 0) throw std::invalid_argument("series_prior_covariance: empty basis");
    PriorCovariance prior;
    prior.kind = PriorCovariance::Kind::series_diagonal;
    prior.diagonal = basis.eigenvalues.array().pow(-alpha);
    prior.alpha = alpha;
    prior.basis = &basis;
    return prior;
}

inline PriorCovariance matern_covariance_matrix(const std::vector<Vec2>& nodes, double alpha,
                                                double ell) {
    if (nodes.empty()) throw std::invalid_argument("matern_covariance_matrix: no nodes");
    if (alpha <= 0.0 || ell <= 0.0)
        throw std::invalid_argument("matern_covariance_matrix: hyperparameters must be positive");
    const int m = static_cast<int>(nodes.size());
    PriorCovariance prior;
    prior.kind = PriorCovariance::Kind::matern_dense;
    prior.alpha = alpha;
    prior.ell = ell;
    prior.dense.resize(m, m);
    for (int i = 0; i < m; ++i) {
        prior.dense(i, i) = 1.0;
        for (int j = i + 1; j < m; ++j) {
            const double r = dist(nodes[i], nodes[j]);
            if (r == 0.0)
                throw std::invalid_argument("matern_covariance_matrix: duplicate nodes");
            const double v = matern_kernel(r, alpha, ell);
            prior.dense(i, j) = v;
            prior.dense(j, i) = v;
        }
    }
    Eigen::MatrixXd jittered = prior.dense;
    jittered.diagonal().array() += PriorCovariance::kJitter;
    const Eigen::LLT<Eigen::MatrixXd> llt(jittered);
    if (llt.info() != Eigen::Success)
        throw NumericalError("matern_covariance_matrix: factorization failed despite jitter");
    prior.dense_factor = llt.matrixL();
    return prior;
}

/// Matern prior over the nodes of a mesh, keeping the mesh handle so that
/// posterior coefficients can be read back as nodal values.
inline PriorCovariance matern_covariance_matrix(const Mesh& mesh, double alpha, double ell) {
    PriorCovariance prior = matern_covariance_matrix(mesh.nodes, alpha, ell);
    prior.mesh = &mesh;
    return prior;
}

/// Independent draws from N(0, cov); deterministic for a given seed.
inline std::vector<Eigen::VectorXd> sample_prior(const PriorCovariance& cov, int count,
                                                 std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_prior: count must be >= 1");
    std::vector<Eigen::VectorXd> draws;
    draws.reserve(count);
    RngStream rng(seed);
    Eigen::VectorXd z(cov.dim());
    for (int k = 0; k < count; ++k) {
        for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
        draws.push_back(cov.factor_apply(z));
    }
    return draws;
}

}  // namespace elsi
