#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "elsi/priors.hpp"
#include "elsi/stats.hpp"

namespace elsi {

/// Conjugate Gaussian posterior over basis coefficients. `factor` satisfies
/// factor factor^T = covariance and backs the sampler.
struct GaussianPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    Eigen::MatrixXd factor;
    double sigma = 0.0;
    PriorCovariance::Kind prior_kind = PriorCovariance::Kind::series_diagonal;
    const EigenBasis* eigen_basis = nullptr;
    const Mesh* mesh = nullptr;

    int dim() const { return static_cast<int>(mean.size()); }
};

/// Gaussian conjugate update for Y = G f + sigma W with prior N(0, Sigma_p):
/// posterior covariance (sigma^-2 G^T G + Sigma_p^-1)^-1 and mean
/// sigma^-2 Cov G^T Y. Computed through the prior factor L as
/// Cov = L (I + sigma^-2 (GL)^T GL)^-1 L^T, so the dense Matern prior is
/// never inverted explicitly.
inline GaussianPosterior conjugate_update(const Eigen::MatrixXd& G, const Eigen::VectorXd& Y,
                                          double sigma, const PriorCovariance& prior) {
    if (G.rows() != Y.size())
        throw std::invalid_argument("conjugate_update: observation count mismatch");
    if (G.cols() != prior.dim())
        throw std::invalid_argument("conjugate_update: basis dimension mismatch");
    if (!(sigma > 0.0)) throw std::invalid_argument("conjugate_update: sigma must be positive");

    const int m = prior.dim();
    const Eigen::MatrixXd B = prior.right_factor_apply(G);
    Eigen::MatrixXd S = (B.transpose() * B) / (sigma * sigma);
    S.diagonal().array() += 1.0;
    const Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw NumericalError("conjugate_update: posterior factorization failed");

    GaussianPosterior post;
    // F = L U^-1 with S = U^T U, so F F^T = L S^-1 L^T.
    const Eigen::MatrixXd Uinv =
        llt.matrixU().solve(Eigen::MatrixXd::Identity(m, m));
    post.factor = prior.factor_apply(Uinv);
    post.covariance = post.factor * post.factor.transpose();
    post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
    post.mean = post.covariance * (G.transpose() * Y) / (sigma * sigma);
    post.sigma = sigma;
    post.prior_kind = prior.kind;
    post.eigen_basis = prior.basis;
    post.mesh = prior.mesh;
    return post;
}

/// Synthesizes the posterior mean coefficients into a Field.
inline Field posterior_mean_field(const GaussianPosterior& post) {
    if (post.prior_kind == PriorCovariance::Kind::series_diagonal) {
        if (!post.eigen_basis)
            throw std::invalid_argument("posterior_mean_field: posterior lacks an eigenbasis");
        return eigen_field(*post.eigen_basis, post.mean);
    }
    if (!post.mesh) throw std::invalid_argument("posterior_mean_field: posterior lacks a mesh");
    return nodal_field(*post.mesh, post.mean);
}

inline std::vector<Eigen::VectorXd> sample_posterior(const GaussianPosterior& post, int count,
                                                     std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_posterior: count must be >= 1");
    std::vector<Eigen::VectorXd> draws;
    draws.reserve(count);
    RngStream rng(seed);
    Eigen::VectorXd z(post.dim());
    for (int k = 0; k < count; ++k) {
        for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
        draws.push_back(post.mean + post.factor * z);
    }
    return draws;
}

/// Weights turning a nodal test function into functional coefficients.
inline Eigen::VectorXd nodal_functional_weights(const SparseMat& mass,
                                                const Eigen::VectorXd& psi_nodal) {
    return mass * psi_nodal;
}

/// Mean and variance of <f, psi> under the posterior. psi follows the basis
/// convention: plain coefficients on an eigenbasis (the basis is
/// L2-orthonormal), mass-weighted values on a nodal basis.
inline std::pair<double, double> functional_posterior(const GaussianPosterior& post,
                                                      const Eigen::VectorXd& psi_coeffs) {
    if (psi_coeffs.size() != post.mean.size())
        throw std::invalid_argument("functional_posterior: dimension mismatch");
    const double mean = psi_coeffs.dot(post.mean);
    const Eigen::VectorXd w = post.factor.transpose() * psi_coeffs;
    return {mean, w.squaredNorm()};
}

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

/// Analytic (1-a) credible interval, mean +/- z_{1-a/2} sd.
inline Interval credible_interval(const GaussianPosterior& post, const Eigen::VectorXd& psi_coeffs,
                                  double a) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("credible_interval: level in (0,1)");
    const auto [mean, var] = functional_posterior(post, psi_coeffs);
    const double radius = normal_quantile(1.0 - 0.5 * a) * std::sqrt(std::max(var, 0.0));
    return {mean - radius, mean + radius};
}

/// Empirical variant: the radius is the (1-a/2) empirical quantile of the
/// centred functional over `draws` posterior samples, converging to the
/// analytic radius as draws grow.
inline Interval credible_interval(const GaussianPosterior& post, const Eigen::VectorXd& psi_coeffs,
                                  double a, int draws, std::uint64_t seed) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("credible_interval: level in (0,1)");
    if (draws < 1) throw std::invalid_argument("credible_interval: draws must be >= 1");
    if (psi_coeffs.size() != post.mean.size())
        throw std::invalid_argument("credible_interval: dimension mismatch");
    const double mean = psi_coeffs.dot(post.mean);
    const Eigen::VectorXd w = post.factor.transpose() * psi_coeffs;
    RngStream rng(seed);
    std::vector<double> centred(draws);
    Eigen::VectorXd z(w.size());
    for (int k = 0; k < draws; ++k) {
        for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
        centred[k] = w.dot(z);
    }
    const double radius = empirical_quantile(std::move(centred), 1.0 - 0.5 * a);
    return {mean - radius, mean + radius};
}

}  // namespace elsi
