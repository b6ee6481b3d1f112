#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "elsi/posterior.hpp"
#include "elsi/synth.hpp"
#include "elsi/version.hpp"

namespace elsi {

/// Knobs for one harness run. Numeric defaults match the standard
/// experiment: unit-by-3/4 ellipse rotated by pi/6, full-mesh observations,
/// noise level 5e-4.
struct ExperimentConfig {
    double a = 1.0;
    double b = 0.75;
    double theta = M_PI / 6.0;
    int mesh_nodes = 4500;

    std::string prior = "series";  // series | matern
    double alpha = 0.75;
    double ell = 0.25;
    double lambda_max = 500.0;
    int matern_nodes = 1169;

    double sigma = 5e-4;
    bool sigma_unknown = false;
    std::vector<double> sigmas;  // sweep; empty means {sigma}

    std::vector<int> sample_sizes = {4500};
    int replications = 500;
    std::vector<int> functional_indices = {2, 4, 8, 16};  // 1-based
    double level = 0.05;

    std::string truth = "default";  // default | three-sources
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    int workers = 0;  // 0: hardware concurrency

    void validate() const {
        if (a <= 0 || b <= 0 || theta < 0 || theta >= M_PI)
            throw std::invalid_argument("config: bad domain parameters");
        if (mesh_nodes < 32) throw std::invalid_argument("config: mesh-nodes too small");
        if (prior != "series" && prior != "matern")
            throw std::invalid_argument("config: prior must be series or matern");
        if (alpha <= 0) throw std::invalid_argument("config: alpha must be positive");
        if (prior == "matern" && ell <= 0) throw std::invalid_argument("config: ell must be positive");
        if (prior == "series" && lambda_max <= 0)
            throw std::invalid_argument("config: lambda-max must be positive");
        if (prior == "matern" && matern_nodes < 16)
            throw std::invalid_argument("config: matern-nodes too small");
        if (sigma <= 0) throw std::invalid_argument("config: sigma must be positive");
        for (double s : sigmas)
            if (s <= 0) throw std::invalid_argument("config: sigmas must be positive");
        if (sample_sizes.empty()) throw std::invalid_argument("config: sample-sizes empty");
        for (int n : sample_sizes)
            if (n < 2) throw std::invalid_argument("config: sample sizes must be >= 2");
        if (replications < 1) throw std::invalid_argument("config: replications must be >= 1");
        for (int j : functional_indices)
            if (j < 1) throw std::invalid_argument("config: functional indices are 1-based");
        if (!(level > 0 && level < 1)) throw std::invalid_argument("config: level in (0,1)");
        if (truth != "default" && truth != "three-sources")
            throw std::invalid_argument("config: truth must be default or three-sources");
    }

    std::vector<double> sigma_list() const { return sigmas.empty() ? std::vector<double>{sigma} : sigmas; }

    std::string canonical_text() const {
        std::ostringstream os;
        os << "a=" << a << ";b=" << b << ";theta=" << theta << ";mesh_nodes=" << mesh_nodes
           << ";prior=" << prior << ";alpha=" << alpha << ";ell=" << ell
           << ";lambda_max=" << lambda_max << ";matern_nodes=" << matern_nodes << ";sigma=" << sigma
           << ";sigma_unknown=" << sigma_unknown << ";sigmas=";
        for (double s : sigmas) os << s << ",";
        os << ";n=";
        for (int n : sample_sizes) os << n << ",";
        os << ";reps=" << replications << ";functionals=";
        for (int j : functional_indices) os << j << ",";
        os << ";level=" << level << ";truth=" << truth << ";seed=" << seed;
        return os.str();
    }

    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char ch : canonical_text()) {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

inline void parallel_for(int count, const std::function<void(int)>& body, int workers = 0) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Everything derived from a config that experiments share read-only:
/// meshes, factorized solver, eigenbasis, forward matrix, prior, truth.
struct Workspace {
    ExperimentConfig config;
    Mesh mesh;
    std::unique_ptr<ForwardSolver> solver;
    SparseMat mass;
    std::optional<EigenBasis> basis;  // series prior basis; also CLT/coverage functionals
    std::unique_ptr<Mesh> coarse;     // matern parameter mesh
    SparseMat hat_matrix;             // coarse hats at fine nodes
    PriorCovariance prior;
    Eigen::MatrixXd forward;          // node_count x dim(prior)
    Eigen::VectorXd f0_nodal;
    Eigen::VectorXd u0;
    double f0_norm = 0.0;

    CoeffFn truth_fn() const {
        return config.truth == "three-sources" ? CoeffFn(default_truth_three_sources)
                                               : CoeffFn(default_truth);
    }

    /// First n observation indices of the seeded node permutation, sorted;
    /// nested across n by construction.
    std::vector<int> observation_indices(int n) const {
        if (n > mesh.node_count())
            throw std::invalid_argument("observation_indices: n exceeds node count");
        RngStream rng(config.seed, 7);
        std::vector<int> perm = rng.permutation(mesh.node_count());
        perm.resize(n);
        std::sort(perm.begin(), perm.end());
        return perm;
    }

    /// Replicated noisy data on the full mesh; replicate r is a pure
    /// function of (seed, r).
    Eigen::VectorXd noisy_values(double sigma, int replicate) const {
        RngStream rng(config.seed, 1000 + static_cast<std::uint64_t>(replicate));
        Eigen::VectorXd y = u0;
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sigma * rng.normal();
        return y;
    }
};

inline Workspace prepare_workspace(ExperimentConfig config) {
    config.validate();
    Workspace ws;
    ws.config = config;
    ws.mesh = build_ellipse_mesh_with_node_target(config.a, config.b, config.theta,
                                                  config.mesh_nodes);
    ws.solver = std::make_unique<ForwardSolver>(ws.mesh, default_diffusivity);
    ws.mass = ws.solver->mass();
    ws.f0_nodal = sample_on_nodes(ws.mesh, ws.truth_fn());
    ws.u0 = ws.solver->solve(ws.f0_nodal);
    ws.f0_norm = l2_norm(ws.mass, ws.f0_nodal);

    if (config.prior == "series") {
        ws.basis = laplacian_eigenpairs(ws.mesh, config.lambda_max);
        ws.forward = build_forward_matrix(*ws.solver, ws.basis->functions, ws.mesh.nodes);
        ws.prior = series_prior_covariance(*ws.basis, config.alpha);
    } else {
        ws.coarse = std::make_unique<Mesh>(build_ellipse_mesh_with_node_target(
            config.a, config.b, config.theta, config.matern_nodes));
        ws.hat_matrix = hat_interpolation_matrix(ws.mesh, *ws.coarse);
        ws.forward = build_forward_matrix(*ws.solver, ws.hat_matrix, ws.mesh.nodes);
        ws.prior = matern_covariance_matrix(*ws.coarse, config.alpha, config.ell);
    }
    return ws;
}

namespace detail {

inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

inline Eigen::VectorXd select(const Eigen::VectorXd& v, const std::vector<int>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
    return out;
}

inline std::ofstream open_report(const ExperimentConfig& config, const std::string& name) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    std::ofstream os(fs::path(config.out_dir) / name);
    if (!os) throw std::invalid_argument("cannot open report file " + name);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "# elsi %s config=%016llx\n", kVersion,
                  static_cast<unsigned long long>(config.hash()));
    os << buf;
    return os;
}

}  // namespace detail

/// Fine-mesh nodal values of the posterior mean estimate.
inline Eigen::VectorXd mean_estimate_on_mesh(const Workspace& ws, const GaussianPosterior& post) {
    if (ws.config.prior == "series") return ws.basis->functions * post.mean;
    return ws.hat_matrix * post.mean;
}

/// L2-estimation error of the posterior mean against the ground truth,
/// evaluated on the observation mesh.
inline double estimation_error(const Workspace& ws, const GaussianPosterior& post) {
    return l2_error(ws.mass, mean_estimate_on_mesh(ws, post), ws.f0_nodal);
}

/// Posterior summary rows: index, mean, marginal standard deviation.
inline void write_posterior_summary(std::ostream& os, const GaussianPosterior& post) {
    os << "index,mean,marginal_sd\n";
    char buf[96];
    for (int j = 0; j < post.dim(); ++j) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", j + 1, post.mean[j],
                      std::sqrt(std::max(0.0, post.covariance(j, j))));
        os << buf;
    }
}

/// Estimation-error sweep over (n, sigma): one conjugate update per pair on
/// the shared synthetic dataset, errors against the truth.
inline void run_estimation_sweep(const Workspace& ws) {
    auto os = detail::open_report(ws.config, "estimation.csv");
    os << "n,sigma,error,rel_error,seed\n";
    char buf[160];
    for (double sigma : ws.config.sigma_list()) {
        const Eigen::VectorXd y_full = ws.noisy_values(sigma, 0);
        for (int n : ws.config.sample_sizes) {
            const auto idx = ws.observation_indices(n);
            const GaussianPosterior post = conjugate_update(
                detail::select_rows(ws.forward, idx), detail::select(y_full, idx), sigma, ws.prior);
            const double err = estimation_error(ws, post);
            std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%llu\n", n, sigma, err,
                          err / ws.f0_norm, static_cast<unsigned long long>(ws.config.seed));
            os << buf;
        }
    }
}

struct CoverageRow {
    int n = 0;
    int j = 0;
    double coverage = 0.0;
    int replications = 0;
    double radius = 0.0;
};

/// Frequentist coverage of the analytic credible intervals for the
/// eigen-coefficient functionals across replicated datasets.
inline std::vector<CoverageRow> run_coverage(const Workspace& ws) {
    if (ws.config.prior != "series")
        throw std::invalid_argument("run_coverage: functional experiments use the series prior");
    const int reps = ws.config.replications;
    const double z = normal_quantile(1.0 - 0.5 * ws.config.level);
    const Eigen::VectorXd truth_coeffs =
        ws.basis->functions.transpose() * (ws.mass * ws.f0_nodal);

    std::vector<CoverageRow> rows;
    auto os = detail::open_report(ws.config, "coverage.csv");
    os << "n,j,coverage,replications,radius\n";
    char buf[160];
    for (int n : ws.config.sample_sizes) {
        const auto idx = ws.observation_indices(n);
        const Eigen::MatrixXd g_n = detail::select_rows(ws.forward, idx);
        const GaussianPosterior base =
            conjugate_update(g_n, Eigen::VectorXd::Zero(n), ws.config.sigma, ws.prior);
        // Covariance is data independent; replicate means come from one
        // precomputed map applied to each noisy sample.
        const Eigen::MatrixXd mean_map =
            base.covariance * g_n.transpose() / (ws.config.sigma * ws.config.sigma);

        std::vector<Eigen::VectorXd> means(reps);
        parallel_for(
            reps,
            [&](int r) { means[r] = mean_map * detail::select(ws.noisy_values(ws.config.sigma, r), idx); },
            ws.config.workers);

        for (int j : ws.config.functional_indices) {
            if (j > base.dim()) throw std::invalid_argument("run_coverage: functional index beyond basis");
            const double radius = z * std::sqrt(std::max(0.0, base.covariance(j - 1, j - 1)));
            int hits = 0;
            for (int r = 0; r < reps; ++r)
                hits += std::abs(truth_coeffs[j - 1] - means[r][j - 1]) <= radius;
            CoverageRow row{n, j, static_cast<double>(hits) / reps, reps, radius};
            rows.push_back(row);
            std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%d,%.17g\n", row.n, row.j, row.coverage,
                          row.replications, row.radius);
            os << buf;
        }
    }
    return rows;
}

struct CltSummary {
    int j = 0;
    double truth = 0.0;
    double predicted_std = 0.0;
    double empirical_mean = 0.0;
    double empirical_std = 0.0;
    double variance_tail_fraction = 0.0;
};

/// Replicated plug-in estimates of the eigen-coefficient functionals plus
/// the predicted spread sqrt(var) * sigma / sqrt(n) from the weighted
/// eigenexpansion.
inline std::vector<CltSummary> run_clt(const Workspace& ws) {
    if (ws.config.prior != "series")
        throw std::invalid_argument("run_clt: functional experiments use the series prior");
    const int reps = ws.config.replications;
    const int n = ws.config.sample_sizes.front();
    const auto idx = ws.observation_indices(n);
    const Eigen::MatrixXd g_n = detail::select_rows(ws.forward, idx);
    const GaussianPosterior base =
        conjugate_update(g_n, Eigen::VectorXd::Zero(n), ws.config.sigma, ws.prior);
    const Eigen::MatrixXd mean_map =
        base.covariance * g_n.transpose() / (ws.config.sigma * ws.config.sigma);
    const Eigen::VectorXd truth_coeffs =
        ws.basis->functions.transpose() * (ws.mass * ws.f0_nodal);

    // Weighted eigenpairs up to roughly 4x the prior cutoff back the
    // variance evaluation; the request size comes from the growth law with
    // the harmonic mean of c.
    double inv_c_integral = 0.0;
    for (int e = 0; e < ws.mesh.element_count(); ++e) {
        const auto& t = ws.mesh.elements[e];
        const Vec2 centroid =
            (1.0 / 3.0) * (ws.mesh.nodes[t[0]] + ws.mesh.nodes[t[1]] + ws.mesh.nodes[t[2]]);
        inv_c_integral += ws.mesh.element_area(e) / default_diffusivity(centroid);
    }
    const double eta_cap = 4.0 * ws.config.lambda_max;
    const InteriorMap im(ws.mesh);
    const int request = std::min(
        im.size(), static_cast<int>(std::ceil(eta_cap * inv_c_integral / (4.0 * M_PI))) + 20);
    const EigenBasis weighted = weighted_eigenpairs(ws.mesh, default_diffusivity, request);

    std::vector<Eigen::VectorXd> means(reps);
    parallel_for(
        reps,
        [&](int r) { means[r] = mean_map * detail::select(ws.noisy_values(ws.config.sigma, r), idx); },
        ws.config.workers);

    std::vector<CltSummary> summaries;
    auto os = detail::open_report(ws.config, "clt.csv");
    os << "j,replicate,estimate,truth,predicted_std\n";
    char buf[160];
    for (int j : ws.config.functional_indices) {
        if (j > base.dim()) throw std::invalid_argument("run_clt: functional index beyond basis");
        const auto var = asymptotic_variance(ws.basis->functions.col(j - 1), weighted, ws.mass);
        CltSummary s;
        s.j = j;
        s.truth = truth_coeffs[j - 1];
        s.predicted_std = std::sqrt(var.value) * ws.config.sigma / std::sqrt(static_cast<double>(n));
        s.variance_tail_fraction = var.tail_fraction;
        std::vector<double> estimates(reps);
        for (int r = 0; r < reps; ++r) {
            estimates[r] = means[r][j - 1];
            std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", j, r, estimates[r], s.truth,
                          s.predicted_std);
            os << buf;
        }
        s.empirical_mean = mean_of(estimates);
        s.empirical_std = sample_std(estimates);
        summaries.push_back(s);
    }
    return summaries;
}

struct EmpiricalBayesRow {
    int n = 0;
    double sigma_hat = 0.0;
    double error = 0.0;
    double rel_error = 0.0;
};

/// Pipeline with the noise level replaced by the difference-based estimate.
inline std::vector<EmpiricalBayesRow> run_empirical_bayes(const Workspace& ws) {
    std::vector<EmpiricalBayesRow> rows;
    auto os = detail::open_report(ws.config, "empbayes.csv");
    os << "n,sigma_hat,error,rel_error\n";
    char buf[160];
    const Eigen::VectorXd y_full = ws.noisy_values(ws.config.sigma, 0);
    for (int n : ws.config.sample_sizes) {
        const auto idx = ws.observation_indices(n);
        const Eigen::VectorXd y = detail::select(y_full, idx);
        const double sigma_hat = rice_sigma_hat(y);
        const GaussianPosterior post =
            conjugate_update(detail::select_rows(ws.forward, idx), y, sigma_hat, ws.prior);
        const double err = estimation_error(ws, post);
        rows.push_back({n, sigma_hat, err, err / ws.f0_norm});
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", n, sigma_hat, err,
                      err / ws.f0_norm);
        os << buf;
    }
    return rows;
}

struct LineSpec {
    Vec2 origin{0.0, 0.0};
    Vec2 direction{1.0, 0.0};
    double t_min = -1.5;
    double t_max = 1.5;
};

/// Values of several nodal fields along a line; rows only for points inside
/// the mesh. Returns the number of emitted rows.
inline int emit_cross_section(std::ostream& os, const Mesh& mesh,
                              const std::vector<std::string>& names,
                              const std::vector<Eigen::VectorXd>& nodal_fields,
                              const LineSpec& line, int samples) {
    if (samples < 2) throw std::invalid_argument("emit_cross_section: need at least 2 samples");
    if (names.size() != nodal_fields.size())
        throw std::invalid_argument("emit_cross_section: one name per field");
    const GridLocator locator(mesh);
    os << "t,x,y";
    for (const auto& name : names) os << "," << name;
    os << "\n";
    char buf[64];
    int emitted = 0;
    for (int s = 0; s < samples; ++s) {
        const double t = line.t_min + (line.t_max - line.t_min) * s / (samples - 1);
        const Vec2 p = line.origin + t * line.direction;
        const auto loc = locator(p);
        if (!loc) continue;
        const auto& tri = mesh.elements[loc->element];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", t, p.x, p.y);
        os << buf;
        for (const auto& field : nodal_fields) {
            const double v = loc->bary[0] * field[tri[0]] + loc->bary[1] * field[tri[1]] +
                             loc->bary[2] * field[tri[2]];
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            os << buf;
        }
        os << "\n";
        ++emitted;
    }
    return emitted;
}

}  // namespace elsi
