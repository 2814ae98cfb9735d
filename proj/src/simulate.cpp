#include "fme/simulate.hpp"

#include "fme/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace fme {

namespace {

void require(bool ok, const char* field, const std::string& what)
{
    if (!ok) throw InputError(std::string("invalid config key '") + field + "': " + what);
}

void require_range(const std::pair<double, double>& range, const char* field, bool strictly_positive)
{
    require(std::isfinite(range.first) && std::isfinite(range.second), field, "must be finite");
    require(range.first <= range.second, field, "lower bound exceeds upper bound");
    if (strictly_positive) {
        require(range.first > 0.0, field, "bounds must be positive");
    } else {
        require(range.first >= 0.0, field, "bounds must be non-negative");
    }
}

double draw_asym_laplace(double kappa, Rng& rng)
{
    std::exponential_distribution<double> expo(1.0);
    const double rate = std::sqrt((1.0 + std::pow(kappa, 4)) / (kappa * kappa));
    const double e1 = expo(rng);
    const double e2 = expo(rng);
    const double mean = (1.0 / kappa - kappa) / rate;
    return (e1 / kappa - kappa * e2) / rate - mean;
}

}  // namespace

void DgpConfig::validate() const
{
    require(n >= 1, "n", "must be >= 1");
    require(T >= 2, "T", "must be >= 2");
    require(r >= 1, "r", "must be >= 1");
    require(r < n && r < T, "r", "must be smaller than min(n, T)");
    require(tau >= 0.0 && tau < 1.0, "tau", "must lie in [0, 1)");
    require(delta >= 0.0 && delta < 1.0, "delta", "must lie in [0, 1)");
    require_range(theta_range, "theta_range", false);
    require(band >= 0, "band", "must be >= 0");
    require(burn_in >= 0, "burn_in", "must be >= 0");
    require_range(kappa_range, "kappa_range", true);
    require_range(idio_variance_range, "idio_variance_range", true);
}

double spectral_norm(const Matrix& m)
{
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

std::vector<double> sample_asym_laplace(double kappa, std::size_t count, Rng& rng)
{
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw InputError("asymmetric Laplace kappa must be positive");
    }
    std::vector<double> out(count);
    for (auto& v : out) v = draw_asym_laplace(kappa, rng);
    return out;
}

IdioCovariance build_idio_covariance(std::span<const double> variances, double tau, int band)
{
    const Index n = static_cast<Index>(variances.size());
    IdioCovariance out;
    out.matrix = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) out.matrix(i, i) = variances[static_cast<std::size_t>(i)];

    const bool diagonal = tau == 0.0 || band == 0 || n == 1;
    if (diagonal) {
        Vector d = out.matrix.diagonal();
        for (Index i = 0; i < n; ++i) {
            if (d(i) < kCovarianceClip) {
                out.repair.clipped += 1;
                out.repair.max_adjustment = std::max(out.repair.max_adjustment, kCovarianceClip - d(i));
                d(i) = kCovarianceClip;
            }
        }
        out.matrix = d.asDiagonal();
        out.sqrt_matrix = d.cwiseSqrt().asDiagonal();
        return out;
    }

    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            const Index lag = std::abs(i - j);
            if (lag > 0 && lag <= band) out.matrix(i, j) = std::pow(tau, static_cast<double>(lag));
        }
    }

    Eigen::SelfAdjointEigenSolver<Matrix> es(out.matrix);
    Vector lambda = es.eigenvalues();
    for (Index k = 0; k < n; ++k) {
        if (lambda(k) < kCovarianceClip) {
            out.repair.clipped += 1;
            out.repair.max_adjustment = std::max(out.repair.max_adjustment, kCovarianceClip - lambda(k));
            lambda(k) = kCovarianceClip;
        }
    }
    const Matrix& v = es.eigenvectors();
    if (out.repair.clipped > 0) {
        out.matrix = v * lambda.asDiagonal() * v.transpose();
        out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
    }
    out.sqrt_matrix = v * lambda.cwiseSqrt().asDiagonal() * v.transpose();
    return out;
}

SimulatedPanel simulate_panel(const DgpConfig& config)
{
    config.validate();
    const Index n = config.n;
    const Index t_len = config.T;
    const Index r = config.r;
    const Index steps = t_len + config.burn_in;

    Rng rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    // Loading seeds l_ij ~ N(1, 1).
    Matrix seeds(n, r);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < r; ++j) seeds(i, j) = 1.0 + normal(rng);

    // VAR(1) coefficients scaled to spectral norm 0.9.
    Matrix a_raw(r, r);
    for (Index j = 0; j < r; ++j)
        for (Index k = 0; k < r; ++k) a_raw(j, k) = j == k ? uniform(0.5, 0.8) : uniform(0.0, 0.3);
    const Matrix a = 0.9 * a_raw / spectral_norm(a_raw);

    const bool laplace = config.distribution == Innovation::AsymLaplace;
    Vector kappa_u = Vector::Ones(r);
    Vector kappa_e = Vector::Ones(n);
    if (laplace) {
        for (Index j = 0; j < r; ++j) kappa_u(j) = uniform(config.kappa_range.first, config.kappa_range.second);
        for (Index i = 0; i < n; ++i) kappa_e(i) = uniform(config.kappa_range.first, config.kappa_range.second);
    }
    auto innovation = [&](double kappa) { return laplace ? draw_asym_laplace(kappa, rng) : normal(rng); };

    std::vector<double> idio_var(static_cast<std::size_t>(n));
    for (auto& v : idio_var) v = uniform(config.idio_variance_range.first, config.idio_variance_range.second);
    const IdioCovariance idio = build_idio_covariance(idio_var, config.tau, config.band);

    Vector ar(n);
    for (Index i = 0; i < n; ++i) ar(i) = config.delta * unit(rng);
    Vector theta(n);
    for (Index i = 0; i < n; ++i) theta(i) = uniform(config.theta_range.first, config.theta_range.second);

    // Factor path, burn-in discarded.
    Matrix f_path(t_len, r);
    Vector f = Vector::Zero(r);
    Vector u(r);
    for (Index t = 0; t < steps; ++t) {
        for (Index j = 0; j < r; ++j) u(j) = innovation(kappa_u(j));
        f = (a * f + u).eval();
        if (t >= config.burn_in) f_path.row(t - config.burn_in) = f.transpose();
    }
    if (config.factor_normalization == FactorNormalization::Whiten) {
        const Matrix cov = f_path.transpose() * f_path / static_cast<double>(t_len);
        Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
        if (es.eigenvalues().minCoeff() <= 0.0) {
            throw DegenerateDrawError("simulated factors have a singular sample covariance");
        }
        f_path = (f_path * es.operatorInverseSqrt()).eval();
    }

    // Idiosyncratic AR(1) path driven by e_t = S^{1/2} z_t.
    Matrix z(steps, n);
    for (Index t = 0; t < steps; ++t)
        for (Index i = 0; i < n; ++i) z(t, i) = innovation(kappa_e(i));
    const Matrix e = z * idio.sqrt_matrix;  // sqrt_matrix is symmetric
    Matrix xi(t_len, n);
    Vector state = Vector::Zero(n);
    for (Index t = 0; t < steps; ++t) {
        state = (ar.cwiseProduct(state) + e.row(t).transpose()).eval();
        if (t >= config.burn_in) xi.row(t - config.burn_in) = state.transpose();
    }

    const Matrix chi = f_path * seeds.transpose();
    Vector phi = Vector::Ones(n);
    if (config.noise_scaling == NoiseScaling::ThetaRatio) {
        const Vector chi_ss = chi.colwise().squaredNorm().transpose();
        const Vector xi_ss = xi.colwise().squaredNorm().transpose();
        for (Index i = 0; i < n; ++i) {
            phi(i) = xi_ss(i) > 0.0 ? std::sqrt(theta(i) * chi_ss(i) / xi_ss(i)) : 0.0;
        }
    }
    const Matrix scaled = xi * phi.asDiagonal();

    // Rotate the truth: L = V M^{1/2}, F_t = M^{-1/2} V' chi_t.
    const CovarianceEstimate chi_cov{kernels::cross_product(chi, 1.0 / static_cast<double>(t_len)),
                                     CovarianceKind::ImpliedCommon};
    const EigenSystem es = top_r_eigen(chi_cov, static_cast<int>(r));
    if (!(es.eigenvalues(r - 1) > 1e-12 * es.eigenvalues(0))) {
        throw DegenerateDrawError("common component has fewer than r positive eigenvalues");
    }
    const Vector root = es.eigenvalues.cwiseSqrt();

    SimulatedPanel out;
    out.config = config;
    out.true_loadings = es.eigenvectors * root.asDiagonal();
    out.true_factors = chi * es.eigenvectors * root.cwiseInverse().asDiagonal();
    out.true_common = chi;
    out.true_idio_scaled = scaled;
    out.true_idio_variances = scaled.colwise().squaredNorm().transpose() / static_cast<double>(t_len);
    out.theta = theta;
    out.var_coefficients = a;
    out.repair = idio.repair;
    out.panel = make_panel(chi + scaled);
    return out;
}

}  // namespace fme
