#include "fme/qml.hpp"

#include "fme/factors.hpp"
#include "fme/pca.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>

namespace fme {

void EmConfig::validate() const
{
    if (max_iterations < 1) throw InputError("em max_iterations must be >= 1");
    if (!(loglik_rel_tol > 0.0)) throw InputError("em loglik_rel_tol must be > 0");
    if (!(foc_tol > 0.0)) throw InputError("em foc_tol must be > 0");
    if (!(variance_floor > 0.0)) throw InputError("em variance_floor must be > 0");
    if (init == Init::Provided && (!initial_loadings || !initial_variances)) {
        throw InputError("em init=PROVIDED needs initial loadings and variances");
    }
}

namespace {

void check_parameters(const PanelData& panel, const Matrix& loadings,
                      const Vector& idio_variances)
{
    if (loadings.rows() != panel.series()) {
        throw InputError("loadings have " + std::to_string(loadings.rows())
                         + " rows but the panel has " + std::to_string(panel.series())
                         + " series");
    }
    if (idio_variances.size() != panel.series()) {
        throw InputError("idiosyncratic variance count does not match the panel");
    }
    if (!loadings.allFinite()) throw InputError("loadings contain non-finite entries");
    if (!idio_variances.allFinite() || (idio_variances.array() <= 0.0).any()) {
        throw InputError("idiosyncratic variances must be positive and finite");
    }
}

// Quantities shared by the Woodbury forms: S^{-1} L and the Cholesky factor
// of I_r + L' S^{-1} L.
struct WoodburyParts {
    Vector inv_var;
    Matrix weighted;  // S^{-1} L, n x r
    Eigen::LLT<Matrix> capacitance;

    WoodburyParts(const Matrix& loadings, const Vector& idio_variances)
        : inv_var(idio_variances.cwiseInverse()),
          weighted(inv_var.asDiagonal() * loadings)
    {
        const Index r = loadings.cols();
        Matrix m = Matrix::Identity(r, r) + loadings.transpose() * weighted;
        capacitance.compute(m);
    }
};

Matrix symmetric_part(const Matrix& m)
{
    return 0.5 * (m + m.transpose());
}

}  // namespace

double loglik_exact_diag(const PanelData& panel, const Matrix& loadings,
                         const Vector& idio_variances)
{
    check_parameters(panel, loadings, idio_variances);
    const double t_len = static_cast<double>(panel.periods());
    const Index r = loadings.cols();
    const WoodburyParts wb(loadings, idio_variances);

    double logdet = idio_variances.array().log().sum();
    const Vector col_ss = panel.values.colwise().squaredNorm().transpose();
    double quad = col_ss.dot(wb.inv_var);

    if (r > 0) {
        const Matrix& chol = wb.capacitance.matrixLLT();
        logdet += 2.0 * chol.diagonal().array().log().sum();
        // sum_t y_t' M^{-1} y_t with y_t = L' S^{-1} x_t
        const Matrix y_t = (panel.values * wb.weighted).transpose();  // r x T
        const Matrix solved = wb.capacitance.matrixL().solve(y_t);
        quad -= solved.squaredNorm();
    }
    return -0.5 * t_len * logdet - 0.5 * quad;
}

Matrix score_loadings(const PanelData& panel, const Matrix& loadings,
                      const Vector& idio_variances)
{
    check_parameters(panel, loadings, idio_variances);
    const double t_len = static_cast<double>(panel.periods());
    if (loadings.cols() == 0) return Matrix(loadings.rows(), 0);
    const WoodburyParts wb(loadings, idio_variances);

    // O^{-1} L = S^{-1} L M^{-1}
    const Matrix omega_inv_l = wb.capacitance.solve(wb.weighted.transpose()).transpose();
    // G O^{-1} L without forming G
    const Matrix g_w = panel.values.transpose() * (panel.values * omega_inv_l) / t_len;
    // O^{-1} Z = S^{-1} Z - S^{-1} L M^{-1} L' S^{-1} Z
    const Matrix s_inv_z = wb.inv_var.asDiagonal() * g_w;
    const Matrix correction =
        wb.weighted * wb.capacitance.solve(wb.weighted.transpose() * g_w);
    return t_len * (s_inv_z - correction - omega_inv_l);
}

EmUpdate em_step(const PanelData& panel, const Matrix& loadings, const Vector& idio_variances,
                 double variance_floor)
{
    check_parameters(panel, loadings, idio_variances);
    const double t_len = static_cast<double>(panel.periods());
    const Index r = loadings.cols();
    const WoodburyParts wb(loadings, idio_variances);

    // E-step: beta = L'(L L' + S)^{-1} = M^{-1} L' S^{-1}; m_t = beta x_t.
    const Matrix beta = wb.capacitance.solve(wb.weighted.transpose());  // r x n
    const Matrix m = panel.values * beta.transpose();                   // T x r
    const Matrix cross = panel.values.transpose() * m / t_len;          // (1/T) sum x_t m_t'
    // E[f f' | x] averaged over t: I - beta L + beta G beta'
    const Matrix second = symmetric_part(Matrix::Identity(r, r) - beta * loadings + beta * cross);

    Eigen::SelfAdjointEigenSolver<Matrix> es(second, Eigen::EigenvaluesOnly);
    const double hi = es.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || es.eigenvalues().minCoeff() <= 1e-12 * hi) {
        throw DegenerateModelError("EM: conditional factor second moment is singular");
    }

    // M-step.
    EmUpdate out;
    out.loadings = second.llt().solve(cross.transpose()).transpose();
    const Vector diag_g = panel.values.colwise().squaredNorm().transpose() / t_len;
    const Vector explained = out.loadings.cwiseProduct(cross).rowwise().sum();
    out.idio_variances = (diag_g - explained).cwiseMax(variance_floor);
    return out;
}

Matrix identify_rotation(const Matrix& loadings)
{
    if (loadings.cols() == 0) return loadings;
    if (!loadings.allFinite()) throw InputError("loadings contain non-finite entries");
    Eigen::JacobiSVD<Matrix> svd(loadings, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();  // descending
    const double largest = sv(0);
    if (!(largest > 0.0) || sv(sv.size() - 1) < 1e-12 * largest) {
        throw DegenerateModelError("loadings are rank deficient");
    }
    Matrix out = svd.matrixU() * sv.asDiagonal();
    normalize_signs(out);
    return out;
}

FactorModelFit fit_qml_em(const PanelData& panel, int r, const EmConfig& config)
{
    require_factor_count(panel, r);
    config.validate();
    const double floor = variance_floor(panel, config.variance_floor);

    Matrix loadings;
    Vector variances;
    FitDiagnostics diag;
    if (config.init == EmConfig::Init::PC) {
        FactorModelFit pc = fit_pc(panel, r);
        loadings = std::move(pc.loadings);
        variances = std::move(pc.idio_variances);
        diag.eigengap = pc.diagnostics.eigengap;
        diag.eigengap_warning = pc.diagnostics.eigengap_warning;
        diag.warnings = std::move(pc.diagnostics.warnings);
    } else {
        loadings = *config.initial_loadings;
        variances = *config.initial_variances;
        if (loadings.rows() != panel.series() || loadings.cols() != r) {
            throw InputError("initial loadings must be n x r");
        }
    }
    variances = variances.cwiseMax(floor);

    double ll = loglik_exact_diag(panel, loadings, variances);
    diag.loglik_trace.push_back(ll);
    diag.converged = false;
    int it = 0;
    while (it < config.max_iterations) {
        ++it;
        EmUpdate next = em_step(panel, loadings, variances, floor);
        const double ll_next = loglik_exact_diag(panel, next.loadings, next.idio_variances);
        diag.loglik_trace.push_back(ll_next);
        loadings = std::move(next.loadings);
        variances = std::move(next.idio_variances);
        const double scale = std::max(std::abs(ll), std::numeric_limits<double>::min());
        const double rel = std::abs(ll_next - ll) / scale;
        ll = ll_next;
        if (rel < config.loglik_rel_tol) {
            diag.converged = true;
            break;
        }
    }
    diag.iterations = it;
    if (!diag.converged) {
        diag.warnings.emplace_back("EM did not converge within " + std::to_string(it)
                                   + " iterations");
    }

    FactorModelFit fit;
    fit.r = r;
    fit.method = Method::QmlEm;
    fit.loadings = identify_rotation(loadings);
    diag.rotation_applied = true;
    fit.idio_variances = std::move(variances);
    fit.factors = factors_gls(panel, fit.loadings, fit.idio_variances);
    fit.residuals = panel.values - fit.factors * fit.loadings.transpose();

    const double t_len = static_cast<double>(panel.periods());
    const double n = static_cast<double>(panel.series());
    diag.foc_residual = score_loadings(panel, fit.loadings, fit.idio_variances).norm()
                        / (t_len * std::sqrt(n * r));
    fit.diagnostics = std::move(diag);
    fit.demeaned = panel.demeaned;
    fit.column_means = panel.column_means;
    return fit;
}

FactorModelFit fit_qml_homoskedastic(const PanelData& panel, int r)
{
    require_factor_count(panel, r);
    const CovarianceEstimate cov = sample_covariance(panel);
    const EigenSystem all = full_eigen(cov.matrix);
    const Index n = panel.series();

    const double sigma2 = std::max(0.0, all.eigenvalues.tail(n - r).mean());
    const Vector top = all.eigenvalues.head(r);
    if ((top.array() <= sigma2).any()) {
        throw DegenerateModelError(
            "no factor structure: a leading eigenvalue does not exceed the mean of the remaining ones");
    }

    FactorModelFit fit;
    fit.r = r;
    fit.method = Method::QmlHomo;
    fit.loadings = all.eigenvectors.leftCols(r)
                   * (top.array() - sigma2).sqrt().matrix().asDiagonal();
    fit.idio_variances = Vector::Constant(n, std::max(sigma2, variance_floor(panel)));
    fit.factors = factors_ols(panel, fit.loadings);
    fit.residuals = panel.values - fit.factors * fit.loadings.transpose();

    fit.diagnostics.homoskedastic_variance = sigma2;
    fit.diagnostics.eigengap = all.eigenvalues(r - 1) - all.eigenvalues(r);
    fit.diagnostics.eigengap_warning =
        fit.diagnostics.eigengap <= kEigengapRelTol * std::abs(all.eigenvalues(0));
    fit.demeaned = panel.demeaned;
    fit.column_means = panel.column_means;
    return fit;
}

FactorModelFit fit_qml_unrestricted(const PanelData& panel, int r)
{
    FactorModelFit fit = fit_pc(panel, r);
    fit.method = Method::QmlUnrestricted;

    const Matrix gx = sample_covariance(panel).matrix;
    const Matrix common = fit.loadings * fit.loadings.transpose();
    const Matrix g_xi = gx - common;
    const Matrix mismatch = (gx - common) - g_xi;

    Eigen::SelfAdjointEigenSolver<Matrix> es(g_xi, Eigen::EigenvaluesOnly);
    fit.diagnostics.min_idio_eigenvalue = es.eigenvalues().minCoeff();

    // Bai-Li first-order condition L'(L L' + G_xi)^{-1}(G_x - L L' - G_xi).
    // The characterization makes the last factor vanish identically.
    if (mismatch.isZero(0.0)) {
        fit.diagnostics.foc_residual = 0.0;
    } else {
        const Matrix omega = common + g_xi;
        const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(omega);
        fit.diagnostics.foc_residual = (fit.loadings.transpose() * cod.solve(mismatch)).norm();
    }
    fit.idio_variances = g_xi.diagonal().cwiseMax(variance_floor(panel));
    fit.idio_covariance = CovarianceEstimate{g_xi, CovarianceKind::ImpliedIdio};
    return fit;
}

}  // namespace fme
