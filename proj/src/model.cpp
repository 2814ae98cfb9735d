#include "fme/model.hpp"

#include "fme/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace fme {

void require_finite(const Matrix& m, std::string_view what)
{
    if (!m.allFinite()) {
        throw InputError(std::string(what) + " contains non-finite entries");
    }
}

PanelData make_panel(Matrix values, std::vector<std::string> names)
{
    if (values.rows() < 2) {
        throw InputError("panel needs at least 2 time periods");
    }
    if (values.cols() < 1) {
        throw InputError("panel needs at least 1 series");
    }
    require_finite(values, "panel");
    if (!names.empty() && static_cast<Index>(names.size()) != values.cols()) {
        throw InputError("series name count does not match panel width");
    }
    PanelData p;
    p.column_means = Vector::Zero(values.cols());
    p.values = std::move(values);
    p.names = std::move(names);
    return p;
}

std::string_view to_string(Method m)
{
    switch (m) {
    case Method::PC: return "PC";
    case Method::QmlEm: return "QML_EM";
    case Method::QmlHomo: return "QML_HOMO";
    case Method::QmlUnrestricted: return "QML_UNRESTRICTED";
    case Method::OlsOracle: return "OLS_ORACLE";
    }
    return "PC";
}

Method parse_method(std::string_view s)
{
    for (Method m : {Method::PC, Method::QmlEm, Method::QmlHomo, Method::QmlUnrestricted,
                     Method::OlsOracle}) {
        if (to_string(m) == s) return m;
    }
    throw InputError("unknown method '" + std::string(s) + "'");
}

PanelData demean(const PanelData& panel)
{
    PanelData out = panel;
    Vector means = panel.values.colwise().mean().transpose();
    out.values.rowwise() -= means.transpose();
    out.column_means = (panel.column_means.size() == means.size() ? panel.column_means
                                                                   : Vector::Zero(means.size()))
                       + means;
    out.demeaned = true;
    return out;
}

CovarianceEstimate sample_covariance(const PanelData& panel)
{
    require_finite(panel.values, "panel");
    const double scale = 1.0 / static_cast<double>(panel.periods());
    return {kernels::cross_product(panel.values, scale), CovarianceKind::SampleX};
}

void normalize_signs(Matrix& columns)
{
    for (Index j = 0; j < columns.cols(); ++j) {
        for (Index i = 0; i < columns.rows(); ++i) {
            const double v = columns(i, j);
            if (std::abs(v) >= kSignTolerance) {
                if (v < 0) columns.col(j) *= -1.0;
                break;
            }
        }
    }
}

EigenSystem full_eigen(const Matrix& symmetric)
{
    if (symmetric.rows() != symmetric.cols() || symmetric.rows() == 0) {
        throw InputError("eigendecomposition needs a non-empty square matrix");
    }
    require_finite(symmetric, "covariance");
    const double scale = std::max(symmetric.cwiseAbs().maxCoeff(), 1.0);
    if ((symmetric - symmetric.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw InputError("matrix is not symmetric");
    }

    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
    if (solver.info() != Eigen::Success) {
        throw DegenerateModelError("symmetric eigensolver did not converge");
    }
    const Index n = symmetric.rows();
    EigenSystem es;
    es.source_dim = n;
    // Eigen returns ascending order.
    es.eigenvalues = solver.eigenvalues().reverse();
    es.eigenvectors = solver.eigenvectors().rowwise().reverse();
    normalize_signs(es.eigenvectors);
    return es;
}

EigenSystem top_r_eigen(const CovarianceEstimate& cov, int r)
{
    const Index n = cov.matrix.rows();
    if (r < 1) throw InputError("number of factors r must be positive");
    if (r >= n) {
        throw InputError("number of factors r=" + std::to_string(r)
                         + " must be smaller than the dimension n=" + std::to_string(n));
    }
    EigenSystem all = full_eigen(cov.matrix);

    EigenSystem es;
    es.source_dim = n;
    es.eigenvalues = all.eigenvalues.head(r);
    es.eigenvectors = all.eigenvectors.leftCols(r);
    es.eigengap = all.eigenvalues(r - 1) - all.eigenvalues(r);
    // An exactly zero gap is also degenerate when lambda_1 is itself zero.
    es.eigengap_warning = es.eigengap <= kEigengapRelTol * std::abs(all.eigenvalues(0));
    return es;
}

double variance_floor(const PanelData& panel, double rel_floor)
{
    const double mean_var = panel.values.colwise().squaredNorm().mean()
                            / static_cast<double>(panel.periods());
    return rel_floor * mean_var;
}

}  // namespace fme
