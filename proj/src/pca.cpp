#include "fme/pca.hpp"

#include <algorithm>
#include <string>

namespace fme {

void require_factor_count(const PanelData& panel, int r)
{
    const Index bound = std::min(panel.series(), panel.periods());
    if (r < 1 || r >= bound) {
        throw InputError("number of factors r=" + std::to_string(r)
                         + " must satisfy 1 <= r < min(n, T)=" + std::to_string(bound));
    }
}

FactorModelFit fit_pc(const PanelData& panel, int r)
{
    require_factor_count(panel, r);
    const CovarianceEstimate cov = sample_covariance(panel);
    const EigenSystem es = top_r_eigen(cov, r);
    if ((es.eigenvalues.array() <= 0.0).any()) {
        throw DegenerateModelError("a leading eigenvalue of the sample covariance is not positive");
    }

    const Vector root = es.eigenvalues.cwiseSqrt();
    FactorModelFit fit;
    fit.r = r;
    fit.method = Method::PC;
    fit.loadings = es.eigenvectors * root.asDiagonal();
    fit.factors = panel.values * es.eigenvectors * root.cwiseInverse().asDiagonal();
    fit.residuals = panel.values - fit.factors * fit.loadings.transpose();

    const double floor = variance_floor(panel);
    fit.idio_variances = (fit.residuals.colwise().squaredNorm().transpose()
                          / static_cast<double>(panel.periods()))
                             .cwiseMax(floor);

    fit.diagnostics.eigengap = es.eigengap;
    fit.diagnostics.eigengap_warning = es.eigengap_warning;
    if (es.eigengap_warning) {
        fit.diagnostics.warnings.emplace_back(
            "eigengap between eigenvalues r and r+1 is numerically zero; loadings are not identified");
    }
    fit.demeaned = panel.demeaned;
    fit.column_means = panel.column_means;
    return fit;
}

}  // namespace fme
