#include "fme/factors.hpp"

#include <Eigen/Eigenvalues>

#include <string>

namespace fme {

namespace {

void check_shapes(const PanelData& panel, const Matrix& loadings)
{
    if (loadings.rows() != panel.series()) {
        throw InputError("loadings have " + std::to_string(loadings.rows())
                         + " rows but the panel has " + std::to_string(panel.series())
                         + " series");
    }
    if (loadings.cols() < 1) throw InputError("loadings need at least one column");
}

void check_variances(const PanelData& panel, const Vector& v)
{
    if (v.size() != panel.series()) {
        throw InputError("idiosyncratic variance count does not match the panel");
    }
    if (!v.allFinite() || (v.array() <= 0.0).any()) {
        throw InputError("idiosyncratic variances must be positive and finite");
    }
}

// Solves gram * B = rhs' for the symmetric positive definite r x r `gram`,
// rejecting numerically singular systems.
Matrix solve_gram(const Matrix& gram, const Matrix& rhs_t)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    const double hi = es.eigenvalues().maxCoeff();
    const double lo = es.eigenvalues().minCoeff();
    if (!(hi > 0.0) || lo < 1e-12 * hi) {
        throw DegenerateModelError("loadings are rank deficient");
    }
    return gram.llt().solve(rhs_t);
}

}  // namespace

Matrix factors_ols(const PanelData& panel, const Matrix& loadings)
{
    check_shapes(panel, loadings);
    const Matrix gram = loadings.transpose() * loadings;
    const Matrix proj = panel.values * loadings;  // T x r, rows L' x_t
    return solve_gram(gram, proj.transpose()).transpose();
}

Matrix factors_gls(const PanelData& panel, const Matrix& loadings, const Vector& idio_variances)
{
    check_shapes(panel, loadings);
    check_variances(panel, idio_variances);
    const Matrix weighted = idio_variances.cwiseInverse().asDiagonal() * loadings;  // S^{-1} L
    const Matrix gram = loadings.transpose() * weighted;
    const Matrix proj = panel.values * weighted;
    return solve_gram(gram, proj.transpose()).transpose();
}

Matrix factors_lp(const PanelData& panel, const Matrix& loadings, const Vector& idio_variances)
{
    check_shapes(panel, loadings);
    check_variances(panel, idio_variances);
    const Matrix weighted = idio_variances.cwiseInverse().asDiagonal() * loadings;
    const Matrix gram = loadings.transpose() * weighted;
    // Rank check on L' S^{-1} L; the shrunk system (gram + I) is always PD.
    solve_gram(gram, Matrix::Zero(gram.rows(), 1));
    const Matrix shrunk = gram + Matrix::Identity(gram.rows(), gram.cols());
    const Matrix proj = panel.values * weighted;
    return shrunk.llt().solve(proj.transpose()).transpose();
}

}  // namespace fme
