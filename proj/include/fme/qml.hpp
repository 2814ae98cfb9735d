#pragma once

#include "fme/model.hpp"

#include <optional>

namespace fme {

struct EmConfig {
    enum class Init { PC, Provided };

    int max_iterations = 1000;
    double loglik_rel_tol = 1e-8;
    double foc_tol = 1e-6;
    double variance_floor = kDefaultVarianceFloor;  // relative to the mean sample variance
    Init init = Init::PC;
    std::optional<Matrix> initial_loadings;
    std::optional<Vector> initial_variances;

    void validate() const;
};

/// Gaussian log-likelihood of an exact factor model with diagonal
/// idiosyncratic covariance, constant omitted:
///   -(T/2) log det(L L' + S) - (1/2) sum_t x_t' (L L' + S)^{-1} x_t.
/// Evaluated through the determinant lemma and Woodbury in O(nTr + nr^2);
/// no n x n matrix is formed. `loadings` may have zero columns.
double loglik_exact_diag(const PanelData& panel, const Matrix& loadings,
                         const Vector& idio_variances);

/// d loglik / d L = T [O^{-1} G O^{-1} L - O^{-1} L], O = L L' + S and
/// G the sample second moment, via the Woodbury identities.
Matrix score_loadings(const PanelData& panel, const Matrix& loadings,
                      const Vector& idio_variances);

struct EmUpdate {
    Matrix loadings;
    Vector idio_variances;
};

/// One EM iteration for the exact factor model. Updated variances are
/// floored at `variance_floor` (absolute). Throws DegenerateModelError when
/// the conditional second moment of the factors is singular.
EmUpdate em_step(const PanelData& panel, const Matrix& loadings, const Vector& idio_variances,
                 double variance_floor = 0.0);

/// Thin-SVD rotation L = V D U -> V D, columns by descending singular value,
/// first non-negligible row entry positive. Preserves L L'. Throws
/// DegenerateModelError when L is rank deficient.
Matrix identify_rotation(const Matrix& loadings);

/// Maximizes loglik_exact_diag by EM from the PC solution, then rotates to
/// the identified convention. Factors are the GLS projections.
FactorModelFit fit_qml_em(const PanelData& panel, int r, const EmConfig& config = {});

/// Closed form under a homoskedastic idiosyncratic covariance s^2 I:
/// s^2 is the mean of the n - r smallest eigenvalues of the sample
/// covariance and L = V (M - s^2 I)^{1/2}.
FactorModelFit fit_qml_homoskedastic(const PanelData& panel, int r);

/// Maximizer of the likelihood with an unrestricted idiosyncratic
/// covariance, by its characterization L L' + G_xi = G_x: loadings are the PC
/// loadings and G_xi = G_x - L L' is stored in idio_covariance.
FactorModelFit fit_qml_unrestricted(const PanelData& panel, int r);

}  // namespace fme
