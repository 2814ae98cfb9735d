#pragma once

#include "fme/model.hpp"

namespace fme {

/// Principal-components estimator from the n x n sample covariance.
///
/// Loadings are V M^{1/2} for the top-r eigenpairs (V, M) of (1/T) X'X, so
/// (1/n) L'L = M/n is diagonal and descending. Factors are the projections
/// X V M^{-1/2}, normalized to (1/T) F'F = I_r. Idiosyncratic variances are
/// the per-series mean squared residuals (1/T normalization), floored at
/// kDefaultVarianceFloor times the mean sample variance.
///
/// Throws InputError if r >= min(n, T) and DegenerateModelError if any of
/// the top-r eigenvalues is not positive.
FactorModelFit fit_pc(const PanelData& panel, int r);

/// Shared argument check: 1 <= r < min(n, T).
void require_factor_count(const PanelData& panel, int r);

}  // namespace fme
