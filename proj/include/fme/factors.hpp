#pragma once

#include "fme/model.hpp"

namespace fme {

// Factor recovery given loadings. All three return T x r matrices and throw
// DegenerateModelError when the loadings are rank deficient.

/// F_t = (L'L)^{-1} L' x_t.
Matrix factors_ols(const PanelData& panel, const Matrix& loadings);

/// F_t = (L' S^{-1} L)^{-1} L' S^{-1} x_t with diagonal S.
Matrix factors_gls(const PanelData& panel, const Matrix& loadings, const Vector& idio_variances);

/// Linear projection L'(L L' + S)^{-1} x_t, computed in the r x r form
/// (L' S^{-1} L + I)^{-1} L' S^{-1} x_t.
Matrix factors_lp(const PanelData& panel, const Matrix& loadings, const Vector& idio_variances);

}  // namespace fme
