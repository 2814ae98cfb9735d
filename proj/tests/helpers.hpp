#pragma once

#include "fme/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <random>

namespace fme::test {

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = z(rng);
    return m;
}

inline Vector uniform(Index size, double lo, double hi, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(size);
    for (Index i = 0; i < size; ++i) v(i) = u(rng);
    return v;
}

/// rows x cols matrix with orthonormal columns.
inline Matrix orthonormal(Index rows, Index cols, std::mt19937_64& rng)
{
    Eigen::HouseholderQR<Matrix> qr(gaussian(rows, cols, rng));
    return qr.householderQ() * Matrix::Identity(rows, cols);
}

/// T x n panel whose second moment (1/T) X'X equals `target` exactly
/// (up to rounding). Needs T >= n and target positive definite.
inline PanelData panel_with_moment(const Matrix& target, Index periods, std::mt19937_64& rng)
{
    const Matrix q = orthonormal(periods, target.rows(), rng);
    const Matrix upper = target.llt().matrixU();
    return make_panel(std::sqrt(static_cast<double>(periods)) * q * upper);
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline double rel_diff(const Matrix& a, const Matrix& b)
{
    return max_abs(a - b) / std::max(max_abs(b), 1e-300);
}

}  // namespace fme::test
