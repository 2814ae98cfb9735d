#include "fme/kernels.hpp"

#include <omp.h>

namespace fme::kernels {

int max_threads()
{
    return omp_get_max_threads();
}

Matrix cross_product(const Matrix& x, double scale)
{
    const Index n = x.cols();
    Matrix out(n, n);
#pragma omp parallel for schedule(dynamic, 4)
    for (Index j = 0; j < n; ++j) {
        for (Index k = 0; k <= j; ++k) {
            const double v = scale * x.col(j).dot(x.col(k));
            out(j, k) = v;
            out(k, j) = v;
        }
    }
    return out;
}

Matrix cross_product_reference(const Matrix& x, double scale)
{
    const Index t_len = x.rows();
    const Index n = x.cols();
    Matrix out(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index k = 0; k < n; ++k) {
            double s = 0.0;
            for (Index t = 0; t < t_len; ++t) s += x(t, j) * x(t, k);
            out(j, k) = scale * s;
        }
    }
    return out;
}

namespace {

// psi_t = F_t e_t for one series, as a T x r matrix.
Matrix bartlett_one(const Matrix& factors, const Eigen::Ref<const Vector>& e, int bandwidth)
{
    const Index t_len = factors.rows();
    const double inv_t = 1.0 / static_cast<double>(t_len);
    const Matrix psi = factors.array().colwise() * e.array();

    Matrix phi = inv_t * (psi.transpose() * psi);
    for (int k = 1; k <= bandwidth; ++k) {
        const double w = 1.0 - static_cast<double>(k) / static_cast<double>(bandwidth + 1);
        const Index len = t_len - k;
        // sum_{t=k}^{T-1} psi_t psi_{t-k}'
        Matrix gamma = inv_t * (psi.bottomRows(len).transpose() * psi.topRows(len));
        phi += w * (gamma + gamma.transpose());
    }
    return 0.5 * (phi + phi.transpose());
}

}  // namespace

std::vector<Matrix> bartlett_long_run(const Matrix& factors, const Matrix& residuals,
                                      int bandwidth)
{
    const Index n = residuals.cols();
    std::vector<Matrix> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = bartlett_one(factors, residuals.col(i), bandwidth);
    }
    return out;
}

std::vector<Matrix> bartlett_long_run_reference(const Matrix& factors,
                                                const Matrix& residuals, int bandwidth)
{
    const Index t_len = factors.rows();
    const Index r = factors.cols();
    const Index n = residuals.cols();
    const double inv_t = 1.0 / static_cast<double>(t_len);
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        Matrix phi = Matrix::Zero(r, r);
        for (Index a = 0; a < r; ++a) {
            for (Index b = 0; b < r; ++b) {
                double s0 = 0.0;
                for (Index t = 0; t < t_len; ++t) {
                    s0 += factors(t, a) * factors(t, b) * residuals(t, i) * residuals(t, i);
                }
                double lags = 0.0;
                for (int k = 1; k <= bandwidth; ++k) {
                    const double w = 1.0 - static_cast<double>(k) / (bandwidth + 1.0);
                    double g_ab = 0.0;
                    double g_ba = 0.0;
                    for (Index t = k; t < t_len; ++t) {
                        const double ee = residuals(t, i) * residuals(t - k, i);
                        g_ab += factors(t, a) * factors(t - k, b) * ee;
                        g_ba += factors(t, b) * factors(t - k, a) * ee;
                    }
                    lags += w * (g_ab + g_ba);
                }
                phi(a, b) = inv_t * (s0 + lags);
            }
        }
        out.push_back(std::move(phi));
    }
    return out;
}

}  // namespace fme::kernels
