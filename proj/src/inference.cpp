#include "fme/inference.hpp"

#include "fme/kernels.hpp"
#include "fme/qml.hpp"

#include <cmath>
#include <string>

namespace fme {

int auto_bandwidth(Index periods)
{
    return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(periods) / 100.0, 2.0 / 9.0)));
}

int HacOptions::resolve(Index periods) const
{
    return bandwidth ? *bandwidth : auto_bandwidth(periods);
}

HacCovariance hac_phi(const Matrix& factors, const Matrix& residuals, const HacOptions& options)
{
    if (factors.rows() != residuals.rows()) {
        throw InputError("factors and residuals must have the same number of periods");
    }
    const Index t_len = factors.rows();
    const int m = options.resolve(t_len);
    if (m < 0) throw InputError("HAC bandwidth must be non-negative");
    if (m >= t_len) {
        throw InputError("HAC bandwidth " + std::to_string(m) + " must be smaller than T="
                         + std::to_string(t_len));
    }
    require_finite(factors, "factors");
    require_finite(residuals, "residuals");
    return {kernels::bartlett_long_run(factors, residuals, m), m};
}

double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) throw InputError("normal quantile needs p in (0, 1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r
                  + 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r
                + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r
              + 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r
                  + 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r
                + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r
              + 4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r
                  + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r
                + 4.63033784615654529590e+0) * r + 1.42343711074968357734e+0)
              / (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                      + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                    + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r
                  + 2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r
                + 5.46378491116411436990e+0) * r + 6.65790464350110377720e+0)
              / (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                      + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                    + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                  + 5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0 ? -val : val;
}

std::vector<LoadingInterval> loading_confidence_intervals(const FactorModelFit& fit,
                                                          const HacCovariance& hac, double level)
{
    if (!(level > 0.0 && level < 1.0)) {
        throw InputError("confidence level must lie in (0, 1)");
    }
    const Index n = fit.loadings.rows();
    const Index r = fit.loadings.cols();
    if (static_cast<Index>(hac.per_series.size()) != n) {
        throw InputError("HAC covariance does not match the fit's number of series");
    }
    const double t_len = static_cast<double>(fit.factors.rows());
    const double z = normal_quantile(0.5 * (1.0 + level));

    std::vector<LoadingInterval> out;
    out.reserve(static_cast<std::size_t>(n * r));
    for (Index i = 0; i < n; ++i) {
        const Matrix& phi = hac.per_series[static_cast<std::size_t>(i)];
        if (phi.rows() != r || phi.cols() != r) {
            throw InputError("HAC covariance block has the wrong dimension");
        }
        for (Index j = 0; j < r; ++j) {
            LoadingInterval iv;
            iv.series = i;
            iv.factor = j;
            iv.estimate = fit.loadings(i, j);
            iv.std_error = std::sqrt(std::max(phi(j, j), 0.0) / t_len);
            iv.lower = iv.estimate - z * iv.std_error;
            iv.upper = iv.estimate + z * iv.std_error;
            out.push_back(iv);
        }
    }
    return out;
}

double score_equivalence_gap(const PanelData& panel, const Matrix& true_loadings,
                             const Vector& true_variances, const Matrix& true_factors, Index i)
{
    if (i < 0 || i >= panel.series()) {
        throw InputError("series index " + std::to_string(i) + " out of range");
    }
    if (true_factors.rows() != panel.periods() || true_factors.cols() != true_loadings.cols()) {
        throw InputError("true factors must be T x r");
    }
    const Matrix score = score_loadings(panel, true_loadings, true_variances);
    const Vector xi = panel.values.col(i) - true_factors * true_loadings.row(i).transpose();
    const Vector conditional = true_factors.transpose() * xi / true_variances(i);
    const double t_len = static_cast<double>(panel.periods());
    return (score.row(i).transpose() - conditional).norm() / std::sqrt(t_len);
}

}  // namespace fme
