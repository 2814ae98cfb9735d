#pragma once

#include "fme/model.hpp"

#include <optional>
#include <vector>

namespace fme {

/// Bartlett-kernel HAC settings. An empty bandwidth means AUTO, which
/// resolves to floor(4 (T/100)^{2/9}).
struct HacOptions {
    std::optional<int> bandwidth;

    static HacOptions automatic() { return {}; }
    static HacOptions fixed(int m) { return {m}; }
    int resolve(Index periods) const;
};

int auto_bandwidth(Index periods);

struct HacCovariance {
    std::vector<Matrix> per_series;  // r x r long-run covariance for each series
    int bandwidth_used = 0;
};

/// Phi_i = (1/T) sum_t F_t F_t' e_it^2
///       + sum_{k=1}^m (1 - k/(m+1)) [G_k + G_k'],
/// G_k = (1/T) sum_{t>k} F_t F_{t-k}' e_it e_{i,t-k}.
/// Throws InputError if the bandwidth is not below T.
HacCovariance hac_phi(const Matrix& factors, const Matrix& residuals, const HacOptions& options);

struct LoadingInterval {
    Index series = 0;
    Index factor = 0;
    double estimate = 0.0;
    double std_error = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// lambda_ij +/- z_{(1+level)/2} sqrt(Phi_{i,jj} / T), row-major over (i, j).
std::vector<LoadingInterval> loading_confidence_intervals(const FactorModelFit& fit,
                                                          const HacCovariance& hac, double level);

/// Inverse standard normal CDF (Wichura's AS 241, ~1e-16 relative).
double normal_quantile(double p);

/// (1/sqrt T) || s_i(X; phi) - (1/sigma_i^2) sum_t xi_it F_t || where s_i is
/// row i of score_loadings at the true parameters and xi = x - F L'.
/// Simulation-only diagnostic.
double score_equivalence_gap(const PanelData& panel, const Matrix& true_loadings,
                             const Vector& true_variances, const Matrix& true_factors, Index i);

}  // namespace fme
