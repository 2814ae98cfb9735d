#pragma once

#include "fme/model.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace fme {

using Rng = std::mt19937_64;

enum class Innovation { Gaussian, AsymLaplace };

/// How the idiosyncratic component enters x = chi + phi * xi.
///   ThetaRatio: phi_i = sqrt(theta_i sum chi_it^2 / sum xi_it^2), so the
///               sample noise-to-signal ratio of series i equals theta_i.
///   None:       phi_i = 1, xi enters with its own scale (mean variance 1).
enum class NoiseScaling { ThetaRatio, None };

/// Optional normalization of the simulated VAR(1) factor path before the
/// common component is formed.
///   None:   f_t as generated.
///   Whiten: f_t replaced by (F'F/T)^{-1/2} f_t (unit sample covariance,
///           serial dependence kept).
enum class FactorNormalization { None, Whiten };

struct DgpConfig {
    int n = 100;
    int T = 100;
    int r = 2;
    double tau = 0.0;    // cross-sectional decay of idiosyncratic innovations
    double delta = 0.0;  // AR(1) coefficients drawn from U(0, delta)
    std::pair<double, double> theta_range{0.25, 0.5};
    Innovation distribution = Innovation::Gaussian;
    int band = 10;
    int burn_in = 100;
    std::uint64_t seed = 0;
    std::pair<double, double> kappa_range{0.9, 1.1};
    std::pair<double, double> idio_variance_range{0.5, 1.5};
    NoiseScaling noise_scaling = NoiseScaling::ThetaRatio;
    FactorNormalization factor_normalization = FactorNormalization::None;

    /// Throws InputError naming the offending field.
    void validate() const;
};

struct CovarianceRepair {
    int clipped = 0;              // eigenvalues raised to the clip level
    double max_adjustment = 0.0;  // largest eigenvalue increase
};

struct IdioCovariance {
    Matrix matrix;       // repaired covariance
    Matrix sqrt_matrix;  // symmetric square root
    CovarianceRepair repair;
};

inline constexpr double kCovarianceClip = 1e-8;

/// Banded covariance with diagonal `variances` and off-diagonal
/// tau^{|i-j|} for 0 < |i-j| <= band. Eigenvalues below kCovarianceClip are
/// clipped and the matrix rebuilt.
IdioCovariance build_idio_covariance(std::span<const double> variances, double tau, int band);

/// Asymmetric Laplace draws with location 0, asymmetry kappa and rate
/// lambda = sqrt((1 + kappa^4) / kappa^2), centered by the theoretical mean
/// (1/kappa - kappa)/lambda, so mean 0 and variance 1.
std::vector<double> sample_asym_laplace(double kappa, std::size_t count, Rng& rng);

struct SimulatedPanel {
    PanelData panel;
    Matrix true_loadings;     // n x r, identified
    Matrix true_factors;      // T x r, identified, (1/T) F'F = I
    Matrix true_common;       // T x n
    Matrix true_idio_scaled;  // T x n, phi_i xi_it
    Vector true_idio_variances;  // (1/T) sum_t (phi_i xi_it)^2
    Vector theta;
    Matrix var_coefficients;  // A
    CovarianceRepair repair;
    DgpConfig config;
};

/// The common component's covariance had fewer than r positive eigenvalues.
class DegenerateDrawError : public DegenerateModelError {
public:
    using DegenerateModelError::DegenerateModelError;
};

double spectral_norm(const Matrix& m);

/// Draws one panel: N(1,1) loadings, a VAR(1) factor path with
/// ||A||_2 = 0.9, AR(1) idiosyncratic components driven by banded
/// cross-correlated innovations, then rotates the truth to the identified
/// convention. Deterministic in config.seed.
SimulatedPanel simulate_panel(const DgpConfig& config);

}  // namespace fme
