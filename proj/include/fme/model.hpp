#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fme {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Malformed or out-of-contract input (CLI exit code 2).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The data or the current parameters do not support a factor structure
/// (singular moment matrices, non-positive eigenvalues; CLI exit code 3).
class DegenerateModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Observations x_{it}: rows are time periods, columns are series.
struct PanelData {
    Matrix values;
    bool demeaned = false;
    Vector column_means;              // subtracted means, zeros if none
    std::vector<std::string> names;   // optional series labels

    Index periods() const { return values.rows(); }
    Index series() const { return values.cols(); }
};

/// Validates shape (T >= 2, n >= 1) and finiteness.
PanelData make_panel(Matrix values, std::vector<std::string> names = {});

enum class CovarianceKind { SampleX, ImpliedCommon, ImpliedIdio };

struct CovarianceEstimate {
    Matrix matrix;
    CovarianceKind kind = CovarianceKind::SampleX;
};

/// Leading eigenpairs of a symmetric matrix, descending, with the first
/// non-negligible entry of every eigenvector made positive.
struct EigenSystem {
    Vector eigenvalues;
    Matrix eigenvectors;
    Index source_dim = 0;
    double eigengap = 0.0;            // lambda_r - lambda_{r+1}
    bool eigengap_warning = false;
};

enum class Method { PC, QmlEm, QmlHomo, QmlUnrestricted, OlsOracle };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

struct FitDiagnostics {
    std::vector<double> loglik_trace;
    int iterations = 0;
    bool converged = true;
    double foc_residual = 0.0;
    bool rotation_applied = false;
    double eigengap = 0.0;
    bool eigengap_warning = false;
    std::optional<double> homoskedastic_variance;
    std::optional<double> min_idio_eigenvalue;
    std::vector<std::string> warnings;
};

struct FactorModelFit {
    Matrix loadings;        // n x r
    Vector idio_variances;  // n
    Matrix factors;         // T x r
    Matrix residuals;       // T x n, X - F L'
    int r = 0;
    Method method = Method::PC;
    FitDiagnostics diagnostics;
    std::optional<CovarianceEstimate> idio_covariance;  // unrestricted QML only
    bool demeaned = false;
    Vector column_means;
};

// Tolerances shared by the estimators.
inline constexpr double kSignTolerance = 1e-12;
inline constexpr double kEigengapRelTol = 1e-10;
inline constexpr double kDefaultVarianceFloor = 1e-8;

PanelData demean(const PanelData& panel);

/// (1/T) X'X.
CovarianceEstimate sample_covariance(const PanelData& panel);

/// Flips each column so its first entry with |v| >= kSignTolerance is positive.
void normalize_signs(Matrix& columns);

/// All eigenpairs of a symmetric matrix, sorted descending, sign-normalized.
EigenSystem full_eigen(const Matrix& symmetric);

EigenSystem top_r_eigen(const CovarianceEstimate& cov, int r);

/// Absolute variance floor: rel_floor times the mean sample variance.
double variance_floor(const PanelData& panel, double rel_floor = kDefaultVarianceFloor);

void require_finite(const Matrix& m, std::string_view what);

}  // namespace fme
