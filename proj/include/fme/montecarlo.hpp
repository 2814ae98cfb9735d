#pragma once

#include "fme/qml.hpp"
#include "fme/simulate.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fme {

struct McConfig {
    std::vector<DgpConfig> grid;
    int replications = 500;
    std::uint64_t master_seed = 0;
    int threads = 1;
    EmConfig em;

    void validate() const;
};

/// n in {20, 50, 100, 200}, T = 100, r = 2, (tau, delta) in {(0,0), (0.5,0.5)},
/// Gaussian and asymmetric Laplace innovations, with the given noise and
/// factor conventions.
std::vector<DgpConfig> standard_grid(NoiseScaling noise = NoiseScaling::ThetaRatio,
                                     FactorNormalization factors = FactorNormalization::None);

/// Seed of replication `rep` in grid cell `cell` (SplitMix64 mixing).
std::uint64_t replication_seed(std::uint64_t master, std::size_t cell, std::size_t rep);

struct ReplicationOutput {
    Matrix truth;  // identified true loadings
    Matrix pc;
    Matrix qml;
    Matrix ols;    // regression of x on the true factors
    int sign_flips = 0;
    int resamples = 0;
    bool em_converged = true;
    int em_iterations = 0;
};

/// Simulates one panel and estimates its loadings by PC, QML (EM) and the
/// infeasible OLS on the true factors. Estimated columns whose inner
/// product with the matching true column is negative are sign-flipped.
/// Degenerate draws are redrawn from derived seeds.
ReplicationOutput run_replication(const DgpConfig& dgp, std::uint64_t rep_seed,
                                  const EmConfig& em = {});

struct EstimatorStats {
    std::vector<double> mse;  // per column
    std::vector<double> sd;   // across replications
};

struct CellResult {
    DgpConfig config;
    int replications = 0;
    EstimatorStats ols;
    EstimatorStats pc;
    EstimatorStats qml;
    std::vector<double> distance;     // D_j
    std::vector<double> distance_sd;
    std::vector<double> mse_rel;      // MSE_PC / MSE_QML
    std::vector<double> scaled_max_gap;  // n * max_i ||qml_i - pc_i|| per replication
    int sign_flips = 0;
    int resamples = 0;
    int nonconverged = 0;
};

CellResult aggregate(const DgpConfig& dgp, std::span<const ReplicationOutput> reps);

struct McResult {
    std::vector<CellResult> cells;
    int replications = 0;
    std::uint64_t master_seed = 0;
};

/// Runs every replication of every grid cell (OpenMP across replications)
/// and aggregates each cell in replication order. Output is independent of
/// the thread count.
McResult run_monte_carlo(const McConfig& config);

/// One row per grid cell x metric x column, full precision.
void write_mc_csv(std::ostream& os, const McResult& result);

/// MSE and PC-vs-QML comparison tables, one block per innovation law.
std::string format_mc_tables(const McResult& result);

}  // namespace fme
