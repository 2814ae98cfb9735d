#pragma once

// Data-parallel inner loops. Each OpenMP kernel has a plain serial
// reference kept for tests and benchmarks. Every output entry is reduced in
// a fixed order, so results do not depend on the thread count.

#include "fme/model.hpp"

namespace fme::kernels {

/// scale * X'X, one column pair per task.
Matrix cross_product(const Matrix& x, double scale);
Matrix cross_product_reference(const Matrix& x, double scale);

/// Bartlett-weighted long-run covariance of psi_t = F_t * e_{it}, for every
/// column i of `residuals`.
std::vector<Matrix> bartlett_long_run(const Matrix& factors, const Matrix& residuals,
                                      int bandwidth);
std::vector<Matrix> bartlett_long_run_reference(const Matrix& factors,
                                                const Matrix& residuals, int bandwidth);

/// Threads used by the parallel kernels (honors omp_set_num_threads).
int max_threads();

}  // namespace fme::kernels
