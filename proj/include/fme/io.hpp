#pragma once

// File formats: CSV panels and matrices, JSON fits and configs. Doubles are
// written with 17 significant digits so every value round-trips exactly.

#include "fme/model.hpp"
#include "fme/montecarlo.hpp"
#include "fme/simulate.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace fme::io {

using Json = nlohmann::json;

std::string format_double(double v);

/// First row series names, then one row per period. Empty or
/// non-numeric fields throw InputError with the row and column.
PanelData read_panel_csv(std::istream& in);
PanelData read_panel_csv(const std::string& path);

/// Header line (if `header` is non-empty) followed by the rows of `m`.
void write_matrix_csv(std::ostream& os, const Matrix& m, const std::vector<std::string>& header = {});
void write_panel_csv(const std::string& path, const PanelData& panel);

/// Keys: r, method, loadings[n][r], idio_variances[n], factors[T][r],
/// diagnostics, demeaned, column_means, names, and idio_covariance when set.
Json fit_to_json(const FactorModelFit& fit, const std::vector<std::string>& names = {});
FactorModelFit fit_from_json(const Json& j);

Json dgp_to_json(const DgpConfig& config);
/// Missing keys keep their defaults; unknown keys and bad values throw
/// InputError naming the key.
DgpConfig dgp_from_json(const Json& j);

/// Keys: grid ("standard" or a list of DGP objects), cell_defaults (DGP keys
/// applied beneath every cell), replications, master_seed, threads, em.
McConfig mc_from_json(const Json& j);

Json truth_to_json(const SimulatedPanel& sim);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace fme::io
