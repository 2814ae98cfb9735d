#include "fme/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace fme::io {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string unquote(std::string s)
{
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

Json matrix_to_json(const Matrix& m)
{
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_to_json(const Vector& v)
{
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

const Json& field(const Json& j, const char* key)
{
    if (!j.contains(key)) throw InputError(std::string("fit file is missing '") + key + "'");
    return j.at(key);
}

Matrix matrix_from_json(const Json& j, const char* key, Index cols)
{
    if (!j.is_array()) throw InputError(std::string("fit key '") + key + "' must be an array of rows");
    Matrix m(static_cast<Index>(j.size()), cols);
    for (Index i = 0; i < m.rows(); ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
            throw InputError(std::string("fit key '") + key + "' row " + std::to_string(i)
                             + " must have " + std::to_string(cols) + " entries");
        }
        for (Index c = 0; c < cols; ++c) {
            const Json& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw InputError(std::string("fit key '") + key + "' has a non-numeric entry");
            m(i, c) = v.get<double>();
        }
    }
    return m;
}

Vector vector_from_json(const Json& j, const char* key)
{
    if (!j.is_array()) throw InputError(std::string("fit key '") + key + "' must be an array");
    Vector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) {
        const Json& e = j[static_cast<std::size_t>(i)];
        if (!e.is_number()) throw InputError(std::string("fit key '") + key + "' has a non-numeric entry");
        v(i) = e.get<double>();
    }
    return v;
}

[[noreturn]] void bad_key(const std::string& key, const std::string& what)
{
    throw InputError("invalid config key '" + key + "': " + what);
}

int get_int(const Json& j, const std::string& key)
{
    if (!j.is_number_integer()) bad_key(key, "expected an integer");
    const auto v = j.get<long long>();
    if (v < -2147483647LL || v > 2147483647LL) bad_key(key, "out of range");
    return static_cast<int>(v);
}

double get_double(const Json& j, const std::string& key)
{
    if (!j.is_number()) bad_key(key, "expected a number");
    return j.get<double>();
}

std::uint64_t get_seed(const Json& j, const std::string& key)
{
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
    bad_key(key, "expected a non-negative integer");
}

std::pair<double, double> get_range(const Json& j, const std::string& key)
{
    if (!j.is_array() || j.size() != 2) bad_key(key, "expected [lower, upper]");
    return {get_double(j[0], key), get_double(j[1], key)};
}

std::string get_string(const Json& j, const std::string& key)
{
    if (!j.is_string()) bad_key(key, "expected a string");
    return j.get<std::string>();
}

const char* to_key(Innovation d) { return d == Innovation::Gaussian ? "gaussian" : "asym_laplace"; }
const char* to_key(NoiseScaling s) { return s == NoiseScaling::ThetaRatio ? "theta_ratio" : "none"; }
const char* to_key(FactorNormalization f) { return f == FactorNormalization::Whiten ? "whiten" : "none"; }

EmConfig em_from_json(const Json& j)
{
    if (!j.is_object()) bad_key("em", "expected an object");
    EmConfig em;
    for (const auto& [key, value] : j.items()) {
        const std::string name = "em." + key;
        if (key == "max_iterations") em.max_iterations = get_int(value, name);
        else if (key == "loglik_rel_tol") em.loglik_rel_tol = get_double(value, name);
        else if (key == "foc_tol") em.foc_tol = get_double(value, name);
        else if (key == "variance_floor") em.variance_floor = get_double(value, name);
        else bad_key(name, "unknown key");
    }
    try {
        em.validate();
    } catch (const InputError& e) {
        bad_key("em", e.what());
    }
    return em;
}

}  // namespace

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

PanelData read_panel_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) throw InputError("panel CSV is empty");
    std::vector<std::string> names = split_row(line);
    for (auto& name : names) name = unquote(name);
    const std::size_t n = names.size();

    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_row(line);
        if (fields.size() != n) {
            throw InputError("panel CSV line " + std::to_string(line_no) + " has " + std::to_string(fields.size())
                             + " fields, expected " + std::to_string(n));
        }
        for (std::size_t c = 0; c < n; ++c) {
            const std::string& f = fields[c];
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size()) {
                throw InputError("panel CSV line " + std::to_string(line_no) + ", column '" + names[c]
                                 + "': cannot parse '" + f + "' as a number");
            }
            values.push_back(v);
        }
        ++rows;
    }
    Matrix m(static_cast<Index>(rows), static_cast<Index>(n));
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t c = 0; c < n; ++c)
            m(static_cast<Index>(t), static_cast<Index>(c)) = values[t * n + c];
    return make_panel(std::move(m), std::move(names));
}

PanelData read_panel_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open panel file '" + path + "'");
    return read_panel_csv(in);
}

void write_matrix_csv(std::ostream& os, const Matrix& m, const std::vector<std::string>& header)
{
    for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    if (!header.empty()) os << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(i, j));
        os << '\n';
    }
}

void write_panel_csv(const std::string& path, const PanelData& panel)
{
    std::vector<std::string> names = panel.names;
    if (names.empty()) {
        for (Index i = 0; i < panel.series(); ++i) names.push_back("x" + std::to_string(i + 1));
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    write_matrix_csv(out, panel.values, names);
}

Json fit_to_json(const FactorModelFit& fit, const std::vector<std::string>& names)
{
    const auto& d = fit.diagnostics;
    Json diag{{"loglik_trace", d.loglik_trace},
              {"iterations", d.iterations},
              {"converged", d.converged},
              {"foc_residual", d.foc_residual},
              {"rotation_applied", d.rotation_applied},
              {"eigengap", d.eigengap},
              {"eigengap_warning", d.eigengap_warning},
              {"warnings", d.warnings}};
    if (d.homoskedastic_variance) diag["homoskedastic_variance"] = *d.homoskedastic_variance;
    if (d.min_idio_eigenvalue) diag["min_idio_eigenvalue"] = *d.min_idio_eigenvalue;

    Json j{{"r", fit.r},
           {"method", std::string(to_string(fit.method))},
           {"loadings", matrix_to_json(fit.loadings)},
           {"idio_variances", vector_to_json(fit.idio_variances)},
           {"factors", matrix_to_json(fit.factors)},
           {"diagnostics", std::move(diag)},
           {"demeaned", fit.demeaned},
           {"column_means", vector_to_json(fit.column_means)},
           {"names", names}};
    if (fit.idio_covariance) j["idio_covariance"] = matrix_to_json(fit.idio_covariance->matrix);
    return j;
}

FactorModelFit fit_from_json(const Json& j)
{
    if (!j.is_object()) throw InputError("fit file must hold a JSON object");
    FactorModelFit fit;
    const Json& r = field(j, "r");
    if (!r.is_number_integer() || r.get<long long>() < 1) throw InputError("fit key 'r' must be a positive integer");
    fit.r = r.get<int>();
    const Json& method = field(j, "method");
    if (!method.is_string()) throw InputError("fit key 'method' must be a string");
    fit.method = parse_method(method.get<std::string>());
    fit.loadings = matrix_from_json(field(j, "loadings"), "loadings", fit.r);
    fit.idio_variances = vector_from_json(field(j, "idio_variances"), "idio_variances");
    fit.factors = matrix_from_json(field(j, "factors"), "factors", fit.r);
    if (fit.idio_variances.size() != fit.loadings.rows()) {
        throw InputError("fit has " + std::to_string(fit.loadings.rows()) + " loading rows but "
                         + std::to_string(fit.idio_variances.size()) + " variances");
    }
    if (j.contains("demeaned")) fit.demeaned = j.at("demeaned").get<bool>();
    fit.column_means = j.contains("column_means") ? vector_from_json(j.at("column_means"), "column_means")
                                                  : Vector::Zero(fit.loadings.rows());
    if (fit.column_means.size() != fit.loadings.rows()) {
        throw InputError("fit key 'column_means' has the wrong length");
    }
    if (j.contains("idio_covariance")) {
        fit.idio_covariance = CovarianceEstimate{
            matrix_from_json(j.at("idio_covariance"), "idio_covariance", fit.loadings.rows()),
            CovarianceKind::ImpliedIdio};
    }
    if (j.contains("diagnostics")) {
        const Json& d = j.at("diagnostics");
        auto& out = fit.diagnostics;
        if (d.contains("loglik_trace")) out.loglik_trace = d.at("loglik_trace").get<std::vector<double>>();
        if (d.contains("iterations")) out.iterations = d.at("iterations").get<int>();
        if (d.contains("converged")) out.converged = d.at("converged").get<bool>();
        if (d.contains("foc_residual")) out.foc_residual = d.at("foc_residual").get<double>();
        if (d.contains("rotation_applied")) out.rotation_applied = d.at("rotation_applied").get<bool>();
        if (d.contains("eigengap")) out.eigengap = d.at("eigengap").get<double>();
        if (d.contains("eigengap_warning")) out.eigengap_warning = d.at("eigengap_warning").get<bool>();
        if (d.contains("homoskedastic_variance")) out.homoskedastic_variance = d.at("homoskedastic_variance").get<double>();
        if (d.contains("min_idio_eigenvalue")) out.min_idio_eigenvalue = d.at("min_idio_eigenvalue").get<double>();
        if (d.contains("warnings")) out.warnings = d.at("warnings").get<std::vector<std::string>>();
    }
    require_finite(fit.loadings, "fit loadings");
    require_finite(fit.factors, "fit factors");
    return fit;
}

Json dgp_to_json(const DgpConfig& c)
{
    return Json{{"n", c.n},
                {"T", c.T},
                {"r", c.r},
                {"tau", c.tau},
                {"delta", c.delta},
                {"theta_range", {c.theta_range.first, c.theta_range.second}},
                {"distribution", to_key(c.distribution)},
                {"band", c.band},
                {"burn_in", c.burn_in},
                {"seed", c.seed},
                {"kappa_range", {c.kappa_range.first, c.kappa_range.second}},
                {"idio_variance_range", {c.idio_variance_range.first, c.idio_variance_range.second}},
                {"noise_scaling", to_key(c.noise_scaling)},
                {"factor_normalization", to_key(c.factor_normalization)}};
}

DgpConfig dgp_from_json(const Json& j)
{
    if (!j.is_object()) throw InputError("DGP config must be a JSON object");
    DgpConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key == "n") c.n = get_int(v, key);
        else if (key == "T") c.T = get_int(v, key);
        else if (key == "r") c.r = get_int(v, key);
        else if (key == "tau") c.tau = get_double(v, key);
        else if (key == "delta") c.delta = get_double(v, key);
        else if (key == "theta_range") c.theta_range = get_range(v, key);
        else if (key == "band") c.band = get_int(v, key);
        else if (key == "burn_in") c.burn_in = get_int(v, key);
        else if (key == "seed") c.seed = get_seed(v, key);
        else if (key == "kappa_range") c.kappa_range = get_range(v, key);
        else if (key == "idio_variance_range") c.idio_variance_range = get_range(v, key);
        else if (key == "distribution") {
            const std::string s = get_string(v, key);
            if (s == "gaussian") c.distribution = Innovation::Gaussian;
            else if (s == "asym_laplace") c.distribution = Innovation::AsymLaplace;
            else bad_key(key, "expected \"gaussian\" or \"asym_laplace\"");
        } else if (key == "noise_scaling") {
            const std::string s = get_string(v, key);
            if (s == "theta_ratio") c.noise_scaling = NoiseScaling::ThetaRatio;
            else if (s == "none") c.noise_scaling = NoiseScaling::None;
            else bad_key(key, "expected \"theta_ratio\" or \"none\"");
        } else if (key == "factor_normalization") {
            const std::string s = get_string(v, key);
            if (s == "none") c.factor_normalization = FactorNormalization::None;
            else if (s == "whiten") c.factor_normalization = FactorNormalization::Whiten;
            else bad_key(key, "expected \"none\" or \"whiten\"");
        } else {
            bad_key(key, "unknown key");
        }
    }
    c.validate();
    return c;
}

McConfig mc_from_json(const Json& j)
{
    if (!j.is_object()) throw InputError("MC config must be a JSON object");
    McConfig mc;
    Json defaults = Json::object();
    const Json* grid = nullptr;
    for (const auto& [key, v] : j.items()) {
        if (key == "grid") grid = &v;
        else if (key == "cell_defaults") {
            if (!v.is_object()) bad_key(key, "expected an object");
            defaults = v;
        } else if (key == "replications") mc.replications = get_int(v, key);
        else if (key == "master_seed") mc.master_seed = get_seed(v, key);
        else if (key == "threads") mc.threads = get_int(v, key);
        else if (key == "em") mc.em = em_from_json(v);
        else bad_key(key, "unknown key");
    }
    if (!grid) bad_key("grid", "required (\"standard\" or a list of DGP objects)");

    auto cell_from = [&](const Json& cell, std::size_t index) {
        Json merged = defaults;
        merged.update(cell);
        try {
            return dgp_from_json(merged);
        } catch (const InputError& e) {
            throw InputError("grid cell " + std::to_string(index) + ": " + e.what());
        }
    };
    if (grid->is_string()) {
        if (grid->get<std::string>() != "standard") bad_key("grid", "the only named grid is \"standard\"");
        std::size_t index = 0;
        for (const DgpConfig& c : standard_grid()) {
            const Json cell{{"n", c.n}, {"T", c.T}, {"r", c.r}, {"tau", c.tau}, {"delta", c.delta},
                            {"distribution", to_key(c.distribution)}};
            mc.grid.push_back(cell_from(cell, index++));
        }
    } else if (grid->is_array()) {
        for (std::size_t i = 0; i < grid->size(); ++i) mc.grid.push_back(cell_from((*grid)[i], i));
    } else {
        bad_key("grid", "expected \"standard\" or a list of DGP objects");
    }
    mc.validate();
    return mc;
}

Json truth_to_json(const SimulatedPanel& sim)
{
    return Json{{"config", dgp_to_json(sim.config)},
                {"loadings", matrix_to_json(sim.true_loadings)},
                {"factors", matrix_to_json(sim.true_factors)},
                {"idio_variances", vector_to_json(sim.true_idio_variances)},
                {"theta", vector_to_json(sim.theta)},
                {"var_coefficients", matrix_to_json(sim.var_coefficients)},
                {"covariance_repair",
                 {{"clipped", sim.repair.clipped}, {"max_adjustment", sim.repair.max_adjustment}}}};
}

Json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw InputError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_json_file(const std::string& path, const Json& j)
{
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace fme::io
