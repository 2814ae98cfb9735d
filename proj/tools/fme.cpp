// fme: factor model estimation, simulation and Monte Carlo from the command line.
//
// Exit codes: 0 success, 2 input error, 3 degenerate model.

#include "fme/factors.hpp"
#include "fme/inference.hpp"
#include "fme/io.hpp"
#include "fme/montecarlo.hpp"
#include "fme/pca.hpp"
#include "fme/qml.hpp"
#include "fme/simulate.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace fme;

constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;

struct EstimateArgs {
    std::string input;
    std::string output;
    int r = 0;
    std::string method = "pc";
    bool demean = false;
    int em_max_iter = EmConfig{}.max_iterations;
    double em_tol = EmConfig{}.loglik_rel_tol;
};

struct FactorsArgs {
    std::string fit;
    std::string input;
    std::string estimator = "gls";
    std::string output;
};

struct SeArgs {
    std::string fit;
    std::string input;
    std::string bandwidth = "auto";
    double level = 0.95;
    std::string output;
};

struct SimulateArgs {
    std::string config;
    std::string output;
    std::string truth;
};

struct McArgs {
    std::string config;
    std::string out;
    std::string table;
    std::optional<int> reps;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

// The panel a fit was estimated on, with the fit's own centering applied.
PanelData aligned_panel(const FactorModelFit& fit, const std::string& path)
{
    PanelData panel = io::read_panel_csv(path);
    if (panel.series() != fit.loadings.rows()) {
        throw InputError("panel has " + std::to_string(panel.series()) + " series but the fit has "
                         + std::to_string(fit.loadings.rows()));
    }
    if (fit.demeaned) {
        panel.values.rowwise() -= fit.column_means.transpose();
        panel.column_means = fit.column_means;
        panel.demeaned = true;
    }
    return panel;
}

std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    return out;
}

int run_estimate(const EstimateArgs& a)
{
    PanelData panel = io::read_panel_csv(a.input);
    if (a.demean) panel = demean(panel);

    FactorModelFit fit;
    if (a.method == "pc") {
        fit = fit_pc(panel, a.r);
    } else if (a.method == "qml") {
        EmConfig em;
        em.max_iterations = a.em_max_iter;
        em.loglik_rel_tol = a.em_tol;
        fit = fit_qml_em(panel, a.r, em);
    } else if (a.method == "qml-homo") {
        fit = fit_qml_homoskedastic(panel, a.r);
    } else {
        throw InputError("unknown method '" + a.method + "'");
    }

    for (const auto& w : fit.diagnostics.warnings) std::cerr << "warning: " << w << '\n';
    if (!fit.diagnostics.converged) {
        std::cerr << "warning: EM did not converge after " << fit.diagnostics.iterations << " iterations\n";
    }
    io::write_json_file(a.output, io::fit_to_json(fit, panel.names));
    return 0;
}

int run_factors(const FactorsArgs& a)
{
    const FactorModelFit fit = io::fit_from_json(io::read_json_file(a.fit));
    const PanelData panel = aligned_panel(fit, a.input);

    Matrix f;
    if (a.estimator == "ols") f = factors_ols(panel, fit.loadings);
    else if (a.estimator == "gls") f = factors_gls(panel, fit.loadings, fit.idio_variances);
    else if (a.estimator == "lp") f = factors_lp(panel, fit.loadings, fit.idio_variances);
    else throw InputError("unknown estimator '" + a.estimator + "'");

    std::vector<std::string> header;
    for (int j = 1; j <= fit.r; ++j) header.push_back("F" + std::to_string(j));
    if (a.output.empty()) {
        io::write_matrix_csv(std::cout, f, header);
    } else {
        auto out = open_output(a.output);
        io::write_matrix_csv(out, f, header);
    }
    return 0;
}

int run_se(const SeArgs& a)
{
    const FactorModelFit fit = io::fit_from_json(io::read_json_file(a.fit));
    const PanelData panel = aligned_panel(fit, a.input);
    if (fit.factors.rows() != panel.periods()) {
        throw InputError("panel has " + std::to_string(panel.periods()) + " periods but the fit has "
                         + std::to_string(fit.factors.rows()));
    }

    HacOptions hac_opts;
    if (a.bandwidth != "auto") {
        int m = 0;
        try {
            std::size_t used = 0;
            m = std::stoi(a.bandwidth, &used);
            if (used != a.bandwidth.size()) throw std::invalid_argument(a.bandwidth);
        } catch (const std::exception&) {
            throw InputError("--bandwidth must be 'auto' or a non-negative integer");
        }
        hac_opts = HacOptions::fixed(m);
    }
    const Matrix residuals = panel.values - fit.factors * fit.loadings.transpose();
    const HacCovariance hac = hac_phi(fit.factors, residuals, hac_opts);
    const auto intervals = loading_confidence_intervals(fit, hac, a.level);
    std::cerr << "HAC bandwidth: " << hac.bandwidth_used << '\n';

    std::ofstream file;
    if (!a.output.empty()) file = open_output(a.output);
    std::ostream& os = a.output.empty() ? std::cout : file;
    os << "series,factor,estimate,std_error,lower,upper\n";
    for (const auto& iv : intervals) {
        const std::string name = panel.names.empty() ? std::to_string(iv.series + 1)
                                                     : panel.names[static_cast<std::size_t>(iv.series)];
        os << name << ',' << (iv.factor + 1) << ',' << io::format_double(iv.estimate) << ','
           << io::format_double(iv.std_error) << ',' << io::format_double(iv.lower) << ','
           << io::format_double(iv.upper) << '\n';
    }
    return 0;
}

int run_simulate(const SimulateArgs& a)
{
    const DgpConfig config = io::dgp_from_json(io::read_json_file(a.config));
    const SimulatedPanel sim = simulate_panel(config);
    if (sim.repair.clipped > 0) {
        std::cerr << "warning: idiosyncratic covariance repaired (" << sim.repair.clipped
                  << " eigenvalues clipped, max adjustment " << sim.repair.max_adjustment << ")\n";
    }
    io::write_panel_csv(a.output, sim.panel);
    if (!a.truth.empty()) io::write_json_file(a.truth, io::truth_to_json(sim));
    return 0;
}

int run_mc(const McArgs& a)
{
    McConfig config = io::mc_from_json(io::read_json_file(a.config));
    if (a.reps) config.replications = *a.reps;
    if (a.seed) config.master_seed = *a.seed;
    if (a.threads) {
        config.threads = *a.threads;
    } else if (const char* env = std::getenv("FME_THREADS")) {
        try {
            config.threads = std::stoi(env);
        } catch (const std::exception&) {
            throw InputError("FME_THREADS must be a positive integer");
        }
    }
    config.validate();

    const McResult result = run_monte_carlo(config);
    {
        auto out = open_output(a.out);
        write_mc_csv(out, result);
    }
    const std::string tables = format_mc_tables(result);
    if (a.table.empty()) {
        std::cout << tables;
    } else {
        auto out = open_output(a.table);
        out << tables;
    }
    int flips = 0, resamples = 0, nonconverged = 0;
    for (const auto& cell : result.cells) {
        flips += cell.sign_flips;
        resamples += cell.resamples;
        nonconverged += cell.nonconverged;
    }
    std::cerr << "sign flips: " << flips << ", resampled draws: " << resamples << '\n';
    if (nonconverged > 0) {
        std::cerr << "warning: EM did not converge in " << nonconverged << " replications\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Approximate factor model estimation (PC, QML), simulation and Monte Carlo"};
    app.require_subcommand(1);

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate", "Estimate loadings and factors from a CSV panel");
    c_est->add_option("--input", est.input, "Panel CSV (header row of series names)")->required();
    c_est->add_option("--r", est.r, "Number of factors")->required();
    c_est->add_option("--method", est.method, "pc, qml or qml-homo")
        ->check(CLI::IsMember({"pc", "qml", "qml-homo"}));
    c_est->add_flag("--demean", est.demean, "Subtract column means first");
    c_est->add_option("--em-max-iter", est.em_max_iter, "EM iteration cap");
    c_est->add_option("--em-tol", est.em_tol, "EM relative log-likelihood tolerance");
    c_est->add_option("--output", est.output, "Fit JSON to write")->required();

    FactorsArgs fac;
    auto* c_fac = app.add_subcommand("factors", "Recover factors from a fit");
    c_fac->add_option("--fit", fac.fit, "Fit JSON")->required();
    c_fac->add_option("--input", fac.input, "Panel CSV")->required();
    c_fac->add_option("--estimator", fac.estimator, "ols, gls or lp")->check(CLI::IsMember({"ols", "gls", "lp"}));
    c_fac->add_option("--output", fac.output, "CSV to write (default: stdout)");

    SeArgs se;
    auto* c_se = app.add_subcommand("se", "HAC standard errors and confidence intervals for the loadings");
    c_se->add_option("--fit", se.fit, "Fit JSON")->required();
    c_se->add_option("--input", se.input, "Panel CSV")->required();
    c_se->add_option("--bandwidth", se.bandwidth, "auto or a non-negative integer");
    c_se->add_option("--level", se.level, "Confidence level");
    c_se->add_option("--output", se.output, "CSV to write (default: stdout)");

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Draw one panel from a DGP config");
    c_sim->add_option("--config", sim.config, "DGP JSON")->required();
    c_sim->add_option("--output", sim.output, "Panel CSV to write")->required();
    c_sim->add_option("--truth", sim.truth, "Truth JSON to write");

    McArgs mc;
    auto* c_mc = app.add_subcommand("mc", "Monte Carlo tables over a DGP grid");
    c_mc->add_option("--config", mc.config, "MC JSON")->required();
    c_mc->add_option("--reps", mc.reps, "Replications per cell (overrides the config)");
    c_mc->add_option("--seed", mc.seed, "Master seed (overrides the config)");
    c_mc->add_option("--out", mc.out, "Results CSV to write")->required();
    c_mc->add_option("--threads", mc.threads, "Worker threads (default: FME_THREADS, then the config)");
    c_mc->add_option("--table", mc.table, "Text tables to write (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*c_est) return run_estimate(est);
        if (*c_fac) return run_factors(fac);
        if (*c_se) return run_se(se);
        if (*c_sim) return run_simulate(sim);
        if (*c_mc) return run_mc(mc);
    } catch (const DegenerateModelError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}
