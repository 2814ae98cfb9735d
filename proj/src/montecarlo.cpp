#include "fme/montecarlo.hpp"

#include "fme/io.hpp"
#include "fme/pca.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <sstream>

namespace fme {

using io::format_double;

namespace {

std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr int kMaxResamples = 50;

int align_columns(Matrix& estimate, const Matrix& truth)
{
    int flips = 0;
    for (Index j = 0; j < estimate.cols(); ++j) {
        if (estimate.col(j).dot(truth.col(j)) < 0.0) {
            estimate.col(j) *= -1.0;
            ++flips;
        }
    }
    return flips;
}

void mean_sd(const std::vector<double>& xs, double& mean, double& sd)
{
    const double b = static_cast<double>(xs.size());
    double s = 0.0;
    for (double x : xs) s += x;
    mean = s / b;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    sd = xs.size() > 1 ? std::sqrt(ss / (b - 1.0)) : 0.0;
}

const char* distribution_name(Innovation d)
{
    return d == Innovation::Gaussian ? "gaussian" : "asym_laplace";
}

}  // namespace

void McConfig::validate() const
{
    if (replications < 1) throw InputError("invalid config key 'replications': must be >= 1");
    if (threads < 1) throw InputError("invalid config key 'threads': must be >= 1");
    if (grid.empty()) throw InputError("invalid config key 'grid': must not be empty");
    for (const auto& cell : grid) cell.validate();
    em.validate();
}

std::vector<DgpConfig> standard_grid(NoiseScaling noise, FactorNormalization factors)
{
    std::vector<DgpConfig> grid;
    for (Innovation dist : {Innovation::Gaussian, Innovation::AsymLaplace}) {
        for (double td : {0.0, 0.5}) {
            for (int n : {20, 50, 100, 200}) {
                DgpConfig c;
                c.n = n;
                c.T = 100;
                c.r = 2;
                c.tau = td;
                c.delta = td;
                c.distribution = dist;
                c.noise_scaling = noise;
                c.factor_normalization = factors;
                grid.push_back(c);
            }
        }
    }
    return grid;
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t cell, std::size_t rep)
{
    std::uint64_t z = splitmix64(master);
    z = splitmix64(z ^ (static_cast<std::uint64_t>(cell) * 0xD1B54A32D192ED03ULL));
    z = splitmix64(z ^ static_cast<std::uint64_t>(rep));
    return z;
}

ReplicationOutput run_replication(const DgpConfig& dgp, std::uint64_t rep_seed, const EmConfig& em)
{
    ReplicationOutput out;
    for (int attempt = 0; attempt <= kMaxResamples; ++attempt) {
        DgpConfig cfg = dgp;
        cfg.seed = attempt == 0 ? rep_seed : splitmix64(rep_seed + static_cast<std::uint64_t>(attempt));
        try {
            const SimulatedPanel sim = simulate_panel(cfg);
            FactorModelFit pc = fit_pc(sim.panel, cfg.r);
            FactorModelFit qml = fit_qml_em(sim.panel, cfg.r, em);

            const Matrix& f = sim.true_factors;
            const Matrix gram = f.transpose() * f;
            out.ols = gram.llt().solve((sim.panel.values.transpose() * f).transpose()).transpose();
            out.truth = sim.true_loadings;
            out.pc = std::move(pc.loadings);
            out.qml = std::move(qml.loadings);
            out.em_converged = qml.diagnostics.converged;
            out.em_iterations = qml.diagnostics.iterations;
            out.sign_flips = align_columns(out.pc, out.truth) + align_columns(out.qml, out.truth)
                             + align_columns(out.ols, out.truth);
            return out;
        } catch (const DegenerateModelError&) {
            out.resamples += 1;
        }
    }
    throw DegenerateModelError("replication stayed degenerate after "
                               + std::to_string(kMaxResamples) + " redraws");
}

CellResult aggregate(const DgpConfig& dgp, std::span<const ReplicationOutput> reps)
{
    if (reps.empty()) throw InputError("aggregate needs at least one replication");
    const Index r = reps.front().truth.cols();
    const double n = static_cast<double>(reps.front().truth.rows());

    CellResult cell;
    cell.config = dgp;
    cell.replications = static_cast<int>(reps.size());
    for (auto* stats : {&cell.ols, &cell.pc, &cell.qml}) {
        stats->mse.assign(static_cast<std::size_t>(r), 0.0);
        stats->sd.assign(static_cast<std::size_t>(r), 0.0);
    }
    cell.distance.assign(static_cast<std::size_t>(r), 0.0);
    cell.distance_sd.assign(static_cast<std::size_t>(r), 0.0);
    cell.mse_rel.assign(static_cast<std::size_t>(r), 0.0);

    for (Index j = 0; j < r; ++j) {
        std::vector<double> e_ols, e_pc, e_qml, d;
        for (const auto& rep : reps) {
            auto col_mse = [&](const Matrix& est) {
                return (est.col(j) - rep.truth.col(j)).squaredNorm() / n;
            };
            e_ols.push_back(col_mse(rep.ols));
            e_pc.push_back(col_mse(rep.pc));
            e_qml.push_back(col_mse(rep.qml));
            d.push_back((rep.qml.col(j) - rep.pc.col(j)).squaredNorm() / n);
        }
        const auto k = static_cast<std::size_t>(j);
        mean_sd(e_ols, cell.ols.mse[k], cell.ols.sd[k]);
        mean_sd(e_pc, cell.pc.mse[k], cell.pc.sd[k]);
        mean_sd(e_qml, cell.qml.mse[k], cell.qml.sd[k]);
        mean_sd(d, cell.distance[k], cell.distance_sd[k]);
        const double pc = cell.pc.mse[k];
        const double qml = cell.qml.mse[k];
        cell.mse_rel[k] = (pc == 0.0 && qml == 0.0) ? 1.0 : pc / qml;
    }

    for (const auto& rep : reps) {
        cell.scaled_max_gap.push_back(n * (rep.qml - rep.pc).rowwise().norm().maxCoeff());
        cell.sign_flips += rep.sign_flips;
        cell.resamples += rep.resamples;
        cell.nonconverged += rep.em_converged ? 0 : 1;
    }
    return cell;
}

McResult run_monte_carlo(const McConfig& config)
{
    config.validate();
    const std::size_t cells = config.grid.size();
    const std::size_t reps = static_cast<std::size_t>(config.replications);
    const long long total = static_cast<long long>(cells * reps);

    std::vector<std::vector<ReplicationOutput>> outputs(cells, std::vector<ReplicationOutput>(reps));
    std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic, 1) num_threads(config.threads)
    for (long long task = 0; task < total; ++task) {
        const auto cell = static_cast<std::size_t>(task) / reps;
        const auto rep = static_cast<std::size_t>(task) % reps;
        try {
            outputs[cell][rep] = run_replication(
                config.grid[cell], replication_seed(config.master_seed, cell, rep), config.em);
        } catch (...) {
#pragma omp critical(fme_mc_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    McResult result;
    result.replications = config.replications;
    result.master_seed = config.master_seed;
    for (std::size_t c = 0; c < cells; ++c) {
        result.cells.push_back(aggregate(config.grid[c], outputs[c]));
    }
    return result;
}

void write_mc_csv(std::ostream& os, const McResult& result)
{
    os << "n,T,tau,delta,distribution,noise_scaling,factor_normalization,replications,metric,estimator,column,value,sd\n";
    for (const auto& cell : result.cells) {
        const auto& c = cell.config;
        const std::string prefix = std::to_string(c.n) + ',' + std::to_string(c.T) + ','
                                   + format_double(c.tau) + ',' + format_double(c.delta) + ','
                                   + distribution_name(c.distribution) + ','
                                   + (c.noise_scaling == NoiseScaling::ThetaRatio ? "theta_ratio" : "none")
                                   + ','
                                   + (c.factor_normalization == FactorNormalization::Whiten ? "whiten" : "none")
                                   + ',' + std::to_string(cell.replications) + ',';
        auto row = [&](const char* metric, const char* est, std::size_t j, double v, const std::string& sd) {
            os << prefix << metric << ',' << est << ',' << (j + 1) << ',' << format_double(v) << ',' << sd << '\n';
        };
        for (std::size_t j = 0; j < cell.distance.size(); ++j) {
            row("mse", "OLS", j, cell.ols.mse[j], format_double(cell.ols.sd[j]));
            row("mse", "PC", j, cell.pc.mse[j], format_double(cell.pc.sd[j]));
            row("mse", "QML", j, cell.qml.mse[j], format_double(cell.qml.sd[j]));
            row("distance", "QML-PC", j, cell.distance[j], format_double(cell.distance_sd[j]));
            row("mse_rel", "PC/QML", j, cell.mse_rel[j], "");
        }
        os << prefix << "sign_flips,,0," << cell.sign_flips << ",\n";
        os << prefix << "resamples,,0," << cell.resamples << ",\n";
        os << prefix << "em_nonconverged,,0," << cell.nonconverged << ",\n";
    }
}

std::string format_mc_tables(const McResult& result)
{
    std::ostringstream os;
    char buf[256];
    for (Innovation dist : {Innovation::Gaussian, Innovation::AsymLaplace}) {
        bool any = false;
        for (const auto& cell : result.cells) any = any || cell.config.distribution == dist;
        if (!any) continue;
        os << (dist == Innovation::Gaussian ? "Gaussian innovations" : "Asymmetric Laplace innovations")
           << "  (B = " << result.replications << ")\n";

        os << "MSE of the loadings, replication sd in parentheses\n";
        os << "   n    T   tau delta |";
        for (int j = 1; j <= 2; ++j) {
            std::snprintf(buf, sizeof buf, "  OLS_%d    PC_%d     QML_%d  |", j, j, j);
            os << buf;
        }
        os << '\n';
        for (const auto& cell : result.cells) {
            if (cell.config.distribution != dist) continue;
            const auto& c = cell.config;
            std::snprintf(buf, sizeof buf, "%4d %4d %5.2f %5.2f |", c.n, c.T, c.tau, c.delta);
            os << buf;
            for (std::size_t j = 0; j < cell.distance.size(); ++j) {
                std::snprintf(buf, sizeof buf, " %.4f   %.4f   %.4f  |", cell.ols.mse[j], cell.pc.mse[j],
                              cell.qml.mse[j]);
                os << buf;
            }
            os << "\n                      |";
            for (std::size_t j = 0; j < cell.distance.size(); ++j) {
                std::snprintf(buf, sizeof buf, "(%.4f) (%.4f) (%.4f)|", cell.ols.sd[j], cell.pc.sd[j],
                              cell.qml.sd[j]);
                os << buf;
            }
            os << '\n';
        }

        os << "QML vs PC: distance D_j (sd) and MSE_PC / MSE_QML\n";
        os << "   n    T   tau delta |";
        for (std::size_t j = 1; j <= 2; ++j) {
            std::snprintf(buf, sizeof buf, "     D_%zu (sd)       |", j);
            os << buf;
        }
        os << " REL_1  REL_2\n";
        for (const auto& cell : result.cells) {
            if (cell.config.distribution != dist) continue;
            const auto& c = cell.config;
            std::snprintf(buf, sizeof buf, "%4d %4d %5.2f %5.2f |", c.n, c.T, c.tau, c.delta);
            os << buf;
            for (std::size_t j = 0; j < cell.distance.size(); ++j) {
                std::snprintf(buf, sizeof buf, " %.2e (%.2e) |", cell.distance[j], cell.distance_sd[j]);
                os << buf;
            }
            for (double rel : cell.mse_rel) {
                std::snprintf(buf, sizeof buf, " %5.2f ", rel);
                os << buf;
            }
            os << '\n';
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace fme
