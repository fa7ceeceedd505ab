// Batch front end: solve a model, run replication experiments, fit
// convergence rates from an experiment CSV, check projection operator
// norms, or produce the quadrature reference solution.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddp/experiments.hpp"
#include "ddp/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitData = 4;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> method;
    int threads = 1;
};

ddp::RunConfig load_config(const CommonOpts& opts) {
    ddp::RunConfig cfg =
        opts.config_path.empty() ? ddp::RunConfig{} : ddp::load_run_config(opts.config_path);
    if (opts.seed) cfg.experiment.seed = *opts.seed;
    if (opts.method) {
        if (*opts.method == "sieve")
            cfg.experiment.method = ddp::ExperimentMethod::Sieve;
        else if (*opts.method == "self-approx")
            cfg.experiment.method = ddp::ExperimentMethod::SelfApprox;
        else
            throw ddp::ConfigError("--method must be 'sieve' or 'self-approx'");
    }
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    std::filesystem::create_directories(cfg.out_dir);
    return cfg;
}

std::ofstream open_out(const ddp::RunConfig& cfg, const std::string& name) {
    const auto path = std::filesystem::path(cfg.out_dir) / name;
    std::ofstream out(path);
    if (!out) throw ddp::DataError("cannot open output file " + path.string());
    return out;
}

int cmd_solve(const CommonOpts& opts, int n_draws) {
    const ddp::RunConfig cfg = load_config(opts);
    const ddp::ModelSpec& spec = cfg.experiment.model;
    nlohmann::json solution;
    ddp::SolveLog log;
    if (cfg.experiment.method == ddp::ExperimentMethod::Sieve) {
        auto proj = ddp::experiment_projector(cfg.experiment);
        auto ctx = ddp::make_conditional_context(
            spec, ddp::draw_conditional(spec, proj->design_points(), n_draws, cfg.experiment.seed));
        ddp::SieveSystem system = ddp::make_sieve_system(proj, ctx);
        if (cfg.experiment.n_eps > 0)
            system.set_simulated_shocks(
                ddp::draw_shocks_extreme_value(cfg.experiment.n_eps, spec.num_decisions(),
                                               ddp::derive_seed(cfg.experiment.seed, {0xe})),
                cfg.experiment.lambda);
        const ddp::SieveSolution sol = ddp::solve_sieve(system, cfg.solver, proj);
        solution = ddp::sieve_solution_to_json(sol);
        log = sol.log;
    } else {
        auto ds = ddp::draw_marginal_uniform(n_draws, cfg.experiment.z_max_sample, cfg.experiment.seed,
                                             spec.d_z);
        ddp::SelfApproxSystem system(ddp::make_self_approx_context(spec, ds));
        if (cfg.experiment.n_eps > 0)
            system.set_simulated_shocks(
                ddp::draw_shocks_extreme_value(cfg.experiment.n_eps, spec.num_decisions(),
                                               ddp::derive_seed(cfg.experiment.seed, {0xe})),
                cfg.experiment.lambda);
        const ddp::SelfApproxSolution sol = ddp::solve_self_approx(system, cfg.solver);
        solution = ddp::self_approx_solution_to_json(sol);
        log = sol.log;
    }
    {
        auto out = open_out(cfg, "solution.json");
        out << solution.dump(2) << '\n';
    }
    {
        auto out = open_out(cfg, "iterations.csv");
        ddp::write_iteration_log_csv(out, log);
    }
    std::cout << "solved: final residual " << log.final_residual << "\n";
    return kExitOk;
}

int cmd_exact(const CommonOpts& opts, int j, int quad_nodes) {
    const ddp::RunConfig cfg = load_config(opts);
    const ddp::ModelSpec& spec = cfg.experiment.model;
    const ddp::ExactReference ref = (spec.d_z == 2 && spec.kappa == 0.0)
                                        ? ddp::ExactReference::solve_additive(spec, j, quad_nodes)
                                        : ddp::ExactReference::solve(spec, j, quad_nodes);
    auto out = open_out(cfg, "exact_reference.json");
    out << ddp::sieve_solution_to_json(ref.solution()).dump(2) << '\n';
    std::cout << "exact reference written (J=" << j << ", quadrature nodes " << quad_nodes << ")\n";
    return kExitOk;
}

int cmd_experiment(const CommonOpts& opts) {
    const ddp::RunConfig cfg = load_config(opts);
    const ddp::ModelSpec& spec = cfg.experiment.model;
    const ddp::ExactReference ref = (spec.d_z == 2 && spec.kappa == 0.0)
                                        ? ddp::ExactReference::solve_additive(spec)
                                        : ddp::ExactReference::solve(spec);

    if (!cfg.lambda_sweep.empty()) {
        const auto sweep = ddp::smoothing_sweep(cfg.experiment, ref, cfg.lambda_sweep);
        auto out = open_out(cfg, "smoothing_sweep.csv");
        out << "lambda,sup_mse\n";
        for (const auto& [lambda, sup_mse] : sweep)
            out << lambda << ',' << std::setprecision(17) << sup_mse << '\n';
        std::cout << "smoothing sweep written (" << sweep.size() << " points)\n";
        return kExitOk;
    }

    const ddp::ExperimentResult result = ddp::run_experiment(cfg.experiment, ref);
    const std::string method =
        cfg.experiment.method == ddp::ExperimentMethod::Sieve ? "sieve" : "self-approx";
    {
        auto out = open_out(cfg, "experiment.csv");
        ddp::write_experiment_csv(out, method, cfg.experiment.j, cfg.experiment.lambda, spec.sigma_z,
                                  cfg.experiment.replications, result.per_n);
    }
    {
        auto out = open_out(cfg, "pointwise.csv");
        ddp::write_pointwise_csv(out, result.grid, result.per_n.back());
    }
    if (result.per_n.size() >= 3) {
        auto out = open_out(cfg, "rates.csv");
        ddp::write_rates_csv(out, {{"sup_bias", result.bias_rate}, {"sup_sd", result.sd_rate}});
    }
    {
        auto out = open_out(cfg, "result.json");
        out << ddp::experiment_result_to_json(result).dump(2) << '\n';
    }
    std::cout << "experiment complete (" << result.per_n.size() << " N values)\n";
    return kExitOk;
}

int cmd_rates(const CommonOpts& opts, const std::string& csv_path, const std::string& statistic) {
    const ddp::RunConfig cfg = load_config(opts);
    std::ifstream in(csv_path);
    if (!in) throw ddp::DataError("rates: cannot open " + csv_path);
    const auto records = ddp::read_rate_records(in, statistic);
    ddp::RateFit fit;
    try {
        fit = ddp::fit_rate(records);
    } catch (const std::domain_error& e) {
        throw ddp::DataError(e.what());
    }
    nlohmann::json j = {{"statistic", statistic},
                        {"alpha", fit.alpha},
                        {"rho", fit.rho},
                        {"r_squared", fit.r_squared}};
    auto out = open_out(cfg, "rate_fit.json");
    out << j.dump(2) << '\n';
    std::cout << statistic << ": rho " << fit.rho << ", alpha " << fit.alpha << ", R^2 "
              << fit.r_squared << "\n";
    return kExitOk;
}

int cmd_norm_check(const std::string& family, int order, int k, int m) {
    ddp::SieveSpace space;
    space.family = family == "bspline" ? ddp::BasisFamily::BSpline : ddp::BasisFamily::Chebyshev;
    space.order = order;
    space.j_per_dim = k;
    std::vector<ddp::State> design;
    for (int i = 0; i < m; ++i)
        design.push_back(ddp::make_state(space.z_min + (space.z_max - space.z_min) * i /
                                                          std::max(1, m - 1)));
    const ddp::Projector proj(space, design);
    const double norm = proj.sup_operator_norm();
    std::cout << "||P_{" << k << "," << m << "}||_inf = " << norm << " ("
              << (norm <= 1.0 + 1e-12 ? "non-expansive" : "possibly expansive") << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Replacement-model dynamic programming toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    app.add_option("--config", opts.config_path, "JSON run configuration");
    app.add_option("--seed", opts.seed, "override the base seed");
    app.add_option("--method", opts.method, "sieve | self-approx");
    app.add_option("--out-dir", opts.out_dir, "output directory");
    app.add_option("--threads", opts.threads, "worker thread count");

    auto* solve = app.add_subcommand("solve", "solve one stochastic Bellman system");
    int n_draws = 500;
    solve->add_option("--n", n_draws, "Monte Carlo draw count");

    auto* experiment = app.add_subcommand("experiment", "Monte Carlo replication study");

    auto* exact = app.add_subcommand("exact", "quadrature reference solution");
    int exact_j = 60, exact_quad = 60;
    exact->add_option("--j", exact_j, "Chebyshev basis size");
    exact->add_option("--quad-nodes", exact_quad, "Gauss-Jacobi node count");

    auto* rates = app.add_subcommand("rates", "fit a power-law rate from an experiment CSV");
    std::string rates_csv, rates_stat = "sup_sd";
    rates->add_option("csv", rates_csv, "experiment CSV path")->required();
    rates->add_option("--statistic", rates_stat, "column to fit");

    auto* norm = app.add_subcommand("norm-check", "sup norm of the sieve projection");
    std::string norm_family = "chebyshev";
    int norm_order = 2, norm_k = 4, norm_m = 64;
    norm->add_option("--family", norm_family, "chebyshev | bspline");
    norm->add_option("--order", norm_order, "B-spline degree");
    norm->add_option("--k", norm_k, "basis size");
    norm->add_option("--m", norm_m, "number of uniformly spaced design points");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve) return cmd_solve(opts, n_draws);
        if (*experiment) return cmd_experiment(opts);
        if (*exact) return cmd_exact(opts, exact_j, exact_quad);
        if (*rates) return cmd_rates(opts, rates_csv, rates_stat);
        if (*norm) return cmd_norm_check(norm_family, norm_order, norm_k, norm_m);
    } catch (const ddp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ddp::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}
