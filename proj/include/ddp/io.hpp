#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddp/experiments.hpp"
#include "ddp/model.hpp"
#include "ddp/sieve.hpp"
#include "ddp/solver.hpp"

namespace ddp {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------
// Run configuration (JSON, schema-validated, unknown keys rejected).
// ---------------------------------------------------------------------

struct RunConfig {
    ModelSpec model;
    ExperimentConfig experiment;  // carries method/sieve/sampler parameters too
    SolverConfig solver;
    std::vector<double> lambda_sweep;
    std::string out_dir = ".";
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& section,
                           const std::vector<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("config: unknown key '" + key + "' in section '" + section + "'");
    }
}

template <class T>
void read_field(const json& obj, const std::string& section, const std::string& key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for '" + section + "." + key + "'");
    }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& root) {
    using detail::read_field;
    detail::reject_unknown(root, "<top>", {"model", "method", "solver", "experiment", "output"});
    RunConfig cfg;

    if (root.contains("model")) {
        const auto& m = root.at("model");
        detail::reject_unknown(m, "model",
                               {"beta", "rc", "theta_c", "lambda_ev", "sigma_z", "a", "b", "pi", "d_z",
                                "kappa", "z_min", "z_max"});
        read_field(m, "model", "beta", cfg.model.beta);
        read_field(m, "model", "rc", cfg.model.rc);
        read_field(m, "model", "theta_c", cfg.model.theta_c);
        read_field(m, "model", "lambda_ev", cfg.model.lambda_ev);
        read_field(m, "model", "sigma_z", cfg.model.sigma_z);
        read_field(m, "model", "a", cfg.model.a);
        read_field(m, "model", "b", cfg.model.b);
        read_field(m, "model", "pi", cfg.model.pi);
        read_field(m, "model", "d_z", cfg.model.d_z);
        read_field(m, "model", "kappa", cfg.model.kappa);
        read_field(m, "model", "z_min", cfg.model.z_min);
        read_field(m, "model", "z_max", cfg.model.z_max_domain);
        try {
            cfg.model.validate();
        } catch (const std::domain_error& e) {
            throw ConfigError(std::string("config: model: ") + e.what());
        }
    }

    if (root.contains("method")) {
        const auto& m = root.at("method");
        detail::reject_unknown(m, "method",
                               {"kind", "family", "order", "j", "lambda", "n_eps", "z_max_sample"});
        std::string kind = "sieve";
        read_field(m, "method", "kind", kind);
        if (kind == "sieve")
            cfg.experiment.method = ExperimentMethod::Sieve;
        else if (kind == "self-approx")
            cfg.experiment.method = ExperimentMethod::SelfApprox;
        else
            throw ConfigError("config: method.kind must be 'sieve' or 'self-approx'");
        std::string family = "chebyshev";
        read_field(m, "method", "family", family);
        if (family == "chebyshev")
            cfg.experiment.family = BasisFamily::Chebyshev;
        else if (family == "bspline")
            cfg.experiment.family = BasisFamily::BSpline;
        else
            throw ConfigError("config: method.family must be 'chebyshev' or 'bspline'");
        read_field(m, "method", "order", cfg.experiment.order);
        read_field(m, "method", "j", cfg.experiment.j);
        read_field(m, "method", "lambda", cfg.experiment.lambda);
        read_field(m, "method", "n_eps", cfg.experiment.n_eps);
        read_field(m, "method", "z_max_sample", cfg.experiment.z_max_sample);
        if (cfg.experiment.j < 1) throw ConfigError("config: method.j must be >= 1");
        if (cfg.experiment.lambda < 0.0) throw ConfigError("config: method.lambda must be >= 0");
    }

    if (root.contains("solver")) {
        const auto& s = root.at("solver");
        detail::reject_unknown(s, "solver",
                               {"method", "tol", "max_iterations", "max_newton_iterations",
                                "switch_residual", "switch_iterations"});
        std::string method = "hybrid";
        read_field(s, "solver", "method", method);
        if (method == "sa")
            cfg.solver.method = Method::SA;
        else if (method == "nk")
            cfg.solver.method = Method::NK;
        else if (method == "hybrid")
            cfg.solver.method = Method::Hybrid;
        else
            throw ConfigError("config: solver.method must be 'sa', 'nk' or 'hybrid'");
        read_field(s, "solver", "tol", cfg.solver.tol);
        read_field(s, "solver", "max_iterations", cfg.solver.max_iterations);
        read_field(s, "solver", "max_newton_iterations", cfg.solver.max_newton_iterations);
        read_field(s, "solver", "switch_residual", cfg.solver.switch_residual);
        read_field(s, "solver", "switch_iterations", cfg.solver.switch_iterations);
        if (!(cfg.solver.tol > 0.0)) throw ConfigError("config: solver.tol must be > 0");
    }

    if (root.contains("experiment")) {
        const auto& e = root.at("experiment");
        detail::reject_unknown(e, "experiment",
                               {"s", "n_schedule", "lambda_sweep", "grid_points", "seed"});
        read_field(e, "experiment", "s", cfg.experiment.replications);
        read_field(e, "experiment", "n_schedule", cfg.experiment.n_schedule);
        read_field(e, "experiment", "grid_points", cfg.experiment.grid_points);
        read_field(e, "experiment", "seed", cfg.experiment.seed);
        if (e.contains("lambda_sweep")) {
            try {
                cfg.lambda_sweep = e.at("lambda_sweep").get<std::vector<double>>();
            } catch (const nlohmann::json::exception&) {
                throw ConfigError("config: bad value for 'experiment.lambda_sweep'");
            }
        }
        if (cfg.experiment.replications < 2) throw ConfigError("config: experiment.s must be >= 2");
        for (int n : cfg.experiment.n_schedule)
            if (n < 1) throw ConfigError("config: experiment.n_schedule entries must be >= 1");
    }

    if (root.contains("output")) {
        const auto& o = root.at("output");
        detail::reject_unknown(o, "output", {"dir"});
        read_field(o, "output", "dir", cfg.out_dir);
    }

    cfg.experiment.model = cfg.model;
    cfg.experiment.solver = cfg.solver;
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    return parse_run_config(root);
}

// ---------------------------------------------------------------------
// CSV serialization.
// ---------------------------------------------------------------------

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream s;
    s.precision(17);
    s << x;
    return s.str();
}

}  // namespace detail

inline void write_experiment_csv(std::ostream& out, const std::string& method, int k, double lambda,
                                 double sigma_z, int s, const std::vector<ReplicationSummary>& records) {
    out << "method,K,N,lambda,sigma_z,S,sup_bias,sup_sd,sup_mse,wall_time_s\n";
    for (const auto& rec : records)
        out << method << ',' << k << ',' << rec.n << ',' << detail::fmt(lambda) << ','
            << detail::fmt(sigma_z) << ',' << s << ',' << detail::fmt(rec.sup_bias) << ','
            << detail::fmt(rec.sup_sd) << ',' << detail::fmt(rec.sup_mse) << ','
            << detail::fmt(rec.wall_time_s) << '\n';
}

inline void write_pointwise_csv(std::ostream& out, const std::vector<State>& grid,
                                const ReplicationSummary& rec) {
    out << "z,bias,var,mse\n";
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const State& z = grid[g];
        std::ostringstream zs;
        zs.precision(17);
        zs << z(0);
        if (z.size() == 2) zs << ';' << z(1);
        out << zs.str() << ',' << detail::fmt(rec.bias(g)) << ',' << detail::fmt(rec.variance(g)) << ','
            << detail::fmt(rec.mse(g)) << '\n';
    }
}

inline void write_rates_csv(std::ostream& out, const std::vector<std::pair<std::string, RateFit>>& fits) {
    out << "statistic,alpha,rho,r_squared\n";
    for (const auto& [name, fit] : fits)
        out << name << ',' << detail::fmt(fit.alpha) << ',' << detail::fmt(fit.rho) << ','
            << detail::fmt(fit.r_squared) << '\n';
}

inline void write_iteration_log_csv(std::ostream& out, const SolveLog& log) {
    out << "iter,method,residual,wall_time_ms\n";
    for (const auto& rec : log.records)
        out << rec.iter << ',' << rec.method << ',' << detail::fmt(rec.residual) << ','
            << detail::fmt(rec.wall_time_ms) << '\n';
}

// Reads an experiment CSV back as (N, statistic) records for rate fits.
inline std::vector<std::pair<double, double>> read_rate_records(std::istream& in,
                                                                const std::string& statistic) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("rates: empty CSV");
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    int n_col = -1, stat_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "N") n_col = static_cast<int>(i);
        if (header[i] == statistic) stat_col = static_cast<int>(i);
    }
    if (n_col < 0 || stat_col < 0) throw DataError("rates: column 'N' or '" + statistic + "' missing");
    std::vector<std::pair<double, double>> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) <= std::max(n_col, stat_col))
            throw DataError("rates: short row in CSV");
        try {
            records.push_back({std::stod(cells[n_col]), std::stod(cells[stat_col])});
        } catch (const std::exception&) {
            throw DataError("rates: non-numeric cell in CSV");
        }
    }
    return records;
}

// ---------------------------------------------------------------------
// JSON serialization of solutions and results.
// ---------------------------------------------------------------------

inline nlohmann::json sieve_solution_to_json(const SieveSolution& sol) {
    const SieveSpace& space = sol.projector->space();
    nlohmann::json j;
    j["kind"] = "sieve";
    j["family"] = space.family == BasisFamily::Chebyshev ? "chebyshev" : "bspline";
    j["order"] = space.order;
    j["j_per_dim"] = space.j_per_dim;
    j["d_z"] = space.d_z;
    j["z_min"] = space.z_min;
    j["z_max"] = space.z_max;
    j["alpha"] = std::vector<double>(sol.alpha.data(), sol.alpha.data() + sol.alpha.size());
    j["final_residual"] = sol.log.final_residual;
    return j;
}

inline SieveSolution sieve_solution_from_json(const nlohmann::json& j) {
    SieveSpace space;
    space.family = j.at("family").get<std::string>() == "chebyshev" ? BasisFamily::Chebyshev
                                                                    : BasisFamily::BSpline;
    space.order = j.at("order").get<int>();
    space.j_per_dim = j.at("j_per_dim").get<int>();
    space.d_z = j.at("d_z").get<int>();
    space.z_min = j.at("z_min").get<double>();
    space.z_max = j.at("z_max").get<double>();
    SieveSolution sol;
    sol.projector = std::make_shared<const Projector>(space, space.default_design_points());
    const auto alpha = j.at("alpha").get<std::vector<double>>();
    sol.alpha = Eigen::Map<const Vector>(alpha.data(), alpha.size());
    return sol;
}

inline nlohmann::json self_approx_solution_to_json(const SelfApproxSolution& sol) {
    nlohmann::json j;
    j["kind"] = "self-approx";
    nlohmann::json nodes = nlohmann::json::array();
    for (const State& z : sol.nodes) {
        if (z.size() == 1)
            nodes.push_back(z(0));
        else
            nodes.push_back({z(0), z(1)});
    }
    j["nodes"] = std::move(nodes);
    j["values"] = std::vector<double>(sol.v.data(), sol.v.data() + sol.v.size());
    j["final_residual"] = sol.log.final_residual;
    return j;
}

inline nlohmann::json experiment_result_to_json(const ExperimentResult& result) {
    nlohmann::json j;
    j["seed"] = result.seed;
    nlohmann::json per_n = nlohmann::json::array();
    for (const auto& rec : result.per_n) {
        nlohmann::json r;
        r["n"] = rec.n;
        r["sup_bias"] = rec.sup_bias;
        r["sup_sd"] = rec.sup_sd;
        r["sup_mse"] = rec.sup_mse;
        r["wall_time_s"] = rec.wall_time_s;
        r["failures"] = rec.failures;
        per_n.push_back(std::move(r));
    }
    j["per_n"] = std::move(per_n);
    if (result.per_n.size() >= 3) {
        j["bias_rate"] = {{"alpha", result.bias_rate.alpha},
                          {"rho", result.bias_rate.rho},
                          {"r_squared", result.bias_rate.r_squared}};
        j["sd_rate"] = {{"alpha", result.sd_rate.alpha},
                        {"rho", result.sd_rate.rho},
                        {"r_squared", result.sd_rate.r_squared}};
    }
    return j;
}

}  // namespace ddp
