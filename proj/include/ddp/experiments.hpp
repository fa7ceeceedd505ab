#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ddp/bellman.hpp"
#include "ddp/model.hpp"
#include "ddp/rng.hpp"
#include "ddp/sieve.hpp"
#include "ddp/solver.hpp"

namespace ddp {

inline std::vector<State> uniform_grid_1d(int points, double lo, double hi) {
    std::vector<State> grid;
    grid.reserve(points);
    for (int i = 0; i < points; ++i) grid.push_back(make_state(lo + (hi - lo) * i / (points - 1)));
    return grid;
}

// ~n lattice points on [lo,hi]^2 (rounded up to a square)
inline std::vector<State> uniform_grid_2d(int points, double lo, double hi) {
    const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(points))));
    std::vector<State> grid;
    grid.reserve(side * side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j)
            grid.push_back(make_state(lo + (hi - lo) * i / (side - 1), lo + (hi - lo) * j / (side - 1)));
    return grid;
}

// ---------------------------------------------------------------------
// Exact reference: deterministic Gauss-Jacobi quadrature transition,
// rich Chebyshev sieve, solved to machine-precision residual.
// ---------------------------------------------------------------------

class ExactReference {
  public:
    // univariate or a full bivariate tensor solve
    static ExactReference solve(const ModelSpec& spec, int j = 60, int quad_nodes = 60,
                                Vector warm_start = Vector()) {
        ExactReference ref;
        ref.spec_ = spec;
        SieveSpace space{BasisFamily::Chebyshev, 0, j, spec.d_z, spec.z_min, spec.z_max_domain};
        auto proj = std::make_shared<const Projector>(space, space.default_design_points());
        auto system = make_quadrature_sieve_system(spec, proj, quad_nodes);
        SolverConfig cfg;
        ref.solution_ = solve_sieve(system, cfg, proj, std::move(warm_start));
        return ref;
    }

    // bivariate additive model: the value function is the sum of the
    // univariate solutions
    static ExactReference solve_additive(const ModelSpec& spec, int j = 60, int quad_nodes = 60) {
        if (spec.d_z != 2 || spec.kappa != 0.0)
            throw std::domain_error("ExactReference::solve_additive: needs an additive bivariate model");
        ModelSpec uni = spec;
        uni.d_z = 1;
        uni.kappa = 0.0;
        ExactReference ref = solve(uni, j, quad_nodes);
        ref.spec_ = spec;
        ref.additive_ = true;
        return ref;
    }

    double value(const State& z) const {
        if (additive_) return solution_.evaluate(z(0)) + solution_.evaluate(z(1));
        return solution_.evaluate(z);
    }
    double value(double z) const { return value(make_state(z)); }

    const SieveSolution& solution() const { return solution_; }
    const ModelSpec& model() const { return spec_; }

  private:
    ModelSpec spec_;
    SieveSolution solution_;
    bool additive_ = false;
};

// ---------------------------------------------------------------------
// Replication experiments.
// ---------------------------------------------------------------------

enum class ExperimentMethod { Sieve, SelfApprox };

struct ExperimentConfig {
    ModelSpec model;
    ExperimentMethod method = ExperimentMethod::Sieve;
    BasisFamily family = BasisFamily::Chebyshev;
    int order = 2;                       // B-spline degree
    int j = 10;                          // basis functions per dimension
    int design_m = 0;                    // 0 = J per-dim nodes; else M uniform design points
    std::vector<int> n_schedule = {500}; // Monte Carlo draw counts
    int n_eps = 0;                       // taste-shock draws; 0 = analytic path
    bool shocks_per_point = true;        // sieve path: fresh taste draws per design point
    double lambda = 0.0;                 // smoothing for simulated shocks
    int replications = 200;
    int grid_points = 500;
    double z_max_sample = 1000.0;        // marginal sampler truncation
    std::uint64_t seed = 20200604;
    SolverConfig solver;
    bool warm_start = true;              // start solves from the exact reference
    bool store_values = false;           // keep the full S x grid matrix
};

struct ReplicationSummary {
    int n = 0;
    Vector bias, variance, mse;  // pointwise over the grid
    double sup_bias = 0.0, sup_sd = 0.0, sup_mse = 0.0;
    double wall_time_s = 0.0;
    int failures = 0;
    Matrix values;  // S x grid, only if requested
};

struct RateFit {
    double alpha = 0.0;
    double rho = 0.0;
    double r_squared = 1.0;
};

struct ExperimentResult {
    std::vector<State> grid;
    std::vector<ReplicationSummary> per_n;
    RateFit bias_rate, sd_rate;
    std::uint64_t seed = 0;
};

namespace detail {

inline Vector solve_one_replication(const ExperimentConfig& cfg, const ModelSpec& spec,
                                    const std::shared_ptr<const Projector>& proj,
                                    const std::vector<State>& grid, const Vector& sieve_warm,
                                    const ExactReference* ref, int n, std::uint64_t rep_seed) {
    const int d = spec.num_decisions();
    if (cfg.method == ExperimentMethod::Sieve) {
        auto ctx = make_conditional_context(spec, draw_conditional(spec, proj->design_points(), n, rep_seed));
        SieveSystem system = make_sieve_system(proj, ctx);
        if (cfg.n_eps > 0) {
            const int m_count = static_cast<int>(proj->design_points().size());
            const int rows = cfg.shocks_per_point ? cfg.n_eps * m_count : cfg.n_eps;
            ShockSet shocks = draw_shocks_extreme_value(rows, d, derive_seed(rep_seed, {0xe}));
            if (cfg.shocks_per_point) shocks.w = Vector::Constant(cfg.n_eps, 1.0 / cfg.n_eps);
            system.set_simulated_shocks(std::move(shocks), cfg.lambda, cfg.shocks_per_point);
        }
        const Vector alpha = ddp::solve(system, sieve_warm, cfg.solver);
        Vector out(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) out(g) = proj->evaluate(alpha, grid[g]);
        return out;
    }
    auto ds = draw_marginal_uniform(n, cfg.z_max_sample, rep_seed, spec.d_z);
    SelfApproxSystem system(make_self_approx_context(spec, ds));
    if (cfg.n_eps > 0)
        system.set_simulated_shocks(draw_shocks_extreme_value(cfg.n_eps, d, derive_seed(rep_seed, {0xe})),
                                    cfg.lambda);
    Vector v0 = Vector::Zero(n);
    if (cfg.warm_start && ref)
        for (int i = 0; i < n; ++i) v0(i) = ref->value(system.context().nodes[i]);
    SelfApproxSolution sol = solve_self_approx(system, cfg.solver, std::move(v0));
    Vector out(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) out(g) = evaluate_self_approx(sol, grid[g]);
    return out;
}

}  // namespace detail

inline std::vector<State> experiment_grid(const ExperimentConfig& cfg) {
    return cfg.model.d_z == 1 ? uniform_grid_1d(cfg.grid_points, cfg.model.z_min, cfg.model.z_max_domain)
                              : uniform_grid_2d(cfg.grid_points, cfg.model.z_min, cfg.model.z_max_domain);
}

inline std::shared_ptr<const Projector> experiment_projector(const ExperimentConfig& cfg) {
    SieveSpace space{cfg.family, cfg.order, cfg.j, cfg.model.d_z, cfg.model.z_min, cfg.model.z_max_domain};
    if (cfg.design_m <= 0) return std::make_shared<const Projector>(space, space.default_design_points());
    std::vector<State> design = cfg.model.d_z == 1
                                    ? uniform_grid_1d(cfg.design_m, cfg.model.z_min, cfg.model.z_max_domain)
                                    : uniform_grid_2d(cfg.design_m, cfg.model.z_min, cfg.model.z_max_domain);
    return std::make_shared<const Projector>(space, std::move(design));
}

inline ReplicationSummary run_replications(const ExperimentConfig& cfg, const ExactReference& ref, int n) {
    if (cfg.replications < 2) throw std::domain_error("run_replications: need S >= 2");
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<State> grid = experiment_grid(cfg);
    const int g_count = static_cast<int>(grid.size());
    const int s_count = cfg.replications;

    std::shared_ptr<const Projector> proj;
    Vector sieve_warm;
    if (cfg.method == ExperimentMethod::Sieve) {
        proj = experiment_projector(cfg);
        sieve_warm = Vector::Zero(proj->space().K());
        if (cfg.warm_start) {
            Vector ref_at_design(proj->design_points().size());
            for (std::size_t m = 0; m < proj->design_points().size(); ++m)
                ref_at_design(m) = ref.value(proj->design_points()[m]);
            sieve_warm = proj->project(ref_at_design);
        }
    }

    Matrix values(s_count, g_count);
    int failures = 0;
    int stored = 0;
    for (int s = 0; s < s_count; ++s) {
        const std::uint64_t rep_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(n),
                                                             static_cast<std::uint64_t>(s)});
        try {
            values.row(stored) =
                detail::solve_one_replication(cfg, cfg.model, proj, grid, sieve_warm, &ref, n, rep_seed)
                    .transpose();
            ++stored;
        } catch (const std::runtime_error&) {
            ++failures;
            if (failures * 100 > s_count)
                throw MaxIterations("run_replications: more than 1% of replications failed");
        }
    }

    ReplicationSummary out;
    out.n = n;
    out.failures = failures;
    out.bias.resize(g_count);
    out.variance.resize(g_count);
    out.mse.resize(g_count);
    for (int g = 0; g < g_count; ++g) {
        const auto col = values.col(g).head(stored);
        const double mean = col.mean();
        out.bias(g) = mean - ref.value(grid[g]);
        out.variance(g) = (col.array() - mean).square().sum() / stored;
        out.mse(g) = out.bias(g) * out.bias(g) + out.variance(g);
    }
    out.sup_bias = out.bias.cwiseAbs().maxCoeff();
    out.sup_sd = std::sqrt(out.variance.maxCoeff());
    out.sup_mse = out.mse.maxCoeff();
    if (cfg.store_values) out.values = values.topRows(stored);
    out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// Power-law exponent fit: statistic = exp(alpha + rho ln N), estimated
// by least squares in logs.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& records) {
    std::vector<std::pair<double, double>> logs;
    for (const auto& [n, stat] : records)
        if (stat > 0.0) logs.push_back({std::log(n), std::log(stat)});
    if (logs.size() < 3) throw std::domain_error("fit_rate: need at least 3 positive data points");
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : logs) {
        mx += x;
        my += y;
    }
    mx /= logs.size();
    my /= logs.size();
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : logs) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if (!(sxx > 0.0)) throw std::domain_error("fit_rate: need at least 3 distinct N values");
    RateFit fit;
    fit.rho = sxy / sxx;
    fit.alpha = my - fit.rho * mx;
    fit.r_squared = (syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExactReference& ref) {
    ExperimentResult result;
    result.grid = experiment_grid(cfg);
    result.seed = cfg.seed;
    std::vector<std::pair<double, double>> bias_records, sd_records;
    for (int n : cfg.n_schedule) {
        result.per_n.push_back(run_replications(cfg, ref, n));
        const auto& rec = result.per_n.back();
        bias_records.push_back({static_cast<double>(n), rec.sup_bias});
        sd_records.push_back({static_cast<double>(n), rec.sup_sd});
    }
    if (cfg.n_schedule.size() >= 3) {
        result.bias_rate = fit_rate(bias_records);
        result.sd_rate = fit_rate(sd_records);
    }
    return result;
}

// ---------------------------------------------------------------------
// Diagnostics.
// ---------------------------------------------------------------------

struct NormalityStats {
    double mean = 0.0;
    double sd = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    double ks_distance = 0.0;
};

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline NormalityStats normality_diagnostic(const Vector& values) {
    const int s = static_cast<int>(values.size());
    if (s < 100) throw std::domain_error("normality_diagnostic: need at least 100 values");
    NormalityStats stats;
    stats.mean = values.mean();
    const Vector dev = values.array() - stats.mean;
    const double m2 = dev.array().square().mean();
    if (!(m2 > 0.0)) throw std::domain_error("normality_diagnostic: zero variance");
    stats.sd = std::sqrt(m2);
    stats.skewness = dev.array().cube().mean() / (m2 * stats.sd);
    stats.excess_kurtosis = dev.array().square().square().mean() / (m2 * m2) - 3.0;

    std::vector<double> z(s);
    for (int i = 0; i < s; ++i) z[i] = dev(i) / stats.sd;
    std::sort(z.begin(), z.end());
    double ks = 0.0;
    for (int i = 0; i < s; ++i) {
        const double cdf = standard_normal_cdf(z[i]);
        ks = std::max(ks, std::max(std::abs(cdf - static_cast<double>(i) / s),
                                   std::abs(cdf - static_cast<double>(i + 1) / s)));
    }
    stats.ks_distance = ks;
    return stats;
}

// MSE sup-norms across a grid of smoothing parameters, on the
// simulated-taste-shock operator path.
inline std::vector<std::pair<double, double>> smoothing_sweep(ExperimentConfig cfg, const ExactReference& ref,
                                                              const std::vector<double>& lambdas) {
    if (cfg.n_eps <= 0) throw std::domain_error("smoothing_sweep: requires simulated taste shocks (n_eps > 0)");
    if (cfg.n_schedule.size() != 1) throw std::domain_error("smoothing_sweep: single N expected");
    std::vector<std::pair<double, double>> out;
    for (double lambda : lambdas) {
        cfg.lambda = lambda;
        const ReplicationSummary rec = run_replications(cfg, ref, cfg.n_schedule.front());
        out.push_back({lambda, rec.sup_mse});
    }
    return out;
}

// Tensor coefficients of a bivariate sieve solution in (j1, j2) layout.
inline Matrix coefficient_report(const SieveSolution& sol) {
    const SieveSpace& space = sol.projector->space();
    if (space.d_z != 2) throw std::domain_error("coefficient_report: bivariate solution expected");
    const int j = space.j_per_dim;
    Matrix table(j, j);
    for (int j1 = 0; j1 < j; ++j1)
        for (int j2 = 0; j2 < j; ++j2) table(j1, j2) = sol.alpha(j1 * j + j2);
    return table;
}

}  // namespace ddp
