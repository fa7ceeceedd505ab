#include <cmath>
#include <random>

#include "ddp/experiments.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ddp;
using ddp::test::default_model;

TEST_CASE("exact reference is deterministic and solves the quadrature operator") {
    const ModelSpec spec = default_model();
    const ExactReference ref1 = ExactReference::solve(spec);
    const ExactReference ref2 = ExactReference::solve(spec);
    for (double z : {0.0, 123.4, 500.0, 999.0}) CHECK(ref1.value(z) == ref2.value(z));

    // with M = K interpolatory design points the projected fixed point
    // satisfies the quadrature Bellman equation exactly at the nodes
    const auto& nodes = ref1.solution().projector->design_points();
    const auto v_fn = [&](const State& z) { return ref1.value(z); };
    const Vector gv = apply_gamma_bar_quadrature(spec, v_fn, nodes);
    for (std::size_t m = 0; m < nodes.size(); ++m)
        CHECK(std::abs(gv(static_cast<int>(m)) - ref1.value(nodes[m])) < 1e-9);
}

TEST_CASE("additive bivariate reference is the sum of univariate references") {
    ModelSpec spec = default_model();
    spec.d_z = 2;
    const ExactReference ref2d = ExactReference::solve_additive(spec);
    const ExactReference ref1d = ExactReference::solve(default_model());
    for (const State& z : uniform_grid_2d(250, 0.0, 1000.0))
        CHECK(std::abs(ref2d.value(z) - ref1d.value(z(0)) - ref1d.value(z(1))) < 1e-6);
}

TEST_CASE("rate fit recovers an exact power law") {
    std::vector<std::pair<double, double>> records;
    for (double n : {100.0, 200.0, 500.0, 1000.0, 2000.0}) records.push_back({n, 2.0 / std::sqrt(n)});
    const RateFit fit = fit_rate(records);
    CHECK(fit.rho == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(fit.alpha == doctest::Approx(std::log(2.0)).epsilon(1e-10));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rate fit of constant data has zero exponent") {
    const RateFit fit = fit_rate({{100.0, 3.5}, {200.0, 3.5}, {400.0, 3.5}});
    CHECK(fit.rho == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rate fit excludes non-positive statistics and needs three points") {
    // the non-positive record is dropped, leaving an exact power law
    const RateFit fit = fit_rate({{100.0, 0.1}, {400.0, 0.05}, {1600.0, 0.025}, {800.0, -1.0}});
    CHECK(fit.rho == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK_THROWS_AS(fit_rate({{100.0, 1.0}, {200.0, 0.5}}), std::domain_error);
    CHECK_THROWS_AS(fit_rate({{100.0, 1.0}, {200.0, -0.5}, {400.0, 0.25}}), std::domain_error);
}

TEST_CASE("normality diagnostic is calibrated on Gaussian input") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector values(2000);
    for (int i = 0; i < values.size(); ++i) values(i) = normal(rng);
    const NormalityStats stats = normality_diagnostic(values);
    CHECK(std::abs(stats.mean) < 0.1);
    CHECK(stats.sd == doctest::Approx(1.0).epsilon(0.1));
    CHECK(std::abs(stats.skewness) < 0.15);
    CHECK(std::abs(stats.excess_kurtosis) < 0.3);
    CHECK(stats.ks_distance < 0.035);
}

TEST_CASE("normality diagnostic rejects constant input") {
    CHECK_THROWS_AS(normality_diagnostic(Vector::Constant(500, 2.0)), std::domain_error);
}

TEST_CASE("replication summary satisfies the MSE identity and is deterministic") {
    ExperimentConfig cfg;
    cfg.model = default_model();
    cfg.method = ExperimentMethod::Sieve;
    cfg.j = 5;
    cfg.replications = 10;
    cfg.grid_points = 50;
    const ExactReference ref = ExactReference::solve(cfg.model);
    const ReplicationSummary a = run_replications(cfg, ref, 100);
    for (int g = 0; g < a.bias.size(); ++g)
        CHECK(std::abs(a.mse(g) - (a.bias(g) * a.bias(g) + a.variance(g))) < 1e-12);
    const ReplicationSummary b = run_replications(cfg, ref, 100);
    CHECK(a.sup_bias == b.sup_bias);
    CHECK(a.sup_sd == b.sup_sd);
    CHECK((a.bias - b.bias).cwiseAbs().maxCoeff() == 0.0);

    ExperimentConfig other = cfg;
    other.seed += 1;
    const ReplicationSummary c = run_replications(other, ref, 100);
    CHECK(a.sup_sd != c.sup_sd);
}

TEST_CASE("sieve replications at K=10 track the reference closely") {
    ExperimentConfig cfg;
    cfg.model = default_model();
    cfg.method = ExperimentMethod::Sieve;
    cfg.j = 10;
    cfg.replications = 20;
    cfg.grid_points = 100;
    const ExactReference ref = ExactReference::solve(cfg.model);
    const ReplicationSummary rec = run_replications(cfg, ref, 500);
    CHECK(rec.failures == 0);
    CHECK(rec.sup_bias < 0.1);
    CHECK(rec.sup_sd > 0.01);
    CHECK(rec.sup_sd < 0.2);
}

TEST_CASE("self-approximating replications stay near the reference") {
    ExperimentConfig cfg;
    cfg.model = default_model();
    cfg.model.sigma_z = 100.0;  // wide support keeps the uniform draws from degenerating
    cfg.method = ExperimentMethod::SelfApprox;
    cfg.replications = 10;
    cfg.grid_points = 50;
    const ExactReference ref = ExactReference::solve(cfg.model);
    const ReplicationSummary rec = run_replications(cfg, ref, 200);
    CHECK(rec.failures == 0);
    CHECK(rec.sup_mse < 2.0);
}

TEST_CASE("smoothing sweep at lambda zero matches the plain experiment") {
    ExperimentConfig cfg;
    cfg.model = default_model();
    cfg.method = ExperimentMethod::Sieve;
    cfg.j = 4;
    cfg.n_schedule = {50};
    cfg.n_eps = 50;
    cfg.replications = 8;
    cfg.grid_points = 40;
    const ExactReference ref = ExactReference::solve(cfg.model);
    const auto sweep = smoothing_sweep(cfg, ref, {0.0});
    REQUIRE(sweep.size() == 1);
    CHECK(sweep[0].first == 0.0);
    cfg.lambda = 0.0;
    const ReplicationSummary rec = run_replications(cfg, ref, 50);
    CHECK(sweep[0].second == rec.sup_mse);
}

TEST_CASE("coefficient table of the additive model has vanishing cross terms") {
    ModelSpec spec = default_model();
    spec.d_z = 2;
    SieveSpace space{BasisFamily::Chebyshev, 0, 5, 2, spec.z_min, spec.z_max_domain};
    auto proj = std::make_shared<const Projector>(space, space.default_design_points());
    const SieveSolution sol = solve_sieve(make_quadrature_sieve_system(spec, proj), SolverConfig{}, proj);
    const Matrix table = coefficient_report(sol);
    for (int j1 = 1; j1 < 5; ++j1)
        for (int j2 = 1; j2 < 5; ++j2) CHECK(std::abs(table(j1, j2)) < 1e-8);
    CHECK(table(0, 1) == doctest::Approx(table(1, 0)).epsilon(1e-8));
    CHECK(table(0, 1) == doctest::Approx(-4.48).epsilon(0.12));
}

TEST_CASE("coefficient table of the interaction model has genuine cross terms") {
    ModelSpec spec = default_model();
    spec.d_z = 2;
    spec.kappa = 1.0 / 20.0;
    SieveSpace space{BasisFamily::Chebyshev, 0, 5, 2, spec.z_min, spec.z_max_domain};
    auto proj = std::make_shared<const Projector>(space, space.default_design_points());
    const SieveSolution sol = solve_sieve(make_quadrature_sieve_system(spec, proj), SolverConfig{}, proj);
    const Matrix table = coefficient_report(sol);
    CHECK(std::abs(table(1, 1)) > 0.1);
}
