#include <cmath>

#include "doctest.h"
#include "ddp/bellman.hpp"
#include "helpers.hpp"

using namespace ddp;

namespace {

std::vector<State> grid_1d(double lo, double hi, int m) {
    std::vector<State> pts;
    for (int i = 0; i < m; ++i) pts.push_back(make_state(lo + (hi - lo) * i / (m - 1)));
    return pts;
}

}  // namespace

TEST_CASE("integrated operator, analytic shock path") {
    ModelSpec spec = test::default_model();
    const auto eval = grid_1d(0.0, 900.0, 7);

    SUBCASE("beta = 0 reduces to the smoothed flow utility") {
        ModelSpec myopic = spec;
        myopic.beta = 0.0;
        auto ctx = make_conditional_context(myopic, draw_conditional(myopic, eval, 25, 1));
        const Vector out = apply_gamma_bar(ctx, Vector::Random(ctx.num_nodes()));
        for (int m = 0; m < ctx.num_eval(); ++m) {
            Vector u = ctx.util_eval.row(m).transpose();
            CHECK(out(m) == doctest::Approx(smooth_max(u, myopic.lambda_ev)));
        }
    }

    SUBCASE("constant-utility fixed point") {
        ModelSpec flat = test::constant_utility_model();
        auto ctx = make_conditional_context(flat, draw_conditional(flat, eval, 25, 2));
        const double vstar = flat.lambda_ev * std::log(2.0) / (1.0 - flat.beta);
        const Vector out = apply_gamma_bar(ctx, Vector::Constant(ctx.num_nodes(), vstar));
        for (int m = 0; m < ctx.num_eval(); ++m) CHECK(out(m) == doctest::Approx(vstar).epsilon(1e-12));
    }

    SUBCASE("zero continuation value at z = 0") {
        auto ctx = make_conditional_context(spec, draw_conditional(spec, {make_state(0.0)}, 25, 3));
        const Vector out = apply_gamma_bar(ctx, Vector::Zero(ctx.num_nodes()));
        CHECK(out(0) == doctest::Approx(std::log1p(std::exp(-10.0))).epsilon(1e-10));
    }
}

TEST_CASE("integrated operator with simulated taste shocks") {
    ModelSpec spec = test::default_model();
    const auto eval = grid_1d(0.0, 900.0, 5);
    auto ctx = make_conditional_context(spec, draw_conditional(spec, eval, 50, 4));
    Vector v = Vector::Random(ctx.num_nodes()) * 3.0;

    SUBCASE("a single zero shock at lambda = lambda_ev matches the analytic path") {
        ShockSet zero;
        zero.eps = Matrix::Zero(1, spec.num_decisions());
        zero.w = Vector::Ones(1);
        const Vector a = apply_gamma_bar_simulated_shocks(ctx, v, zero, spec.lambda_ev);
        const Vector b = apply_gamma_bar(ctx, v);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
    }

    SUBCASE("hard max over many extreme-value draws is unbiased for the analytic path") {
        const ShockSet shocks = draw_shocks_extreme_value(10000, spec.num_decisions(), 21);
        const Vector a = apply_gamma_bar_simulated_shocks(ctx, v, shocks, 0.0);
        const Vector b = apply_gamma_bar(ctx, v);
        CHECK((a - b).cwiseAbs().maxCoeff() < 0.05);
    }
}

TEST_CASE("differential of the integrated operator") {
    ModelSpec spec = test::default_model();
    const auto eval = grid_1d(0.0, 900.0, 6);
    auto ctx = make_conditional_context(spec, draw_conditional(spec, eval, 30, 5));
    const Vector v = Vector::Random(ctx.num_nodes()) * 2.0;

    SUBCASE("constant directions scale by beta") {
        const Vector out = gamma_bar_differential(ctx, v, Vector::Constant(ctx.num_nodes(), 3.0));
        for (int m = 0; m < ctx.num_eval(); ++m) CHECK(out(m) == doctest::Approx(spec.beta * 3.0).epsilon(1e-12));
        CHECK(gamma_bar_differential(ctx, v, Vector::Zero(ctx.num_nodes())).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("matches central differences") {
        const Vector dv = Vector::Random(ctx.num_nodes());
        const double h = 1e-6;
        const Vector fd =
            (apply_gamma_bar(ctx, Vector(v + h * dv)) - apply_gamma_bar(ctx, Vector(v - h * dv))) / (2.0 * h);
        const Vector an = gamma_bar_differential(ctx, v, dv);
        CHECK((fd - an).cwiseAbs().maxCoeff() < 1e-5 * (1.0 + an.cwiseAbs().maxCoeff()));
    }

    SUBCASE("simulated-shock differential matches central differences") {
        const ShockSet shocks = draw_shocks_extreme_value(30, spec.num_decisions(), 22);
        const Vector dv = Vector::Random(ctx.num_nodes());
        const double h = 1e-6;
        const Vector fd = (apply_gamma_bar_simulated_shocks(ctx, Vector(v + h * dv), shocks, 0.4) -
                           apply_gamma_bar_simulated_shocks(ctx, Vector(v - h * dv), shocks, 0.4)) /
                          (2.0 * h);
        const Vector an = gamma_bar_differential_simulated_shocks(ctx, v, dv, shocks, 0.4);
        CHECK((fd - an).cwiseAbs().maxCoeff() < 1e-5 * (1.0 + an.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("expected-value operator") {
    ModelSpec spec = test::default_model();
    const auto eval = grid_1d(0.0, 900.0, 6);
    auto ctx = make_conditional_context(spec, draw_conditional(spec, eval, 30, 6));

    SUBCASE("replacement column is constant in the state") {
        const Matrix v = Matrix::Random(ctx.num_nodes(), spec.num_decisions());
        const Matrix out = apply_gamma(ctx, v);
        // regeneration makes the replace-arm distribution state-independent,
        // but conditional draws differ per evaluation point; check against a
        // context with shared draws via the degenerate pi = 1 mixture instead
        ModelSpec degen = spec;
        degen.pi = 1.0;
        auto dctx = make_conditional_context(degen, draw_conditional(degen, eval, 30, 7));
        Matrix dvals(dctx.num_nodes(), 2);
        for (int i = 0; i < dctx.num_nodes(); ++i) {
            dvals(i, 0) = std::sin(dctx.nodes[i](0) / 100.0);
            dvals(i, 1) = std::cos(dctx.nodes[i](0) / 150.0);
        }
        const Matrix dout = apply_gamma(dctx, dvals);
        for (int m = 1; m < dctx.num_eval(); ++m)
            CHECK(dout(m, 1) == doctest::Approx(dout(0, 1)).epsilon(1e-12));
        CHECK(out.rows() == ctx.num_eval());
    }

    SUBCASE("constant-utility fixed point per component") {
        ModelSpec flat = test::constant_utility_model();
        auto fctx = make_conditional_context(flat, draw_conditional(flat, eval, 30, 8));
        const double vstar = flat.lambda_ev * std::log(2.0) / (1.0 - flat.beta);
        const Matrix out = apply_gamma(fctx, Matrix::Constant(fctx.num_nodes(), 2, vstar));
        CHECK((out.array() - vstar).abs().maxCoeff() < 1e-12);
    }

    SUBCASE("beta = 0 ignores the input values") {
        ModelSpec myopic = spec;
        myopic.beta = 0.0;
        auto mctx = make_conditional_context(myopic, draw_conditional(myopic, eval, 30, 9));
        const Matrix a = apply_gamma(mctx, Matrix::Random(mctx.num_nodes(), 2).eval());
        const Matrix b = apply_gamma(mctx, Matrix::Random(mctx.num_nodes(), 2).eval());
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("differential matches central differences") {
        const Matrix v = Matrix::Random(ctx.num_nodes(), 2) * 2.0;
        const Matrix dv = Matrix::Random(ctx.num_nodes(), 2);
        const double h = 1e-6;
        const Matrix fd = (apply_gamma(ctx, Matrix(v + h * dv)) - apply_gamma(ctx, Matrix(v - h * dv))) / (2.0 * h);
        const Matrix an = gamma_differential(ctx, v, dv);
        CHECK((fd - an).cwiseAbs().maxCoeff() < 1e-5 * (1.0 + an.cwiseAbs().maxCoeff()));
        CHECK(gamma_differential(ctx, v, Matrix::Constant(ctx.num_nodes(), 2, 2.0).eval())
                  .cwiseAbs()
                  .maxCoeff() == doctest::Approx(spec.beta * 2.0));
    }
}

TEST_CASE("quadrature version of the integrated operator") {
    ModelSpec spec = test::default_model();
    const auto eval = grid_1d(0.0, 900.0, 5);

    SUBCASE("constant values integrate exactly") {
        const Vector out = apply_gamma_bar_quadrature(
            spec, [](const State&) { return 0.0; }, eval);
        for (std::size_t m = 0; m < eval.size(); ++m) {
            Vector u(2);
            u << per_period_utility(spec, eval[m], Decision{0}), per_period_utility(spec, eval[m], Decision{1});
            CHECK(out(m) == doctest::Approx(smooth_max(u, spec.lambda_ev)).epsilon(1e-13));
        }
    }

    SUBCASE("polynomial continuation integrals are exact") {
        // v(z) = z^2: E[v(x + sigma T)] = x^2 + 2 x sigma E[T] + sigma^2 E[T^2]
        ModelSpec pure = spec;
        pure.pi = 0.0;
        const double z = 300.0;
        const double et = pure.a / (pure.a + pure.b);
        const double et2 = et * (pure.a + 1.0) / (pure.a + pure.b + 1.0);
        const double keep_cont = z * z + 2.0 * z * pure.sigma_z * et + pure.sigma_z * pure.sigma_z * et2;
        const double rep_cont = pure.sigma_z * pure.sigma_z * et2;
        Vector u(2);
        u << per_period_utility(pure, make_state(z), Decision{0}),
            per_period_utility(pure, make_state(z), Decision{1});
        Vector r(2);
        r << u(0) + pure.beta * keep_cont, u(1) + pure.beta * rep_cont;
        const Vector out = apply_gamma_bar_quadrature(
            pure, [](const State& s) { return s(0) * s(0); }, {make_state(z)});
        CHECK(out(0) == doctest::Approx(smooth_max(r, pure.lambda_ev)).epsilon(1e-12));
    }

    SUBCASE("agrees with a large Monte Carlo evaluation") {
        auto v = [](const State& s) { return std::cos(s(0) / 200.0) * 10.0; };
        const std::vector<State> pts = {make_state(250.0)};
        const Vector exact = apply_gamma_bar_quadrature(spec, v, pts);
        auto ctx = make_conditional_context(spec, draw_conditional(spec, pts, 1000000, 10));
        Vector vals(ctx.num_nodes());
        for (int i = 0; i < ctx.num_nodes(); ++i) vals(i) = v(ctx.nodes[i]);
        const Vector mc = apply_gamma_bar(ctx, vals);
        CHECK(std::abs(mc(0) - exact(0)) < 1e-2);
    }

    SUBCASE("bivariate constant case") {
        ModelSpec biv = spec;
        biv.d_z = 2;
        const Vector out = apply_gamma_bar_quadrature(
            biv, [](const State&) { return 1.0; }, {make_state(100.0, 700.0)});
        Vector u(4);
        for (int d = 0; d < 4; ++d) u(d) = per_period_utility(biv, make_state(100.0, 700.0), Decision{d});
        CHECK(out(0) == doctest::Approx(smooth_max(Vector(u.array() + biv.beta), biv.lambda_ev)).epsilon(1e-12));
    }
}

TEST_CASE("self-approximating operator context") {
    ModelSpec spec = test::default_model();
    auto ds = draw_marginal_uniform(40, 1000.0, 31);
    auto ctx = make_self_approx_context(spec, ds);

    SUBCASE("constant-direction differential scales by beta") {
        const Vector v = Vector::Random(40) * 2.0;
        const Vector out = gamma_bar_differential(ctx, v, Vector::Constant(40, 1.0));
        for (int m = 0; m < 40; ++m) CHECK(out(m) == doctest::Approx(spec.beta).epsilon(1e-12));
    }

    SUBCASE("finite-difference match") {
        const Vector v = Vector::Random(40) * 2.0;
        const Vector dv = Vector::Random(40);
        const double h = 1e-6;
        const Vector fd =
            (apply_gamma_bar(ctx, Vector(v + h * dv)) - apply_gamma_bar(ctx, Vector(v - h * dv))) / (2.0 * h);
        CHECK((fd - gamma_bar_differential(ctx, v, dv)).cwiseAbs().maxCoeff() < 1e-5);
    }
}
