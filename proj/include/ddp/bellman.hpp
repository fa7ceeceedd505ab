#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "ddp/model.hpp"
#include "ddp/quadrature.hpp"
#include "ddp/sampling.hpp"
#include "ddp/sieve.hpp"
#include "ddp/smoothing.hpp"

namespace ddp {

// Taste-shock draws for the simulated-shock operator path.  Draws are
// extreme value normalized to mean zero, so the hard-max simulated
// operator is unbiased for the analytic G_lambda operator.
struct ShockSet {
    Matrix eps;  // n_eps x D
    Vector w;    // normalized weights, sum to 1
};

inline ShockSet draw_shocks_extreme_value(int n_eps, int num_decisions, std::uint64_t seed) {
    ShockSet s;
    s.eps.resize(n_eps, num_decisions);
    s.w = Vector::Constant(n_eps, 1.0 / n_eps);
    auto rng = make_engine(derive_seed(seed, {0x3e5u}));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double euler_gamma = std::numbers::egamma;
    for (int j = 0; j < n_eps; ++j)
        for (int d = 0; d < num_decisions; ++d)
            s.eps(j, d) = -euler_gamma - std::log(-std::log1p(-unif(rng)));
    return s;
}

// Operator context backed by explicit per-(evaluation point, decision)
// support lists into a shared node pool.  Used for conditional Monte
// Carlo draws and for quadrature nodes.
class SupportContext {
  public:
    struct Arm {
        std::vector<int> idx;
        Vector w;  // normalized
    };

    ModelSpec spec;
    std::vector<State> eval_points;       // M
    std::vector<State> nodes;             // P
    std::vector<std::vector<Arm>> arms;   // [M][D]
    Matrix util_eval;                     // M x D
    Matrix util_nodes;                    // P x D

    int num_eval() const { return static_cast<int>(eval_points.size()); }
    int num_nodes() const { return static_cast<int>(nodes.size()); }

    void finalize_utilities() {
        const int D = spec.num_decisions();
        util_eval.resize(num_eval(), D);
        for (int m = 0; m < num_eval(); ++m)
            for (int d = 0; d < D; ++d) util_eval(m, d) = per_period_utility(spec, eval_points[m], Decision{d});
        util_nodes.resize(num_nodes(), D);
        for (int i = 0; i < num_nodes(); ++i)
            for (int d = 0; d < D; ++d) util_nodes(i, d) = per_period_utility(spec, nodes[i], Decision{d});
    }

    // Expected continuation values: C(m,d) = sum_i w v(node_i).
    Matrix continuation(const Vector& v_at_nodes) const {
        const int D = spec.num_decisions();
        Matrix c(num_eval(), D);
        for (int m = 0; m < num_eval(); ++m)
            for (int d = 0; d < D; ++d) {
                const Arm& arm = arms[m][d];
                double acc = 0.0;
                for (std::size_t i = 0; i < arm.idx.size(); ++i) acc += arm.w(i) * v_at_nodes(arm.idx[i]);
                c(m, d) = acc;
            }
        return c;
    }

    // Basis-weighted draw sums Q_d(m,:) = sum_i w B_K(node_i)', computed
    // once per draw set and recycled across solver iterations.
    std::vector<Matrix> weighted_basis(const SieveSpace& space) const {
        const int D = spec.num_decisions();
        const int K = space.K();
        std::vector<Vector> basis_cache(num_nodes());
        for (int i = 0; i < num_nodes(); ++i) basis_cache[i] = space.basis(nodes[i]);
        std::vector<Matrix> q(D, Matrix::Zero(num_eval(), K));
        for (int m = 0; m < num_eval(); ++m)
            for (int d = 0; d < D; ++d) {
                const Arm& arm = arms[m][d];
                for (std::size_t i = 0; i < arm.idx.size(); ++i)
                    q[d].row(m) += arm.w(i) * basis_cache[arm.idx[i]].transpose();
            }
        return q;
    }
};

// Operator context for marginal (self-approximating) draws: one shared
// node set and dense row-normalized weight matrices per decision.
class MarginalContext {
  public:
    ModelSpec spec;
    std::vector<State> nodes;  // the N marginal draws; evaluation points coincide
    std::vector<Matrix> weight;  // [D], each N x N
    Matrix util_eval;            // N x D
    Matrix util_nodes;           // alias of util_eval

    int num_eval() const { return static_cast<int>(nodes.size()); }
    int num_nodes() const { return num_eval(); }

    Matrix continuation(const Vector& v_at_nodes) const {
        const int D = spec.num_decisions();
        Matrix c(num_eval(), D);
        for (int d = 0; d < D; ++d) c.col(d) = weight[d] * v_at_nodes;
        return c;
    }

    std::vector<Matrix> weighted_basis(const SieveSpace& space) const {
        const int D = spec.num_decisions();
        Matrix basis(num_nodes(), space.K());
        for (int i = 0; i < num_nodes(); ++i) basis.row(i) = space.basis(nodes[i]).transpose();
        std::vector<Matrix> q(D);
        for (int d = 0; d < D; ++d) q[d] = weight[d] * basis;
        return q;
    }
};

inline SupportContext make_conditional_context(const ModelSpec& spec, const DrawSet& draws) {
    SupportContext ctx;
    ctx.spec = spec;
    ctx.eval_points = draws.eval_points;
    const int D = spec.num_decisions();
    const int M = static_cast<int>(draws.eval_points.size());
    ctx.arms.resize(M, std::vector<SupportContext::Arm>(D));
    for (int m = 0; m < M; ++m)
        for (int d = 0; d < D; ++d) {
            auto& arm = ctx.arms[m][d];
            arm.idx.resize(draws.n);
            arm.w = Vector::Constant(draws.n, 1.0 / draws.n);
            for (int i = 0; i < draws.n; ++i) {
                arm.idx[i] = static_cast<int>(ctx.nodes.size());
                ctx.nodes.push_back(draws.conditional[m][d].row(i).transpose());
            }
        }
    ctx.finalize_utilities();
    return ctx;
}

inline MarginalContext make_self_approx_context(const ModelSpec& spec, const DrawSet& draws) {
    MarginalContext ctx;
    ctx.spec = spec;
    const int D = spec.num_decisions();
    ctx.nodes.resize(draws.n);
    for (int i = 0; i < draws.n; ++i) ctx.nodes[i] = draws.marginal.row(i).transpose();
    ctx.weight.resize(D);
    for (int d = 0; d < D; ++d) ctx.weight[d] = self_approx_weight_matrix(spec, draws, Decision{d});
    ctx.util_eval.resize(draws.n, D);
    for (int i = 0; i < draws.n; ++i)
        for (int d = 0; d < D; ++d) ctx.util_eval(i, d) = per_period_utility(spec, ctx.nodes[i], Decision{d});
    ctx.util_nodes = ctx.util_eval;
    return ctx;
}

// Quadrature support for one evaluation point and decision, per
// dimension: the pi point mass at the post-decision state enters as an
// explicit atom, not as a node.
inline SupportContext make_quadrature_context(const ModelSpec& spec, const std::vector<State>& eval_points,
                                              int n_nodes = 60) {
    const QuadratureRule rule = gauss_jacobi_beta(n_nodes, spec.a, spec.b);
    SupportContext ctx;
    ctx.spec = spec;
    ctx.eval_points = eval_points;
    const int D = spec.num_decisions();
    const int M = static_cast<int>(eval_points.size());
    ctx.arms.resize(M, std::vector<SupportContext::Arm>(D));
    for (int m = 0; m < M; ++m) {
        for (int d = 0; d < D; ++d) {
            // per-dimension mixture supports, then their tensor product
            std::vector<std::vector<std::pair<double, double>>> dims(spec.d_z);
            for (int i = 0; i < spec.d_z; ++i) {
                const double x = post_decision_1d(eval_points[m](i), Decision{d}.replaces(i));
                dims[i].push_back({x, spec.pi});
                for (int q = 0; q < n_nodes; ++q)
                    dims[i].push_back({x + spec.sigma_z * rule.nodes(q), (1.0 - spec.pi) * rule.weights(q)});
            }
            auto& arm = ctx.arms[m][d];
            if (spec.d_z == 1) {
                for (auto [z, w] : dims[0]) {
                    arm.idx.push_back(static_cast<int>(ctx.nodes.size()));
                    ctx.nodes.push_back(make_state(z));
                    arm.w.conservativeResize(arm.idx.size());
                    arm.w(arm.idx.size() - 1) = w;
                }
            } else {
                const std::size_t count = dims[0].size() * dims[1].size();
                arm.idx.reserve(count);
                arm.w.resize(count);
                std::size_t kk = 0;
                for (auto [z1, w1] : dims[0])
                    for (auto [z2, w2] : dims[1]) {
                        arm.idx.push_back(static_cast<int>(ctx.nodes.size()));
                        ctx.nodes.push_back(make_state(z1, z2));
                        arm.w(kk++) = w1 * w2;
                    }
            }
        }
    }
    ctx.finalize_utilities();
    return ctx;
}

// Basis-weighted quadrature sums computed dimension-by-dimension; the
// tensor structure factorizes, which keeps the bivariate exact-reference
// solve tractable.
inline std::vector<Matrix> quadrature_weighted_basis(const ModelSpec& spec, const SieveSpace& space,
                                                     const std::vector<State>& design_points,
                                                     int n_nodes = 60) {
    const QuadratureRule rule = gauss_jacobi_beta(n_nodes, spec.a, spec.b);
    const int D = spec.num_decisions();
    const int M = static_cast<int>(design_points.size());
    const int J = space.j_per_dim;
    std::vector<Matrix> q(D, Matrix(M, space.K()));
    for (int m = 0; m < M; ++m) {
        for (int d = 0; d < D; ++d) {
            // s_i = pi b(x_i) + (1-pi) sum_q w_q b(x_i + sigma t_q)
            std::vector<Vector> s(spec.d_z);
            for (int i = 0; i < spec.d_z; ++i) {
                const double x = post_decision_1d(design_points[m](i), Decision{d}.replaces(i));
                Vector acc = spec.pi * space.basis_1d(x);
                for (int qq = 0; qq < n_nodes; ++qq)
                    acc += (1.0 - spec.pi) * rule.weights(qq) * space.basis_1d(x + spec.sigma_z * rule.nodes(qq));
                s[i] = std::move(acc);
            }
            if (spec.d_z == 1) {
                q[d].row(m) = s[0].transpose();
            } else {
                for (int j1 = 0; j1 < J; ++j1)
                    for (int j2 = 0; j2 < J; ++j2) q[d](m, j1 * J + j2) = s[0](j1) * s[1](j2);
            }
        }
    }
    return q;
}

// ---------------------------------------------------------------------
// Smoothed simulated Bellman operators.
// ---------------------------------------------------------------------

// Integrated-value operator with the extreme-value shocks integrated
// analytically (Example-1 specialization): G_{lambda_ev}(u + beta C).
template <class Ctx>
Vector apply_gamma_bar(const Ctx& ctx, const Vector& v_at_nodes) {
    const Matrix c = ctx.continuation(v_at_nodes);
    Vector out(ctx.num_eval());
    for (int m = 0; m < ctx.num_eval(); ++m)
        out(m) = smooth_max(ctx.util_eval.row(m).transpose() + ctx.spec.beta * c.row(m).transpose(),
                            ctx.spec.lambda_ev);
    return out;
}

// Integrated-value operator with simulated taste shocks and explicit
// smoothing parameter; lambda = 0 recovers the non-smooth hard-max
// operator.
template <class Ctx>
Vector apply_gamma_bar_simulated_shocks(const Ctx& ctx, const Vector& v_at_nodes, const ShockSet& shocks,
                                        double lambda) {
    const Matrix c = ctx.continuation(v_at_nodes);
    Vector out = Vector::Zero(ctx.num_eval());
    Vector r(ctx.util_eval.cols());
    for (int m = 0; m < ctx.num_eval(); ++m) {
        const Vector base = ctx.util_eval.row(m).transpose() + ctx.spec.beta * c.row(m).transpose();
        for (int j = 0; j < shocks.eps.rows(); ++j) {
            r = base + ctx.spec.lambda_ev * shocks.eps.row(j).transpose();
            out(m) += shocks.w(j) * smooth_max(r, lambda);
        }
    }
    return out;
}

// Hadamard differential of the analytic-path integrated operator:
// linear in dv with operator norm <= beta.
template <class Ctx>
Vector gamma_bar_differential(const Ctx& ctx, const Vector& v_at_nodes, const Vector& dv_at_nodes) {
    const Matrix c = ctx.continuation(v_at_nodes);
    const Matrix cdv = ctx.continuation(dv_at_nodes);
    Vector out(ctx.num_eval());
    for (int m = 0; m < ctx.num_eval(); ++m) {
        const Vector s = smooth_max_grad(ctx.util_eval.row(m).transpose() + ctx.spec.beta * c.row(m).transpose(),
                                         ctx.spec.lambda_ev);
        out(m) = ctx.spec.beta * s.dot(cdv.row(m).transpose());
    }
    return out;
}

template <class Ctx>
Vector gamma_bar_differential_simulated_shocks(const Ctx& ctx, const Vector& v_at_nodes,
                                               const Vector& dv_at_nodes, const ShockSet& shocks,
                                               double lambda) {
    const Matrix c = ctx.continuation(v_at_nodes);
    const Matrix cdv = ctx.continuation(dv_at_nodes);
    Vector out = Vector::Zero(ctx.num_eval());
    for (int m = 0; m < ctx.num_eval(); ++m) {
        const Vector base = ctx.util_eval.row(m).transpose() + ctx.spec.beta * c.row(m).transpose();
        for (int j = 0; j < shocks.eps.rows(); ++j) {
            const Vector s = smooth_max_grad(base + ctx.spec.lambda_ev * shocks.eps.row(j).transpose(), lambda);
            out(m) += shocks.w(j) * ctx.spec.beta * s.dot(cdv.row(m).transpose());
        }
    }
    return out;
}

// Expected-value operator: Gamma(V)(z,d) = sum_i w_i G(u(node_i) + beta V(node_i)).
template <class Ctx>
Matrix apply_gamma(const Ctx& ctx, const Matrix& v_expected_at_nodes) {
    Vector g(ctx.num_nodes());
    for (int i = 0; i < ctx.num_nodes(); ++i)
        g(i) = smooth_max(
            ctx.util_nodes.row(i).transpose() + ctx.spec.beta * v_expected_at_nodes.row(i).transpose(),
            ctx.spec.lambda_ev);
    return ctx.continuation(g);
}

template <class Ctx>
Matrix gamma_differential(const Ctx& ctx, const Matrix& v_expected_at_nodes, const Matrix& dv_at_nodes) {
    Vector gdot(ctx.num_nodes());
    for (int i = 0; i < ctx.num_nodes(); ++i) {
        const Vector s = smooth_max_grad(
            ctx.util_nodes.row(i).transpose() + ctx.spec.beta * v_expected_at_nodes.row(i).transpose(),
            ctx.spec.lambda_ev);
        gdot(i) = ctx.spec.beta * s.dot(dv_at_nodes.row(i).transpose());
    }
    return ctx.continuation(gdot);
}

// Deterministic quadrature version of the integrated operator for an
// arbitrary value function, exact for the Beta transition kernel.
inline Vector apply_gamma_bar_quadrature(const ModelSpec& spec, const std::function<double(const State&)>& v,
                                         const std::vector<State>& eval_points, int n_nodes = 60) {
    const QuadratureRule rule = gauss_jacobi_beta(n_nodes, spec.a, spec.b);
    const int D = spec.num_decisions();
    Vector out(eval_points.size());
    Vector r(D);
    State zn(spec.d_z);
    for (std::size_t m = 0; m < eval_points.size(); ++m) {
        for (int d = 0; d < D; ++d) {
            const State x = post_decision(spec, eval_points[m], Decision{d});
            double cont = 0.0;
            if (spec.d_z == 1) {
                cont += spec.pi * v(x);
                for (int q = 0; q < n_nodes; ++q) {
                    zn(0) = x(0) + spec.sigma_z * rule.nodes(q);
                    cont += (1.0 - spec.pi) * rule.weights(q) * v(zn);
                }
            } else {
                for (int q1 = -1; q1 < n_nodes; ++q1) {
                    const double w1 = (q1 < 0) ? spec.pi : (1.0 - spec.pi) * rule.weights(q1);
                    zn(0) = (q1 < 0) ? x(0) : x(0) + spec.sigma_z * rule.nodes(q1);
                    for (int q2 = -1; q2 < n_nodes; ++q2) {
                        const double w2 = (q2 < 0) ? spec.pi : (1.0 - spec.pi) * rule.weights(q2);
                        zn(1) = (q2 < 0) ? x(1) : x(1) + spec.sigma_z * rule.nodes(q2);
                        cont += w1 * w2 * v(zn);
                    }
                }
            }
            r(d) = per_period_utility(spec, eval_points[m], Decision{d}) + spec.beta * cont;
        }
        out(m) = smooth_max(r, spec.lambda_ev);
    }
    return out;
}

}  // namespace ddp
