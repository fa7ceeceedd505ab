#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ddp/bellman.hpp"
#include "ddp/errors.hpp"
#include "ddp/model.hpp"
#include "ddp/sampling.hpp"
#include "ddp/sieve.hpp"
#include "ddp/smoothing.hpp"

namespace ddp {

enum class Method { SA, NK, Hybrid };

struct SolverConfig {
    Method method = Method::Hybrid;
    double tol = 1e-12;
    int max_iterations = 20000;        // successive-approximation cap
    int max_newton_iterations = 200;
    double switch_residual = 1.0;      // hybrid: hand off to Newton below this
    int switch_iterations = 20;        // ... or after this many SA steps
};

struct IterationRecord {
    int iter;
    char method;  // 'S' or 'N'
    double residual;
    double wall_time_ms;
};

struct SolveLog {
    std::vector<IterationRecord> records;
    double final_residual = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

class StepTimer {
  public:
    StepTimer() : start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// Successive approximations x <- T(x).  The iteration is declared
// divergent after ten consecutive residual increases, which a
// beta-contraction cannot produce.
template <class System>
Vector solve_sa(const System& system, Vector x, const SolverConfig& cfg, SolveLog* log = nullptr) {
    detail::StepTimer timer;
    double prev_residual = std::numeric_limits<double>::infinity();
    int growth_streak = 0;
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        Vector next = system.apply(x);
        const double residual = (next - x).template lpNorm<Eigen::Infinity>();
        if (log) log->records.push_back({iter, 'S', residual, timer.elapsed_ms()});
        x = std::move(next);
        if (!std::isfinite(residual)) throw MaxIterations("solve_sa: iteration produced non-finite values");
        if (residual < cfg.tol) {
            if (log) log->final_residual = residual;
            return x;
        }
        growth_streak = (residual > prev_residual) ? growth_streak + 1 : 0;
        if (growth_streak >= 10) throw MaxIterations("solve_sa: residuals diverging");
        prev_residual = residual;
    }
    throw MaxIterations("solve_sa: iteration cap reached before tolerance");
}

// Newton-Kantorovich on the fixed-point residual S(x) = x - T(x).
// Requires a smoothed operator; the hard-max operator has kinks where
// the Newton matrix is undefined.
template <class System>
Vector solve_nk(const System& system, Vector x, const SolverConfig& cfg, SolveLog* log = nullptr,
                int iter_offset = 0) {
    if (!system.smooth())
        throw UnsupportedNonSmooth("solve_nk: Newton requires a smoothing parameter > 0");
    detail::StepTimer timer;
    for (int iter = 1; iter <= cfg.max_newton_iterations; ++iter) {
        const Vector residual_vec = x - system.apply(x);
        const double residual = residual_vec.template lpNorm<Eigen::Infinity>();
        if (log) log->records.push_back({iter_offset + iter, 'N', residual, timer.elapsed_ms()});
        if (!std::isfinite(residual)) throw MaxIterations("solve_nk: iteration produced non-finite values");
        if (residual < cfg.tol) {
            if (log) log->final_residual = residual;
            return x;
        }
        const Matrix h = system.newton_matrix(x);
        Eigen::PartialPivLU<Matrix> lu(h);
        const Vector step = lu.solve(residual_vec);
        if (!step.allFinite()) throw SingularJacobian("solve_nk: Newton matrix is singular");
        x -= step;
    }
    throw MaxIterations("solve_nk: iteration cap reached before tolerance");
}

// A few cheap SA warm-up steps, then Newton.  With a non-smooth
// operator the Newton stage is unavailable and SA runs to tolerance.
template <class System>
Vector solve_hybrid(const System& system, Vector x, const SolverConfig& cfg, SolveLog* log = nullptr) {
    if (!system.smooth()) return solve_sa(system, std::move(x), cfg, log);
    detail::StepTimer timer;
    int iter = 0;
    while (iter < cfg.switch_iterations) {
        Vector next = system.apply(x);
        const double residual = (next - x).template lpNorm<Eigen::Infinity>();
        ++iter;
        if (log) log->records.push_back({iter, 'S', residual, timer.elapsed_ms()});
        x = std::move(next);
        if (!std::isfinite(residual)) throw MaxIterations("solve_hybrid: iteration produced non-finite values");
        if (residual < cfg.tol) {
            if (log) log->final_residual = residual;
            return x;
        }
        if (residual < cfg.switch_residual) break;
    }
    return solve_nk(system, std::move(x), cfg, log, iter);
}

template <class System>
Vector solve(const System& system, Vector x, const SolverConfig& cfg, SolveLog* log = nullptr) {
    switch (cfg.method) {
        case Method::SA: return solve_sa(system, std::move(x), cfg, log);
        case Method::NK: return solve_nk(system, std::move(x), cfg, log);
        default: return solve_hybrid(system, std::move(x), cfg, log);
    }
}

// ---------------------------------------------------------------------
// Projected (sieve) fixed point in the coefficient vector alpha.
// ---------------------------------------------------------------------

class SieveSystem {
  public:
    SieveSystem(ModelSpec spec, std::shared_ptr<const Projector> projector, std::vector<Matrix> weighted_basis,
                Matrix util_eval)
        : spec_(std::move(spec)),
          projector_(std::move(projector)),
          q_(std::move(weighted_basis)),
          util_eval_(std::move(util_eval)) {}

    // Shared draws: every design point integrates over the same shock
    // rows.  Per-point draws (eps stacked in M contiguous blocks of
    // shocks.w.size() rows) give each design point its own shocks.
    void set_simulated_shocks(ShockSet shocks, double lambda, bool per_point = false) {
        shocks_ = std::move(shocks);
        lambda_smooth_ = lambda;
        use_shocks_ = true;
        shocks_per_point_ = per_point;
        if (per_point && shocks_.eps.rows() != util_eval_.rows() * shocks_.w.size())
            throw std::domain_error("set_simulated_shocks: per-point draws need M blocks of rows");
    }

    bool smooth() const { return !use_shocks_ || lambda_smooth_ > 0.0; }
    const Projector& projector() const { return *projector_; }
    const ModelSpec& model() const { return spec_; }

    // Bellman values at the design points for coefficients alpha.
    Vector gamma_values(const Vector& alpha) const {
        const int m_count = static_cast<int>(util_eval_.rows());
        const int d_count = static_cast<int>(util_eval_.cols());
        const int j_count = use_shocks_ ? static_cast<int>(shocks_.w.size()) : 0;
        Vector out(m_count);
        Vector r(d_count);
        for (int m = 0; m < m_count; ++m) {
            for (int d = 0; d < d_count; ++d)
                r(d) = util_eval_(m, d) + spec_.beta * q_[d].row(m).dot(alpha);
            if (!use_shocks_) {
                out(m) = smooth_max(r, spec_.lambda_ev);
            } else {
                const int row0 = shocks_per_point_ ? m * j_count : 0;
                double acc = 0.0;
                for (int j = 0; j < j_count; ++j)
                    acc += shocks_.w(j) * smooth_max(r + spec_.lambda_ev * shocks_.eps.row(row0 + j).transpose(),
                                                     lambda_smooth_);
                out(m) = acc;
            }
        }
        return out;
    }

    Vector apply(const Vector& alpha) const { return projector_->project(gamma_values(alpha)); }

    // I - Ginv B' dGamma, where row m of dGamma is beta sum_d s_d Q_d(m,:).
    Matrix newton_matrix(const Vector& alpha) const {
        const int m_count = static_cast<int>(util_eval_.rows());
        const int d_count = static_cast<int>(util_eval_.cols());
        const int k_count = static_cast<int>(alpha.size());
        Matrix dgamma = Matrix::Zero(m_count, k_count);
        Vector r(d_count);
        for (int m = 0; m < m_count; ++m) {
            for (int d = 0; d < d_count; ++d)
                r(d) = util_eval_(m, d) + spec_.beta * q_[d].row(m).dot(alpha);
            Vector s;
            if (!use_shocks_) {
                s = smooth_max_grad(r, spec_.lambda_ev);
            } else {
                const int j_count = static_cast<int>(shocks_.w.size());
                const int row0 = shocks_per_point_ ? m * j_count : 0;
                s = Vector::Zero(d_count);
                for (int j = 0; j < j_count; ++j)
                    s += shocks_.w(j) *
                         smooth_max_grad(r + spec_.lambda_ev * shocks_.eps.row(row0 + j).transpose(),
                                         lambda_smooth_);
            }
            for (int d = 0; d < d_count; ++d) dgamma.row(m) += spec_.beta * s(d) * q_[d].row(m);
        }
        return Matrix::Identity(k_count, k_count) -
               projector_->gram_solve(Matrix(projector_->basis_at_design().transpose() * dgamma));
    }

  private:
    ModelSpec spec_;
    std::shared_ptr<const Projector> projector_;
    std::vector<Matrix> q_;
    Matrix util_eval_;
    ShockSet shocks_;
    double lambda_smooth_ = 0.0;
    bool use_shocks_ = false;
    bool shocks_per_point_ = false;
};

template <class Ctx>
SieveSystem make_sieve_system(std::shared_ptr<const Projector> projector, const Ctx& ctx) {
    return SieveSystem(ctx.spec, projector, ctx.weighted_basis(projector->space()), ctx.util_eval);
}

// Deterministic-quadrature variant used as the exact reference.
inline SieveSystem make_quadrature_sieve_system(const ModelSpec& spec,
                                                std::shared_ptr<const Projector> projector, int n_nodes = 60) {
    const auto& pts = projector->design_points();
    const int d_count = spec.num_decisions();
    Matrix util(pts.size(), d_count);
    for (std::size_t m = 0; m < pts.size(); ++m)
        for (int d = 0; d < d_count; ++d) util(m, d) = per_period_utility(spec, pts[m], Decision{d});
    return SieveSystem(spec, projector,
                       quadrature_weighted_basis(spec, projector->space(), pts, n_nodes), std::move(util));
}

struct SieveSolution {
    std::shared_ptr<const Projector> projector;
    Vector alpha;
    SolveLog log;

    double evaluate(const State& z) const { return projector->evaluate(alpha, z); }
    double evaluate(double z) const { return projector->evaluate(alpha, make_state(z)); }
};

inline SieveSolution solve_sieve(const SieveSystem& system, const SolverConfig& cfg,
                                 std::shared_ptr<const Projector> projector, Vector alpha0 = Vector()) {
    if (alpha0.size() == 0) alpha0 = Vector::Zero(projector->space().K());
    SieveSolution sol;
    sol.projector = std::move(projector);
    sol.alpha = solve(system, std::move(alpha0), cfg, &sol.log);
    return sol;
}

// ---------------------------------------------------------------------
// Self-approximating fixed point in the N nodal values.
// ---------------------------------------------------------------------

class SelfApproxSystem {
  public:
    explicit SelfApproxSystem(MarginalContext ctx) : ctx_(std::move(ctx)) {}

    void set_simulated_shocks(ShockSet shocks, double lambda) {
        shocks_ = std::move(shocks);
        lambda_smooth_ = lambda;
        use_shocks_ = true;
    }

    bool smooth() const { return !use_shocks_ || lambda_smooth_ > 0.0; }
    const MarginalContext& context() const { return ctx_; }

    Vector apply(const Vector& v) const {
        return use_shocks_ ? apply_gamma_bar_simulated_shocks(ctx_, v, shocks_, lambda_smooth_)
                           : apply_gamma_bar(ctx_, v);
    }

    // I - beta sum_d diag(s_d) W_d with the choice probabilities s
    // evaluated at v (averaged over shock draws on the simulated path).
    Matrix newton_matrix(const Vector& v) const {
        const int n = ctx_.num_eval();
        const int d_count = ctx_.spec.num_decisions();
        const Matrix c = ctx_.continuation(v);
        Matrix s(n, d_count);
        for (int k = 0; k < n; ++k) {
            const Vector r = ctx_.util_eval.row(k).transpose() + ctx_.spec.beta * c.row(k).transpose();
            if (!use_shocks_) {
                s.row(k) = smooth_max_grad(r, ctx_.spec.lambda_ev).transpose();
            } else {
                Vector acc = Vector::Zero(d_count);
                for (int j = 0; j < shocks_.eps.rows(); ++j)
                    acc += shocks_.w(j) *
                           smooth_max_grad(r + ctx_.spec.lambda_ev * shocks_.eps.row(j).transpose(),
                                           lambda_smooth_);
                s.row(k) = acc.transpose();
            }
        }
        Matrix h = Matrix::Identity(n, n);
        for (int d = 0; d < d_count; ++d)
            h -= ctx_.spec.beta * s.col(d).asDiagonal() * ctx_.weight[d];
        return h;
    }

  private:
    MarginalContext ctx_;
    ShockSet shocks_;
    double lambda_smooth_ = 0.0;
    bool use_shocks_ = false;
};

struct SelfApproxSolution {
    ModelSpec spec;
    std::vector<State> nodes;
    Vector v;  // fixed-point values at the nodes
    SolveLog log;
};

inline SelfApproxSolution solve_self_approx(const SelfApproxSystem& system, const SolverConfig& cfg,
                                            Vector v0 = Vector()) {
    const auto& ctx = system.context();
    if (v0.size() == 0) v0 = Vector::Zero(ctx.num_eval());
    SelfApproxSolution sol;
    sol.spec = ctx.spec;
    sol.nodes = ctx.nodes;
    sol.v = solve(system, std::move(v0), cfg, &sol.log);
    return sol;
}

// Off-grid evaluation of a self-approximating solution.  The point mass
// of the transition at the post-decision state is kept as an explicit
// atom; for the all-keep decision that atom sits at z itself and carries
// the unknown value, so the evaluation is a one-dimensional fixed point
// solved by Newton.  Without the atom the keep weights can vanish near
// the top of the domain and the evaluation would degenerate.
inline double evaluate_self_approx(const SelfApproxSolution& sol, const State& z) {
    const ModelSpec& spec = sol.spec;
    const int d_count = spec.num_decisions();
    const int n = static_cast<int>(sol.nodes.size());
    const int keep_all = 0;  // decision index with no replacement in any dimension
    double atom = 1.0;
    for (int i = 0; i < spec.d_z; ++i) atom *= spec.pi;

    Vector util(d_count), cont(d_count), denom(d_count), wv(d_count);
    for (int d = 0; d < d_count; ++d) {
        util(d) = per_period_utility(spec, z, Decision{d});
        double sw = 0.0, swv = 0.0;
        for (int i = 0; i < n; ++i) {
            double w;
            if (d == keep_all) {
                // continuous part only; the point mass at z is the explicit atom
                w = 1.0;
                for (int dim = 0; dim < spec.d_z; ++dim)
                    w *= (1.0 - spec.pi) * increment_density(spec, sol.nodes[i](dim), z(dim));
            } else {
                w = hat_weight(spec, sol.nodes[i], z, Decision{d});
            }
            sw += w;
            swv += w * sol.v(i);
        }
        denom(d) = sw;
        wv(d) = swv;
        if (d != keep_all) {
            if (!(sw > 0.0))
                throw WeightDegeneracy("evaluate_self_approx: all weights vanish for a decision");
            cont(d) = swv / sw;
        }
    }
    if (!(denom(keep_all) + atom > 0.0))
        throw WeightDegeneracy("evaluate_self_approx: all weights vanish for the keep decision");

    // y = G(u + beta c(y)) with c_keep(y) = (atom*y + wv) / (atom + sw)
    double y = sol.v.size() > 0 ? sol.v.mean() : 0.0;
    const double keep_share = atom / (atom + denom(keep_all));
    Vector r(d_count);
    for (int it = 0; it < 200; ++it) {
        r = util + spec.beta * cont;
        r(keep_all) = util(keep_all) + spec.beta * (atom * y + wv(keep_all)) / (atom + denom(keep_all));
        const double g = smooth_max(r, spec.lambda_ev);
        const double f = g - y;
        if (std::abs(f) < 1e-13 * (1.0 + std::abs(y))) return g;
        const double s_keep = smooth_max_grad(r, spec.lambda_ev)(keep_all);
        const double fprime = spec.beta * s_keep * keep_share - 1.0;
        y -= f / fprime;
    }
    throw MaxIterations("evaluate_self_approx: scalar fixed point did not converge");
}

inline double evaluate_self_approx(const SelfApproxSolution& sol, double z) {
    return evaluate_self_approx(sol, make_state(z));
}

// ---------------------------------------------------------------------
// Expected-value fixed point in stacked coefficients (one basis-
// coefficient block per decision); the operator averages the smoothed
// maximum over next-period states.
// ---------------------------------------------------------------------

class ExpectedSieveSystem {
  public:
    ExpectedSieveSystem(std::shared_ptr<const Projector> projector, SupportContext ctx)
        : projector_(std::move(projector)), ctx_(std::move(ctx)) {
        basis_at_nodes_.resize(ctx_.num_nodes(), projector_->space().K());
        for (int i = 0; i < ctx_.num_nodes(); ++i)
            basis_at_nodes_.row(i) = projector_->space().basis(ctx_.nodes[i]).transpose();
    }

    bool smooth() const { return ctx_.spec.lambda_ev > 0.0; }
    const SupportContext& context() const { return ctx_; }
    const std::shared_ptr<const Projector>& projector() const { return projector_; }
    int K() const { return static_cast<int>(projector_->space().K()); }
    int D() const { return ctx_.spec.num_decisions(); }

    // x stacks the per-decision coefficient vectors.
    Vector apply(const Vector& x) const {
        const Matrix a = unstack(x);
        const Matrix values = apply_gamma(ctx_, Matrix(basis_at_nodes_ * a));
        Matrix next(K(), D());
        for (int d = 0; d < D(); ++d) next.col(d) = projector_->project(values.col(d));
        return stack(next);
    }

    Matrix newton_matrix(const Vector& x) const {
        const Matrix a = unstack(x);
        const Matrix v_nodes = basis_at_nodes_ * a;
        const int k = K(), dd = D(), p = ctx_.num_nodes();
        // per-node choice probabilities
        Matrix s(p, dd);
        for (int i = 0; i < p; ++i)
            s.row(i) = smooth_max_grad(Vector(ctx_.util_nodes.row(i).transpose() +
                                              ctx_.spec.beta * v_nodes.row(i).transpose()),
                                       ctx_.spec.lambda_ev)
                           .transpose();
        Matrix h = Matrix::Identity(k * dd, k * dd);
        for (int dcol = 0; dcol < dd; ++dcol) {
            // node-level sensitivity to the dcol coefficient block
            const Matrix t = ctx_.spec.beta * s.col(dcol).asDiagonal() * basis_at_nodes_;  // p x k
            for (int drow = 0; drow < dd; ++drow) {
                Matrix rows(ctx_.num_eval(), k);
                for (int m = 0; m < ctx_.num_eval(); ++m) {
                    const auto& arm = ctx_.arms[m][drow];
                    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(k);
                    for (std::size_t i = 0; i < arm.idx.size(); ++i) acc += arm.w(i) * t.row(arm.idx[i]);
                    rows.row(m) = acc;
                }
                h.block(drow * k, dcol * k, k, k) -=
                    projector_->gram_solve(Matrix(projector_->basis_at_design().transpose() * rows));
            }
        }
        return h;
    }

    Matrix unstack(const Vector& x) const {
        Matrix a(K(), D());
        for (int d = 0; d < D(); ++d) a.col(d) = x.segment(d * K(), K());
        return a;
    }
    Vector stack(const Matrix& a) const {
        Vector x(K() * D());
        for (int d = 0; d < D(); ++d) x.segment(d * K(), K()) = a.col(d);
        return x;
    }

  private:
    std::shared_ptr<const Projector> projector_;
    SupportContext ctx_;
    Matrix basis_at_nodes_;
};

struct ExpectedSieveSolution {
    std::shared_ptr<const Projector> projector;
    Matrix alpha;  // K x D
    SolveLog log;

    double evaluate(const State& z, int d) const { return projector->evaluate(alpha.col(d), z); }
};

inline ExpectedSieveSolution solve_expected_sieve(const ExpectedSieveSystem& system, const SolverConfig& cfg) {
    Vector x0 = Vector::Zero(system.K() * system.D());
    SolveLog log;
    Vector x = solve(system, std::move(x0), cfg, &log);
    ExpectedSieveSolution sol;
    sol.projector = system.projector();
    sol.alpha = system.unstack(x);
    sol.log = std::move(log);
    return sol;
}

}  // namespace ddp
