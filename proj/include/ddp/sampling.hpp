#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ddp/errors.hpp"
#include "ddp/model.hpp"
#include "ddp/rng.hpp"

namespace ddp {

enum class SamplerKind { Conditional, Marginal };

// Monte Carlo draws together with their importance-sampling weights.
//
// Conditional: conditional[m][d] is an N x d_z matrix of next-state draws
// from F_Z(.|z_m, d); the Radon-Nikodym weights are identically one.
//
// Marginal: marginal is an N x d_z matrix of Uniform[0, z_max] draws shared
// across evaluation points and decisions; weights come from the
// pi-regularized kernel approximation below.
struct DrawSet {
    SamplerKind kind = SamplerKind::Marginal;
    std::vector<std::vector<Matrix>> conditional;  // [M][D], each N x d_z
    std::vector<State> eval_points;                // conditional only
    Matrix marginal;                               // N x d_z
    double z_max = 1000.0;                         // marginal truncation point
    std::uint64_t seed = 0;
    int n = 0;
    int n_eps = 0;  // taste-shock draw count for the generalized operator
};

inline DrawSet draw_conditional(const ModelSpec& spec, const std::vector<State>& eval_points, int n,
                                std::uint64_t seed) {
    DrawSet ds;
    ds.kind = SamplerKind::Conditional;
    ds.eval_points = eval_points;
    ds.seed = seed;
    ds.n = n;
    const int D = spec.num_decisions();
    ds.conditional.resize(eval_points.size());
    for (std::size_t m = 0; m < eval_points.size(); ++m) {
        ds.conditional[m].resize(D);
        for (int d = 0; d < D; ++d) {
            auto rng = make_engine(derive_seed(seed, {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(d)}));
            Matrix draws(n, spec.d_z);
            for (int i = 0; i < n; ++i)
                draws.row(i) = sample_transition(spec, eval_points[m], Decision{d}, rng).transpose();
            ds.conditional[m][d] = std::move(draws);
        }
    }
    return ds;
}

inline DrawSet draw_marginal_uniform(int n, double z_max, std::uint64_t seed, int d_z = 1) {
    if (!(z_max > 0.0)) throw std::domain_error("draw_marginal_uniform: z_max must be > 0");
    DrawSet ds;
    ds.kind = SamplerKind::Marginal;
    ds.z_max = z_max;
    ds.seed = seed;
    ds.n = n;
    auto rng = make_engine(derive_seed(seed, {0}));
    std::uniform_real_distribution<double> unif(0.0, z_max);
    ds.marginal.resize(n, d_z);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d_z; ++j) ds.marginal(i, j) = unif(rng);
    return ds;
}

inline Vector normalized_weights(const Vector& weight_values) {
    const double total = weight_values.sum();
    if (!(total > 0.0)) throw WeightDegeneracy("normalized_weights: all weights vanish");
    return weight_values / total;
}

// pi-regularized weight kernel w_hat(z'|z,d): the Dirac mass of the true
// kernel is replaced by an exact-equality indicator at the post-decision
// state.  The constant marginal density 1/z_max cancels under
// normalization and is dropped.
inline double hat_weight(const ModelSpec& spec, const State& z_next, const State& z, Decision d) {
    double prod = 1.0;
    for (int i = 0; i < spec.d_z; ++i) {
        const double x = post_decision_1d(z(i), d.replaces(i));
        const double atom = (z_next(i) == x) ? spec.pi : 0.0;
        prod *= atom + (1.0 - spec.pi) * increment_density(spec, z_next(i), x);
    }
    return prod;
}

// Raw (unnormalized) weights of all marginal draws for one evaluation
// point and decision.
inline Vector raw_weight_row(const ModelSpec& spec, const DrawSet& draws, const State& z, Decision d) {
    Vector w(draws.n);
    State zn(spec.d_z);
    for (int i = 0; i < draws.n; ++i) {
        zn = draws.marginal.row(i).transpose();
        w(i) = hat_weight(spec, zn, z, d);
    }
    return w;
}

// N x N row-normalized weight matrix for the self-approximating method.
// Row k holds the weights of all draws as seen from state Z_k; for the
// all-keep decision row k's diagonal receives the pi mass, so every row
// sum is strictly positive whenever pi > 0.
inline Matrix self_approx_weight_matrix(const ModelSpec& spec, const DrawSet& draws, Decision d) {
    const int n = draws.n;
    Matrix w(n, n);
    State zk(spec.d_z);
    for (int k = 0; k < n; ++k) {
        zk = draws.marginal.row(k).transpose();
        w.row(k) = raw_weight_row(spec, draws, zk, d).transpose();
        const double total = w.row(k).sum();
        if (!(total > 0.0)) throw WeightDegeneracy("self_approx_weight_matrix: degenerate row");
        w.row(k) /= total;
    }
    return w;
}

}  // namespace ddp
