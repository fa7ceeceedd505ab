#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ddp/errors.hpp"
#include "ddp/rng.hpp"

namespace ddp {

// States are d_z-dimensional with d_z <= 2 in the harness; a fixed max
// size keeps evaluation allocation-free.
using State = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 2, 1>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline State make_state(double z) {
    State s(1);
    s(0) = z;
    return s;
}

inline State make_state(double z1, double z2) {
    State s(2);
    s(0) = z1;
    s(1) = z2;
    return s;
}

// Composite decision over d_z independent binary keep/replace choices.
// Bit i of the index is the choice in dimension i (1 = replace).
struct Decision {
    int index = 0;
    bool replaces(int dim) const { return (index >> dim) & 1; }
    static Decision keep_all() { return {0}; }
    static Decision replace_all(int d_z) { return {(1 << d_z) - 1}; }
};

// Replacement model: linear maintenance cost, Beta-mixture usage
// increments, regeneration to zero on replacement.
struct ModelSpec {
    double beta = 0.95;        // discount factor
    double rc = 10.0;          // replacement cost (utils)
    double theta_c = 2.0;      // cost slope per 1000 usage units
    double lambda_ev = 1.0;    // extreme-value taste-shock scale
    double sigma_z = 15.0;     // transition support width
    double a = 2.0;            // Beta shape
    double b = 5.0;            // Beta shape
    double pi = 1e-9;          // point mass at the post-decision state
    int d_z = 1;               // state dimension
    double kappa = 0.0;        // interaction coefficient (1/20 in the interaction model)
    double z_min = 0.0;
    double z_max_domain = 1000.0;

    int num_decisions() const { return 1 << d_z; }

    void validate() const {
        if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("beta must lie in (0,1)");
        if (!(rc >= 0.0)) throw std::domain_error("rc must be >= 0");
        if (!(lambda_ev > 0.0)) throw std::domain_error("lambda_ev must be > 0");
        if (!(sigma_z > 0.0)) throw std::domain_error("sigma_z must be > 0");
        if (!(a > 0.0 && b > 0.0)) throw std::domain_error("Beta shapes must be > 0");
        if (!(pi >= 0.0 && pi < 1.0)) throw std::domain_error("pi must lie in [0,1)");
        if (d_z < 1 || d_z > 2) throw std::domain_error("d_z must be 1 or 2");
        if (!(z_max_domain > z_min)) throw std::domain_error("z_max_domain must exceed z_min");
    }
};

inline double beta_pdf(double x, double a, double b) {
    if (!(a > 0.0 && b > 0.0)) throw std::domain_error("beta_pdf: shapes must be positive");
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    return std::exp(log_norm + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x));
}

// Maintenance cost per dimension.
inline double running_cost(const ModelSpec& spec, double z) { return spec.theta_c * 0.001 * z; }

// Per-dimension utility: -c(z) when keeping, -RC - c(0) when replacing.
inline double utility_1d(const ModelSpec& spec, double z, bool replace) {
    return replace ? -(spec.rc + running_cost(spec, 0.0)) : -running_cost(spec, z);
}

inline double per_period_utility(const ModelSpec& spec, const State& z, Decision d) {
    double total = 0.0;
    for (int i = 0; i < spec.d_z; ++i) {
        if (z(i) < 0.0) throw std::domain_error("per_period_utility: negative state component");
        total += utility_1d(spec, z(i), d.replaces(i));
    }
    if (spec.d_z == 2 && spec.kappa != 0.0) {
        total -= spec.kappa * utility_1d(spec, z(0), d.replaces(0)) * utility_1d(spec, z(1), d.replaces(1));
    }
    return total;
}

// Post-decision state: replacement regenerates the dimension to zero
// before the usage increment.
inline double post_decision_1d(double z, bool replace) { return replace ? 0.0 : z; }

inline State post_decision(const ModelSpec& spec, const State& z, Decision d) {
    State x(spec.d_z);
    for (int i = 0; i < spec.d_z; ++i) x(i) = post_decision_1d(z(i), d.replaces(i));
    return x;
}

// Continuous part of the transition kernel, as a density in z_next given
// the post-decision state x.
inline double increment_density(const ModelSpec& spec, double z_next, double x) {
    if (z_next <= x || z_next >= x + spec.sigma_z) return 0.0;
    return beta_pdf((z_next - x) / spec.sigma_z, spec.a, spec.b) / spec.sigma_z;
}

// Value of the transition kernel w.r.t. the mixed reference measure:
// mass pi at z_next == x (exact equality), density (1-pi) f_+ elsewhere.
inline double transition_density_1d(const ModelSpec& spec, double z_next, double z, bool replace) {
    const double x = post_decision_1d(z, replace);
    if (z_next == x) return spec.pi;
    return (1.0 - spec.pi) * increment_density(spec, z_next, x);
}

inline double transition_density(const ModelSpec& spec, const State& z_next, const State& z, Decision d) {
    double prod = 1.0;
    for (int i = 0; i < spec.d_z; ++i) prod *= transition_density_1d(spec, z_next(i), z(i), d.replaces(i));
    return prod;
}

inline double sample_beta(double a, double b, std::mt19937_64& rng) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

inline double sample_transition_1d(const ModelSpec& spec, double z, bool replace, std::mt19937_64& rng) {
    const double x = post_decision_1d(z, replace);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < spec.pi) return x;
    return x + spec.sigma_z * sample_beta(spec.a, spec.b, rng);
}

inline State sample_transition(const ModelSpec& spec, const State& z, Decision d, std::mt19937_64& rng) {
    State out(spec.d_z);
    for (int i = 0; i < spec.d_z; ++i) out(i) = sample_transition_1d(spec, z(i), d.replaces(i), rng);
    return out;
}

}  // namespace ddp
