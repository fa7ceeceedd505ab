#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ddp/errors.hpp"
#include "ddp/model.hpp"

namespace ddp {

// Truncated Chebyshev basis: T_0..T_{J-1} of the affinely mapped state,
// held at the boundary value (sign T)^{k-1} outside [z_min, z_max].
inline Vector chebyshev_basis(double z, int J, double z_min, double z_max) {
    if (J < 1) throw std::domain_error("chebyshev_basis: J must be >= 1");
    if (!(z_max > z_min)) throw std::domain_error("chebyshev_basis: z_max must exceed z_min");
    const double t = 2.0 * (z - z_min) / (z_max - z_min) - 1.0;
    Vector out(J);
    if (std::abs(t) <= 1.0) {
        const double theta = std::acos(t);
        for (int k = 0; k < J; ++k) out(k) = std::cos(k * theta);
    } else {
        const double s = (t > 0.0) ? 1.0 : -1.0;
        double p = 1.0;
        for (int k = 0; k < J; ++k) {
            out(k) = p;
            p *= s;
        }
    }
    return out;
}

// Chebyshev nodes mapped to [z_min, z_max], ascending.
inline std::vector<double> chebyshev_nodes(int M, double z_min, double z_max) {
    if (M < 1) throw std::domain_error("chebyshev_nodes: M must be >= 1");
    std::vector<double> nodes(M);
    for (int j = 1; j <= M; ++j) {
        const double x = std::cos((2.0 * j - 1.0) * std::numbers::pi / (2.0 * M));
        nodes[M - j] = z_min + 0.5 * (x + 1.0) * (z_max - z_min);
    }
    return nodes;
}

// Clamped knot vector for J cardinal B-splines of degree k on [0,1]:
// boundary knots repeated so the basis spans constants, interior knots
// equidistant.  Length J + k + 1.
inline std::vector<double> bspline_knots(int J, int k) {
    if (k < 0) throw std::domain_error("bspline_knots: invalid order");
    if (J < k + 1) throw std::domain_error("bspline_knots: need J >= k+1");
    std::vector<double> knots(J + k + 1);
    const int interior = J - k;  // number of interior intervals
    for (int i = 0; i < J + k + 1; ++i) {
        const int clamped = std::clamp(i - k, 0, interior);
        knots[i] = static_cast<double>(clamped) / interior;
    }
    return knots;
}

namespace detail {

// Cox-de Boor recursion with the 0/0 = 0 convention.
inline double cox_de_boor(const std::vector<double>& t, int i, int k, double x) {
    if (k == 0) return (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
    double left = 0.0, right = 0.0;
    if (t[i + k] > t[i]) left = (x - t[i]) / (t[i + k] - t[i]) * cox_de_boor(t, i, k - 1, x);
    if (t[i + k + 1] > t[i + 1])
        right = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * cox_de_boor(t, i + 1, k - 1, x);
    return left + right;
}

}  // namespace detail

// Cardinal B-spline basis of degree k on equidistant clamped knots,
// evaluated at the mapped state T(z) = (z - z_min)/(z_max - z_min).
// Outside [0,1] the basis is held at its boundary value.
inline Vector bspline_basis(double z, int J, int k, double z_min, double z_max) {
    if (!(z_max > z_min)) throw std::domain_error("bspline_basis: z_max must exceed z_min");
    const auto knots = bspline_knots(J, k);
    double t = (z - z_min) / (z_max - z_min);
    t = std::clamp(t, 0.0, 1.0);
    Vector out = Vector::Zero(J);
    if (t >= 1.0) {
        out(J - 1) = 1.0;  // closed right endpoint of the last interval
        return out;
    }
    for (int i = 0; i < J; ++i) out(i) = detail::cox_de_boor(knots, i, k, t);
    return out;
}

// Universal-Method interpolation nodes in [0,1]: the maximizer of each
// basis spline for k >= 1, the first J knots for k = 0.
inline std::vector<double> universal_nodes(int J, int k) {
    const auto knots = bspline_knots(J, k);
    std::vector<double> nodes(J);
    if (k == 0) {
        for (int i = 0; i < J; ++i) nodes[i] = knots[i];
        return nodes;
    }
    for (int i = 0; i < J; ++i) {
        const double lo = knots[i];
        const double hi = knots[i + k + 1];
        // coarse grid scan followed by golden-section refinement
        auto f = [&](double x) { return detail::cox_de_boor(knots, i, k, std::min(x, 1.0 - 1e-15)); };
        double best_x = lo, best_v = -1.0;
        const int grid = 512;
        for (int g = 0; g <= grid; ++g) {
            const double x = lo + (hi - lo) * g / grid;
            const double v = f(x);
            if (v > best_v) {
                best_v = v;
                best_x = x;
            }
        }
        double a0 = std::max(lo, best_x - (hi - lo) / grid);
        double b0 = std::min(hi, best_x + (hi - lo) / grid);
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        for (int it = 0; it < 80; ++it) {
            const double c = b0 - gr * (b0 - a0);
            const double d = a0 + gr * (b0 - a0);
            if (f(c) < f(d))
                a0 = c;
            else
                b0 = d;
        }
        nodes[i] = 0.5 * (a0 + b0);
    }
    std::sort(nodes.begin(), nodes.end());
    return nodes;
}

enum class BasisFamily { Chebyshev, BSpline };

// Linear sieve space: per-dimension basis of size J, tensor products for
// d_z = 2 in lexicographic (j1, j2) coefficient order.
struct SieveSpace {
    BasisFamily family = BasisFamily::Chebyshev;
    int order = 2;  // B-spline degree
    int j_per_dim = 10;
    int d_z = 1;
    double z_min = 0.0;
    double z_max = 1000.0;

    int K() const {
        int k = 1;
        for (int i = 0; i < d_z; ++i) k *= j_per_dim;
        return k;
    }

    Vector basis_1d(double z) const {
        return family == BasisFamily::Chebyshev ? chebyshev_basis(z, j_per_dim, z_min, z_max)
                                                : bspline_basis(z, j_per_dim, order, z_min, z_max);
    }

    Vector basis(const State& z) const {
        if (d_z == 1) return basis_1d(z(0));
        const Vector b1 = basis_1d(z(0));
        const Vector b2 = basis_1d(z(1));
        Vector out(j_per_dim * j_per_dim);
        for (int j1 = 0; j1 < j_per_dim; ++j1)
            for (int j2 = 0; j2 < j_per_dim; ++j2) out(j1 * j_per_dim + j2) = b1(j1) * b2(j2);
        return out;
    }

    std::vector<double> nodes_1d() const {
        if (family == BasisFamily::Chebyshev) return chebyshev_nodes(j_per_dim, z_min, z_max);
        auto unit = universal_nodes(j_per_dim, order);
        for (double& x : unit) x = z_min + x * (z_max - z_min);
        return unit;
    }

    // Default design points: M = K per-dimension nodes (Cartesian product
    // in two dimensions).
    std::vector<State> default_design_points() const {
        const auto n1 = nodes_1d();
        std::vector<State> pts;
        if (d_z == 1) {
            for (double z : n1) pts.push_back(make_state(z));
        } else {
            for (double z1 : n1)
                for (double z2 : n1) pts.push_back(make_state(z1, z2));
        }
        return pts;
    }
};

// Least-squares projector onto a sieve space at fixed design points.
class Projector {
  public:
    Projector(const SieveSpace& space, std::vector<State> design_points)
        : space_(space), design_points_(std::move(design_points)) {
        const int M = static_cast<int>(design_points_.size());
        const int K = space_.K();
        if (M < K) throw SingularProjection("Projector: need M >= K design points");
        basis_at_design_.resize(M, K);
        for (int i = 0; i < M; ++i) basis_at_design_.row(i) = space_.basis(design_points_[i]).transpose();
        const Matrix gram = basis_at_design_.transpose() * basis_at_design_;
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
        const double emin = es.eigenvalues().minCoeff();
        const double emax = es.eigenvalues().maxCoeff();
        if (!(emin > 0.0)) throw SingularProjection("Projector: singular Gram matrix");
        ill_conditioned_ = (emax / emin) > 1e12;
        gram_llt_.compute(gram);
        if (gram_llt_.info() != Eigen::Success)
            throw SingularProjection("Projector: Gram factorization failed");
    }

    const SieveSpace& space() const { return space_; }
    const std::vector<State>& design_points() const { return design_points_; }
    const Matrix& basis_at_design() const { return basis_at_design_; }
    bool ill_conditioned() const { return ill_conditioned_; }

    // alpha = (sum B B')^{-1} sum B v
    Vector project(const Vector& values_at_design) const {
        if (values_at_design.size() != basis_at_design_.rows())
            throw std::domain_error("Projector::project: value count mismatch");
        return gram_llt_.solve(basis_at_design_.transpose() * values_at_design);
    }

    Vector gram_solve(const Vector& rhs) const { return gram_llt_.solve(rhs); }
    Matrix gram_solve(const Matrix& rhs) const { return gram_llt_.solve(rhs); }

    double evaluate(const Vector& alpha, const State& z) const { return alpha.dot(space_.basis(z)); }

    // Grid-restricted projection matrix P = B (B'B)^{-1} B'.
    Matrix p_matrix() const {
        return basis_at_design_ * gram_llt_.solve(basis_at_design_.transpose());
    }

    // Grid-restricted sup operator norm: max absolute row sum of P.
    // Values <= 1 certify a non-expansive projector on the grid.
    double sup_operator_norm() const { return p_matrix().cwiseAbs().rowwise().sum().maxCoeff(); }

  private:
    SieveSpace space_;
    std::vector<State> design_points_;
    Matrix basis_at_design_;  // M x K
    Eigen::LLT<Matrix> gram_llt_;
    bool ill_conditioned_ = false;
};

}  // namespace ddp
