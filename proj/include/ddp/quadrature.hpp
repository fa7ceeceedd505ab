#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "ddp/model.hpp"

namespace ddp {

struct QuadratureRule {
    Vector nodes;    // in (0,1)
    Vector weights;  // probability weights, sum to 1
};

// Gauss-Jacobi nodes and weights, exact for E[g(X)] with X ~ Beta(a,b),
// via Golub-Welsch on the Jacobi recurrence with parameters
// (alpha, beta) = (b-1, a-1) mapped from [-1,1] to [0,1].
inline QuadratureRule gauss_jacobi_beta(int n, double a, double b) {
    if (n < 1) throw std::domain_error("gauss_jacobi_beta: n must be >= 1");
    if (!(a > 0.0 && b > 0.0)) throw std::domain_error("gauss_jacobi_beta: shapes must be positive");
    const double al = b - 1.0;  // exponent on (1-x)
    const double be = a - 1.0;  // exponent on (1+x)

    Matrix jac = Matrix::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        double diag;
        if (k == 0) {
            diag = (be - al) / (al + be + 2.0);
        } else {
            const double s = 2.0 * k + al + be;
            diag = (be * be - al * al) / (s * (s + 2.0));
        }
        jac(k, k) = diag;
        if (k >= 1) {
            double off2;
            if (k == 1) {
                off2 = 4.0 * (1.0 + al) * (1.0 + be) /
                       ((2.0 + al + be) * (2.0 + al + be) * (3.0 + al + be));
            } else {
                const double s = 2.0 * k + al + be;
                off2 = 4.0 * k * (k + al) * (k + be) * (k + al + be) /
                       (s * s * (s + 1.0) * (s - 1.0));
            }
            const double off = std::sqrt(off2);
            jac(k, k - 1) = off;
            jac(k - 1, k) = off;
        }
    }

    Eigen::SelfAdjointEigenSolver<Matrix> es(jac);
    if (es.info() != Eigen::Success) throw std::runtime_error("gauss_jacobi_beta: eigensolver failed");

    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes(i) = 0.5 * (es.eigenvalues()(i) + 1.0);
        const double q0 = es.eigenvectors()(0, i);
        rule.weights(i) = q0 * q0;  // already normalized to total mass 1
    }
    return rule;
}

}  // namespace ddp
