#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "ddp/model.hpp"

namespace ddp {

inline constexpr double kLambdaBar = 10.0;  // admissible smoothing range is [0, kLambdaBar]

struct SmoothingParam {
    double lambda = 0.0;
    void validate() const {
        if (!(lambda >= 0.0)) throw std::domain_error("lambda must be >= 0");
        if (lambda > kLambdaBar) throw std::domain_error("lambda exceeds lambda_bar");
    }
};

// Social surplus / smoothed max: max(r) + lambda * log sum exp((r - max r)/lambda).
// lambda == 0 gives the hard max.
inline double smooth_max(const Vector& r, double lambda) {
    if (r.size() == 0) throw std::domain_error("smooth_max: empty vector");
    SmoothingParam{lambda}.validate();
    const double m = r.maxCoeff();
    if (lambda <= 0.0) return m;
    double acc = 0.0;
    for (Eigen::Index d = 0; d < r.size(); ++d) acc += std::exp((r(d) - m) / lambda);
    return m + lambda * std::log(acc);
}

// Gradient of smooth_max, the softmax of r/lambda.  At lambda == 0 we
// return the indicator of the argmax (lowest index wins ties), a valid
// subgradient choice.
inline Vector smooth_max_grad(const Vector& r, double lambda) {
    if (r.size() == 0) throw std::domain_error("smooth_max_grad: empty vector");
    SmoothingParam{lambda}.validate();
    Vector g = Vector::Zero(r.size());
    if (lambda <= 0.0) {
        Eigen::Index arg = 0;
        r.maxCoeff(&arg);
        g(arg) = 1.0;
        return g;
    }
    const double m = r.maxCoeff();
    double denom = 0.0;
    for (Eigen::Index d = 0; d < r.size(); ++d) {
        g(d) = std::exp((r(d) - m) / lambda);
        denom += g(d);
    }
    g /= denom;
    return g;
}

// d smooth_max / d lambda.  Bounded by log D + D/e.
inline double smooth_max_lambda_deriv(const Vector& r, double lambda) {
    if (r.size() == 0) throw std::domain_error("smooth_max_lambda_deriv: empty vector");
    if (!(lambda > 0.0)) throw std::domain_error("smooth_max_lambda_deriv: lambda must be > 0");
    const double m = r.maxCoeff();
    double denom = 0.0, weighted = 0.0;
    for (Eigen::Index d = 0; d < r.size(); ++d) {
        const double t = (r(d) - m) / lambda;
        const double e = std::exp(t);
        denom += e;
        weighted += e * t;
    }
    return std::log(denom) - weighted / denom;
}

// Conditional choice probabilities P(d|z) of the extreme-value model,
// evaluated at the vector of utilities plus discounted expected values.
inline Vector choice_probabilities(const Vector& utilities_plus_beta_v, double lambda) {
    if (!(lambda > 0.0)) throw std::domain_error("choice_probabilities: lambda must be > 0");
    return smooth_max_grad(utilities_plus_beta_v, lambda);
}

}  // namespace ddp
