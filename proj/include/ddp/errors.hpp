#pragma once

#include <stdexcept>
#include <string>

namespace ddp {

// Raised when every importance weight in a row vanishes, so the
// normalized weights (and hence the simulated Bellman operator) are
// undefined.
struct WeightDegeneracy : std::runtime_error {
    explicit WeightDegeneracy(const std::string& what) : std::runtime_error(what) {}
};

struct SingularProjection : std::runtime_error {
    explicit SingularProjection(const std::string& what) : std::runtime_error(what) {}
};

struct SingularJacobian : std::runtime_error {
    explicit SingularJacobian(const std::string& what) : std::runtime_error(what) {}
};

struct MaxIterations : std::runtime_error {
    explicit MaxIterations(const std::string& what) : std::runtime_error(what) {}
};

// Newton-Kantorovich requires a smoothed (lambda > 0) operator.
struct UnsupportedNonSmooth : std::runtime_error {
    explicit UnsupportedNonSmooth(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ddp
