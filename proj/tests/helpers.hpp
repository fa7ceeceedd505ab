#pragma once

#include "ddp/model.hpp"

namespace ddp::test {

inline ModelSpec default_model() { return ModelSpec{}; }

// Utility constant in state and decision; the fixed point has the
// closed form (u0 + lambda log D) / (1 - beta).
inline ModelSpec constant_utility_model() {
    ModelSpec spec;
    spec.rc = 0.0;
    spec.theta_c = 0.0;
    return spec;
}

}  // namespace ddp::test
