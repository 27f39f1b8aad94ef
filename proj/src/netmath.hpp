#pragma once

#include <cmath>

namespace lexchain {

// Shared by the tape (training) and plain (inference) forward paths so the
// two compute bit-compatible values.
inline constexpr double kLayerNormEps = 1e-5;

inline double gelu_scalar(double v) {
    constexpr double c = 0.7978845608028654; // sqrt(2/pi)
    constexpr double a = 0.044715;
    double u = c * (v + a * v * v * v);
    return 0.5 * v * (1.0 + std::tanh(u));
}

} // namespace lexchain
