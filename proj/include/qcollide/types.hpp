#pragma once

#include <complex>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

namespace qcollide {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr Index pow2(int n) { return Index{1} << n; }

// Exact log2 for power-of-two dimensions; -1 if dim is not a power of two.
inline constexpr int log2_exact(Index dim) {
    if (dim < 1) return -1;
    int n = 0;
    while ((Index{1} << n) < dim) ++n;
    return (Index{1} << n) == dim ? n : -1;
}

}  // namespace qcollide
