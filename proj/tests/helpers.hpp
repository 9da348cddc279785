#pragma once

// Shared test utilities: reproducible random states and operators, matrix
// comparison helpers. Random inputs are driven by RngStream so every test is
// deterministic.

#include "qcollide/operators.hpp"
#include "qcollide/rng.hpp"
#include "qcollide/state.hpp"
#include "qcollide/types.hpp"

namespace qctest {

using namespace qcollide;

inline Complex random_amp(RngStream& rng) {
    return Complex{2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0};
}

inline CVector random_vector(Index dim, RngStream& rng) {
    CVector v(dim);
    for (Index i = 0; i < dim; ++i) v[i] = random_amp(rng);
    return v;
}

inline StateVector random_state(int n_qubits, RngStream& rng) {
    CVector v = random_vector(pow2(n_qubits), rng);
    v /= v.norm();
    return StateVector{n_qubits, std::move(v)};
}

inline CMatrix random_matrix(Index dim, RngStream& rng) {
    CMatrix m(dim, dim);
    for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j) m(i, j) = random_amp(rng);
    return m;
}

inline CMatrix random_hermitian(Index dim, RngStream& rng) {
    CMatrix m = random_matrix(dim, rng);
    return CMatrix{0.5 * (m + m.adjoint())};
}

// Random mixed state: normalized average of a few random pure projectors.
inline DensityMatrix random_density(int n_qubits, RngStream& rng, int rank = 3) {
    const Index dim = pow2(n_qubits);
    CMatrix sum = CMatrix::Zero(dim, dim);
    for (int r = 0; r < rank; ++r) {
        const StateVector s = random_state(n_qubits, rng);
        sum += s.amps * s.amps.adjoint();
    }
    return DensityMatrix{sum / static_cast<double>(rank)};
}

template <typename DerivedA, typename DerivedB>
double max_abs_diff(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace qctest
