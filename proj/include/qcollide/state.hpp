#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "qcollide/types.hpp"

namespace qcollide {

// Pure state of n qubits over the computational basis, stored as 2^n complex
// amplitudes. Qubit 1 is the most significant bit of the basis index:
// |q1 q2 ... qn> sits at index sum_k q_k * 2^(n-k), so the basis enumerates
// as |00...0>, |00...1>, ..., |11...1> in raising binary order.
struct StateVector {
    int n_qubits = 0;
    CVector amps;

    StateVector() = default;

    StateVector(int n, CVector a) : n_qubits(n), amps(std::move(a)) {
        if (n_qubits < 1) throw std::invalid_argument("StateVector: n_qubits must be >= 1");
        if (amps.size() != pow2(n_qubits))
            throw std::invalid_argument("StateVector: amplitude count must be 2^n_qubits");
    }

    Index dim() const { return amps.size(); }

    // |00...0>
    static StateVector zero_state(int n) { return basis_state(n, 0); }

    static StateVector basis_state(int n, Index index) {
        if (n < 1) throw std::invalid_argument("StateVector: n_qubits must be >= 1");
        if (index < 0 || index >= pow2(n))
            throw std::out_of_range("StateVector: basis index out of range");
        CVector a = CVector::Zero(pow2(n));
        a[index] = Complex{1.0, 0.0};
        return StateVector{n, std::move(a)};
    }
};

// Computational basis label, qubit 1 first (most significant digit).
using BasisLabel = std::vector<int>;

// Big-endian binary value of the digit string.
inline Index basis_index(const BasisLabel& bits) {
    Index idx = 0;
    for (int b : bits) {
        if (b != 0 && b != 1) throw std::invalid_argument("basis_index: digits must be 0 or 1");
        idx = (idx << 1) | b;
    }
    return idx;
}

inline BasisLabel basis_label(Index index, int n_qubits) {
    if (index < 0 || index >= pow2(n_qubits))
        throw std::out_of_range("basis_label: index out of range");
    BasisLabel bits(static_cast<std::size_t>(n_qubits));
    for (int k = 0; k < n_qubits; ++k)
        bits[static_cast<std::size_t>(k)] = static_cast<int>((index >> (n_qubits - 1 - k)) & 1);
    return bits;
}

// Value of qubit k (1-based, qubit 1 most significant) in basis index idx.
inline int qubit_bit(Index idx, int k, int n_qubits) {
    return static_cast<int>((idx >> (n_qubits - k)) & 1);
}

inline double norm(const StateVector& v) { return v.amps.norm(); }

// Returns the unit-norm state and the original 2-norm. A zero vector cannot
// be normalized and is signalled by throwing; callers that can handle the
// degenerate case (see ptrace) check the norm first.
inline std::pair<StateVector, double> normalize(const StateVector& v) {
    const double n = norm(v);
    if (n == 0.0) throw std::domain_error("normalize: zero-norm state");
    return {StateVector{v.n_qubits, v.amps / n}, n};
}

// |a> (x) |b>; amplitude at i*2^(b.n_qubits)+j is a[i]*b[j].
inline StateVector tensor_product(const StateVector& a, const StateVector& b) {
    const Index db = b.dim();
    CVector out(a.dim() * db);
    for (Index i = 0; i < a.dim(); ++i)
        for (Index j = 0; j < db; ++j) out[i * db + j] = a.amps[i] * b.amps[j];
    return StateVector{a.n_qubits + b.n_qubits, std::move(out)};
}

// <a|b>
inline Complex inner_product(const StateVector& a, const StateVector& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("inner_product: dimension mismatch");
    return a.amps.dot(b.amps);
}

// <psi|O|psi>; real up to rounding when O is Hermitian.
inline Complex expectation(const StateVector& psi, const CMatrix& op) {
    if (op.rows() != psi.dim() || op.cols() != psi.dim())
        throw std::invalid_argument("expectation: operator dimension mismatch");
    return psi.amps.dot(op * psi.amps);
}

}  // namespace qcollide
