#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qcollide/state.hpp"
#include "qcollide/types.hpp"

namespace qcollide {

// Flip-flop coupling epsilon_ij between qubits i < j (1-based).
struct Coupling {
    int i = 0;
    int j = 0;
    double strength = 0.0;
};

// Coupled-qubit system: per-qubit level splittings omega_k (hbar = 1) and a
// list of pairwise flip-flop couplings. target_qubit is the qubit that
// collides with fresh ancillas.
struct SystemSpec {
    int n_qubits = 0;
    std::vector<double> splittings;
    std::vector<Coupling> couplings;
    int target_qubit = 0;  // defaults to n_qubits when 0

    int resolved_target() const { return target_qubit == 0 ? n_qubits : target_qubit; }

    void validate() const {
        if (n_qubits < 1) throw std::invalid_argument("SystemSpec: n_qubits must be >= 1");
        if (static_cast<int>(splittings.size()) != n_qubits)
            throw std::invalid_argument("SystemSpec: splittings must have one entry per qubit");
        for (const auto& c : couplings)
            if (c.i < 1 || c.j <= c.i || c.j > n_qubits)
                throw std::out_of_range("SystemSpec: coupling indices must satisfy 1 <= i < j <= n_qubits");
        const int t = resolved_target();
        if (t < 1 || t > n_qubits)
            throw std::out_of_range("SystemSpec: target_qubit out of range");
    }
};

// Hermitian, PSD, trace-1 matrix over a 2^N-dimensional qubit space.
// Invariants are checked on demand, not on construction: intermediate
// accumulator sums pass through this type before normalization.
struct DensityMatrix {
    CMatrix mat;

    DensityMatrix() = default;
    explicit DensityMatrix(CMatrix m) : mat(std::move(m)) {
        if (mat.rows() != mat.cols()) throw std::invalid_argument("DensityMatrix: matrix must be square");
    }

    Index dim() const { return mat.rows(); }
    Complex trace() const { return mat.trace(); }

    double hermiticity_error() const { return (mat - mat.adjoint()).cwiseAbs().maxCoeff(); }

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(mat, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    bool is_valid(double tol = 1e-10) const {
        return hermiticity_error() <= tol && std::abs(trace().real() - 1.0) <= tol &&
               std::abs(trace().imag()) <= tol && min_eigenvalue() >= -tol;
    }
};

struct UnitaryMatrix {
    CMatrix mat;

    UnitaryMatrix() = default;
    explicit UnitaryMatrix(CMatrix m) : mat(std::move(m)) {
        if (mat.rows() != mat.cols()) throw std::invalid_argument("UnitaryMatrix: matrix must be square");
    }

    Index dim() const { return mat.rows(); }

    double unitarity_error() const {
        return (mat * mat.adjoint() - CMatrix::Identity(dim(), dim())).cwiseAbs().maxCoeff();
    }
};

inline CMatrix pauli_x() {
    CMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline CMatrix pauli_y() {
    CMatrix m(2, 2);
    m << Complex{0, 0}, Complex{0, -1}, Complex{0, 1}, Complex{0, 0};
    return m;
}

inline CMatrix pauli_z() {
    CMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// I_{2^(k-1)} (x) op (x) I_{2^(n-k)} for a single-qubit op on qubit k.
inline CMatrix embed_single_qubit(const CMatrix& op, int k, int n) {
    if (op.rows() != 2 || op.cols() != 2)
        throw std::invalid_argument("embed_single_qubit: op must be 2x2");
    if (k < 1 || k > n) throw std::out_of_range("embed_single_qubit: qubit index out of range");
    CMatrix left = CMatrix::Identity(pow2(k - 1), pow2(k - 1));
    CMatrix right = CMatrix::Identity(pow2(n - k), pow2(n - k));
    return kron(kron(left, op), right);
}

// H_S = sum_k (omega_k/2) Z_k + sum_(i,j) eps_ij (sigma+_ij + sigma-_ij),
// where sigma+_ij moves one excitation from qubit i to qubit j. Hermitian by
// construction: every off-diagonal entry is written together with its mirror.
inline CMatrix build_system_hamiltonian(const SystemSpec& spec) {
    spec.validate();
    const int n = spec.n_qubits;
    const Index dim = pow2(n);
    CMatrix h = CMatrix::Zero(dim, dim);

    for (Index s = 0; s < dim; ++s) {
        double e = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double w = spec.splittings[static_cast<std::size_t>(k - 1)];
            e += qubit_bit(s, k, n) == 0 ? w / 2.0 : -w / 2.0;
        }
        h(s, s) = e;
    }

    for (const auto& c : spec.couplings) {
        const Index mask_i = Index{1} << (n - c.i);
        const Index mask_j = Index{1} << (n - c.j);
        for (Index s = 0; s < dim; ++s) {
            // sigma+ column index: qubit i excited, qubit j ground
            if ((s & mask_i) != 0 && (s & mask_j) == 0) {
                const Index r = (s & ~mask_i) | mask_j;
                h(r, s) += c.strength;
                h(s, r) += c.strength;
            }
        }
    }
    return h;
}

// Basis index with the bits of qubits i and j exchanged.
inline Index swap_bits_index(Index idx, int i, int j, int n) {
    const int pi = n - i;
    const int pj = n - j;
    const Index bi = (idx >> pi) & 1;
    const Index bj = (idx >> pj) & 1;
    if (bi == bj) return idx;
    return idx ^ ((Index{1} << pi) | (Index{1} << pj));
}

// Permutation matrix exchanging qubits i and j; real, symmetric, involutive.
inline UnitaryMatrix swap_operator(int i, int j, int n) {
    if (i < 1 || j <= i || j > n) throw std::out_of_range("swap_operator: need 1 <= i < j <= n");
    const Index dim = pow2(n);
    CMatrix s = CMatrix::Zero(dim, dim);
    for (Index c = 0; c < dim; ++c) s(swap_bits_index(c, i, j, n), c) = 1.0;
    return UnitaryMatrix{std::move(s)};
}

// cos(theta_s) I + i sin(theta_s) S_ij
inline UnitaryMatrix partial_swap(double theta_s, int i, int j, int n) {
    UnitaryMatrix s = swap_operator(i, j, n);
    const Index dim = s.dim();
    CMatrix sp = Complex{0.0, std::sin(theta_s)} * s.mat;
    sp += std::cos(theta_s) * CMatrix::Identity(dim, dim);
    return UnitaryMatrix{std::move(sp)};
}

// e^{-i H dt} through the eigendecomposition of H. H must be Hermitian to
// within 1e-10; callers evolving repeatedly should build this once per
// Hamiltonian and reuse the matrix.
inline UnitaryMatrix free_propagator(const CMatrix& h, double dt) {
    if (h.rows() != h.cols()) throw std::invalid_argument("free_propagator: matrix must be square");
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("free_propagator: matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    if (es.info() != Eigen::Success) throw std::runtime_error("free_propagator: eigendecomposition failed");
    CVector phases(h.rows());
    for (Index k = 0; k < h.rows(); ++k)
        phases[k] = std::polar(1.0, -es.eigenvalues()[k] * dt);
    CMatrix u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    return UnitaryMatrix{std::move(u)};
}

// |psi><psi|
inline DensityMatrix outer_product(const StateVector& psi) {
    return DensityMatrix{psi.amps * psi.amps.adjoint()};
}

// Gibbs state of a single ancilla qubit with levels 0 and omega:
// diag(1/Z, e^{-beta omega}/Z), Z = 1 + e^{-beta omega}.
inline DensityMatrix thermal_qubit_dm(double beta, double omega) {
    if (beta < 0.0) throw std::invalid_argument("thermal_qubit_dm: beta must be >= 0");
    const double boltz = std::exp(-beta * omega);
    const double z = 1.0 + boltz;
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 0) = 1.0 / z;
    m(1, 1) = boltz / z;
    return DensityMatrix{std::move(m)};
}

}  // namespace qcollide
