#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "qcollide/operators.hpp"
#include "qcollide/state.hpp"
#include "qcollide/types.hpp"

namespace qcollide {

// Two-branch decomposition of tr_k{|psi><psi|}: the normalized conditional
// states of the remaining n-1 qubits given qubit k measured |0> or |1>,
// with weights N_i^2. weight0 + weight1 = 1 for normalized input. A branch
// with exactly zero weight is flagged degenerate and left empty rather than
// normalized (0/0).
struct BranchPair {
    double weight0 = 0.0;
    double weight1 = 0.0;
    StateVector branch0;
    StateVector branch1;
    bool degenerate0 = true;
    bool degenerate1 = true;
};

namespace detail {

// Amplitudes of psi conditioned on qubit k being |i>, before normalization:
// out[b*2^(n-k)+a] = psi[(2b+i)*2^(n-k)+a] over b in [0,2^(k-1)), a in [0,2^(n-k)).
inline CVector gather_branch(const StateVector& psi, int k, int i) {
    const int n = psi.n_qubits;
    const Index outer = pow2(k - 1);
    const Index inner = pow2(n - k);
    CVector out(outer * inner);
    for (Index b = 0; b < outer; ++b)
        for (Index a = 0; a < inner; ++a)
            out[b * inner + a] = psi.amps[(2 * b + i) * inner + a];
    return out;
}

}  // namespace detail

inline BranchPair ptrace_branches(const StateVector& psi, int k) {
    const int n = psi.n_qubits;
    if (k < 1 || k > n) throw std::out_of_range("ptrace_branches: qubit index out of range");
    if (n < 2) throw std::invalid_argument("ptrace_branches: need at least 2 qubits");

    BranchPair pair;
    for (int i = 0; i < 2; ++i) {
        CVector gathered = detail::gather_branch(psi, k, i);
        const double ni = gathered.norm();
        const double weight = ni * ni;
        const bool degenerate = ni == 0.0;
        if (!degenerate) gathered /= ni;
        if (i == 0) {
            pair.weight0 = weight;
            pair.degenerate0 = degenerate;
            if (!degenerate) pair.branch0 = StateVector{n - 1, std::move(gathered)};
        } else {
            pair.weight1 = weight;
            pair.degenerate1 = degenerate;
            if (!degenerate) pair.branch1 = StateVector{n - 1, std::move(gathered)};
        }
    }
    return pair;
}

// Monte Carlo stochastic partial trace: select branch 0 when x_r < N_0^2,
// branch 1 otherwise. Over many uniform draws the selection frequency of
// branch i converges to its weight. A degenerate branch can only be hit
// through floating-point boundary effects; the other branch is taken then.
inline std::pair<StateVector, int> mc_ptrace(const StateVector& psi, int k, double x_r) {
    BranchPair pair = ptrace_branches(psi, k);
    int chosen = x_r < pair.weight0 ? 0 : 1;
    if (chosen == 0 && pair.degenerate0) chosen = 1;
    if (chosen == 1 && pair.degenerate1) chosen = 0;
    if ((chosen == 0 && pair.degenerate0) || (chosen == 1 && pair.degenerate1))
        throw std::domain_error("mc_ptrace: both branches degenerate (zero-norm input)");
    return {chosen == 0 ? std::move(pair.branch0) : std::move(pair.branch1), chosen};
}

// Partial trace over qubit k via the projector sum: summing the diagonal
// blocks of rho that correspond to qubit k in |0> and |1>. Trace-preserving
// and Hermiticity-preserving; serves as the density-matrix reference for the
// branch decomposition above.
inline DensityMatrix ptrace_dm(const DensityMatrix& rho, int k) {
    const int n = log2_exact(rho.dim());
    if (n < 1) throw std::invalid_argument("ptrace_dm: dimension must be a power of two >= 2");
    if (k < 1 || k > n) throw std::out_of_range("ptrace_dm: qubit index out of range");

    const Index outer = pow2(k - 1);
    const Index inner = pow2(n - k);
    CMatrix out = CMatrix::Zero(outer * inner, outer * inner);
    for (int i = 0; i < 2; ++i)
        for (Index br = 0; br < outer; ++br)
            for (Index ar = 0; ar < inner; ++ar)
                for (Index bc = 0; bc < outer; ++bc)
                    for (Index ac = 0; ac < inner; ++ac)
                        out(br * inner + ar, bc * inner + ac) +=
                            rho.mat((2 * br + i) * inner + ar, (2 * bc + i) * inner + ac);
    return DensityMatrix{std::move(out)};
}

}  // namespace qcollide
