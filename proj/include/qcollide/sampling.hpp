#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "qcollide/operators.hpp"
#include "qcollide/rng.hpp"
#include "qcollide/state.hpp"
#include "qcollide/types.hpp"

namespace qcollide {

// Thermal ancilla parameters: inverse temperature and level splitting.
struct ThermalAncillaSpec {
    double beta = 1.0;
    double omega = 1.0;

    void validate() const {
        if (beta < 0.0) throw std::invalid_argument("ThermalAncillaSpec: beta must be >= 0");
    }
};

// Equal superposition with i.i.d. uniform phases: amplitudes e^{i theta_n}/sqrt(dim).
// dim outer products of these average to the identity, which is what makes the
// stochastic unraveling below work. Dimension is arbitrary (not tied to qubit
// registers), so the result is a plain amplitude vector.
inline CVector random_phase_state(Index dim, RngStream& rng) {
    if (dim < 1) throw std::invalid_argument("random_phase_state: dim must be >= 1");
    const double mod = 1.0 / std::sqrt(static_cast<double>(dim));
    CVector amps(dim);
    for (Index n = 0; n < dim; ++n) amps[n] = std::polar(mod, rng.phase());
    return amps;
}

// Stochastic unraveling of a diagonalized density matrix: sum_n sqrt(p_n)
// e^{i theta_n} |n>. Squared moduli are deterministic (|amp_n|^2 = p_n); all
// randomness sits in the phases, and the ensemble average of outer products
// recovers diag(p). One phase is drawn per entry, including zero-probability
// ones, so the draw count depends only on the dimension.
inline CVector unravel_density(std::span<const double> probs, RngStream& rng) {
    if (probs.empty()) throw std::invalid_argument("unravel_density: empty probability vector");
    double total = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw std::invalid_argument("unravel_density: probabilities must be >= 0");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("unravel_density: probabilities must sum to 1");
    CVector amps(static_cast<Index>(probs.size()));
    for (Index n = 0; n < amps.size(); ++n)
        amps[n] = std::polar(std::sqrt(probs[static_cast<std::size_t>(n)]), rng.phase());
    return amps;
}

// Same, for a density matrix diagonal in the orthonormal basis given by the
// columns of `basis`.
inline CVector unravel_density(std::span<const double> probs, const CMatrix& basis, RngStream& rng) {
    if (basis.cols() != static_cast<Index>(probs.size()))
        throw std::invalid_argument("unravel_density: basis column count must match probabilities");
    const CVector coeffs = unravel_density(probs, rng);
    return basis * coeffs;
}

// Pure-state stand-in for a thermal qubit: amplitude moduli carry the Gibbs
// weights, phases are random. Averaging K outer products converges to
// thermal_qubit_dm(beta, omega) as 1/sqrt(K). Draws exactly two phases.
inline StateVector thermal_ancilla(const ThermalAncillaSpec& spec, RngStream& rng) {
    spec.validate();
    const double boltz = std::exp(-spec.beta * spec.omega);
    const double z = 1.0 + boltz;
    CVector amps(2);
    amps[0] = std::polar(std::sqrt(1.0 / z), rng.phase());
    amps[1] = std::polar(std::sqrt(boltz / z), rng.phase());
    return StateVector{1, std::move(amps)};
}

}  // namespace qcollide
