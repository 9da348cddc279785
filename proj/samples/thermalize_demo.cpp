// Minimal library usage: a single qubit relaxes to the ancilla temperature
// under repeated partial-swap collisions. Prints the ensemble <sigma_z> per
// collision next to the exact density-matrix value.

#include <cstdio>

#include "qcollide/qcollide.hpp"

using namespace qcollide;

int main() {
    CollisionConfig cfg;
    cfg.system = SystemSpec{1, {1.0}, {}, 0};
    cfg.ancilla = ThermalAncillaSpec{1.0, 1.0};
    cfg.theta_s = 0.4;
    cfg.dt = 0.1;
    cfg.n_collisions = 40;
    cfg.ensemble_size = 5000;
    cfg.seed = 2024;

    const StateVector psi0 = StateVector::basis_state(1, 1);  // start excited

    EnsembleOptions opts;
    opts.observables.push_back(parse_observable("sz1", 1));
    const EnsembleResult ens = run_ensemble(psi0, cfg, opts);

    const ExactCollisionMap map(cfg);
    const CMatrix sz = pauli_z();
    DensityMatrix rho = outer_product(psi0);

    std::printf("# collision  <sz>_ensemble  <sz>_exact\n");
    for (int c = 0; c < cfg.n_collisions; ++c) {
        rho = map.apply(rho);
        const double exact = (sz * rho.mat).trace().real();
        std::printf("%10d  %13.6f  %10.6f\n", c + 1, ens.observable_means(0, c), exact);
    }

    const DensityMatrix fixed_point = thermal_qubit_dm(cfg.ancilla.beta, cfg.ancilla.omega);
    std::printf("# thermal <sz> = %.6f\n",
                (sz * fixed_point.mat).trace().real());
    return 0;
}
