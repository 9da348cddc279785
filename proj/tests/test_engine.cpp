#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "helpers.hpp"
#include "qcollide/engine.hpp"
#include "qcollide/experiment.hpp"

using namespace qcollide;
using qctest::max_abs_diff;

namespace {

CollisionConfig single_qubit_config(double theta_s, double beta, double dt = 0.1) {
    CollisionConfig cfg;
    cfg.system = SystemSpec{1, {1.0}, {}, 0};
    cfg.ancilla = ThermalAncillaSpec{beta, 1.0};
    cfg.theta_s = theta_s;
    cfg.dt = dt;
    return cfg;
}

CollisionConfig chain_config(int n_qubits, double theta_s = 0.3, double dt = 0.1) {
    CollisionConfig cfg;
    SystemSpec sys;
    sys.n_qubits = n_qubits;
    sys.splittings.assign(static_cast<std::size_t>(n_qubits), 1.0);
    for (int q = 1; q < n_qubits; ++q) sys.couplings.push_back({q, q + 1, 0.1});
    cfg.system = sys;
    cfg.ancilla = ThermalAncillaSpec{1.0, 1.0};
    cfg.theta_s = theta_s;
    cfg.dt = dt;
    return cfg;
}

double fidelity(const StateVector& a, const StateVector& b) {
    return std::abs(inner_product(a, b));
}

// One collision averaged exhaustively: the thermal ancilla is enumerated in
// its diagonal basis with Gibbs weights and both trace branches are kept with
// their exact weights. Built from the dense public operators, independently
// of the kernel's fused path.
DensityMatrix branch_averaged_collision(const StateVector& psi, const CollisionConfig& cfg) {
    const int n = cfg.system.n_qubits;
    const CMatrix sp = partial_swap(cfg.theta_s, cfg.system.resolved_target(), n + 1, n + 1).mat;
    const CMatrix u = free_propagator(build_system_hamiltonian(cfg.system), cfg.dt).mat;
    const DensityMatrix rho_b = thermal_qubit_dm(cfg.ancilla.beta, cfg.ancilla.omega);

    CMatrix avg = CMatrix::Zero(psi.dim(), psi.dim());
    for (int a = 0; a < 2; ++a) {
        const double p_a = rho_b.mat(a, a).real();
        if (p_a == 0.0) continue;
        const StateVector composite = tensor_product(psi, StateVector::basis_state(1, a));
        const StateVector collided{n + 1, sp * composite.amps};
        const BranchPair pair = ptrace_branches(collided, n + 1);
        if (!pair.degenerate0) {
            const CVector out = u * pair.branch0.amps;
            avg += p_a * pair.weight0 * (out * out.adjoint());
        }
        if (!pair.degenerate1) {
            const CVector out = u * pair.branch1.amps;
            avg += p_a * pair.weight1 * (out * out.adjoint());
        }
    }
    return DensityMatrix{avg};
}

}  // namespace

TEST_CASE("identity collision leaves the state unchanged up to a global phase") {
    CollisionConfig cfg = single_qubit_config(0.0, 1.0, 0.0);
    RngStream rng(cfg.seed, 0);
    CVector amps(2);
    amps << Complex{0.6, 0.0}, Complex{0.0, 0.8};
    const StateVector psi{1, amps};
    const StateVector out = collision_step(psi, cfg, rng);
    CHECK(fidelity(psi, out) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(norm(out) - 1.0) < 1e-12);
}

TEST_CASE("full swap with a cold ancilla resets any state to the ground state") {
    CollisionConfig cfg = single_qubit_config(kPi / 2.0, 1e6);
    const StateVector ground = StateVector::basis_state(1, 0);
    RngStream state_rng(0x3333ull, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const StateVector psi = qctest::random_state(1, state_rng);
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(rep));
        const StateVector out = collision_step(psi, cfg, rng);
        REQUIRE(fidelity(ground, out) == Catch::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("collision_step draws one ancilla sample and one branch sample") {
    CollisionConfig cfg = single_qubit_config(0.3, 1.0);
    RngStream rng(1, 1);
    const StateVector psi = StateVector::basis_state(1, 0);
    (void)collision_step(psi, cfg, rng);
    CHECK(rng.draws() == 3);  // two phases + x_r
    (void)collision_step(psi, cfg, rng);
    CHECK(rng.draws() == 6);
}

TEST_CASE("exhaustively weighted single collision equals the exact map") {
    RngStream rng(0xAB1Eull, 0);
    const StateVector psi = qctest::random_state(1, rng);
    for (double theta : {kPi / 2.0, 0.3}) {
        CollisionConfig cfg = single_qubit_config(theta, 1.0);
        const DensityMatrix averaged = branch_averaged_collision(psi, cfg);
        const DensityMatrix exact = exact_collision_map(outer_product(psi), cfg);
        REQUIRE(max_abs_diff(averaged.mat, exact.mat) < 1e-12);
    }
}

TEST_CASE("exhaustive depth-1 check also holds for multi-qubit systems") {
    RngStream rng(0xAB2Full, 0);
    CollisionConfig cfg = chain_config(3);
    const StateVector psi = qctest::random_state(3, rng);
    const DensityMatrix averaged = branch_averaged_collision(psi, cfg);
    const DensityMatrix exact = exact_collision_map(outer_product(psi), cfg);
    CHECK(max_abs_diff(averaged.mat, exact.mat) < 1e-12);
}

TEST_CASE("fused kernel step matches the composition of public operations") {
    CollisionConfig cfg = chain_config(3, 0.7, 0.2);
    const CollisionKernel kernel(cfg);
    const int n = cfg.system.n_qubits;
    const CMatrix sp = partial_swap(cfg.theta_s, cfg.system.resolved_target(), n + 1, n + 1).mat;
    const CMatrix u = free_propagator(build_system_hamiltonian(cfg.system), cfg.dt).mat;

    RngStream state_rng(0xFACEull, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const StateVector psi = qctest::random_state(n, state_rng);
        RngStream fused_rng(9, static_cast<std::uint64_t>(rep));
        RngStream composed_rng(9, static_cast<std::uint64_t>(rep));

        const StateVector fused = kernel.step(psi, fused_rng);

        const StateVector beta = thermal_ancilla(cfg.ancilla, composed_rng);
        const StateVector collided{n + 1, sp * tensor_product(psi, beta).amps};
        const auto [traced, branch] = mc_ptrace(collided, n + 1, composed_rng.uniform01());
        const CVector composed = u * traced.amps;

        REQUIRE(max_abs_diff(fused.amps, composed) < 1e-14);
        REQUIRE(fused_rng.draws() == composed_rng.draws());
    }
}

TEST_CASE("non-default target qubit: kernel, composition and exact map agree") {
    CollisionConfig cfg = chain_config(3, 0.5, 0.15);
    cfg.system.target_qubit = 1;  // collide the first qubit, not the last
    const CollisionKernel kernel(cfg);
    const CMatrix sp = partial_swap(cfg.theta_s, 1, 4, 4).mat;
    const CMatrix u = free_propagator(build_system_hamiltonian(cfg.system), cfg.dt).mat;

    RngStream state_rng(0x7A46ull, 0);
    const StateVector psi = qctest::random_state(3, state_rng);

    RngStream fused_rng(4, 4);
    RngStream composed_rng(4, 4);
    const StateVector fused = kernel.step(psi, fused_rng);
    const StateVector beta = thermal_ancilla(cfg.ancilla, composed_rng);
    const StateVector collided{4, sp * tensor_product(psi, beta).amps};
    const auto [traced, branch] = mc_ptrace(collided, 4, composed_rng.uniform01());
    CHECK(max_abs_diff(fused.amps, u * traced.amps) < 1e-14);

    const DensityMatrix averaged = branch_averaged_collision(psi, cfg);
    const DensityMatrix exact = exact_collision_map(outer_product(psi), cfg);
    CHECK(max_abs_diff(averaged.mat, exact.mat) < 1e-12);
}

TEST_CASE("depth-1 sampled-ancilla error decays as 1/sqrt(M)") {
    CollisionConfig cfg = single_qubit_config(0.3, 1.0);
    RngStream state_rng(0x1AB5ull, 0);
    const StateVector psi = qctest::random_state(1, state_rng);
    const DensityMatrix exact = exact_collision_map(outer_product(psi), cfg);
    const CMatrix sp = partial_swap(cfg.theta_s, 1, 2, 2).mat;
    const CMatrix u = free_propagator(build_system_hamiltonian(cfg.system), cfg.dt).mat;

    auto sampled_error = [&](std::int64_t m, std::uint64_t stream) {
        RngStream rng(0x1AB6ull, stream);
        CMatrix avg = CMatrix::Zero(2, 2);
        for (std::int64_t j = 0; j < m; ++j) {
            const StateVector beta = thermal_ancilla(cfg.ancilla, rng);
            const StateVector collided{2, sp * tensor_product(psi, beta).amps};
            const BranchPair pair = ptrace_branches(collided, 2);
            if (!pair.degenerate0) {
                const CVector o = u * pair.branch0.amps;
                avg += pair.weight0 * (o * o.adjoint());
            }
            if (!pair.degenerate1) {
                const CVector o = u * pair.branch1.amps;
                avg += pair.weight1 * (o * o.adjoint());
            }
        }
        return ((avg / static_cast<double>(m)) - exact.mat).norm();
    };

    double err_m = 0.0, err_16m = 0.0;
    for (std::uint64_t rep = 0; rep < 5; ++rep) {
        err_m += sampled_error(2000, rep);
        err_16m += sampled_error(32000, 100 + rep);
    }
    const double ratio = err_m / err_16m;  // ideal: 4
    CHECK(ratio > 2.0);
    CHECK(ratio < 8.0);
}

TEST_CASE("collision_step preserves the norm") {
    CollisionConfig cfg = chain_config(3);
    const CollisionKernel kernel(cfg);
    RngStream rng(7, 7);
    CVector psi = StateVector::zero_state(3).amps;
    CVector scratch(kernel.composite_dim());
    for (int c = 0; c < 50; ++c) {
        kernel.step_inplace(psi, rng, scratch);
        REQUIRE(std::abs(psi.norm() - 1.0) <= 1e-12);
    }
}

TEST_CASE("zero-collision trajectory returns the initial state") {
    CollisionConfig cfg = chain_config(2);
    cfg.n_collisions = 0;
    const StateVector psi0 = StateVector::zero_state(2);
    const TrajectoryRecord rec = run_trajectory(psi0, cfg, 0);
    CHECK(max_abs_diff(rec.final_state.amps, psi0.amps) == 0.0);
    CHECK(rec.samples.empty());
    CHECK(rec.branch_history.empty());
}

TEST_CASE("trajectories are deterministic given seed and stream") {
    CollisionConfig cfg = chain_config(3);
    cfg.n_collisions = 20;
    cfg.seed = 0xFEEDFACEull;
    const StateVector psi0 = StateVector::zero_state(3);
    const std::vector<NamedOperator> obs{parse_observable("sz1", 3)};

    const TrajectoryRecord a = run_trajectory(psi0, cfg, 5, obs);
    const TrajectoryRecord b = run_trajectory(psi0, cfg, 5, obs);
    CHECK(max_abs_diff(a.final_state.amps, b.final_state.amps) == 0.0);
    REQUIRE(a.branch_history == b.branch_history);
    REQUIRE(a.samples.size() == b.samples.size());
    REQUIRE(a.samples.size() == 20);
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        CHECK(a.samples[i].value == b.samples[i].value);

    const TrajectoryRecord c = run_trajectory(psi0, cfg, 6, obs);
    CHECK(max_abs_diff(a.final_state.amps, c.final_state.amps) > 0.0);
}

TEST_CASE("one full-swap collision thermalizes the sigma_z expectation") {
    CollisionConfig cfg = single_qubit_config(kPi / 2.0, 1.0);
    cfg.n_collisions = 1;
    cfg.ensemble_size = 2000;
    cfg.seed = 0x51ull;

    EnsembleOptions opts;
    opts.observables.push_back(parse_observable("sz1", 1));
    const EnsembleResult res = run_ensemble(StateVector::basis_state(1, 1), cfg, opts);

    const DensityMatrix rho_b = thermal_qubit_dm(1.0, 1.0);
    const double thermal_sz = rho_b.mat(0, 0).real() - rho_b.mat(1, 1).real();
    const double bound = 3.0 / std::sqrt(static_cast<double>(cfg.ensemble_size));
    CHECK(std::abs(res.observable_means(0, 0) - thermal_sz) < bound);
}

TEST_CASE("exact map is the identity for zero angle and zero dt") {
    CollisionConfig cfg = single_qubit_config(0.0, 1.0, 0.0);
    RngStream rng(3, 3);
    const DensityMatrix rho = qctest::random_density(1, rng);
    CHECK(max_abs_diff(exact_collision_map(rho, cfg).mat, rho.mat) < 1e-12);
}

TEST_CASE("full-swap exact map replaces the system with the thermal state") {
    CollisionConfig cfg = single_qubit_config(kPi / 2.0, 1.0);
    RngStream rng(4, 4);
    const DensityMatrix rho = qctest::random_density(1, rng);
    const DensityMatrix out = exact_collision_map(rho, cfg);
    // the free rotation commutes with the diagonal thermal state
    CHECK(max_abs_diff(out.mat, thermal_qubit_dm(1.0, 1.0).mat) < 1e-12);
}

TEST_CASE("exact map stays CPTP over hundreds of iterations") {
    CollisionConfig cfg = chain_config(5);
    const ExactCollisionMap map(cfg);
    DensityMatrix rho = outer_product(StateVector::zero_state(5));
    for (int i = 0; i < 600; ++i) {
        rho = map.apply(rho);
        REQUIRE(std::abs(rho.trace().real() - 1.0) < 1e-9);
        REQUIRE(std::abs(rho.trace().imag()) < 1e-9);
        if (i % 25 == 0 || i == 599) {
            REQUIRE(rho.hermiticity_error() < 1e-10);
            REQUIRE(rho.min_eigenvalue() > -1e-9);
        }
    }
}

TEST_CASE("exact map composes without hidden state") {
    CollisionConfig cfg = chain_config(2);
    const ExactCollisionMap map(cfg);
    const DensityMatrix rho = outer_product(StateVector::zero_state(2));
    const DensityMatrix eight = map.iterate(rho, 8);
    const DensityMatrix five_three = map.iterate(map.iterate(rho, 5), 3);
    CHECK(max_abs_diff(eight.mat, five_three.mat) == 0.0);
}

TEST_CASE("ensemble_average basics") {
    RngStream rng(0xE5ull, 0);
    const StateVector psi = qctest::random_state(2, rng);

    std::vector<StateVector> one{psi};
    CHECK(max_abs_diff(ensemble_average(one).mat, outer_product(psi).mat) == 0.0);

    std::vector<StateVector> copies(17, psi);
    CHECK(max_abs_diff(ensemble_average(copies).mat, outer_product(psi).mat) < 1e-12);

    const std::vector<StateVector> empty;
    CHECK_THROWS_AS(ensemble_average(empty), std::invalid_argument);
}

TEST_CASE("accumulator merge matches a single pass") {
    RngStream rng(0xE6ull, 1);
    std::vector<StateVector> states;
    states.reserve(1000);
    for (int i = 0; i < 1000; ++i) states.push_back(qctest::random_state(2, rng));

    EnsembleAccumulator all(4), first(4), second(4);
    for (int i = 0; i < 1000; ++i) all.add(states[static_cast<std::size_t>(i)]);
    for (int i = 0; i < 500; ++i) first.add(states[static_cast<std::size_t>(i)]);
    for (int i = 500; i < 1000; ++i) second.add(states[static_cast<std::size_t>(i)]);
    first.merge(second);

    CHECK(first.count() == 1000);
    CHECK(max_abs_diff(first.finalize().mat, all.finalize().mat) < 1e-12);

    EnsembleAccumulator empty(4);
    CHECK_THROWS_AS(empty.finalize(), std::invalid_argument);
}

TEST_CASE("ensemble theta is a valid density matrix") {
    CollisionConfig cfg = chain_config(2);
    cfg.n_collisions = 15;
    cfg.ensemble_size = 500;
    cfg.seed = 0xD15Cull;
    const EnsembleResult res = run_ensemble(StateVector::zero_state(2), cfg);
    CHECK(res.count == 500);
    CHECK(res.theta.hermiticity_error() < 1e-10);
    CHECK(std::abs(res.theta.trace().real() - 1.0) < 1e-10);
    CHECK(res.theta.min_eigenvalue() > -1e-8);
}

TEST_CASE("ensemble result is identical for any thread count") {
    CollisionConfig cfg = chain_config(2);
    cfg.n_collisions = 10;
    cfg.ensemble_size = 300;
    cfg.seed = 0xC0DEull;
    const StateVector psi0 = StateVector::zero_state(2);

    EnsembleOptions opts;
    opts.observables.push_back(parse_observable("sz2", 2));

    opts.threads = 1;
    const EnsembleResult t1 = run_ensemble(psi0, cfg, opts);
    opts.threads = 2;
    const EnsembleResult t2 = run_ensemble(psi0, cfg, opts);
    opts.threads = 5;
    const EnsembleResult t5 = run_ensemble(psi0, cfg, opts);

    CHECK(max_abs_diff(t1.theta.mat, t2.theta.mat) == 0.0);
    CHECK(max_abs_diff(t1.theta.mat, t5.theta.mat) == 0.0);
    CHECK((t1.observable_means - t2.observable_means).cwiseAbs().maxCoeff() == 0.0);
    CHECK((t1.observable_means - t5.observable_means).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ensemble trajectories agree with run_trajectory") {
    CollisionConfig cfg = chain_config(2);
    cfg.n_collisions = 7;
    cfg.ensemble_size = 3;
    cfg.seed = 0xABull;
    const StateVector psi0 = StateVector::zero_state(2);

    EnsembleAccumulator manual(psi0.dim());
    for (std::uint64_t t = 0; t < 3; ++t)
        manual.add(run_trajectory(psi0, cfg, t).final_state);

    const EnsembleResult ens = run_ensemble(psi0, cfg);
    CHECK(max_abs_diff(ens.theta.mat, manual.finalize().mat) == 0.0);
}

TEST_CASE("config validation catches bad parameters") {
    CollisionConfig cfg = chain_config(2);
    cfg.n_collisions = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.n_collisions = 0;
    cfg.ensemble_size = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.ensemble_size = 1;
    cfg.dt = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
