#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qcollide/operators.hpp"
#include "qcollide/ptrace.hpp"
#include "qcollide/rng.hpp"
#include "qcollide/sampling.hpp"
#include "qcollide/state.hpp"
#include "qcollide/types.hpp"

namespace qcollide {

// Full parameterization of a collision sequence: the system, the thermal
// ancilla it repeatedly collides with, the partial-swap angle, the free
// propagation time between collisions, and the ensemble bookkeeping.
struct CollisionConfig {
    SystemSpec system;
    ThermalAncillaSpec ancilla;
    double theta_s = 0.0;
    double dt = 0.0;
    int n_collisions = 0;
    std::int64_t ensemble_size = 1;  // K
    std::uint64_t seed = 0;

    void validate() const {
        system.validate();
        ancilla.validate();
        if (n_collisions < 0) throw std::invalid_argument("CollisionConfig: n_collisions must be >= 0");
        if (ensemble_size < 1) throw std::invalid_argument("CollisionConfig: ensemble_size must be >= 1");
        if (dt < 0.0) throw std::invalid_argument("CollisionConfig: dt must be >= 0");
    }
};

struct NamedOperator {
    std::string name;
    CMatrix op;
};

struct ObservableSample {
    int collision = 0;    // 1-based collision index
    int observable = 0;   // index into observable_names
    double value = 0.0;
};

struct TrajectoryRecord {
    StateVector final_state;
    std::vector<std::string> observable_names;
    std::vector<ObservableSample> samples;       // n_collisions entries per observable
    std::vector<std::uint8_t> branch_history;    // Monte Carlo choice per collision
};

// Per-config operators shared read-only across trajectory workers. The
// partial swap is applied as a bit permutation plus the cos/sin combination
// (never materialized as a 2^(N+1) matrix), and the free propagator is built
// once from the cached eigendecomposition of H_S.
class CollisionKernel {
public:
    explicit CollisionKernel(const CollisionConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        const int n = cfg_.system.n_qubits;
        dim_sys_ = pow2(n);
        dim_tot_ = 2 * dim_sys_;
        // composite register = system qubits 1..n plus the ancilla as qubit n+1
        target_pos_ = n + 1 - cfg_.system.resolved_target();  // bit position from LSB
        cos_s_ = std::cos(cfg_.theta_s);
        sin_s_ = std::sin(cfg_.theta_s);
        const double boltz = std::exp(-cfg_.ancilla.beta * cfg_.ancilla.omega);
        const double z = 1.0 + boltz;
        anc_mod0_ = std::sqrt(1.0 / z);
        anc_mod1_ = std::sqrt(boltz / z);
        u_free_ = free_propagator(build_system_hamiltonian(cfg_.system), cfg_.dt).mat;
    }

    const CollisionConfig& config() const { return cfg_; }
    Index system_dim() const { return dim_sys_; }
    Index composite_dim() const { return dim_tot_; }
    const CMatrix& free_propagator_matrix() const { return u_free_; }

    // One collision, in place. psi has system dimension; composite is a
    // caller-owned scratch buffer of composite dimension. Draws exactly one
    // ancilla sample (two phases) and one branch sample from rng, in that
    // order. The chosen Monte Carlo branch is written to *chosen if given.
    void step_inplace(CVector& psi, RngStream& rng, CVector& composite,
                      std::uint8_t* chosen = nullptr) const {
        const Complex b0 = std::polar(anc_mod0_, rng.phase());
        const Complex b1 = std::polar(anc_mod1_, rng.phase());

        // psi (x) |beta>, ancilla on the least significant bit
        for (Index s = 0; s < dim_sys_; ++s) {
            composite[2 * s] = psi[s] * b0;
            composite[2 * s + 1] = psi[s] * b1;
        }

        // partial swap between the target qubit and the ancilla:
        // cos(theta) I + i sin(theta) S, applied over the permutation's
        // fixed points and 2-cycles
        const Complex phase_fix{cos_s_, sin_s_};
        const Complex isin{0.0, sin_s_};
        const Index tmask = Index{1} << target_pos_;
        for (Index idx = 0; idx < dim_tot_; ++idx) {
            const Index bt = (idx >> target_pos_) & 1;
            const Index ba = idx & 1;
            if (bt == ba) {
                composite[idx] *= phase_fix;
            } else if (ba == 0) {  // visit each 2-cycle once
                const Index partner = (idx ^ tmask) | 1;
                const Complex a = composite[idx];
                const Complex b = composite[partner];
                composite[idx] = cos_s_ * a + isin * b;
                composite[partner] = cos_s_ * b + isin * a;
            }
        }

        // stochastic partial trace of the ancilla
        double w0 = 0.0, w1 = 0.0;
        for (Index s = 0; s < dim_sys_; ++s) {
            w0 += std::norm(composite[2 * s]);
            w1 += std::norm(composite[2 * s + 1]);
        }
        const double x_r = rng.uniform01();
        int branch = x_r < w0 ? 0 : 1;
        if (branch == 0 && w0 == 0.0) branch = 1;
        if (branch == 1 && w1 == 0.0) branch = 0;
        if (chosen != nullptr) *chosen = static_cast<std::uint8_t>(branch);
        const double inv_n = 1.0 / std::sqrt(branch == 0 ? w0 : w1);
        // in-place compaction: write index s never exceeds read index 2s+i
        for (Index s = 0; s < dim_sys_; ++s) composite[s] = composite[2 * s + branch] * inv_n;

        // free system dynamics
        psi.noalias() = u_free_ * composite.head(dim_sys_);
    }

    StateVector step(const StateVector& psi, RngStream& rng) const {
        if (psi.dim() != dim_sys_) throw std::invalid_argument("CollisionKernel: state dimension mismatch");
        CVector amps = psi.amps;
        CVector scratch(dim_tot_);
        step_inplace(amps, rng, scratch);
        return StateVector{cfg_.system.n_qubits, std::move(amps)};
    }

private:
    CollisionConfig cfg_;
    Index dim_sys_ = 0;
    Index dim_tot_ = 0;
    int target_pos_ = 0;
    double cos_s_ = 1.0;
    double sin_s_ = 0.0;
    double anc_mod0_ = 1.0;
    double anc_mod1_ = 0.0;
    CMatrix u_free_;
};

// Single collision: interaction with a fresh thermal ancilla, stochastic
// partial trace of the ancilla, free propagation.
inline StateVector collision_step(const StateVector& psi, const CollisionConfig& cfg, RngStream& rng) {
    return CollisionKernel(cfg).step(psi, rng);
}

inline TrajectoryRecord run_trajectory(const StateVector& psi0, const CollisionKernel& kernel,
                                       std::uint64_t stream_id,
                                       const std::vector<NamedOperator>& observables = {}) {
    const CollisionConfig& cfg = kernel.config();
    if (psi0.dim() != kernel.system_dim())
        throw std::invalid_argument("run_trajectory: state dimension mismatch");
    for (const auto& obs : observables)
        if (obs.op.rows() != kernel.system_dim() || obs.op.cols() != kernel.system_dim())
            throw std::invalid_argument("run_trajectory: observable dimension mismatch");

    RngStream rng(cfg.seed, stream_id);
    CVector psi = psi0.amps;
    CVector scratch(kernel.composite_dim());

    TrajectoryRecord rec;
    rec.branch_history.reserve(static_cast<std::size_t>(cfg.n_collisions));
    rec.samples.reserve(observables.size() * static_cast<std::size_t>(cfg.n_collisions));
    for (const auto& obs : observables) rec.observable_names.push_back(obs.name);

    for (int c = 1; c <= cfg.n_collisions; ++c) {
        std::uint8_t chosen = 0;
        kernel.step_inplace(psi, rng, scratch, &chosen);
        rec.branch_history.push_back(chosen);
        for (std::size_t oi = 0; oi < observables.size(); ++oi) {
            const double value = psi.dot(observables[oi].op * psi).real();
            rec.samples.push_back({c, static_cast<int>(oi), value});
        }
    }
    rec.final_state = StateVector{cfg.system.n_qubits, std::move(psi)};
    return rec;
}

inline TrajectoryRecord run_trajectory(const StateVector& psi0, const CollisionConfig& cfg,
                                       std::uint64_t stream_id,
                                       const std::vector<NamedOperator>& observables = {}) {
    return run_trajectory(psi0, CollisionKernel(cfg), stream_id, observables);
}

// Exact density-matrix collision map: embeds rho (x) rho_b, conjugates by the
// partial swap, traces the ancilla, conjugates by the free propagator. CPTP;
// the reference the trajectory ensemble converges to.
class ExactCollisionMap {
public:
    explicit ExactCollisionMap(const CollisionConfig& cfg) {
        cfg.validate();
        n_ = cfg.system.n_qubits;
        sp_ = partial_swap(cfg.theta_s, cfg.system.resolved_target(), n_ + 1, n_ + 1).mat;
        u_ = free_propagator(build_system_hamiltonian(cfg.system), cfg.dt).mat;
        rho_b_ = thermal_qubit_dm(cfg.ancilla.beta, cfg.ancilla.omega).mat;
    }

    DensityMatrix apply(const DensityMatrix& rho) const {
        if (rho.dim() != pow2(n_)) throw std::invalid_argument("ExactCollisionMap: dimension mismatch");
        const CMatrix embedded = kron(rho.mat, rho_b_);
        const CMatrix collided = sp_ * embedded * sp_.adjoint();
        const DensityMatrix reduced = ptrace_dm(DensityMatrix{collided}, n_ + 1);
        return DensityMatrix{u_ * reduced.mat * u_.adjoint()};
    }

    DensityMatrix iterate(const DensityMatrix& rho, int n_steps) const {
        DensityMatrix out = rho;
        for (int i = 0; i < n_steps; ++i) out = apply(out);
        return out;
    }

private:
    int n_ = 0;
    CMatrix sp_;
    CMatrix u_;
    CMatrix rho_b_;
};

inline DensityMatrix exact_collision_map(const DensityMatrix& rho, const CollisionConfig& cfg) {
    return ExactCollisionMap(cfg).apply(rho);
}

// Running sum of trajectory outer products. Merging is associative and
// commutative up to floating-point reordering; the parallel driver below
// merges in a fixed order so results do not depend on the thread count.
class EnsembleAccumulator {
public:
    explicit EnsembleAccumulator(Index dim) : sum_(CMatrix::Zero(dim, dim)) {}

    void add(const CVector& amps) {
        sum_.noalias() += amps * amps.adjoint();
        ++count_;
    }
    void add(const StateVector& psi) { add(psi.amps); }

    void merge(const EnsembleAccumulator& other) {
        if (other.sum_.rows() != sum_.rows())
            throw std::invalid_argument("EnsembleAccumulator: dimension mismatch");
        sum_ += other.sum_;
        count_ += other.count_;
    }

    std::int64_t count() const { return count_; }
    const CMatrix& sum() const { return sum_; }

    DensityMatrix finalize() const {
        if (count_ == 0) throw std::invalid_argument("EnsembleAccumulator: no states accumulated");
        return DensityMatrix{sum_ / static_cast<double>(count_)};
    }

private:
    CMatrix sum_;
    std::int64_t count_ = 0;
};

// (1/K) sum |psi_k><psi_k|
inline DensityMatrix ensemble_average(std::span<const StateVector> states) {
    if (states.empty()) throw std::invalid_argument("ensemble_average: empty input");
    EnsembleAccumulator acc(states.front().dim());
    for (const auto& s : states) acc.add(s);
    return acc.finalize();
}

struct EnsembleOptions {
    int threads = 0;  // 0 = hardware concurrency
    std::vector<NamedOperator> observables;
};

struct EnsembleResult {
    DensityMatrix theta;                // Theta_n(K)
    Eigen::MatrixXd observable_means;   // n_observables x n_collisions
    std::int64_t count = 0;
};

namespace detail {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace detail

// Runs K = cfg.ensemble_size trajectories (stream ids 0..K-1) and averages
// the final outer products. Work is split into fixed-size blocks claimed by
// workers; block results are merged strictly in block order, so the result
// is bit-identical for any thread count.
inline EnsembleResult run_ensemble(const StateVector& psi0, const CollisionConfig& cfg,
                                   const EnsembleOptions& opts = {}) {
    const CollisionKernel kernel(cfg);
    if (psi0.dim() != kernel.system_dim())
        throw std::invalid_argument("run_ensemble: state dimension mismatch");
    for (const auto& obs : opts.observables)
        if (obs.op.rows() != kernel.system_dim() || obs.op.cols() != kernel.system_dim())
            throw std::invalid_argument("run_ensemble: observable dimension mismatch");

    const std::int64_t k_total = cfg.ensemble_size;
    const std::size_t n_obs = opts.observables.size();
    constexpr std::int64_t kBlock = 64;  // fixed: merge topology must not depend on threads
    const std::int64_t n_blocks = (k_total + kBlock - 1) / kBlock;

    struct BlockPartial {
        EnsembleAccumulator acc;
        Eigen::MatrixXd obs_sums;
    };

    EnsembleAccumulator global(kernel.system_dim());
    Eigen::MatrixXd global_obs = Eigen::MatrixXd::Zero(static_cast<Index>(n_obs), cfg.n_collisions);
    std::mutex merge_mutex;
    std::map<std::int64_t, BlockPartial> staged;
    std::int64_t next_block = 0;
    std::atomic<std::int64_t> block_counter{0};

    auto worker = [&] {
        CVector psi(kernel.system_dim());
        CVector scratch(kernel.composite_dim());
        for (;;) {
            const std::int64_t b = block_counter.fetch_add(1);
            if (b >= n_blocks) return;
            const std::int64_t t_begin = b * kBlock;
            const std::int64_t t_end = std::min(k_total, t_begin + kBlock);

            BlockPartial part{EnsembleAccumulator(kernel.system_dim()),
                              Eigen::MatrixXd::Zero(static_cast<Index>(n_obs), cfg.n_collisions)};
            for (std::int64_t t = t_begin; t < t_end; ++t) {
                RngStream rng(cfg.seed, static_cast<std::uint64_t>(t));
                psi = psi0.amps;
                for (int c = 0; c < cfg.n_collisions; ++c) {
                    kernel.step_inplace(psi, rng, scratch);
                    for (std::size_t oi = 0; oi < n_obs; ++oi)
                        part.obs_sums(static_cast<Index>(oi), c) +=
                            psi.dot(opts.observables[oi].op * psi).real();
                }
                part.acc.add(psi);
            }

            std::lock_guard<std::mutex> lock(merge_mutex);
            staged.emplace(b, std::move(part));
            while (!staged.empty() && staged.begin()->first == next_block) {
                global.merge(staged.begin()->second.acc);
                global_obs += staged.begin()->second.obs_sums;
                staged.erase(staged.begin());
                ++next_block;
            }
        }
    };

    const int n_threads = std::min<std::int64_t>(detail::resolve_threads(opts.threads), n_blocks);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    EnsembleResult result;
    result.theta = global.finalize();
    result.observable_means = global_obs / static_cast<double>(k_total);
    result.count = global.count();
    return result;
}

}  // namespace qcollide
