#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "qcollide/engine.hpp"
#include "qcollide/types.hpp"

namespace qcollide {

// Configuration problem (bad file, bad field, unknown key). The CLI maps
// this to exit code 2; anything else that goes wrong at runtime maps to 3.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A convergence experiment: one collision setup scanned over ensemble sizes.
struct ExperimentConfig {
    CollisionConfig collision;           // ensemble_size is set per scan row
    std::vector<std::int64_t> k_list;
    int repetitions = 1;
    std::vector<std::string> observables;
    std::string out_dir = "qcollide_out";
    std::string initial_state;           // bit string, qubit 1 first; empty = all zeros

    void validate() const {
        collision.validate();
        if (k_list.empty()) throw ConfigError("K_list must not be empty");
        for (std::size_t i = 0; i < k_list.size(); ++i) {
            if (k_list[i] < 1) throw ConfigError("K_list entries must be >= 1");
            if (i > 0 && k_list[i] <= k_list[i - 1])
                throw ConfigError("K_list must be strictly increasing");
        }
        if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
        if (!initial_state.empty() &&
            static_cast<int>(initial_state.size()) != collision.system.n_qubits)
            throw ConfigError("initial_state must have one bit per qubit");
        for (char c : initial_state)
            if (c != '0' && c != '1') throw ConfigError("initial_state must be a bit string");
    }

    StateVector initial() const {
        const int n = collision.system.n_qubits;
        if (initial_state.empty()) return StateVector::zero_state(n);
        BasisLabel bits;
        for (char c : initial_state) bits.push_back(c - '0');
        return StateVector::basis_state(n, basis_index(bits));
    }
};

struct ConvergenceRow {
    std::int64_t k = 0;
    int n_collisions = 0;
    double d = 0.0;
    double max_elem_dev = 0.0;
    double wall_ms = 0.0;
    int repetition = 0;  // 1-based; not a CSV column
};

// Mean squared element-wise deviation: (1/dim^2) sum_ij |rho_ij - theta_ij|^2.
inline double distance(const DensityMatrix& rho, const DensityMatrix& theta) {
    if (rho.dim() != theta.dim()) throw std::invalid_argument("distance: dimension mismatch");
    const Index dim = rho.dim();
    double sum = 0.0;
    for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j) sum += std::norm(rho.mat(i, j) - theta.mat(i, j));
    return sum / (static_cast<double>(dim) * static_cast<double>(dim));
}

// Ordinary least squares slope of log D versus log K. Rows with D <= 0 carry
// no information for the fit and are skipped; at least 3 usable points are
// required, otherwise there is no slope to report.
inline std::optional<double> fit_loglog_slope(const std::vector<ConvergenceRow>& rows) {
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
        if (r.d <= 0.0) continue;
        xs.push_back(std::log(static_cast<double>(r.k)));
        ys.push_back(std::log(r.d));
    }
    const std::size_t n = xs.size();
    if (n < 3) return std::nullopt;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) return std::nullopt;
    return (n * sxy - sx * sy) / denom;
}

struct ScanOptions {
    int threads = 0;
    std::function<void(const ConvergenceRow&)> on_row;
    std::function<void(std::int64_t k, int repetition, const std::vector<std::string>& names,
                       const Eigen::MatrixXd& means)>
        on_observables;
};

struct ScanResult {
    std::vector<ConvergenceRow> rows;
    std::optional<double> slope;
    DensityMatrix rho_exact;   // exact map iterated n_collisions times
    DensityMatrix theta_last;  // ensemble average of the last row
};

namespace detail {

// Per-row seed: a hash of the master seed and the row index, so rows are
// decorrelated while the whole scan stays a pure function of the seed.
inline std::uint64_t derive_row_seed(std::uint64_t master, std::uint64_t row_index) {
    constexpr std::uint64_t kStep = 0xD1B54A32D192ED03ull;
    std::uint64_t z = master + (row_index + 1) * kStep;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

// Named single-qubit Pauli observables: "sx3" is sigma_x on qubit 3.
inline NamedOperator parse_observable(const std::string& name, int n_qubits) {
    if (name.size() < 3 || name[0] != 's')
        throw ConfigError("observable '" + name + "': expected form sx<k>, sy<k> or sz<k>");
    CMatrix base;
    switch (name[1]) {
        case 'x': base = pauli_x(); break;
        case 'y': base = pauli_y(); break;
        case 'z': base = pauli_z(); break;
        default: throw ConfigError("observable '" + name + "': axis must be x, y or z");
    }
    int k = 0;
    try {
        std::size_t used = 0;
        k = std::stoi(name.substr(2), &used);
        if (used != name.size() - 2) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ConfigError("observable '" + name + "': bad qubit index");
    }
    if (k < 1 || k > n_qubits)
        throw ConfigError("observable '" + name + "': qubit index out of range");
    return NamedOperator{name, embed_single_qubit(base, k, n_qubits)};
}

// Runs the full scan: for each repetition and each K, K trajectories are
// averaged into Theta_n(K) and compared against the exact density-matrix
// propagation of the same initial state. Rows stream through on_row as they
// finish so partial results survive an interrupted run.
inline ScanResult convergence_scan(const ExperimentConfig& cfg, const ScanOptions& opts = {}) {
    cfg.validate();
    const StateVector psi0 = cfg.initial();

    std::vector<NamedOperator> observables;
    observables.reserve(cfg.observables.size());
    for (const auto& name : cfg.observables)
        observables.push_back(parse_observable(name, cfg.collision.system.n_qubits));

    ScanResult result;
    const ExactCollisionMap exact_map(cfg.collision);
    result.rho_exact = exact_map.iterate(outer_product(psi0), cfg.collision.n_collisions);

    std::uint64_t row_index = 0;
    for (int rep = 1; rep <= cfg.repetitions; ++rep) {
        for (std::int64_t k : cfg.k_list) {
            CollisionConfig row_cfg = cfg.collision;
            row_cfg.ensemble_size = k;
            row_cfg.seed = detail::derive_row_seed(cfg.collision.seed, row_index++);

            EnsembleOptions eopts;
            eopts.threads = opts.threads;
            eopts.observables = observables;

            const auto t0 = std::chrono::steady_clock::now();
            EnsembleResult ens = run_ensemble(psi0, row_cfg, eopts);
            const auto t1 = std::chrono::steady_clock::now();

            ConvergenceRow row;
            row.k = k;
            row.n_collisions = cfg.collision.n_collisions;
            row.d = distance(result.rho_exact, ens.theta);
            row.max_elem_dev = (result.rho_exact.mat - ens.theta.mat).cwiseAbs().maxCoeff();
            row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            row.repetition = rep;

            result.rows.push_back(row);
            if (opts.on_row) opts.on_row(row);
            if (opts.on_observables && !observables.empty())
                opts.on_observables(k, rep, cfg.observables, ens.observable_means);
            result.theta_last = std::move(ens.theta);
        }
    }
    result.slope = fit_loglog_slope(result.rows);
    return result;
}

// ---------------------------------------------------------------------------
// Config file handling. UTF-8 JSON, flat keys; unknown keys are a hard error.
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline const json& require_key(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing required config key '" + key + "'");
    return j.at(key);
}

// json's get<>() silently coerces between number subtypes (-3 -> uint64,
// 5.5 -> int), so number categories are checked explicitly.
template <typename T>
T field_as(const json& j, const std::string& key) {
    const auto bad = [&](const char* expected) {
        return ConfigError("config key '" + key + "' must be " + expected);
    };
    if constexpr (std::is_same_v<T, double>) {
        if (!j.is_number()) throw bad("a number");
    } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::int64_t>) {
        if (!j.is_number_integer()) throw bad("an integer");
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!j.is_number_unsigned()) throw bad("a non-negative integer");
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!j.is_array()) throw bad("an array of numbers");
        for (const auto& el : j)
            if (!el.is_number()) throw bad("an array of numbers");
    } else if constexpr (std::is_same_v<T, std::vector<std::int64_t>>) {
        if (!j.is_array()) throw bad("an array of integers");
        for (const auto& el : j)
            if (!el.is_number_integer()) throw bad("an array of integers");
    }
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& text) {
    using detail::field_as;
    using detail::require_key;
    using nlohmann::json;

    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    static const std::set<std::string> known = {
        "n_qubits",   "splittings",  "couplings",   "target_qubit", "beta",
        "omega",      "theta_s",     "dt",          "n_collisions", "K_list",
        "repetitions", "seed",       "observables", "out_dir",      "initial_state"};
    for (const auto& item : j.items())
        if (!known.contains(item.key())) throw ConfigError("unknown config key '" + item.key() + "'");

    ExperimentConfig cfg;
    auto& sys = cfg.collision.system;
    sys.n_qubits = field_as<int>(require_key(j, "n_qubits"), "n_qubits");
    if (sys.n_qubits < 1) throw ConfigError("n_qubits must be >= 1");

    if (j.contains("splittings")) {
        sys.splittings = field_as<std::vector<double>>(j.at("splittings"), "splittings");
    } else {
        sys.splittings.assign(static_cast<std::size_t>(sys.n_qubits), 1.0);
    }

    if (j.contains("couplings")) {
        const json& jc = j.at("couplings");
        if (!jc.is_array()) throw ConfigError("config key 'couplings' must be an array of [i, j, strength]");
        for (const auto& entry : jc) {
            if (!entry.is_array() || entry.size() != 3)
                throw ConfigError("each coupling must be a triple [i, j, strength]");
            Coupling c;
            c.i = field_as<int>(entry.at(0), "couplings[i]");
            c.j = field_as<int>(entry.at(1), "couplings[j]");
            c.strength = field_as<double>(entry.at(2), "couplings[strength]");
            sys.couplings.push_back(c);
        }
    } else {
        // default: nearest-neighbor chain with strength 0.1
        for (int q = 1; q < sys.n_qubits; ++q) sys.couplings.push_back({q, q + 1, 0.1});
    }

    sys.target_qubit = j.contains("target_qubit")
                           ? field_as<int>(j.at("target_qubit"), "target_qubit")
                           : sys.n_qubits;

    cfg.collision.ancilla.beta = j.contains("beta") ? field_as<double>(j.at("beta"), "beta") : 1.0;
    cfg.collision.ancilla.omega = j.contains("omega") ? field_as<double>(j.at("omega"), "omega") : 1.0;
    cfg.collision.theta_s = j.contains("theta_s") ? field_as<double>(j.at("theta_s"), "theta_s") : 0.3;
    cfg.collision.dt = j.contains("dt") ? field_as<double>(j.at("dt"), "dt") : 0.1;
    cfg.collision.n_collisions = field_as<int>(require_key(j, "n_collisions"), "n_collisions");
    cfg.collision.seed = field_as<std::uint64_t>(require_key(j, "seed"), "seed");
    cfg.k_list = field_as<std::vector<std::int64_t>>(require_key(j, "K_list"), "K_list");
    if (j.contains("repetitions")) cfg.repetitions = field_as<int>(j.at("repetitions"), "repetitions");
    if (j.contains("observables"))
        cfg.observables = field_as<std::vector<std::string>>(j.at("observables"), "observables");
    if (j.contains("out_dir")) cfg.out_dir = field_as<std::string>(j.at("out_dir"), "out_dir");
    if (j.contains("initial_state"))
        cfg.initial_state = field_as<std::string>(j.at("initial_state"), "initial_state");

    try {
        cfg.validate();
        for (const auto& name : cfg.observables) parse_observable(name, sys.n_qubits);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_experiment_config(text);
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["n_qubits"] = cfg.collision.system.n_qubits;
    j["splittings"] = cfg.collision.system.splittings;
    auto couplings = nlohmann::json::array();
    for (const auto& c : cfg.collision.system.couplings)
        couplings.push_back({c.i, c.j, c.strength});
    j["couplings"] = couplings;
    j["target_qubit"] = cfg.collision.system.resolved_target();
    j["beta"] = cfg.collision.ancilla.beta;
    j["omega"] = cfg.collision.ancilla.omega;
    j["theta_s"] = cfg.collision.theta_s;
    j["dt"] = cfg.collision.dt;
    j["n_collisions"] = cfg.collision.n_collisions;
    j["K_list"] = cfg.k_list;
    j["repetitions"] = cfg.repetitions;
    j["seed"] = cfg.collision.seed;
    j["observables"] = cfg.observables;
    j["out_dir"] = cfg.out_dir;
    j["initial_state"] = cfg.initial_state.empty()
                             ? std::string(static_cast<std::size_t>(cfg.collision.system.n_qubits), '0')
                             : cfg.initial_state;
    return j;
}

// ---------------------------------------------------------------------------
// Output artifacts
// ---------------------------------------------------------------------------

inline constexpr const char* kConvergenceCsvHeader = "K,n_collisions,D,max_elem_dev,wall_ms";

// Data columns are formatted with 17 significant digits so reruns with the
// same seed produce byte-identical values; wall_ms is a measurement, not data.
inline std::string format_csv_row(const ConvergenceRow& row) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.17g,%.17g,%.3f",
                  static_cast<long long>(row.k), row.n_collisions, row.d, row.max_elem_dev,
                  row.wall_ms);
    return buf;
}

// One matrix row per line, entries as re+imi pairs separated by spaces.
inline void write_matrix_text(std::ostream& out, const CMatrix& m) {
    char buf[64];
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g%+.17gi", m(i, j).real(), m(i, j).imag());
            out << (j == 0 ? "" : " ") << buf;
        }
        out << '\n';
    }
}

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    int threads = 0;
    bool quiet = false;
};

// Full experiment driver behind the CLI `run` subcommand. Returns the process
// exit code: 0 on success, 2 for configuration problems, 3 for runtime
// failures. Writes convergence.csv (flushed row by row), observables.csv when
// observables are configured, final Theta and exact rho dumps, and a manifest
// echoing the resolved configuration.
inline int run_experiment(const std::filesystem::path& config_path, const RunOverrides& overrides = {},
                          std::ostream* log = nullptr, std::ostream* err = nullptr) {
    namespace fs = std::filesystem;

    ExperimentConfig cfg;
    try {
        cfg = load_experiment_config(config_path);
        if (overrides.seed) cfg.collision.seed = *overrides.seed;
        if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
        cfg.validate();
    } catch (const ConfigError& e) {
        if (err) *err << "config error: " << e.what() << '\n';
        return 2;
    }

    try {
        fs::create_directories(cfg.out_dir);
        const fs::path csv_path = fs::path(cfg.out_dir) / "convergence.csv";
        std::ofstream csv(csv_path);
        if (!csv) throw std::runtime_error("cannot write '" + csv_path.string() + "'");
        csv << kConvergenceCsvHeader << '\n' << std::flush;

        std::ofstream obs_csv;
        if (!cfg.observables.empty()) {
            const fs::path obs_path = fs::path(cfg.out_dir) / "observables.csv";
            obs_csv.open(obs_path);
            if (!obs_csv) throw std::runtime_error("cannot write '" + obs_path.string() + "'");
            obs_csv << "K,repetition,collision,observable,mean\n" << std::flush;
        }

        ScanOptions sopts;
        sopts.threads = overrides.threads;
        sopts.on_row = [&](const ConvergenceRow& row) {
            csv << format_csv_row(row) << '\n' << std::flush;
            if (log && !overrides.quiet)
                *log << "K=" << row.k << " rep=" << row.repetition << " D=" << row.d << " ("
                     << row.wall_ms << " ms)\n";
        };
        sopts.on_observables = [&](std::int64_t k, int rep, const std::vector<std::string>& names,
                                   const Eigen::MatrixXd& means) {
            char buf[64];
            for (Index c = 0; c < means.cols(); ++c)
                for (std::size_t oi = 0; oi < names.size(); ++oi) {
                    std::snprintf(buf, sizeof(buf), "%.17g", means(static_cast<Index>(oi), c));
                    obs_csv << k << ',' << rep << ',' << (c + 1) << ',' << names[oi] << ',' << buf
                            << '\n';
                }
            obs_csv << std::flush;
        };

        const ScanResult result = convergence_scan(cfg, sopts);

        {
            std::ofstream theta_out(fs::path(cfg.out_dir) / "theta_final.txt");
            write_matrix_text(theta_out, result.theta_last.mat);
            std::ofstream rho_out(fs::path(cfg.out_dir) / "rho_exact.txt");
            write_matrix_text(rho_out, result.rho_exact.mat);
        }

        nlohmann::json manifest;
        manifest["config"] = config_to_json(cfg);
        manifest["config_path"] = config_path.string();
        manifest["rows"] = result.rows.size();
        manifest["slope"] = result.slope ? nlohmann::json(*result.slope) : nlohmann::json(nullptr);
        std::ofstream mf(fs::path(cfg.out_dir) / "manifest.json");
        if (!mf) throw std::runtime_error("cannot write manifest");
        mf << manifest.dump(2) << '\n';

        if (log && !overrides.quiet) {
            if (result.slope)
                *log << "log-log slope: " << *result.slope << '\n';
            else
                *log << "log-log slope: n/a (need >= 3 rows with D > 0)\n";
            *log << "artifacts written to " << cfg.out_dir << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        if (err) *err << "error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace qcollide
