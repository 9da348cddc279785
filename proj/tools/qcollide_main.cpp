// Command-line front end: runs convergence experiments from a JSON config.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "qcollide/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"qcollide - stochastic wavefunction collision-model simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    int threads = 0;
    bool quiet = false;

    CLI::App* run = app.add_subcommand("run", "run a convergence experiment from a config file");
    run->add_option("config", config_path, "path to the JSON experiment config")->required();
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out-dir", out_dir, "override the output directory");
    run->add_option("--threads", threads, "worker threads (0 = auto)")->check(CLI::NonNegativeNumber);
    run->add_flag("--quiet", quiet, "suppress progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        // help/version exit cleanly; anything else is a configuration problem
        return code == 0 ? 0 : 2;
    }

    qcollide::RunOverrides overrides;
    overrides.seed = seed;
    overrides.out_dir = out_dir;
    overrides.threads = threads;
    overrides.quiet = quiet;
    return qcollide::run_experiment(config_path, overrides, &std::cout, &std::cerr);
}
