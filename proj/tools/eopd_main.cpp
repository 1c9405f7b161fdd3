#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "eopd/errors.hpp"
#include "eopd/experiments.hpp"
#include "eopd/sync_loop.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericError = 3;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path,
                    "JSON experiment config (all fields optional)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory")
        ->capture_default_str();
    cmd->add_option("--seed", args.seed, "master seed override")
        ->each([&args](const std::string&) { args.seed_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"endless optical phase delay simulation toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    int parallel_jobs = 1;

    CLI::App* ramp = app.add_subcommand("ramp", "ideal ramp drive demo");
    CLI::App* calibrate =
        app.add_subcommand("calibrate", "single drift calibration run");
    CLI::App* montecarlo =
        app.add_subcommand("montecarlo", "drift calibration sweep");
    CLI::App* syncloop =
        app.add_subcommand("syncloop", "QPSK carrier synchronization loop");
    for (CLI::App* cmd : {ramp, calibrate, montecarlo, syncloop}) {
        add_common(cmd, args);
    }
    montecarlo->add_option("--parallel", parallel_jobs,
                           "number of worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    const std::string kind = app.get_subcommands().front()->get_name();
    try {
        eopd::ExperimentConfig cfg =
            eopd::load_experiment_config(args.config_path, kind);
        if (args.seed_set) {
            cfg.seed = args.seed;
        }
        if (kind == "ramp") {
            eopd::cmd_ramp(cfg, args.out_dir);
        } else if (kind == "calibrate") {
            eopd::cmd_calibrate(cfg, args.out_dir);
        } else if (kind == "montecarlo") {
            eopd::cmd_montecarlo(cfg, args.out_dir, parallel_jobs);
        } else {
            eopd::cmd_syncloop(cfg, args.out_dir);
        }
    } catch (const eopd::invalid_input& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const eopd::degenerate_input& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const eopd::instability_error& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumericError;
    } catch (const eopd::numeric_failure& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumericError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumericError;
    }
    return kExitOk;
}
