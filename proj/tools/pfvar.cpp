// Command-line front end for the particle filter variance toolkit.
//
// Subcommands: simulate, run, sweep-lag, long-run, ci-failure, oracle-exact,
// oracle-replicate. Each one reads a JSON experiment config, applies --set
// overrides (and the PFVAR_SEED environment variable), and writes CSV plus a
// JSON summary that embeds the fully resolved config.

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pfvar/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Particle filter variance estimation toolkit"};
    app.require_subcommand(1);

    pfvar::CliCommand command;
    const std::vector<std::pair<std::string, std::string>> subcommands = {
        {"simulate", "Simulate a state/observation record from the configured model"},
        {"run", "One filter pass; terminal estimates for every configured lag"},
        {"sweep-lag", "Replicated terminal variance estimates across all configured lags"},
        {"long-run", "Single long filter pass tracking estimates and ancestor counts"},
        {"ci-failure", "Confidence interval failure rates against Kalman prediction"},
        {"oracle-exact", "Exact variance, filter and bias tables for a discrete model"},
        {"oracle-replicate", "Brute-force variance reference from independent replicates"},
    };
    for (const auto& [name, description] : subcommands) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--config", command.config_path, "Path to the JSON experiment config")
            ->required();
        sub->add_option("--set", command.overrides,
                        "Override a config key, e.g. --set N=8000 or --set model.phi=0.5")
            ->take_all();
        sub->add_option("--out", command.out_dir, "Output directory (defaults to the config's)");
        sub->add_option("--threads", command.threads, "Worker threads for replicate loops");
        sub->callback([&command, name = name] { command.subcommand = name; });
    }

    CLI11_PARSE(app, argc, argv);
    return pfvar::run_command(command);
}
