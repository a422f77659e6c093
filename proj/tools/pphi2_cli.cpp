#include "pphi2/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"pphi2: semiclassical P(phi)_2 toolkit"};
    app.set_version_flag("--version", std::string(pphi2::version));
    app.require_subcommand(1);

    std::string config, out_dir = ".", suite;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;

    auto* run = app.add_subcommand("run", "run the task described by a YAML or JSON config");
    run->add_option("config", config, "config file")->required();
    run->add_option("--out-dir", out_dir, "directory for report.json, table.csv, plot.dat");
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--threads", threads, "worker threads");

    auto* verify = app.add_subcommand("verify", "run a built-in check suite");
    verify->add_option("suite", suite, "oracles | invariants | paper-values")
        ->required()
        ->check(CLI::IsMember({"oracles", "invariants", "paper-values"}));
    verify->add_option("--seed", seed, "random seed");
    verify->add_option("--threads", threads, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return pphi2::cli::validation_failure;
    }

    try {
        if (*run) {
            const auto r = pphi2::cli::run(config, out_dir, seed, threads);
            if (r.exit_code != 0) std::cerr << "error: " << r.message << '\n';
            return r.exit_code;
        }
        return pphi2::cli::verify(suite, seed.value_or(1), threads.value_or(1), std::cout);
    } catch (const pphi2::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return pphi2::cli::validation_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return pphi2::cli::numerical_failure;
    }
}
