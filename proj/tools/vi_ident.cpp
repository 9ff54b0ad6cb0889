// vi-ident: run one experiment from a JSON config and write CSVs plus a
// manifest.json into <out>/<subcommand>/.

#include "viident/config.hpp"
#include "viident/errors.hpp"
#include "viident/experiments.hpp"

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

namespace {

const char* describe(viident::Subcommand cmd) {
    using viident::Subcommand;
    switch (cmd) {
        case Subcommand::SolveForward: return "solve the forward problem (oracle when forward.eps is 0)";
        case Subcommand::RateStudy: return "regularization error against eps for each kernel";
        case Subcommand::KernelCheck: return "smoothing error bounds on an (eps, t) grid";
        case Subcommand::CheckGradient: return "adjoint gradient against central differences";
        case Subcommand::Identify: return "twin-experiment identification at one eps";
        case Subcommand::Continuation: return "identification over the eps schedule";
    }
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    using namespace viident;

    CLI::App app{"Parameter identification in Tresca-friction variational inequalities"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::uint64_t seed = 0;
    bool strict = false;

    for (Subcommand cmd : all_subcommands()) {
        CLI::App* sub = app.add_subcommand(std::string(subcommand_name(cmd)), describe(cmd));
        sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output root (default: output.directory from the config)");
        sub->add_option("--seed", seed, "seed for random directions and observation noise");
        sub->add_flag("--strict", strict, "exit nonzero when a check fails");
    }

    CLI11_PARSE(app, argc, argv);

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        const Subcommand cmd = subcommand_from_name(name);
        const ExperimentConfig config = parse_config(config_path);
        const auto root = out_dir ? std::filesystem::path(*out_dir) : config.output_directory;

        const auto start = std::chrono::steady_clock::now();
        const RunArtifacts artifacts = run_experiment(cmd, config, seed);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const auto dir = root / name;
        write_artifacts(artifacts, cmd, config, seed, wall, dir);

        for (const auto& c : artifacts.checks) {
            std::cout << (c.passed ? "PASS " : (c.advisory ? "NOTE " : "FAIL ")) << c.name
                      << "  value=" << c.value << "  threshold=" << c.threshold;
            if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
            std::cout << '\n';
        }
        std::cout << "wrote " << dir.string() << '\n';

        if (strict && !artifacts.passed()) {
            std::cerr << "vi-ident: " << name << ": a check failed\n";
            return 1;
        }
        return 0;
    } catch (const ConfigError& err) {
        std::cerr << "vi-ident: config error: " << err.what() << '\n';
        return 2;
    } catch (const Error& err) {
        std::cerr << "vi-ident: " << err.what() << '\n';
        return 3;
    }
}
