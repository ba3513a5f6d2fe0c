#include "unifix/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"unifix: unified semi-paired image defect correction"};
    std::string config_path;
    std::string command;
    std::optional<std::uint64_t> seed_override;
    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--command", command, "synth | train | eval | ablate | grid")
        ->required()
        ->check(CLI::IsMember({"synth", "train", "eval", "ablate", "grid"}));
    app.add_option("--seed-override", seed_override, "replace the config seed");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? unifix::kExitOk : unifix::kExitUserError;
    }
    return unifix::run_cli(config_path, command, seed_override, std::cout, std::cerr);
}
