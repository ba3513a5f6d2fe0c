#pragma once

#include "unifix/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace unifix {

enum class Command { synth, train, eval, ablate, grid };

Command parse_command(const std::string& name);
const char* to_string(Command c);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitInternalError = 2;

/// Environment variable that, when set, roots every relative run_dir.
inline constexpr const char* kRunRootEnv = "UNIFIX_RUN_ROOT";

/// Output locations inside one run directory.
struct RunLayout {
    std::filesystem::path root;

    std::filesystem::path resolved_config() const { return root / "config.resolved.json"; }
    std::filesystem::path lock() const { return root / ".lock"; }
    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path train() const { return root / "train"; }
    std::filesystem::path checkpoints() const { return train() / "checkpoints"; }
    std::filesystem::path eval() const { return root / "eval"; }
    std::filesystem::path ablate() const { return root / "ablate"; }
    std::filesystem::path grid() const { return root / "grid" / "grid.png"; }
};

/// run_dir, prefixed by $UNIFIX_RUN_ROOT when that is set and run_dir is relative.
std::filesystem::path resolve_run_dir(const RunConfig& config);

/// Runs one command. Module errors propagate as exceptions; the caller maps
/// them to exit codes (see run_cli).
void dispatch(Command command, const RunConfig& config, std::ostream& log);

/// Full entry point used by the executable: parses the config, applies the
/// seed override, holds the run lock and maps errors to exit codes.
int run_cli(const std::filesystem::path& config_path, const std::string& command,
            std::optional<std::uint64_t> seed_override, std::ostream& out, std::ostream& err);

} // namespace unifix
