#include "unifix/cli.hpp"

#include "unifix/archive.hpp"
#include "unifix/evaluator.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <unistd.h>

namespace unifix {

Command parse_command(const std::string& name)
{
    if (name == "synth") return Command::synth;
    if (name == "train") return Command::train;
    if (name == "eval") return Command::eval;
    if (name == "ablate") return Command::ablate;
    if (name == "grid") return Command::grid;
    throw ConfigError("unknown command '" + name + "' (expected synth, train, eval, ablate or grid)");
}

const char* to_string(Command c)
{
    switch (c) {
    case Command::synth: return "synth";
    case Command::train: return "train";
    case Command::eval: return "eval";
    case Command::ablate: return "ablate";
    case Command::grid: return "grid";
    }
    return "synth";
}

std::filesystem::path resolve_run_dir(const RunConfig& config)
{
    const char* root = std::getenv(kRunRootEnv);
    if (root && *root && config.run_dir.is_relative()) return std::filesystem::path(root) / config.run_dir;
    return config.run_dir;
}

namespace {

/// Exclusive marker file held for the lifetime of one invocation.
class RunLock {
public:
    explicit RunLock(std::filesystem::path path) : path_(std::move(path))
    {
        std::filesystem::create_directories(path_.parent_path());
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            if (errno == EEXIST)
                throw ConfigError("run directory is locked by another invocation (" + path_.string() + ")");
            throw IoError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
        }
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
        ::close(fd);
    }
    ~RunLock()
    {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

DatasetManifest require_dataset(const RunLayout& layout)
{
    if (!std::filesystem::exists(layout.data() / "manifest.json"))
        throw IoError("no dataset in " + layout.data().string() + "; run the synth command first");
    return load_manifest(layout.data());
}

std::filesystem::path require_checkpoint(const RunLayout& layout, const EvalConfig& eval)
{
    const auto dir = layout.checkpoints() / eval.checkpoint;
    if (!std::filesystem::exists(dir / "state.json"))
        throw IoError("no checkpoint at " + dir.string() + "; run the train command first");
    return dir;
}

FeatureExtractor make_extractor(const EvalConfig& eval)
{
    return FeatureExtractor(ExtractorConfig{eval.feature_dim, eval.extractor_seed});
}

} // namespace

void dispatch(Command command, const RunConfig& config, std::ostream& log)
{
    const RunLayout layout{resolve_run_dir(config)};
    std::filesystem::create_directories(layout.root);
    write_text_file(layout.resolved_config(), serialize_config(config));

    switch (command) {
    case Command::synth: {
        const auto manifest = build_dataset(config.data, layout.data());
        log << "synth: " << manifest.entries.size() << " images in " << layout.data().string() << "\n";
        break;
    }
    case Command::train: {
        const auto manifest = require_dataset(layout);
        FitOptions options;
        options.output_dir = layout.train();
        options.on_epoch = [&](const EpochRecord<float>& r) { log << "train: " << metrics_json_line(r) << "\n"; };
        const auto result = fit(config.train, config.model, manifest, layout.data(), options);
        log << "train: final checkpoint " << result.final_checkpoint.string() << "\n";
        break;
    }
    case Command::eval: {
        const auto manifest = require_dataset(layout);
        const auto generator = load_generator(require_checkpoint(layout, config.eval));
        const auto report = evaluate(generator, manifest, layout.data(), make_extractor(config.eval));
        write_text_file(layout.eval() / "report.json", report.to_json());
        write_text_file(layout.eval() / "report.txt", report.to_text());
        log << report.to_text();
        break;
    }
    case Command::ablate: {
        const auto manifest = require_dataset(layout);
        const auto table =
            run_ablations(config.train, config.model, manifest, layout.data(), layout.ablate(), make_extractor(config.eval));
        log << table.to_text();
        break;
    }
    case Command::grid: {
        const auto manifest = require_dataset(layout);
        const auto generator = load_generator(require_checkpoint(layout, config.eval));
        emit_test_grid(generator, manifest, layout.data(), config.eval.grid_samples, layout.grid());
        log << "grid: " << layout.grid().string() << "\n";
        break;
    }
    }
}

int run_cli(const std::filesystem::path& config_path, const std::string& command,
            std::optional<std::uint64_t> seed_override, std::ostream& out, std::ostream& err)
{
    try {
        const Command cmd = parse_command(command);
        RunConfig config = parse_config(config_path);
        if (seed_override) {
            config.seed = *seed_override;
            config.resolve();
        }
        RunLock lock(RunLayout{resolve_run_dir(config)}.lock());
        dispatch(cmd, config, out);
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const InsufficientSamplesError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternalError;
    }
}

} // namespace unifix
