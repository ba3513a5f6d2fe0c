#pragma once

#include "unifix/data.hpp"
#include "unifix/discriminator.hpp"
#include "unifix/generator.hpp"
#include "unifix/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace unifix {

using ojson = nlohmann::ordered_json;

struct EvalConfig {
    int feature_dim = 64;
    std::uint64_t extractor_seed = 1234;
    std::string checkpoint = "final"; // directory name under train/checkpoints
    int grid_samples = 6;
};

/// Everything one run needs. `seed` drives data synthesis and training alike.
struct RunConfig {
    std::filesystem::path run_dir = "runs/default";
    std::uint64_t seed = 0;
    DatasetConfig data;
    ModelConfig model;
    TrainingConfig train;
    EvalConfig eval;

    /// Copies `seed` into the data and training sections and validates them.
    void resolve();
};

/// Missing keys take their defaults; unknown keys and type mismatches raise
/// ConfigError naming the key path (e.g. "train.lambda5").
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

std::string serialize_config(const RunConfig& config);

// Section converters, shared with checkpoint sidecars.

ojson to_json(const GeneratorConfig& c);
ojson to_json(const CriticConfig& c);
ojson to_json(const ModelConfig& c);
ojson to_json(const TrainingConfig& c);
ojson to_json(const AblationFlags& f);
ojson to_json(const LabelVocabulary& v);

GeneratorConfig generator_config_from_json(const ojson& j, const std::string& path = "");
CriticConfig critic_config_from_json(const ojson& j, const std::string& path = "");
ModelConfig model_config_from_json(const ojson& j, const std::string& path = "model");
TrainingConfig training_config_from_json(const ojson& j, const std::string& path = "train");
AblationFlags ablation_from_json(const ojson& j, const std::string& path = "");

} // namespace unifix
