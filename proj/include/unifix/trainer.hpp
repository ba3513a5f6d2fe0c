#pragma once

#include "unifix/data.hpp"
#include "unifix/discriminator.hpp"
#include "unifix/generator.hpp"
#include "unifix/losses.hpp"
#include "unifix/optim.hpp"

#include <filesystem>
#include <functional>
#include <optional>

namespace unifix {

/// Switches for the ablation variants.
struct AblationFlags {
    bool use_group_label = true;
    bool use_type_label = true;
    bool use_unpaired = true;
};

/// Which loss terms are evaluated at all. A term that is evaluated but
/// weighted by zero must leave training bit-identical to one that is skipped.
struct LossTerms {
    bool adversarial = true;
    bool l1 = true;
    bool cycle = true;
    bool identity = true;
};

struct ModelConfig {
    int base_channels = 16;
    int n_downsamples = 2;
    int n_res_blocks = 4;
    int stem_kernel = 7;
    int critic_base_channels = 16;
    int critic_layers = 3;
    bool rescale_relevance = false;
};

struct TrainingConfig {
    int epochs = 20;
    int fixed_lr_epochs = 10;
    double initial_lr = 2e-4;
    int batch_size = 1;
    LossWeights weights;
    std::uint64_t seed = 0;
    AblationFlags ablation;
    std::vector<int> unpaired_loss_types{0, 1};
    AdamOptions adam;
    int checkpoint_every = 5;
    LossTerms terms;

    void validate() const;
    bool unpaired_losses_apply(int defect_type) const;
};

/// Learning rate for an epoch: constant for the first fixed_lr_epochs, then
/// linear decay reaching zero at `epochs`.
double lr_at(int epoch, const TrainingConfig& config);

GeneratorConfig make_generator_config(const ModelConfig& model, int image_size, const LabelVocabulary& vocab,
                                      const AblationFlags& ablation);
CriticConfig make_critic_config(const ModelConfig& model, int image_size);

template <typename Scalar>
struct Networks {
    Generator<Scalar> g_xy;
    Generator<Scalar> g_yx;
    Critic<Scalar> d_x;
    Critic<Scalar> d_y;

    static Networks create(const GeneratorConfig& gen, const CriticConfig& crit, std::uint64_t seed);
    Networks zeros_like() const;
    ParamList<Scalar> generator_parameters();
    ParamList<Scalar> critic_parameters();
};

template <typename Scalar>
struct PairedExample {
    Tensor3<Scalar> x;
    Tensor3<Scalar> y;
    ConditionLabels labels;
};

/// A source image and an unrelated target-domain image of the same defect type.
template <typename Scalar>
struct UnpairedExample {
    Tensor3<Scalar> x;
    Tensor3<Scalar> y;
    ConditionLabels labels;
};

template <typename Scalar>
struct StepBatch {
    std::vector<PairedExample<Scalar>> paired;
    std::vector<UnpairedExample<Scalar>> unpaired;
};

struct StepMetrics {
    LossBreakdown losses;
    double disc_xy = 0;
    double disc_yx = 0;
};

/// Weighted generator objective (critics held fixed) for one batch. Parameter
/// gradients of both generators accumulate into `grads` when non-null.
template <typename Scalar>
LossBreakdown generator_objective(const Networks<Scalar>& nets, const StepBatch<Scalar>& batch,
                                  const TrainingConfig& config, Networks<Scalar>* grads);

/// Critic objective on detached generator outputs; returns (xy, yx) terms.
template <typename Scalar>
std::pair<double, double> discriminator_objective(const Networks<Scalar>& nets, const StepBatch<Scalar>& batch,
                                                  const TrainingConfig& config, Networks<Scalar>* grads);

template <typename Scalar>
struct EpochRecord {
    int epoch = 0;
    double lr = 0;
    StepMetrics mean;
};

template <typename Scalar>
struct TrainState {
    Networks<Scalar> nets;
    AdamState<Scalar> opt_g;
    AdamState<Scalar> opt_d;
    int epoch = 0;       // completed epochs
    std::int64_t step = 0;
    std::vector<EpochRecord<Scalar>> history;

    static TrainState create(const GeneratorConfig& gen, const CriticConfig& crit, std::uint64_t seed);
};

/// One critic update followed by one generator update at learning rate `lr`.
/// Throws TrainingDivergedError on any non-finite loss or parameter.
template <typename Scalar>
StepMetrics train_step(const StepBatch<Scalar>& batch, TrainState<Scalar>& state, const TrainingConfig& config,
                       double lr);

/// Training split grouped per defect type. The quality flag is dropped here:
/// corrupted pairs are indistinguishable from clean ones during training.
struct TrainingData {
    struct Task {
        ConditionLabels labels;
        std::vector<std::pair<Image, Image>> pairs;
        std::vector<Image> unpaired_sources;
        std::vector<Image> targets; // target-domain pool for unpaired batches
    };
    std::vector<Task> tasks; // only types with at least one pair

    static TrainingData from_samples(const std::vector<Sample>& samples);
    std::size_t total_pairs() const;
};

/// Batches of epoch `epoch`: defect types in round-robin order, each step one
/// paired and (when enabled) one unpaired batch from the same type.
std::vector<StepBatch<float>> plan_epoch(const TrainingData& data, const TrainingConfig& config, int epoch);

struct FitOptions {
    std::filesystem::path output_dir;
    std::optional<std::filesystem::path> resume_from; // checkpoint directory
    std::function<void(const EpochRecord<float>&)> on_epoch;
};

struct FitResult {
    TrainState<float> state;
    std::filesystem::path final_checkpoint;
};

FitResult fit(const TrainingConfig& config, const ModelConfig& model, const DatasetManifest& manifest,
              const std::filesystem::path& dataset_root, const FitOptions& options);

// Checkpoints: one directory holding a parameter archive plus a JSON sidecar
// per network, the optimizer moments, and the training state.

void save_checkpoint(const std::filesystem::path& dir, TrainState<float>& state, const TrainingConfig& config,
                     const ModelConfig& model, const LabelVocabulary& vocab, int image_size);

/// Restores every network and optimizer buffer; returns the saved epoch count.
TrainState<float> load_checkpoint(const std::filesystem::path& dir);

/// Loads only G_XY (for evaluation) together with its configuration.
Generator<float> load_generator(const std::filesystem::path& dir, const std::string& name = "g_xy");

std::string metrics_json_line(const EpochRecord<float>& record);

} // namespace unifix
