#pragma once

#include "unifix/conditioning.hpp"

#include <filesystem>
#include <optional>

namespace unifix {

enum class Domain { source, target };
enum class Quality { clean, corrupted, unpaired };
enum class CorruptionMode { semi_transparent, color_camouflage, occluding_support };

const char* to_string(Domain d);
const char* to_string(Quality q);
const char* to_string(CorruptionMode m);
Domain parse_domain(const std::string& s);
Quality parse_quality(const std::string& s);

inline constexpr int kDefaultImageSize = 32;

struct LabeledImage {
    Image pixels;
    Domain domain = Domain::source;
    ConditionLabels labels;
    std::optional<std::string> pair_id;
    Quality quality = Quality::clean;
};

/// Construction layers kept alongside a synthesized pair. The ideal target is
/// `foreground + (1 - alpha) * target_background` (premultiplied foreground);
/// corruption modes edit the target in terms of these layers.
struct SceneLayers {
    Image foreground;              // premultiplied colours
    RowVector<float> alpha;        // coverage per pixel, in [0, 1]
    Image source_background;
    Image target_background;
    RowVector<float> overlay_mask; // watermark glyph pixels (0/1); empty otherwise
    float overlay_alpha = 0;
    Image overlay_color;
};

struct SynthPair {
    LabeledImage source;
    LabeledImage target;
    SceneLayers layers;
};

/// Foreground shapes on pure white (target) vs. the same shapes on a random
/// solid, gradient or textured background (source). Labels (g=0, eta=0).
SynthPair synth_background_pair(std::uint64_t seed, int image_size = kDefaultImageSize);

/// Clean scene (target) vs. scene under a tiled semi-transparent glyph
/// (source). Labels (g=0, eta=1).
SynthPair synth_watermark_pair(std::uint64_t seed, int image_size = kDefaultImageSize);

/// Elongated two-lens object in canonical horizontal orientation (target) vs.
/// rotated by an angle in +-[15, 60] degrees (source). Labels (g=1, eta=2).
SynthPair synth_rotation_pair(std::uint64_t seed, int image_size = kDefaultImageSize);

/// Same object as synth_rotation_pair(seed) rendered at an explicit angle.
SynthPair synth_rotation_pair_at(std::uint64_t seed, double angle_degrees, int image_size = kDefaultImageSize);

/// Rotation angle (degrees) synth_rotation_pair draws for `seed`.
double rotation_angle_for_seed(std::uint64_t seed);

SynthPair synth_pair(int defect_type, std::uint64_t seed, int image_size = kDefaultImageSize);

/// Damages the target in a mode-specific way and marks both images corrupted.
/// Throws InvalidStateError unless the pair is clean.
SynthPair corrupt_pair(SynthPair pair, CorruptionMode mode, std::uint64_t seed);

/// The target the pair would have without corruption.
Image ideal_target(const SceneLayers& layers);

// ---------------------------------------------------------------------------
// Datasets on disk.
// ---------------------------------------------------------------------------

struct DatasetConfig {
    std::vector<int> counts{350, 350, 350}; // samples per defect type
    double corruption_fraction = 0.0;
    double unpaired_fraction = 0.2;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
    int image_size = kDefaultImageSize;

    void validate() const;
};

struct ManifestEntry {
    std::string path; // relative to the dataset root
    Domain domain = Domain::source;
    int group = 0;
    int defect_type = 0;
    std::optional<std::string> pair_id;
    Quality quality = Quality::clean;
    std::string split; // "train" or "test"
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::vector<int> counts;
    std::uint64_t seed = 0;
    int image_size = kDefaultImageSize;
    double corruption_fraction = 0;
    double unpaired_fraction = 0;
    double test_fraction = 0;
    LabelVocabulary vocabulary;

    std::string to_json() const;
    static DatasetManifest from_json(const std::string& text);

    /// Checks label membership and that every file exists and decodes to the
    /// declared shape.
    void validate(const std::filesystem::path& root) const;
};

/// Synthesizes every sample, writes `<root>/images/*.png` and
/// `<root>/manifest.json`, and returns the manifest. The test split (per
/// defect type, stratified) is always clean and paired; unpaired and
/// corrupted samples are drawn from the training split.
DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& root);

DatasetManifest load_manifest(const std::filesystem::path& root);

/// One sample read back from disk: a source and, for paired samples, its target.
struct Sample {
    std::string id;
    ConditionLabels labels;
    Image source;
    std::optional<Image> target;
    Quality quality = Quality::clean;

    bool paired() const { return target.has_value(); }
};

std::vector<Sample> load_split(const DatasetManifest& manifest, const std::filesystem::path& root,
                               const std::string& split);

} // namespace unifix
