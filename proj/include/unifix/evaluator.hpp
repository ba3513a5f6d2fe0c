#pragma once

#include "unifix/data.hpp"
#include "unifix/generator.hpp"
#include "unifix/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace unifix {

/// n samples x d features.
struct FeatureMatrix {
    Matrix<double> rows;
    std::string extractor_id;

    int d() const { return static_cast<int>(rows.cols()); }
    int n() const { return static_cast<int>(rows.rows()); }
};

struct ExtractorConfig {
    int feature_dim = 64;
    std::uint64_t seed = 1234;

    void validate() const;
};

/// Frozen random convolutional embedder: three stride-2 3x3 convs
/// (3 -> 16 -> 32 -> 64, leaky ReLU), average pooling onto a 4x4 grid, then a
/// fixed Gaussian projection to `feature_dim` values.
class FeatureExtractor {
public:
    explicit FeatureExtractor(const ExtractorConfig& config = {});

    const std::string& id() const { return id_; }
    int feature_dim() const { return config_.feature_dim; }

    Vector<double> features(const Image& image) const;

private:
    ExtractorConfig config_;
    std::string id_;
    std::vector<Conv2d<double>> convs_;
    Matrix<double> projection_; // feature_dim x (64 * 16)
};

FeatureMatrix extract_features(const std::vector<Image>& images, const FeatureExtractor& extractor);

struct Moments {
    Vector<double> mean;
    Matrix<double> covariance;
    int n = 0;
};

/// Sample mean and unbiased covariance. Needs n >= d + 1.
Moments moments_of(const FeatureMatrix& features);

/// Square root of a symmetric PSD matrix; eigenvalues below 1e-12 become 0.
Matrix<double> psd_sqrt(const Matrix<double>& m);

/// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^(1/2)). The product root is taken
/// as sqrt(Sa) Sb sqrt(Sa) under psd_sqrt. Roundoff negatives are clamped to
/// zero and reported through `clamped`.
double fid_from_moments(const Vector<double>& mu_a, const Matrix<double>& sigma_a, const Vector<double>& mu_b,
                        const Matrix<double>& sigma_b, bool* clamped = nullptr);

struct TaskReport {
    int defect_type = 0;
    std::string type_name;
    double fid = 0;
    bool fid_clamped = false;
    double mae = 0;
    int n_samples = 0;
    int n_clean = 0;
    Moments generated;
    Moments real;
};

struct FIDReport {
    std::string extractor_id;
    std::vector<TaskReport> tasks;

    /// `with_moments` adds the full mean vectors and covariance matrices.
    std::string to_json(bool with_moments = true) const;
    std::string to_text() const;
};

/// Translates every test source of `defect_type` with G_XY and compares the
/// 8-bit quantized outputs with the real targets.
TaskReport evaluate_task(const Generator<float>& generator, const DatasetManifest& manifest,
                         const std::filesystem::path& dataset_root, int defect_type,
                         const FeatureExtractor& extractor);

/// Every defect type present in the test split.
FIDReport evaluate(const Generator<float>& generator, const DatasetManifest& manifest,
                   const std::filesystem::path& dataset_root, const FeatureExtractor& extractor);

struct AblationVariant {
    std::string name;
    AblationFlags flags;
};

/// full, w/o g, w/o g and eta, w/o unpaired.
std::vector<AblationVariant> standard_ablations();

struct AblationRow {
    AblationVariant variant;
    std::optional<FIDReport> report;
    std::string error; // non-empty when the variant failed
};

struct AblationTable {
    std::vector<std::string> type_names;
    std::vector<AblationRow> rows;

    std::string to_json() const;
    std::string to_text() const;
};

/// Trains and evaluates each variant from the same seed, under
/// `output_dir/<variant name>/`. A failing variant is recorded, not rethrown.
AblationTable run_ablations(const TrainingConfig& base, const ModelConfig& model, const DatasetManifest& manifest,
                            const std::filesystem::path& dataset_root, const std::filesystem::path& output_dir,
                            const FeatureExtractor& extractor);

/// PNG with one row per sample and columns (source, output, target).
void emit_grid(const std::vector<Image>& sources, const std::vector<Image>& outputs, const std::vector<Image>& targets,
               const std::filesystem::path& path);

/// Source, output and target of the first `n` test samples (in manifest order).
void emit_test_grid(const Generator<float>& generator, const DatasetManifest& manifest,
                    const std::filesystem::path& dataset_root, int n, const std::filesystem::path& path);

} // namespace unifix
