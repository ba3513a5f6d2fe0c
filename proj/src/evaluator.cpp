#include "unifix/evaluator.hpp"

#include "unifix/archive.hpp"
#include "unifix/config.hpp"
#include "unifix/image_io.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

namespace unifix {

namespace {

constexpr int kPoolGrid = 4;
constexpr int kEmbedChannels = 64;
constexpr double kEigenFloor = 1e-12;
constexpr double kPsdTolerance = 1e-8;

} // namespace

void ExtractorConfig::validate() const
{
    if (feature_dim <= 0) throw ConfigError("extractor: feature_dim must be positive");
}

FeatureExtractor::FeatureExtractor(const ExtractorConfig& config) : config_(config)
{
    config_.validate();
    id_ = "randconv-d" + std::to_string(config_.feature_dim) + "-s" + std::to_string(config_.seed);
    const int widths[] = {3, 16, 32, kEmbedChannels};
    for (int i = 0; i < 3; ++i) {
        Rng rng(derive_seed(config_.seed, hash_name("extractor.conv" + std::to_string(i))));
        convs_.push_back(
            Conv2d<double>::random(widths[i], widths[i + 1], 3, 2, 1, std::sqrt(2.0 / (9.0 * widths[i])), rng));
    }
    Rng rng(derive_seed(config_.seed, hash_name("extractor.projection")));
    const int pooled = kEmbedChannels * kPoolGrid * kPoolGrid;
    projection_ = random_normal<double>(config_.feature_dim, pooled, 1.0 / std::sqrt(double(pooled)), rng);
}

Vector<double> FeatureExtractor::features(const Image& image) const
{
    if (image.channels() != 3) throw InvalidShapeError("extractor: expected 3 channels, got " + shape_string(image));
    Tensor3<double> h = image.cast<double>();
    for (const auto& conv : convs_) h = leaky_relu(conv2d_forward(conv, h, static_cast<ConvCache<double>*>(nullptr)));
    if (h.height < kPoolGrid || h.width < kPoolGrid)
        throw InvalidShapeError("extractor: image " + shape_string(image) + " too small");

    // Average pooling onto a fixed grid; bins split the map as evenly as possible.
    Vector<double> pooled = Vector<double>::Zero(kEmbedChannels * kPoolGrid * kPoolGrid);
    for (int bi = 0; bi < kPoolGrid; ++bi) {
        const int i0 = bi * h.height / kPoolGrid;
        const int i1 = (bi + 1) * h.height / kPoolGrid;
        for (int bj = 0; bj < kPoolGrid; ++bj) {
            const int j0 = bj * h.width / kPoolGrid;
            const int j1 = (bj + 1) * h.width / kPoolGrid;
            Vector<double> acc = Vector<double>::Zero(kEmbedChannels);
            for (int i = i0; i < i1; ++i)
                for (int j = j0; j < j1; ++j) acc += h.data.col(i * h.width + j);
            pooled.segment((bi * kPoolGrid + bj) * kEmbedChannels, kEmbedChannels) =
                acc / static_cast<double>((i1 - i0) * (j1 - j0));
        }
    }
    return projection_ * pooled;
}

FeatureMatrix extract_features(const std::vector<Image>& images, const FeatureExtractor& extractor)
{
    if (images.empty()) throw InsufficientSamplesError("extract_features: empty image set");
    FeatureMatrix f;
    f.extractor_id = extractor.id();
    f.rows.resize(static_cast<Eigen::Index>(images.size()), extractor.feature_dim());
    for (std::size_t i = 0; i < images.size(); ++i)
        f.rows.row(static_cast<Eigen::Index>(i)) = extractor.features(images[i]).transpose();
    return f;
}

Moments moments_of(const FeatureMatrix& features)
{
    const int n = features.n();
    const int d = features.d();
    if (n < d + 1)
        throw InsufficientSamplesError("FID needs at least d + 1 = " + std::to_string(d + 1) + " samples, got " +
                                       std::to_string(n));
    Moments m;
    m.n = n;
    m.mean = features.rows.colwise().mean().transpose();
    const Matrix<double> centered = features.rows.rowwise() - m.mean.transpose();
    m.covariance = (centered.transpose() * centered) / static_cast<double>(n - 1);
    return m;
}

Matrix<double> psd_sqrt(const Matrix<double>& m)
{
    if (m.rows() != m.cols()) throw InvalidMomentsError("psd_sqrt: matrix is not square");
    const Matrix<double> sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix<double>> eig(sym);
    if (eig.info() != Eigen::Success) throw InvalidMomentsError("psd_sqrt: eigendecomposition failed");
    Vector<double> roots = eig.eigenvalues();
    for (Eigen::Index i = 0; i < roots.size(); ++i) roots(i) = roots(i) < kEigenFloor ? 0.0 : std::sqrt(roots(i));
    return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

void check_psd(const Matrix<double>& s, const char* which)
{
    if (!s.allFinite()) throw InvalidMomentsError(std::string("fid: ") + which + " has non-finite entries");
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > kPsdTolerance * scale)
        throw InvalidMomentsError(std::string("fid: ") + which + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix<double>> eig(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -kPsdTolerance * scale)
        throw InvalidMomentsError(std::string("fid: ") + which + " is not positive semidefinite");
}

} // namespace

double fid_from_moments(const Vector<double>& mu_a, const Matrix<double>& sigma_a, const Vector<double>& mu_b,
                        const Matrix<double>& sigma_b, bool* clamped)
{
    const auto d = mu_a.size();
    if (mu_b.size() != d || sigma_a.rows() != d || sigma_a.cols() != d || sigma_b.rows() != d || sigma_b.cols() != d)
        throw InvalidMomentsError("fid: dimension mismatch between moments");
    if (!mu_a.allFinite() || !mu_b.allFinite()) throw InvalidMomentsError("fid: non-finite mean");
    check_psd(sigma_a, "sigma_a");
    check_psd(sigma_b, "sigma_b");

    // Tr((Sa Sb)^(1/2)) = Tr((sqrt(Sa) Sb sqrt(Sa))^(1/2)); the latter is symmetric.
    const Matrix<double> root_a = psd_sqrt(sigma_a);
    const Matrix<double> inner = root_a * sigma_b * root_a;
    const double cross = psd_sqrt(inner).trace();
    const double value = (mu_a - mu_b).squaredNorm() + sigma_a.trace() + sigma_b.trace() - 2.0 * cross;
    if (clamped) *clamped = value < 0;
    return value < 0 ? 0.0 : value;
}

TaskReport evaluate_task(const Generator<float>& generator, const DatasetManifest& manifest,
                         const std::filesystem::path& dataset_root, int defect_type,
                         const FeatureExtractor& extractor)
{
    if (defect_type < 0 || defect_type >= generator.config.n_types || defect_type >= manifest.vocabulary.n_types())
        throw InvalidLabelError("evaluate_task: defect type " + std::to_string(defect_type) +
                                " not covered by the checkpoint vocabulary");
    std::vector<Image> outputs;
    std::vector<Image> targets;
    TaskReport r;
    r.defect_type = defect_type;
    r.type_name = manifest.vocabulary.type_names[static_cast<std::size_t>(defect_type)];
    double mae_sum = 0;
    for (const auto& s : load_split(manifest, dataset_root, "test")) {
        if (s.labels.defect_type != defect_type || !s.paired()) continue;
        Image out = quantize(generate(generator, s.source, s.labels));
        if (s.quality == Quality::clean) {
            mae_sum += mean_abs_error(out, *s.target);
            ++r.n_clean;
        }
        outputs.push_back(std::move(out));
        targets.push_back(*s.target);
    }
    r.n_samples = static_cast<int>(outputs.size());
    if (r.n_samples == 0) throw InsufficientSamplesError("evaluate_task: no test pairs for " + r.type_name);
    r.mae = r.n_clean ? mae_sum / r.n_clean : 0.0;
    r.generated = moments_of(extract_features(outputs, extractor));
    r.real = moments_of(extract_features(targets, extractor));
    r.fid = fid_from_moments(r.generated.mean, r.generated.covariance, r.real.mean, r.real.covariance, &r.fid_clamped);
    return r;
}

FIDReport evaluate(const Generator<float>& generator, const DatasetManifest& manifest,
                   const std::filesystem::path& dataset_root, const FeatureExtractor& extractor)
{
    FIDReport report;
    report.extractor_id = extractor.id();
    std::vector<bool> present(static_cast<std::size_t>(manifest.vocabulary.n_types()), false);
    for (const auto& e : manifest.entries)
        if (e.split == "test" && e.defect_type >= 0 && e.defect_type < manifest.vocabulary.n_types())
            present[static_cast<std::size_t>(e.defect_type)] = true;
    for (int t = 0; t < manifest.vocabulary.n_types(); ++t)
        if (present[static_cast<std::size_t>(t)])
            report.tasks.push_back(evaluate_task(generator, manifest, dataset_root, t, extractor));
    return report;
}

namespace {

ojson matrix_json(const Matrix<double>& m)
{
    ojson rows = ojson::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ojson row = ojson::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

ojson vector_json(const Vector<double>& v)
{
    ojson out = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

ojson task_json(const TaskReport& t, bool with_moments)
{
    ojson j;
    j["defect_type"] = t.defect_type;
    j["type_name"] = t.type_name;
    j["fid"] = t.fid;
    j["fid_clamped"] = t.fid_clamped;
    j["mae"] = t.mae;
    j["n_samples"] = t.n_samples;
    j["n_clean"] = t.n_clean;
    if (with_moments) {
        j["generated"] = {{"n", t.generated.n}, {"mean", vector_json(t.generated.mean)},
                          {"covariance", matrix_json(t.generated.covariance)}};
        j["real"] = {{"n", t.real.n}, {"mean", vector_json(t.real.mean)},
                     {"covariance", matrix_json(t.real.covariance)}};
    }
    return j;
}

ojson report_json(const FIDReport& r, bool with_moments)
{
    ojson j;
    j["extractor_id"] = r.extractor_id;
    ojson tasks = ojson::array();
    for (const auto& t : r.tasks) tasks.push_back(task_json(t, with_moments));
    j["tasks"] = std::move(tasks);
    return j;
}

std::string fixed(double v, int precision)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

std::string pad(const std::string& s, std::size_t width)
{
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

} // namespace

std::string FIDReport::to_json(bool with_moments) const
{
    return report_json(*this, with_moments).dump(2) + "\n";
}

std::string FIDReport::to_text() const
{
    std::ostringstream os;
    os << "extractor: " << extractor_id << "\n";
    os << pad("defect type", 24) << pad("FID", 12) << pad("MAE", 10) << "n\n";
    for (const auto& t : tasks)
        os << pad(t.type_name, 24) << pad(fixed(t.fid, 4) + (t.fid_clamped ? "*" : ""), 12) << pad(fixed(t.mae, 4), 10)
           << t.n_samples << "\n";
    return os.str();
}

std::vector<AblationVariant> standard_ablations()
{
    return {
        {"full", AblationFlags{true, true, true}},
        {"without_g", AblationFlags{false, true, true}},
        {"without_g_eta", AblationFlags{false, false, true}},
        {"without_unpaired", AblationFlags{true, true, false}},
    };
}

std::string AblationTable::to_json() const
{
    ojson j;
    j["type_names"] = type_names;
    ojson rows_json = ojson::array();
    for (const auto& r : rows) {
        ojson row;
        row["variant"] = r.variant.name;
        row["flags"] = unifix::to_json(r.variant.flags);
        if (r.report) {
            row["extractor_id"] = r.report->extractor_id;
            ojson cells = ojson::array();
            for (const auto& t : r.report->tasks) cells.push_back(task_json(t, false));
            row["tasks"] = std::move(cells);
        } else {
            row["error"] = r.error;
        }
        rows_json.push_back(std::move(row));
    }
    j["rows"] = std::move(rows_json);
    return j.dump(2) + "\n";
}

std::string AblationTable::to_text() const
{
    std::ostringstream os;
    os << pad("variant", 20);
    for (const auto& name : type_names) os << pad(name + " FID/MAE", 34);
    os << "\n";
    for (const auto& r : rows) {
        os << pad(r.variant.name, 20);
        if (!r.report) {
            os << "failed: " << r.error << "\n";
            continue;
        }
        for (std::size_t t = 0; t < type_names.size(); ++t) {
            std::string cell = "-";
            for (const auto& task : r.report->tasks)
                if (task.defect_type == static_cast<int>(t))
                    cell = fixed(task.fid, 4) + (task.fid_clamped ? "*" : "") + " / " + fixed(task.mae, 4);
            os << pad(cell, 34);
        }
        os << "\n";
    }
    return os.str();
}

AblationTable run_ablations(const TrainingConfig& base, const ModelConfig& model, const DatasetManifest& manifest,
                            const std::filesystem::path& dataset_root, const std::filesystem::path& output_dir,
                            const FeatureExtractor& extractor)
{
    AblationTable table;
    table.type_names = manifest.vocabulary.type_names;
    for (const auto& variant : standard_ablations()) {
        AblationRow row;
        row.variant = variant;
        try {
            TrainingConfig config = base;
            config.ablation = variant.flags;
            FitOptions options;
            options.output_dir = output_dir / variant.name;
            const FitResult fitted = fit(config, model, manifest, dataset_root, options);
            FIDReport report = evaluate(fitted.state.nets.g_xy, manifest, dataset_root, extractor);
            write_text_file(options.output_dir / "report.json", report.to_json());
            row.report = std::move(report);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        table.rows.push_back(std::move(row));
    }
    write_text_file(output_dir / "ablations.json", table.to_json());
    write_text_file(output_dir / "ablations.txt", table.to_text());
    return table;
}

void emit_grid(const std::vector<Image>& sources, const std::vector<Image>& outputs, const std::vector<Image>& targets,
               const std::filesystem::path& path)
{
    if (sources.size() != outputs.size() || sources.size() != targets.size())
        throw InvalidShapeError("emit_grid: source, output and target lists differ in length");
    if (sources.empty()) throw InvalidShapeError("emit_grid: no samples");
    const int h = sources.front().height;
    const int w = sources.front().width;
    const int rows = static_cast<int>(sources.size());
    Image grid(3, rows * h, 3 * w);
    for (int r = 0; r < rows; ++r) {
        const Image* tiles[3] = {&sources[static_cast<std::size_t>(r)], &outputs[static_cast<std::size_t>(r)],
                                 &targets[static_cast<std::size_t>(r)]};
        for (int c = 0; c < 3; ++c) {
            const Image& tile = *tiles[c];
            if (tile.channels() != 3 || tile.height != h || tile.width != w)
                throw InvalidShapeError("emit_grid: tile " + shape_string(tile) + " differs from " +
                                        shape_string(3, h, w));
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) grid.data.col((r * h + i) * grid.width + c * w + j) = tile.data.col(i * w + j);
        }
    }
    write_png(path, grid);
}

void emit_test_grid(const Generator<float>& generator, const DatasetManifest& manifest,
                    const std::filesystem::path& dataset_root, int n, const std::filesystem::path& path)
{
    std::vector<Image> sources;
    std::vector<Image> outputs;
    std::vector<Image> targets;
    for (const auto& s : load_split(manifest, dataset_root, "test")) {
        if (static_cast<int>(sources.size()) >= n) break;
        if (!s.paired()) continue;
        outputs.push_back(generate(generator, s.source, s.labels));
        sources.push_back(s.source);
        targets.push_back(*s.target);
    }
    emit_grid(sources, outputs, targets, path);
}

} // namespace unifix
