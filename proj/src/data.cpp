#include "unifix/data.hpp"

#include "unifix/archive.hpp"
#include "unifix/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

namespace unifix {

using ojson = nlohmann::ordered_json;

const char* to_string(Domain d)
{
    return d == Domain::source ? "source" : "target";
}

const char* to_string(Quality q)
{
    switch (q) {
    case Quality::clean: return "clean";
    case Quality::corrupted: return "corrupted";
    case Quality::unpaired: return "unpaired";
    }
    return "clean";
}

const char* to_string(CorruptionMode m)
{
    switch (m) {
    case CorruptionMode::semi_transparent: return "semi_transparent";
    case CorruptionMode::color_camouflage: return "color_camouflage";
    case CorruptionMode::occluding_support: return "occluding_support";
    }
    return "semi_transparent";
}

Domain parse_domain(const std::string& s)
{
    if (s == "source") return Domain::source;
    if (s == "target") return Domain::target;
    throw IoError("unknown domain '" + s + "'");
}

Quality parse_quality(const std::string& s)
{
    if (s == "clean") return Quality::clean;
    if (s == "corrupted") return Quality::corrupted;
    if (s == "unpaired") return Quality::unpaired;
    throw IoError("unknown quality '" + s + "'");
}

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kSubsamples = 4;

using Color = Eigen::Vector3f;

// Colours are drawn in [0, 1] and stored in [-1, 1].
Color signed_color(const Color& unit)
{
    return (2.0f * unit.array() - 1.0f).matrix();
}

Color random_unit_color(Rng& rng, double lo, double hi)
{
    return Color(static_cast<float>(uniform(rng, lo, hi)), static_cast<float>(uniform(rng, lo, hi)),
                 static_cast<float>(uniform(rng, lo, hi)));
}

Image white_image(int size)
{
    return Image::constant(3, size, size, 1.0f);
}

using Inside = std::function<bool(double x, double y)>;

/// Fraction of a 4x4 sub-pixel grid inside the shape, per pixel.
RowVector<float> coverage(const Inside& inside, int size)
{
    RowVector<float> cov = RowVector<float>::Zero(size * size);
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            int hits = 0;
            for (int si = 0; si < kSubsamples; ++si)
                for (int sj = 0; sj < kSubsamples; ++sj)
                    if (inside(j + (sj + 0.5) / kSubsamples, i + (si + 0.5) / kSubsamples)) ++hits;
            cov(i * size + j) = static_cast<float>(hits) / (kSubsamples * kSubsamples);
        }
    }
    return cov;
}

/// Composites a flat-coloured coverage layer over a premultiplied layer.
void paint_over(Image& premultiplied, RowVector<float>& alpha, const RowVector<float>& cov, const Color& color)
{
    for (int p = 0; p < premultiplied.pixels(); ++p) {
        const float a = cov(p);
        if (a == 0.0f) continue;
        premultiplied.data.col(p) = a * color + (1.0f - a) * premultiplied.data.col(p);
        alpha(p) = a + (1.0f - a) * alpha(p);
    }
}

Image composite(const Image& premultiplied, const RowVector<float>& alpha, const Image& background)
{
    Image out = background;
    for (int p = 0; p < out.pixels(); ++p)
        out.data.col(p) = premultiplied.data.col(p) + (1.0f - alpha(p)) * background.data.col(p);
    return out;
}

Inside random_shape(Rng& rng, int size)
{
    const double cx = uniform(rng, 0.25, 0.75) * size;
    const double cy = uniform(rng, 0.25, 0.75) * size;
    const double rx = uniform(rng, 0.10, 0.22) * size;
    const double ry = uniform(rng, 0.10, 0.22) * size;
    const double theta = uniform(rng, 0.0, kPi);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const int kind = uniform_int(rng, 0, 2);
    return [=](double x, double y) {
        const double u = c * (x - cx) + s * (y - cy);
        const double v = -s * (x - cx) + c * (y - cy);
        switch (kind) {
        case 0: return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
        case 1: return std::abs(u) <= rx && std::abs(v) <= ry;
        default: // isosceles triangle pointing along +v
            return v >= -ry && v <= ry && std::abs(u) <= rx * (ry - v) / (2.0 * ry);
        }
    };
}

struct Foreground {
    Image premultiplied;
    RowVector<float> alpha;
};

Foreground random_foreground(Rng& rng, int size)
{
    Foreground fg{Image(3, size, size), RowVector<float>::Zero(size * size)};
    const int n = uniform_int(rng, 2, 4);
    for (int k = 0; k < n; ++k) {
        const Inside shape = random_shape(rng, size);
        const Color color = signed_color(random_unit_color(rng, 0.0, 0.75));
        paint_over(fg.premultiplied, fg.alpha, coverage(shape, size), color);
    }
    return fg;
}

Image random_background(Rng& rng, int size)
{
    Image bg(3, size, size);
    const int kind = uniform_int(rng, 0, 2);
    const Color c0 = random_unit_color(rng, 0.05, 0.85);
    const Color c1 = random_unit_color(rng, 0.05, 0.85);
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    const double freq = uniform(rng, 2.0, 5.0);
    const double phase_x = uniform(rng, 0.0, 2.0 * kPi);
    const double phase_y = uniform(rng, 0.0, 2.0 * kPi);
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            Color unit = c0;
            if (kind == 1) {
                double t = ((j + 0.5 - size / 2.0) * std::cos(phi) + (i + 0.5 - size / 2.0) * std::sin(phi)) / size + 0.5;
                t = std::clamp(t, 0.0, 1.0);
                unit = (1.0f - static_cast<float>(t)) * c0 + static_cast<float>(t) * c1;
            } else if (kind == 2) {
                const double pattern = std::sin(2.0 * kPi * freq * (j + 0.5) / size + phase_x) *
                                       std::sin(2.0 * kPi * freq * (i + 0.5) / size + phase_y);
                unit = (c0.array() + static_cast<float>(0.15 * pattern)).cwiseMax(0.0f).cwiseMin(0.9f).matrix();
            }
            bg.data.col(i * size + j) = signed_color(unit);
        }
    }
    return bg;
}

SynthPair make_pair(int defect_type, std::uint64_t seed, Image source, Image target, SceneLayers layers)
{
    static const LabelVocabulary vocab;
    const ConditionLabels labels = vocab.labels_for(defect_type);
    char id[32];
    std::snprintf(id, sizeof id, "s%016llx", static_cast<unsigned long long>(seed));
    SynthPair pair;
    pair.source = LabeledImage{std::move(source), Domain::source, labels, std::string(id), Quality::clean};
    pair.target = LabeledImage{std::move(target), Domain::target, labels, std::string(id), Quality::clean};
    pair.layers = std::move(layers);
    return pair;
}

struct LensObject {
    double lens_rx;
    double lens_ry;
    double separation;
    double bridge_half_thickness;
    double arm_length;
    Color frame;
    Color lens;
};

LensObject random_lens_object(std::uint64_t seed, int size)
{
    Rng rng(derive_seed(seed, hash_name("object")));
    LensObject o{};
    o.lens_rx = uniform(rng, 0.11, 0.15) * size;
    o.lens_ry = uniform(rng, 0.07, 0.10) * size;
    o.separation = 2.0 * o.lens_rx + uniform(rng, 0.04, 0.08) * size;
    o.bridge_half_thickness = std::max(0.5, 0.025 * size);
    o.arm_length = uniform(rng, 0.06, 0.12) * size;
    o.frame = signed_color(random_unit_color(rng, 0.0, 0.35));
    o.lens = signed_color(random_unit_color(rng, 0.1, 0.6));
    return o;
}

Foreground render_lens_object(const LensObject& o, double angle_degrees, int size)
{
    const double theta = angle_degrees * kPi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double cx = size / 2.0;
    const double cy = size / 2.0;
    const double half = o.separation / 2.0;
    // Object coordinates: rotate the sample point by -theta about the centre.
    auto to_object = [=](double x, double y) {
        return std::pair<double, double>{c * (x - cx) + s * (y - cy), -s * (x - cx) + c * (y - cy)};
    };
    const Inside lenses = [=](double x, double y) {
        const auto [u, v] = to_object(x, y);
        const double l = ((u + half) / o.lens_rx) * ((u + half) / o.lens_rx) + (v / o.lens_ry) * (v / o.lens_ry);
        const double r = ((u - half) / o.lens_rx) * ((u - half) / o.lens_rx) + (v / o.lens_ry) * (v / o.lens_ry);
        return l <= 1.0 || r <= 1.0;
    };
    const Inside frame = [=](double x, double y) {
        const auto [u, v] = to_object(x, y);
        const double bridge_y = -0.4 * o.lens_ry;
        const bool bridge = std::abs(u) <= half && std::abs(v - bridge_y) <= o.bridge_half_thickness;
        // A single temple arm on the right breaks the left/right symmetry.
        const bool arm = u >= half + o.lens_rx * 0.8 && u <= half + o.lens_rx + o.arm_length &&
                         std::abs(v - bridge_y) <= o.bridge_half_thickness;
        return bridge || arm;
    };
    Foreground fg{Image(3, size, size), RowVector<float>::Zero(size * size)};
    paint_over(fg.premultiplied, fg.alpha, coverage(lenses, size), o.lens);
    paint_over(fg.premultiplied, fg.alpha, coverage(frame, size), o.frame);
    return fg;
}

} // namespace

Image ideal_target(const SceneLayers& layers)
{
    return composite(layers.foreground, layers.alpha, layers.target_background);
}

SynthPair synth_background_pair(std::uint64_t seed, int image_size)
{
    Rng rng(derive_seed(seed, hash_name("background_pair")));
    Foreground fg = random_foreground(rng, image_size);
    Image bg = random_background(rng, image_size);
    SceneLayers layers;
    layers.foreground = fg.premultiplied;
    layers.alpha = fg.alpha;
    layers.source_background = bg;
    layers.target_background = white_image(image_size);
    Image target = ideal_target(layers);
    Image source = composite(fg.premultiplied, fg.alpha, bg);
    return make_pair(0, seed, std::move(source), std::move(target), std::move(layers));
}

SynthPair synth_watermark_pair(std::uint64_t seed, int image_size)
{
    Rng rng(derive_seed(seed, hash_name("watermark_pair")));
    Foreground fg = random_foreground(rng, image_size);
    Image bg = random_background(rng, image_size);
    SceneLayers layers;
    layers.foreground = fg.premultiplied;
    layers.alpha = fg.alpha;
    layers.source_background = bg;
    layers.target_background = bg;
    Image target = ideal_target(layers);

    const int spacing = std::max(6, image_size / 4 + uniform_int(rng, -2, 2));
    const double radius = spacing / 3.0;
    const int kind = uniform_int(rng, 0, 2);
    const int ox = uniform_int(rng, 0, spacing - 1);
    const int oy = uniform_int(rng, 0, spacing - 1);
    const float alpha = static_cast<float>(uniform(rng, 0.2, 0.5));
    const float gray = static_cast<float>(uniform(rng, 0.7, 1.0));
    const Color glyph = signed_color(Color::Constant(gray));

    layers.overlay_mask = RowVector<float>::Zero(image_size * image_size);
    layers.overlay_alpha = alpha;
    layers.overlay_color = Image(3, image_size, image_size);
    layers.overlay_color.data.colwise() = glyph;
    Image source = target;
    for (int i = 0; i < image_size; ++i) {
        for (int j = 0; j < image_size; ++j) {
            const double dx = ((j - ox) % spacing + spacing) % spacing - spacing / 2.0;
            const double dy = ((i - oy) % spacing + spacing) % spacing - spacing / 2.0;
            bool on = false;
            switch (kind) {
            case 0: on = std::abs(std::abs(dx) - std::abs(dy)) <= 0.5 && std::abs(dx) <= radius; break;
            case 1: on = std::abs(std::sqrt(dx * dx + dy * dy) - radius) <= 0.6; break;
            default: on = std::abs(dy) <= 0.5 && std::abs(dx) <= radius; break;
            }
            if (!on) continue;
            const int p = i * image_size + j;
            layers.overlay_mask(p) = 1.0f;
            source.data.col(p) = (1.0f - alpha) * target.data.col(p) + alpha * glyph;
        }
    }
    return make_pair(1, seed, std::move(source), std::move(target), std::move(layers));
}

double rotation_angle_for_seed(std::uint64_t seed)
{
    Rng rng(derive_seed(seed, hash_name("angle")));
    const double magnitude = uniform(rng, 15.0, 60.0);
    return uniform(rng) < 0.5 ? -magnitude : magnitude;
}

SynthPair synth_rotation_pair_at(std::uint64_t seed, double angle_degrees, int image_size)
{
    const LensObject object = random_lens_object(seed, image_size);
    const Foreground canonical = render_lens_object(object, 0.0, image_size);
    const Foreground rotated = render_lens_object(object, angle_degrees, image_size);
    SceneLayers layers;
    layers.foreground = canonical.premultiplied;
    layers.alpha = canonical.alpha;
    layers.source_background = white_image(image_size);
    layers.target_background = white_image(image_size);
    Image target = ideal_target(layers);
    Image source = composite(rotated.premultiplied, rotated.alpha, layers.source_background);
    return make_pair(2, seed, std::move(source), std::move(target), std::move(layers));
}

SynthPair synth_rotation_pair(std::uint64_t seed, int image_size)
{
    return synth_rotation_pair_at(seed, rotation_angle_for_seed(seed), image_size);
}

SynthPair synth_pair(int defect_type, std::uint64_t seed, int image_size)
{
    switch (defect_type) {
    case 0: return synth_background_pair(seed, image_size);
    case 1: return synth_watermark_pair(seed, image_size);
    case 2: return synth_rotation_pair(seed, image_size);
    default: throw InvalidLabelError("no synthesizer for defect type " + std::to_string(defect_type));
    }
}

SynthPair corrupt_pair(SynthPair pair, CorruptionMode mode, std::uint64_t seed)
{
    if (pair.target.quality != Quality::clean || pair.source.quality != Quality::clean)
        throw InvalidStateError("corrupt_pair: pair is already " + std::string(to_string(pair.target.quality)));
    Rng rng(derive_seed(seed, hash_name("corrupt"), static_cast<std::uint64_t>(mode)));
    const auto& L = pair.layers;
    const int size = pair.target.pixels.height;
    Image& target = pair.target.pixels;

    switch (mode) {
    case CorruptionMode::semi_transparent: {
        const float opacity = static_cast<float>(uniform(rng, 0.3, 0.6));
        for (int p = 0; p < target.pixels(); ++p)
            target.data.col(p) =
                opacity * L.foreground.data.col(p) + (1.0f - opacity * L.alpha(p)) * L.target_background.data.col(p);
        break;
    }
    case CorruptionMode::color_camouflage: {
        const float t = static_cast<float>(uniform(rng, 0.5, 0.8));
        for (int p = 0; p < target.pixels(); ++p) {
            const Color fg = (1.0f - t) * L.foreground.data.col(p) + t * L.alpha(p) * L.source_background.data.col(p);
            target.data.col(p) = fg + (1.0f - L.alpha(p)) * L.target_background.data.col(p);
        }
        break;
    }
    case CorruptionMode::occluding_support: {
        int r0 = size, r1 = -1, c0 = size, c1 = -1;
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j)
                if (L.alpha(i * size + j) > 0.5f) {
                    r0 = std::min(r0, i);
                    r1 = std::max(r1, i);
                    c0 = std::min(c0, j);
                    c1 = std::max(c1, j);
                }
        if (r1 < 0) {
            r1 = size * 2 / 3;
            c0 = size / 4;
            c1 = 3 * size / 4;
        }
        const int band = uniform_int(rng, 3, 6);
        const int margin = uniform_int(rng, 2, 5);
        const int top = std::max(0, r1 - 1);
        const int bottom = std::min(size - 1, r1 + band);
        const int left = std::max(0, c0 - margin);
        const int right = std::min(size - 1, c1 + margin);
        // The support takes a darkened tone of the source background.
        for (int i = top; i <= bottom; ++i) {
            for (int j = left; j <= right; ++j) {
                const int p = i * size + j;
                const Color support = (0.6f * (L.source_background.data.col(p).array() + 1.0f) - 1.0f).matrix();
                target.data.col(p) = L.foreground.data.col(p) + (1.0f - L.alpha(p)) * support;
            }
        }
        break;
    }
    }
    target.data = target.data.cwiseMax(-1.0f).cwiseMin(1.0f);
    pair.source.quality = Quality::corrupted;
    pair.target.quality = Quality::corrupted;
    return pair;
}

// ---------------------------------------------------------------------------
// Dataset building
// ---------------------------------------------------------------------------

void DatasetConfig::validate() const
{
    for (double f : {corruption_fraction, unpaired_fraction, test_fraction})
        if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("dataset fractions must lie in [0, 1]");
    if (image_size < 8) throw ConfigError("dataset image_size must be at least 8");
    if (counts.empty() || counts.size() > 3) throw ConfigError("dataset counts must list 1 to 3 defect types");
    int total = 0;
    for (int c : counts) {
        if (c < 0) throw ConfigError("dataset counts must be nonnegative");
        total += c;
    }
    if (total == 0) throw ConfigError("dataset counts are all zero");
}

namespace {

std::string sample_id(int defect_type, int index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%d-%05d", defect_type, index);
    return buf;
}

ojson entry_json(const ManifestEntry& e)
{
    ojson j;
    j["path"] = e.path;
    j["domain"] = to_string(e.domain);
    j["group"] = e.group;
    j["defect_type"] = e.defect_type;
    j["pair_id"] = e.pair_id ? ojson(*e.pair_id) : ojson(nullptr);
    j["quality"] = to_string(e.quality);
    j["split"] = e.split;
    return j;
}

} // namespace

std::string DatasetManifest::to_json() const
{
    ojson j;
    j["format"] = "unifix-manifest/1";
    j["seed"] = seed;
    j["image_size"] = image_size;
    j["counts"] = counts;
    j["corruption_fraction"] = corruption_fraction;
    j["unpaired_fraction"] = unpaired_fraction;
    j["test_fraction"] = test_fraction;
    j["group_names"] = vocabulary.group_names;
    j["type_names"] = vocabulary.type_names;
    j["group_of_type"] = vocabulary.group_of_type;
    ojson entries_json = ojson::array();
    for (const auto& e : entries) entries_json.push_back(entry_json(e));
    j["entries"] = std::move(entries_json);
    return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text)
{
    DatasetManifest m;
    try {
        const ojson j = ojson::parse(text);
        m.seed = j.at("seed").get<std::uint64_t>();
        m.image_size = j.at("image_size").get<int>();
        m.counts = j.at("counts").get<std::vector<int>>();
        m.corruption_fraction = j.at("corruption_fraction").get<double>();
        m.unpaired_fraction = j.at("unpaired_fraction").get<double>();
        m.test_fraction = j.at("test_fraction").get<double>();
        m.vocabulary.group_names = j.at("group_names").get<std::vector<std::string>>();
        m.vocabulary.type_names = j.at("type_names").get<std::vector<std::string>>();
        m.vocabulary.group_of_type = j.at("group_of_type").get<std::vector<int>>();
        for (const auto& ej : j.at("entries")) {
            ManifestEntry e;
            e.path = ej.at("path").get<std::string>();
            e.domain = parse_domain(ej.at("domain").get<std::string>());
            e.group = ej.at("group").get<int>();
            e.defect_type = ej.at("defect_type").get<int>();
            if (!ej.at("pair_id").is_null()) e.pair_id = ej.at("pair_id").get<std::string>();
            e.quality = parse_quality(ej.at("quality").get<std::string>());
            e.split = ej.at("split").get<std::string>();
            m.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw IoError(std::string("malformed manifest: ") + ex.what());
    }
    return m;
}

void DatasetManifest::validate(const std::filesystem::path& root) const
{
    for (const auto& e : entries) {
        vocabulary.validate(ConditionLabels{e.group, e.defect_type, vocabulary.n_groups(), vocabulary.n_types()});
        if (e.pair_id.has_value() == (e.quality == Quality::unpaired))
            throw IoError(e.path + ": pair_id must be present exactly when the sample is paired");
        if (e.split != "train" && e.split != "test") throw IoError(e.path + ": unknown split '" + e.split + "'");
        const auto file = root / e.path;
        if (!std::filesystem::exists(file)) throw IoError("missing image " + file.string());
        const Image img = read_png(file);
        if (img.height != image_size || img.width != image_size)
            throw IoError(file.string() + ": decoded " + shape_string(img) + ", expected size " +
                          std::to_string(image_size));
    }
}

DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& root)
{
    config.validate();
    std::error_code ec;
    std::filesystem::create_directories(root / "images", ec);
    if (ec) throw IoError("cannot create dataset directory " + (root / "images").string() + ": " + ec.message());

    DatasetManifest m;
    m.counts = config.counts;
    m.seed = config.seed;
    m.image_size = config.image_size;
    m.corruption_fraction = config.corruption_fraction;
    m.unpaired_fraction = config.unpaired_fraction;
    m.test_fraction = config.test_fraction;

    for (int type = 0; type < static_cast<int>(config.counts.size()); ++type) {
        const int n = config.counts[static_cast<std::size_t>(type)];
        if (n == 0) continue;
        const int n_test = static_cast<int>(std::lround(config.test_fraction * n));
        const int n_train = n - n_test;
        const int n_unpaired = static_cast<int>(std::lround(config.unpaired_fraction * n));
        if (n_unpaired > n_train)
            throw ConfigError("unpaired fraction " + std::to_string(config.unpaired_fraction) +
                              " exceeds the training split of defect type " + std::to_string(type));
        const int n_corrupt = static_cast<int>(std::lround(config.corruption_fraction * (n_train - n_unpaired)));

        const auto t = static_cast<std::uint64_t>(type);
        const auto split_order = seeded_permutation(n, derive_seed(config.seed, t, hash_name("split")));
        std::vector<int> train(split_order.begin() + n_test, split_order.end());
        std::sort(train.begin(), train.end());
        const auto train_order = seeded_permutation(n_train, derive_seed(config.seed, t, hash_name("roles")));

        std::vector<Quality> quality(static_cast<std::size_t>(n), Quality::clean);
        std::vector<std::string> split(static_cast<std::size_t>(n), "test");
        for (int k = 0; k < n_train; ++k) {
            const int idx = train[static_cast<std::size_t>(train_order[static_cast<std::size_t>(k)])];
            split[static_cast<std::size_t>(idx)] = "train";
            if (k < n_unpaired)
                quality[static_cast<std::size_t>(idx)] = Quality::unpaired;
            else if (k < n_unpaired + n_corrupt)
                quality[static_cast<std::size_t>(idx)] = Quality::corrupted;
        }

        for (int i = 0; i < n; ++i) {
            const auto sample_seed = derive_seed(config.seed, t, static_cast<std::uint64_t>(i));
            SynthPair pair = synth_pair(type, sample_seed, config.image_size);
            const Quality q = quality[static_cast<std::size_t>(i)];
            if (q == Quality::corrupted) {
                Rng rng(derive_seed(sample_seed, hash_name("corruption_mode")));
                const auto mode = static_cast<CorruptionMode>(uniform_int(rng, 0, 2));
                pair = corrupt_pair(std::move(pair), mode, sample_seed);
            }
            const std::string id = sample_id(type, i);
            const ConditionLabels labels = m.vocabulary.labels_for(type);
            std::optional<std::string> pair_id;
            if (q != Quality::unpaired) pair_id = id;

            ManifestEntry src{"images/" + id + "_source.png", Domain::source, labels.group, type, pair_id, q,
                              split[static_cast<std::size_t>(i)]};
            write_png(root / src.path, pair.source.pixels);
            m.entries.push_back(src);
            if (q != Quality::unpaired) {
                ManifestEntry tgt = src;
                tgt.path = "images/" + id + "_target.png";
                tgt.domain = Domain::target;
                write_png(root / tgt.path, pair.target.pixels);
                m.entries.push_back(tgt);
            }
        }
    }
    write_text_file(root / "manifest.json", m.to_json());
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& root)
{
    const auto path = root / "manifest.json";
    if (!std::filesystem::exists(path)) throw IoError("no manifest at " + path.string());
    return DatasetManifest::from_json(read_text_file(path));
}

std::vector<Sample> load_split(const DatasetManifest& manifest, const std::filesystem::path& root,
                               const std::string& split)
{
    std::vector<Sample> samples;
    std::map<std::string, std::size_t> by_pair;
    for (const auto& e : manifest.entries) {
        if (e.split != split || e.domain != Domain::source) continue;
        Sample s;
        s.id = e.pair_id ? *e.pair_id : std::filesystem::path(e.path).stem().string();
        s.labels = ConditionLabels{e.group, e.defect_type, manifest.vocabulary.n_groups(), manifest.vocabulary.n_types()};
        manifest.vocabulary.validate(s.labels);
        s.source = read_png(root / e.path);
        s.quality = e.quality;
        if (e.pair_id) by_pair[*e.pair_id] = samples.size();
        samples.push_back(std::move(s));
    }
    for (const auto& e : manifest.entries) {
        if (e.split != split || e.domain != Domain::target) continue;
        if (!e.pair_id) throw IoError(e.path + ": target entry without pair_id");
        const auto it = by_pair.find(*e.pair_id);
        if (it == by_pair.end()) throw IoError(e.path + ": target without matching source");
        samples[it->second].target = read_png(root / e.path);
    }
    return samples;
}

} // namespace unifix
