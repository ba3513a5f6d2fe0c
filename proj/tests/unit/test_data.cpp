#include "unifix/data.hpp"

#include "unifix/archive.hpp"
#include "unifix/image_io.hpp"

#include "helpers.hpp"

#include <map>

using namespace unifix;

namespace {

double max_abs(const Image& a, const Image& b)
{
    return (a.data - b.data).cwiseAbs().maxCoeff();
}

bool in_range(const Image& x)
{
    return x.data.maxCoeff() <= 1.0f && x.data.minCoeff() >= -1.0f;
}

} // namespace

TEST_CASE("background pair: white target, shared foreground")
{
    const auto p = synth_background_pair(42);
    CHECK(p.source.labels.group == 0);
    CHECK(p.source.labels.defect_type == 0);
    CHECK(p.source.pair_id == p.target.pair_id);
    CHECK(p.source.domain == Domain::source);
    CHECK(p.target.domain == Domain::target);
    int background = 0;
    int solid = 0;
    for (int px = 0; px < p.target.pixels.pixels(); ++px) {
        const float a = p.layers.alpha(px);
        if (a == 0.0f) {
            ++background;
            CHECK(p.target.pixels.data.col(px).minCoeff() == 1.0f);
        } else if (a == 1.0f) {
            ++solid;
            CHECK((p.source.pixels.data.col(px) - p.target.pixels.data.col(px)).cwiseAbs().maxCoeff() <= 1e-6f);
        }
    }
    CHECK(background > 0);
    CHECK(solid > 0);
    CHECK(max_abs(p.source.pixels, p.target.pixels) > 0.05);
    CHECK(max_abs(synth_background_pair(42).source.pixels, p.source.pixels) == 0.0);
    CHECK(in_range(p.source.pixels));
}

TEST_CASE("watermark pair obeys the alpha blend")
{
    const auto p = synth_watermark_pair(7);
    CHECK(p.source.labels.group == 0);
    CHECK(p.source.labels.defect_type == 1);
    const float alpha = p.layers.overlay_alpha;
    CHECK(alpha >= 0.2f);
    CHECK(alpha <= 0.5f);
    int marked = 0;
    for (int px = 0; px < p.source.pixels.pixels(); ++px) {
        const auto s = p.source.pixels.data.col(px);
        const auto t = p.target.pixels.data.col(px);
        if (p.layers.overlay_mask(px) == 0.0f) {
            CHECK((s - t).cwiseAbs().maxCoeff() == 0.0f);
        } else {
            ++marked;
            const Eigen::Vector3f blend = (1.0f - alpha) * t + alpha * p.layers.overlay_color.data.col(px);
            CHECK((s - blend).cwiseAbs().maxCoeff() <= 1e-6f);
        }
    }
    CHECK(marked > 0);
    CHECK(max_abs(synth_watermark_pair(7).source.pixels, p.source.pixels) == 0.0);
}

TEST_CASE("rotation pair rotates by a nonzero angle")
{
    const auto p = synth_rotation_pair(3);
    CHECK(p.source.labels.group == 1);
    CHECK(p.source.labels.defect_type == 2);
    const double angle = rotation_angle_for_seed(3);
    CHECK(std::abs(angle) >= 15.0);
    CHECK(std::abs(angle) <= 60.0);
    CHECK(max_abs(synth_rotation_pair_at(3, 0.0).source.pixels, p.target.pixels) <= 1e-6);

    // Orientation of the dark mass from its second moments.
    auto orientation = [](const Image& img) {
        double m = 0, mx = 0, my = 0;
        for (int i = 0; i < img.height; ++i)
            for (int j = 0; j < img.width; ++j) {
                const double w = 1.0 - img.data.col(i * img.width + j).mean();
                m += w;
                mx += w * j;
                my += w * i;
            }
        mx /= m;
        my /= m;
        double sxx = 0, syy = 0, sxy = 0;
        for (int i = 0; i < img.height; ++i)
            for (int j = 0; j < img.width; ++j) {
                const double w = 1.0 - img.data.col(i * img.width + j).mean();
                sxx += w * (j - mx) * (j - mx);
                syy += w * (i - my) * (i - my);
                sxy += w * (j - mx) * (i - my);
            }
        return std::array<double, 3>{sxx / m, syy / m, sxy / m};
    };
    const auto src = orientation(p.source.pixels);
    const auto tgt = orientation(p.target.pixels);
    CHECK(std::abs(tgt[2]) < 0.5);
    CHECK(std::abs(src[2]) > 1.0);
    CHECK(max_abs(synth_rotation_pair(3).source.pixels, p.source.pixels) == 0.0);
}

TEST_CASE("corruption damages only the target")
{
    for (auto mode : {CorruptionMode::semi_transparent, CorruptionMode::color_camouflage,
                      CorruptionMode::occluding_support}) {
        CAPTURE(to_string(mode));
        const auto clean = synth_background_pair(11);
        const auto bad = corrupt_pair(clean, mode, 12);
        CHECK(bad.source.pixels.data == clean.source.pixels.data);
        CHECK(bad.target.quality == Quality::corrupted);
        CHECK(bad.source.quality == Quality::corrupted);
        CHECK(in_range(bad.target.pixels));
        CHECK(max_abs(ideal_target(bad.layers), clean.target.pixels) <= 1e-6);
        CHECK(max_abs(corrupt_pair(clean, mode, 12).target.pixels, bad.target.pixels) == 0.0);
        CHECK_THROWS_AS(corrupt_pair(bad, mode, 13), InvalidStateError);
        if (mode == CorruptionMode::semi_transparent)
            CHECK((bad.target.pixels.data - ideal_target(bad.layers).data).cwiseAbs().mean() > 0.02);
        else
            CHECK(max_abs(bad.target.pixels, clean.target.pixels) > 0.05);
    }
}

TEST_CASE("dataset counts, splits and membership")
{
    testing::TempDir dir("dataset");
    DatasetConfig c;
    c.counts = {100, 100, 100};
    c.corruption_fraction = 0.3;
    c.unpaired_fraction = 0.2;
    c.seed = 5;
    const auto m = build_dataset(c, dir.path());

    int sources = 0, targets = 0, unpaired = 0, corrupted = 0;
    std::map<int, int> per_type;
    std::map<std::string, int> test_per_type;
    for (const auto& e : m.entries) {
        CHECK(e.group == m.vocabulary.group_of_type[static_cast<std::size_t>(e.defect_type)]);
        CHECK(e.pair_id.has_value() == (e.quality != Quality::unpaired));
        if (e.domain == Domain::source) {
            ++sources;
            ++per_type[e.defect_type];
            if (e.split == "test") {
                ++test_per_type[std::to_string(e.defect_type)];
                CHECK(e.quality == Quality::clean);
            }
        } else {
            ++targets;
        }
        if (e.quality == Quality::unpaired && e.domain == Domain::source) ++unpaired;
        if (e.quality == Quality::corrupted && e.domain == Domain::source) ++corrupted;
    }
    CHECK(sources == 300);
    CHECK(targets == 240);
    CHECK(unpaired == 60);
    CHECK(corrupted == 3 * 18);
    CHECK(per_type == std::map<int, int>{{0, 100}, {1, 100}, {2, 100}});
    CHECK(test_per_type == std::map<std::string, int>{{"0", 20}, {"1", 20}, {"2", 20}});

    CHECK_NOTHROW(m.validate(dir.path()));
    const auto reloaded = load_manifest(dir.path());
    CHECK(reloaded.to_json() == m.to_json());

    const auto train = load_split(m, dir.path(), "train");
    const auto test = load_split(m, dir.path(), "test");
    CHECK(train.size() == 240);
    CHECK(test.size() == 60);
    for (const auto& s : test) CHECK(s.paired());

    // Same seed, same bytes.
    testing::TempDir again("dataset_again");
    const auto m2 = build_dataset(c, again.path());
    CHECK(read_text_file(again.path() / "manifest.json") == read_text_file(dir.path() / "manifest.json"));
    CHECK(read_text_file(again.path() / m2.entries[7].path) == read_text_file(dir.path() / m.entries[7].path));
}

TEST_CASE("clean paired dataset and config errors")
{
    testing::TempDir dir("dataset_clean");
    DatasetConfig c;
    c.counts = {10, 0, 10};
    c.unpaired_fraction = 0.0;
    const auto m = build_dataset(c, dir.path());
    for (const auto& e : m.entries) {
        CHECK(e.quality == Quality::clean);
        CHECK(e.pair_id.has_value());
        CHECK(e.defect_type != 1);
    }
    for (const auto& s : load_split(m, dir.path(), "train")) CHECK(in_range(s.source));

    DatasetConfig zero;
    zero.counts = {0, 0, 0};
    CHECK_THROWS_AS(build_dataset(zero, dir.path() / "zero"), ConfigError);
    DatasetConfig too_many;
    too_many.counts = {10};
    too_many.unpaired_fraction = 0.9;
    CHECK_THROWS_AS(build_dataset(too_many, dir.path() / "many"), ConfigError);
    DatasetConfig bad_fraction;
    bad_fraction.corruption_fraction = 1.5;
    CHECK_THROWS_AS(bad_fraction.validate(), ConfigError);
}

TEST_CASE("manifest validation catches missing files")
{
    testing::TempDir dir("dataset_missing");
    DatasetConfig c;
    c.counts = {5};
    c.unpaired_fraction = 0.0;
    const auto m = build_dataset(c, dir.path());
    std::filesystem::remove(dir.path() / m.entries.front().path);
    CHECK_THROWS_AS(m.validate(dir.path()), IoError);
}

TEST_CASE("png round trip is exact on quantized images")
{
    testing::TempDir dir("png");
    const auto p = synth_background_pair(1);
    const Image q = quantize(p.source.pixels);
    write_png(dir.path() / "a.png", p.source.pixels);
    CHECK(read_png(dir.path() / "a.png").data == q.data);
    CHECK(to_byte(1.0f) == 255);
    CHECK(to_byte(-1.0f) == 0);
    CHECK(from_byte(255) == 1.0f);
    CHECK(from_byte(0) == -1.0f);
}
