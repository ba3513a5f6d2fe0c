// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "unifix/archive.hpp"
#include "unifix/cli.hpp"
#include "unifix/evaluator.hpp"
#include "unifix/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <unistd.h>

using namespace unifix;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::filesystem::path scratch(const std::string& tag)
{
    const auto p = std::filesystem::temp_directory_path() / ("unifix_accept_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

double median3(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

// 1. Conditioning against loop oracles on 2x3x3 inputs.
Outcome attention_oracle()
{
    const auto t0 = Clock::now();
    Rng rng(2024);
    auto p = InjectionParams<double>::random(3, 2, rng);
    p.conv_bias = random_normal<double>(2, 1, 0.5, rng);
    p.embed_bias = random_normal<double>(2, 1, 0.5, rng);
    Tensor3<double> f(random_uniform<double>(2, 9, -1.0, 1.0, rng), 3, 3);
    const int label = 2;

    double worst = 0;
    double e[2];
    for (int c = 0; c < 2; ++c) e[c] = std::tanh(p.embed_weights(label, c) + p.embed_bias(c, 0));
    const auto emb = embed_label(label, p);
    for (int c = 0; c < 2; ++c) worst = std::max(worst, std::abs(emb(c) - e[c]));

    const auto b = spatial_broadcast(emb, 3, 3);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(b(c, i, j) - e[c]));

    const auto maps = compute_relevance(f, b, p);
    const auto out = inject_condition(f, label, p);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double spatial = 0;
            for (int o = 0; o < 2; ++o) {
                double pre = p.conv_bias(o, 0);
                for (int c = 0; c < 2; ++c) pre += p.conv_weights(o, c) * f(c, i, j) * e[c];
                const double r = std::tanh(pre);
                spatial += r;
                worst = std::max(worst, std::abs(maps.per_channel(o, i, j) - r));
            }
            worst = std::max(worst, std::abs(maps.spatial(0, i, j) - spatial));
            for (int c = 0; c < 2; ++c) worst = std::max(worst, std::abs(out(c, i, j) - f(c, i, j) * spatial));
        }
    }
    const auto att = apply_attention(f, maps.spatial);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                worst = std::max(worst, std::abs(att(c, i, j) - f(c, i, j) * maps.spatial(0, i, j)));

    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && secs < 1.0, "max deviation " + fmt("%.3g", worst) + ", " + fmt("%.4f", secs) + " s"};
}

// 2. Relativistic probabilities and losses.
Outcome relativistic_antisymmetry()
{
    Rng rng(7);
    double worst = 0;
    for (int k = 0; k < 1000; ++k) {
        const double a = normal(rng, 0.0, 5.0);
        const double b = normal(rng, 0.0, 5.0);
        worst = std::max(worst, std::abs(relativistic_prob(a, b) + relativistic_prob(b, a) - 1.0));
    }
    double loss_dev = 0;
    for (double s : {-3.0, 0.0, 0.7, 12.0}) {
        loss_dev = std::max(loss_dev, std::abs(adv_loss_discriminator(s, s) - std::log(2.0)));
        loss_dev = std::max(loss_dev, std::abs(adv_loss_generator(s, s) - std::log(2.0)));
    }
    return {worst <= 1e-6 && loss_dev <= 1e-9,
            "antisymmetry " + fmt("%.3g", worst) + ", ln2 deviation " + fmt("%.3g", loss_dev)};
}

// 3. Finite-difference check of both objectives on a tiny double model.
Outcome gradient_check()
{
    const auto t0 = Clock::now();
    GeneratorConfig g;
    g.input_channels = 1;
    g.base_channels = 1;
    g.n_downsamples = 0;
    g.n_res_blocks = 1;
    g.stem_kernel = 3;
    g.image_size = 8;
    CriticConfig d;
    d.input_channels = 1;
    d.base_channels = 1;
    d.n_layers = 1;
    d.image_size = 8;
    auto nets = Networks<double>::create(g, d, 5);
    for (auto& p : nets.critic_parameters()) *p.value *= 4.0;
    // total_loss is differentiated with respect to the generator pair while
    // the critics stay fixed; the critic objective is checked alongside.
    const std::size_t n_params = count_params(nets.generator_parameters());
    const std::size_t n_critic = count_params(nets.critic_parameters());

    Rng rng(6);
    auto img = [&] { return Tensor3<double>(random_uniform<double>(1, 64, -1.0, 1.0, rng), 8, 8); };
    const auto labels = LabelVocabulary{}.labels_for(0);
    StepBatch<double> batch;
    batch.paired.push_back({img(), img(), labels});
    batch.unpaired.push_back({img(), img(), labels});
    const TrainingConfig config;

    auto grads = nets.zeros_like();
    generator_objective(nets, batch, config, &grads);
    discriminator_objective(nets, batch, config, &grads);

    // Normwise relative error: biases ahead of instance norm have exactly zero
    // gradient, so an entrywise ratio there would only measure roundoff.
    auto check = [&](const ParamList<double>& params, const ParamList<double>& analytic,
                     const std::function<double()>& loss) {
        double diff = 0, norm_a = 0, norm_fd = 0;
        const double h = 1e-6;
        for (std::size_t k = 0; k < params.size(); ++k) {
            for (Eigen::Index i = 0; i < params[k].value->size(); ++i) {
                double& v = (*params[k].value)(i);
                const double saved = v;
                v = saved + h;
                const double up = loss();
                v = saved - h;
                const double down = loss();
                v = saved;
                const double fd = (up - down) / (2 * h);
                const double a = (*analytic[k].value)(i);
                diff += (a - fd) * (a - fd);
                norm_a += a * a;
                norm_fd += fd * fd;
            }
        }
        return std::sqrt(diff) / std::max({std::sqrt(norm_a), std::sqrt(norm_fd), 1e-12});
    };
    const double gen_err = check(nets.generator_parameters(), grads.generator_parameters(),
                                 [&] { return generator_objective<double>(nets, batch, config, nullptr).total; });
    const double crit_err = check(nets.critic_parameters(), grads.critic_parameters(), [&] {
        const auto [xy, yx] = discriminator_objective<double>(nets, batch, config, nullptr);
        return xy + yx;
    });
    const double secs = seconds_since(t0);
    const double worst = std::max(gen_err, crit_err);
    return {worst <= 1e-4 && n_params <= 200 && secs < 60.0,
            std::to_string(n_params) + " generator params (error " + fmt("%.3g", gen_err) + "), " +
                std::to_string(n_critic) + " critic params (error " + fmt("%.3g", crit_err) + "), " +
                fmt("%.2f", secs) + " s"};
}

// 4. FID closed forms.
Outcome fid_oracle()
{
    const Matrix<double> I = Matrix<double>::Identity(2, 2);
    Vector<double> zero = Vector<double>::Zero(2);
    Vector<double> b(2);
    b << 3, 4;
    const double same = fid_from_moments(b, I, b, I);
    const double shift = fid_from_moments(zero, I, b, I);
    const double scale = fid_from_moments(zero, 4.0 * I, zero, I);
    const bool ok = std::abs(same) <= 1e-8 && std::abs(shift - 25.0) <= 1e-8 && std::abs(scale - 2.0) <= 1e-8;
    return {ok, "identical " + fmt("%.3g", same) + ", shifted " + fmt("%.12g", shift) + ", scaled " +
                    fmt("%.12g", scale)};
}

// 5. Zero-weighted terms against removed terms, bitwise.
Outcome loss_routing()
{
    const auto model = ModelConfig{};
    const LabelVocabulary vocab;
    const auto gen = make_generator_config(model, 32, vocab, AblationFlags{});
    const auto crit = make_critic_config(model, 32);
    Rng rng(12);
    auto img = [&] { return Tensor3<float>(random_uniform<float>(3, 1024, -1.0, 1.0, rng), 32, 32); };
    std::vector<StepBatch<float>> batches;
    for (int k = 0; k < 3; ++k) {
        const auto labels = vocab.labels_for(k % 2);
        StepBatch<float> b;
        b.paired.push_back({img(), img(), labels});
        b.unpaired.push_back({img(), img(), labels});
        batches.push_back(b);
    }
    auto run = [&](const TrainingConfig& c) {
        auto s = TrainState<float>::create(gen, crit, 77);
        for (const auto& b : batches) train_step(b, s, c, 2e-4);
        return s;
    };
    auto identical = [](TrainState<float>& a, TrainState<float>& b) {
        auto pa = a.nets.generator_parameters();
        auto pb = b.nets.generator_parameters();
        auto ca = a.nets.critic_parameters();
        auto cb = b.nets.critic_parameters();
        pa.insert(pa.end(), ca.begin(), ca.end());
        pb.insert(pb.end(), cb.begin(), cb.end());
        for (std::size_t i = 0; i < pa.size(); ++i)
            if (!(*pa[i].value == *pb[i].value)) return false;
        return true;
    };

    TrainingConfig l1_zero;
    l1_zero.weights.lambda2 = 0;
    TrainingConfig l1_removed;
    l1_removed.terms.l1 = false;
    auto a = run(l1_zero);
    auto b = run(l1_removed);
    const bool l1_ok = identical(a, b);

    TrainingConfig cyc_zero;
    cyc_zero.weights.lambda3 = 0;
    cyc_zero.weights.lambda4 = 0;
    TrainingConfig cyc_removed;
    cyc_removed.terms.cycle = false;
    cyc_removed.terms.identity = false;
    auto c = run(cyc_zero);
    auto d = run(cyc_removed);
    const bool cyc_ok = identical(c, d);

    auto full = run(TrainingConfig{});
    const bool sensitive = !identical(full, d);
    return {l1_ok && cyc_ok && sensitive, std::string("lambda2=0 ") + (l1_ok ? "identical" : "differs") +
                                              ", lambda3=lambda4=0 " + (cyc_ok ? "identical" : "differs") +
                                              ", nonzero weights " + (sensitive ? "differ" : "identical")};
}

// 6. Learning-rate schedule.
Outcome schedule()
{
    const TrainingConfig defaults;
    TrainingConfig c;
    c.epochs = 300;
    c.fixed_lr_epochs = 150;
    double dev = 0;
    for (int e = 0; e <= c.epochs; ++e) {
        const double want = e < 150 ? 2e-4 : 2e-4 * (300.0 - e) / 150.0;
        dev = std::max(dev, std::abs(lr_at(e, c) - want));
    }
    const bool ok = lr_at(0, defaults) == 2e-4 && lr_at(0, c) == 2e-4 && lr_at(300, c) == 0.0 && dev <= 1e-12 &&
                    lr_at(defaults.epochs, defaults) == 0.0;
    return {ok, "lr(0) " + fmt("%.6g", lr_at(0, c)) + ", lr(final) " + fmt("%.3g", lr_at(300, c)) +
                    ", max deviation " + fmt("%.3g", dev)};
}

TrainingConfig toy_training(int epochs, std::uint64_t seed)
{
    TrainingConfig t;
    t.epochs = epochs;
    t.fixed_lr_epochs = epochs / 2;
    t.checkpoint_every = 0;
    t.seed = seed;
    return t;
}

// 7. Toy convergence on the background task.
Outcome toy_convergence()
{
    const auto t0 = Clock::now();
    const auto dir = scratch("convergence");
    DatasetConfig dc;
    dc.counts = {300};
    dc.unpaired_fraction = 0.0;
    dc.seed = 1;
    const auto manifest = build_dataset(dc, dir / "data");
    const ModelConfig model;
    const auto config = toy_training(20, 1);
    const FeatureExtractor ex(ExtractorConfig{32, 1234});

    const auto init = TrainState<float>::create(
        make_generator_config(model, manifest.image_size, manifest.vocabulary, config.ablation),
        make_critic_config(model, manifest.image_size), config.seed);
    const auto before = evaluate(init.nets.g_xy, manifest, dir / "data", ex).tasks.at(0);

    FitOptions options;
    options.output_dir = dir / "train";
    const auto result = fit(config, model, manifest, dir / "data", options);
    const auto after = evaluate(result.state.nets.g_xy, manifest, dir / "data", ex).tasks.at(0);
    std::filesystem::remove_all(dir);

    const double secs = seconds_since(t0);
    const bool ok = after.mae <= 0.5 * before.mae && after.fid < before.fid && secs <= 1800.0;
    return {ok, "MAE " + fmt("%.4f", before.mae) + " -> " + fmt("%.4f", after.mae) + ", FID " +
                    fmt("%.3f", before.fid) + " -> " + fmt("%.3f", after.fid) + ", " + fmt("%.0f", secs) + " s"};
}

ModelConfig small_model()
{
    ModelConfig m;
    m.base_channels = 8;
    m.n_res_blocks = 2;
    m.critic_base_channels = 8;
    return m;
}

// 8. Semi-paired against paired-only training under corrupted pairs.
Outcome semi_paired_robustness()
{
    const auto t0 = Clock::now();
    std::vector<double> semi, paired;
    for (std::uint64_t seed : {11, 12, 13}) {
        const auto dir = scratch("robust" + std::to_string(seed));
        DatasetConfig dc;
        dc.counts = {300};
        dc.corruption_fraction = 0.3;
        dc.unpaired_fraction = 0.3;
        dc.seed = seed;
        const auto manifest = build_dataset(dc, dir / "data");
        const FeatureExtractor ex(ExtractorConfig{32, 1234});

        auto semi_config = toy_training(10, seed);
        auto paired_config = semi_config;
        paired_config.weights.lambda3 = 0;
        paired_config.weights.lambda4 = 0;
        paired_config.ablation.use_unpaired = false;
        for (auto* c : {&semi_config, &paired_config}) {
            FitOptions options;
            options.output_dir = dir / (c == &semi_config ? "semi" : "paired");
            const auto r = fit(*c, small_model(), manifest, dir / "data", options);
            const double mae = evaluate(r.state.nets.g_xy, manifest, dir / "data", ex).tasks.at(0).mae;
            (c == &semi_config ? semi : paired).push_back(mae);
        }
        std::filesystem::remove_all(dir);
    }
    const double ms = median3(semi);
    const double mp = median3(paired);
    std::ostringstream detail;
    detail << "median clean-target MAE semi-paired " << fmt("%.4f", ms) << " vs paired-only " << fmt("%.4f", mp)
           << " (seeds:";
    for (std::size_t i = 0; i < semi.size(); ++i) detail << " " << fmt("%.4f", semi[i]) << "/" << fmt("%.4f", paired[i]);
    detail << "), " << fmt("%.0f", seconds_since(t0)) << " s";
    return {ms < mp, detail.str()};
}

// 9. Full conditioning against no labels on the three-type mixture.
Outcome conditioning_ablation()
{
    const auto t0 = Clock::now();
    std::vector<std::vector<double>> full(3), bare(3);
    for (std::uint64_t seed : {21, 22, 23}) {
        const auto dir = scratch("ablation" + std::to_string(seed));
        DatasetConfig dc;
        dc.counts = {150, 150, 150};
        dc.seed = seed;
        const auto manifest = build_dataset(dc, dir / "data");
        const FeatureExtractor ex(ExtractorConfig{16, 1234});
        for (bool labels : {true, false}) {
            auto config = toy_training(10, seed);
            config.ablation.use_group_label = labels;
            config.ablation.use_type_label = labels;
            FitOptions options;
            options.output_dir = dir / (labels ? "full" : "bare");
            const auto r = fit(config, small_model(), manifest, dir / "data", options);
            const auto report = evaluate(r.state.nets.g_xy, manifest, dir / "data", ex);
            for (const auto& t : report.tasks) (labels ? full : bare)[static_cast<std::size_t>(t.defect_type)].push_back(t.fid);
        }
        std::filesystem::remove_all(dir);
    }
    int wins = 0;
    std::ostringstream detail;
    detail << "median FID full vs w/o g,eta:";
    for (std::size_t t = 0; t < 3; ++t) {
        const double f = median3(full[t]);
        const double b = median3(bare[t]);
        if (f < b) ++wins;
        detail << " type " << t << " " << fmt("%.3f", f) << "/" << fmt("%.3f", b) << ";";
    }
    detail << " full better on " << wins << " of 3, " << fmt("%.0f", seconds_since(t0)) << " s";
    return {wins >= 2, detail.str()};
}

// 10. synth -> train -> eval twice, compared byte for byte.
Outcome end_to_end_determinism()
{
    const auto dir = scratch("determinism");
    std::vector<std::filesystem::path> runs{dir / "a", dir / "b"};
    for (const auto& run_dir : runs) {
        RunConfig c;
        c.run_dir = run_dir;
        c.seed = 31;
        c.data.counts = {20, 20, 20};
        c.model = small_model();
        c.train.epochs = 2;
        c.train.fixed_lr_epochs = 1;
        c.train.checkpoint_every = 1;
        c.eval.feature_dim = 3;
        c.resolve();
        std::ostringstream log;
        for (auto cmd : {Command::synth, Command::train, Command::eval}) dispatch(cmd, c, log);
    }
    const std::vector<std::string> files{"data/manifest.json", "train/metrics.jsonl", "eval/report.json",
                                         "eval/report.txt", "train/checkpoints/final/g_xy.bin"};
    std::string differing;
    for (const auto& f : files)
        if (read_text_file(runs[0] / f) != read_text_file(runs[1] / f)) differing += " " + f;
    std::filesystem::remove_all(dir);
    return {differing.empty(), differing.empty() ? "manifest, metrics, reports and weights identical"
                                                 : "differing:" + differing};
}

} // namespace

int main(int argc, char** argv)
{
    // Optional arguments pick criteria by number; no arguments runs them all.
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"attention oracle", attention_oracle},
        {"relativistic antisymmetry", relativistic_antisymmetry},
        {"gradient check", gradient_check},
        {"FID oracle", fid_oracle},
        {"loss routing", loss_routing},
        {"learning-rate schedule", schedule},
        {"toy convergence", toy_convergence},
        {"semi-paired robustness", semi_paired_robustness},
        {"conditioning ablation", conditioning_ablation},
        {"end-to-end determinism", end_to_end_determinism},
    };
    int failures = 0;
    int ran = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && std::find(only.begin(), only.end(), static_cast<int>(i + 1)) == only.end()) continue;
        ++ran;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << "criterion " << (i + 1) << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL")
                  << " - " << o.detail << std::endl;
    }
    std::cout << (ran - failures) << "/" << ran << " criteria passed"
              << std::endl;
    return failures == 0 ? 0 : 1;
}
