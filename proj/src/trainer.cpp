#include "unifix/trainer.hpp"

#include "unifix/archive.hpp"
#include "unifix/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace unifix {

void TrainingConfig::validate() const
{
    if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
    if (fixed_lr_epochs < 0 || fixed_lr_epochs > epochs)
        throw ConfigError("train: fixed_lr_epochs must lie in [0, epochs]");
    if (!(initial_lr > 0) || !std::isfinite(initial_lr)) throw ConfigError("train: initial_lr must be positive");
    if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
    if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be nonnegative");
    if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) || !(adam.eps > 0))
        throw ConfigError("train: Adam betas must lie in [0, 1) and eps must be positive");
    weights.validate();
}

bool TrainingConfig::unpaired_losses_apply(int defect_type) const
{
    return ablation.use_unpaired &&
           std::find(unpaired_loss_types.begin(), unpaired_loss_types.end(), defect_type) != unpaired_loss_types.end();
}

double lr_at(int epoch, const TrainingConfig& config)
{
    if (epoch < 0 || epoch > config.epochs)
        throw ConfigError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(config.epochs) + "]");
    if (epoch < config.fixed_lr_epochs) return config.initial_lr;
    const double span = config.epochs - config.fixed_lr_epochs;
    if (span <= 0) return 0.0;
    return config.initial_lr * static_cast<double>(config.epochs - epoch) / span;
}

GeneratorConfig make_generator_config(const ModelConfig& model, int image_size, const LabelVocabulary& vocab,
                                      const AblationFlags& ablation)
{
    GeneratorConfig g;
    g.base_channels = model.base_channels;
    g.n_downsamples = model.n_downsamples;
    g.n_res_blocks = model.n_res_blocks;
    g.stem_kernel = model.stem_kernel;
    g.image_size = image_size;
    g.n_groups = vocab.n_groups();
    g.n_types = vocab.n_types();
    g.use_group_label = ablation.use_group_label;
    g.use_type_label = ablation.use_type_label;
    g.rescale_relevance = model.rescale_relevance;
    g.validate();
    return g;
}

CriticConfig make_critic_config(const ModelConfig& model, int image_size)
{
    CriticConfig c;
    c.base_channels = model.critic_base_channels;
    c.n_layers = model.critic_layers;
    c.image_size = image_size;
    c.validate();
    return c;
}

template <typename Scalar>
Networks<Scalar> Networks<Scalar>::create(const GeneratorConfig& gen, const CriticConfig& crit, std::uint64_t seed)
{
    return Networks{Generator<Scalar>::create(gen, derive_seed(seed, hash_name("g_xy"))),
                    Generator<Scalar>::create(gen, derive_seed(seed, hash_name("g_yx"))),
                    Critic<Scalar>::create(crit, derive_seed(seed, hash_name("d_x"))),
                    Critic<Scalar>::create(crit, derive_seed(seed, hash_name("d_y")))};
}

template <typename Scalar>
Networks<Scalar> Networks<Scalar>::zeros_like() const
{
    return Networks{g_xy.zeros_like(), g_yx.zeros_like(), d_x.zeros_like(), d_y.zeros_like()};
}

template <typename Scalar>
ParamList<Scalar> Networks<Scalar>::generator_parameters()
{
    ParamList<Scalar> out;
    for (auto& p : g_xy.parameters()) out.push_back({"g_xy." + p.name, p.value});
    for (auto& p : g_yx.parameters()) out.push_back({"g_yx." + p.name, p.value});
    return out;
}

template <typename Scalar>
ParamList<Scalar> Networks<Scalar>::critic_parameters()
{
    ParamList<Scalar> out;
    for (auto& p : d_x.parameters()) out.push_back({"d_x." + p.name, p.value});
    for (auto& p : d_y.parameters()) out.push_back({"d_y." + p.name, p.value});
    return out;
}

namespace {

template <typename Scalar>
std::size_t adversarial_count(const StepBatch<Scalar>& batch, const TrainingConfig& config)
{
    return batch.paired.size() + (config.ablation.use_unpaired ? batch.unpaired.size() : 0);
}

/// Generator-side relativistic term for one fake image; accumulates the
/// gradient with respect to the fake into `dfake`.
template <typename Scalar>
double generator_adversarial(const Critic<Scalar>& critic_net, const Tensor3<Scalar>& fake, const Tensor3<Scalar>& real,
                             double grad_scale, Tensor3<Scalar>* dfake)
{
    CriticTrace<Scalar> trace;
    const double c_fake = critic_forward<Scalar>(critic_net, fake, dfake ? &trace : nullptr).score;
    const double c_real = critic(critic_net, real).score;
    if (dfake) {
        const double dz = grad_scale * neg_log_sigmoid_grad(c_fake - c_real);
        dfake->data += critic_backward<Scalar>(critic_net, trace, static_cast<Scalar>(dz), nullptr, true).data;
    }
    return adv_loss_generator(c_fake, c_real);
}

/// Critic-side term on a detached fake; parameter gradients go into `grad`.
template <typename Scalar>
double critic_adversarial(const Critic<Scalar>& critic_net, const Tensor3<Scalar>& real, const Tensor3<Scalar>& fake,
                          double grad_scale, Critic<Scalar>* grad)
{
    CriticTrace<Scalar> real_trace;
    CriticTrace<Scalar> fake_trace;
    const double c_real = critic_forward<Scalar>(critic_net, real, grad ? &real_trace : nullptr).score;
    const double c_fake = critic_forward<Scalar>(critic_net, fake, grad ? &fake_trace : nullptr).score;
    if (grad) {
        const auto dz = static_cast<Scalar>(grad_scale * neg_log_sigmoid_grad(c_real - c_fake));
        critic_backward(critic_net, real_trace, dz, grad, false);
        critic_backward(critic_net, fake_trace, static_cast<Scalar>(-dz), grad, false);
    }
    return adv_loss_discriminator(c_real, c_fake);
}

template <typename Scalar>
Tensor3<Scalar> zeros_like(const Tensor3<Scalar>& t)
{
    return Tensor3<Scalar>::zeros(t.channels(), t.height, t.width);
}

template <typename Scalar>
GeneratorTrace<Scalar>* maybe(GeneratorTrace<Scalar>& trace, bool want)
{
    return want ? &trace : nullptr;
}

} // namespace

template <typename Scalar>
LossBreakdown generator_objective(const Networks<Scalar>& nets, const StepBatch<Scalar>& batch,
                                  const TrainingConfig& config, Networks<Scalar>* grads)
{
    const auto& w = config.weights;
    const auto& terms = config.terms;
    const bool want = grads != nullptr;
    LossBreakdown out;

    const std::size_t n_adv = adversarial_count(batch, config);
    const double adv_scale = n_adv ? 1.0 / static_cast<double>(n_adv) : 0.0;
    const double l1_scale = batch.paired.empty() ? 0.0 : 1.0 / static_cast<double>(batch.paired.size());

    for (const auto& p : batch.paired) {
        GeneratorTrace<Scalar> t_xy;
        GeneratorTrace<Scalar> t_yx;
        const auto y_fake = generator_forward<Scalar>(nets.g_xy, p.x, p.labels, maybe(t_xy, want));
        const auto x_fake = generator_forward<Scalar>(nets.g_yx, p.y, p.labels, maybe(t_yx, want));
        auto dy = zeros_like(y_fake);
        auto dx = zeros_like(x_fake);
        if (terms.adversarial) {
            out.adv_xy += adv_scale * generator_adversarial(nets.d_y, y_fake, p.y, w.lambda1 * adv_scale, want ? &dy : nullptr);
            out.adv_yx += adv_scale * generator_adversarial(nets.d_x, x_fake, p.x, w.lambda1 * adv_scale, want ? &dx : nullptr);
        }
        if (terms.l1) {
            out.l1 += l1_scale * l1_reconstruction(y_fake, p.y, x_fake, p.x);
            if (want) {
                dy.data += mean_abs_error_grad(y_fake, p.y, w.lambda2 * l1_scale).data;
                dx.data += mean_abs_error_grad(x_fake, p.x, w.lambda2 * l1_scale).data;
            }
        }
        if (want) {
            generator_backward(nets.g_xy, t_xy, dy, &grads->g_xy, false);
            generator_backward(nets.g_yx, t_yx, dx, &grads->g_yx, false);
        }
    }

    if (config.ablation.use_unpaired) {
        std::size_t n_eligible = 0;
        for (const auto& u : batch.unpaired)
            if (config.unpaired_losses_apply(u.labels.defect_type)) ++n_eligible;
        const double u_scale = n_eligible ? 1.0 / static_cast<double>(n_eligible) : 0.0;

        for (const auto& u : batch.unpaired) {
            const bool eligible = config.unpaired_losses_apply(u.labels.defect_type);
            GeneratorTrace<Scalar> t_xy;
            GeneratorTrace<Scalar> t_yx;
            const auto y_fake = generator_forward<Scalar>(nets.g_xy, u.x, u.labels, maybe(t_xy, want));
            const auto x_fake = generator_forward<Scalar>(nets.g_yx, u.y, u.labels, maybe(t_yx, want));
            auto dy = zeros_like(y_fake);
            auto dx = zeros_like(x_fake);
            if (terms.adversarial) {
                out.adv_xy += adv_scale * generator_adversarial(nets.d_y, y_fake, u.y, w.lambda1 * adv_scale, want ? &dy : nullptr);
                out.adv_yx += adv_scale * generator_adversarial(nets.d_x, x_fake, u.x, w.lambda1 * adv_scale, want ? &dx : nullptr);
            }
            if (eligible && terms.cycle) {
                // x -> G_XY -> G_YX and y -> G_YX -> G_XY; gradients run through
                // the second generator back into the first one's output.
                GeneratorTrace<Scalar> t_x_back;
                GeneratorTrace<Scalar> t_y_back;
                const auto x_cycled = generator_forward<Scalar>(nets.g_yx, y_fake, u.labels, maybe(t_x_back, want));
                const auto y_cycled = generator_forward<Scalar>(nets.g_xy, x_fake, u.labels, maybe(t_y_back, want));
                out.cycle += u_scale * cycle_loss(u.x, x_cycled, u.y, y_cycled);
                if (want) {
                    const double s = w.lambda3 * u_scale;
                    dy.data += generator_backward(nets.g_yx, t_x_back, mean_abs_error_grad(x_cycled, u.x, s), &grads->g_yx, true).data;
                    dx.data += generator_backward(nets.g_xy, t_y_back, mean_abs_error_grad(y_cycled, u.y, s), &grads->g_xy, true).data;
                }
            }
            if (eligible && terms.identity) {
                GeneratorTrace<Scalar> t_id_x;
                GeneratorTrace<Scalar> t_id_y;
                const auto x_same = generator_forward<Scalar>(nets.g_yx, u.x, u.labels, maybe(t_id_x, want));
                const auto y_same = generator_forward<Scalar>(nets.g_xy, u.y, u.labels, maybe(t_id_y, want));
                out.identity += u_scale * identity_loss(x_same, u.x, y_same, u.y);
                if (want) {
                    const double s = w.lambda4 * u_scale;
                    generator_backward(nets.g_yx, t_id_x, mean_abs_error_grad(x_same, u.x, s), &grads->g_yx, false);
                    generator_backward(nets.g_xy, t_id_y, mean_abs_error_grad(y_same, u.y, s), &grads->g_xy, false);
                }
            }
            if (want) {
                generator_backward(nets.g_xy, t_xy, dy, &grads->g_xy, false);
                generator_backward(nets.g_yx, t_yx, dx, &grads->g_yx, false);
            }
        }
    }
    return total_loss(out, w);
}

template <typename Scalar>
std::pair<double, double> discriminator_objective(const Networks<Scalar>& nets, const StepBatch<Scalar>& batch,
                                                  const TrainingConfig& config, Networks<Scalar>* grads)
{
    const std::size_t n_adv = adversarial_count(batch, config);
    const double scale = n_adv ? 1.0 / static_cast<double>(n_adv) : 0.0;
    double xy = 0;
    double yx = 0;
    auto accumulate = [&](const Tensor3<Scalar>& x, const Tensor3<Scalar>& y, const ConditionLabels& labels) {
        const auto y_fake = generate(nets.g_xy, x, labels);
        const auto x_fake = generate(nets.g_yx, y, labels);
        xy += scale * critic_adversarial(nets.d_y, y, y_fake, scale, grads ? &grads->d_y : nullptr);
        yx += scale * critic_adversarial(nets.d_x, x, x_fake, scale, grads ? &grads->d_x : nullptr);
    };
    for (const auto& p : batch.paired) accumulate(p.x, p.y, p.labels);
    if (config.ablation.use_unpaired)
        for (const auto& u : batch.unpaired) accumulate(u.x, u.y, u.labels);
    return {xy, yx};
}

template <typename Scalar>
TrainState<Scalar> TrainState<Scalar>::create(const GeneratorConfig& gen, const CriticConfig& crit, std::uint64_t seed)
{
    TrainState s;
    s.nets = Networks<Scalar>::create(gen, crit, seed);
    s.opt_g = AdamState<Scalar>::for_params(s.nets.generator_parameters());
    s.opt_d = AdamState<Scalar>::for_params(s.nets.critic_parameters());
    return s;
}

namespace {

[[noreturn]] void diverged(std::int64_t step, const std::string& what)
{
    throw TrainingDivergedError("training diverged at step " + std::to_string(step) + ": " + what);
}

bool finite(const LossBreakdown& l)
{
    return std::isfinite(l.adv_xy) && std::isfinite(l.adv_yx) && std::isfinite(l.l1) && std::isfinite(l.cycle) &&
           std::isfinite(l.identity) && std::isfinite(l.total);
}

} // namespace

template <typename Scalar>
StepMetrics train_step(const StepBatch<Scalar>& batch, TrainState<Scalar>& state, const TrainingConfig& config,
                       double lr)
{
    if (batch.paired.empty() && batch.unpaired.empty()) throw InvalidStateError("train_step: empty batch");
    const int type = batch.paired.empty() ? batch.unpaired.front().labels.defect_type
                                          : batch.paired.front().labels.defect_type;
    for (const auto& p : batch.paired)
        if (p.labels.defect_type != type) throw InvalidLabelError("train_step: mixed defect types in one batch");
    for (const auto& u : batch.unpaired)
        if (u.labels.defect_type != type) throw InvalidLabelError("train_step: mixed defect types in one batch");

    StepMetrics m;
    {
        auto grads = state.nets.zeros_like();
        std::tie(m.disc_xy, m.disc_yx) = discriminator_objective(state.nets, batch, config, &grads);
        if (!std::isfinite(m.disc_xy) || !std::isfinite(m.disc_yx)) diverged(state.step, "non-finite critic loss");
        state.opt_d.update(state.nets.critic_parameters(), grads.critic_parameters(), lr, config.adam);
    }
    {
        auto grads = state.nets.zeros_like();
        m.losses = generator_objective(state.nets, batch, config, &grads);
        if (!finite(m.losses)) diverged(state.step, "non-finite generator loss");
        state.opt_g.update(state.nets.generator_parameters(), grads.generator_parameters(), lr, config.adam);
    }
    if (!all_finite(state.nets.generator_parameters()) || !all_finite(state.nets.critic_parameters()))
        diverged(state.step, "non-finite parameters");
    ++state.step;
    return m;
}

TrainingData TrainingData::from_samples(const std::vector<Sample>& samples)
{
    std::map<int, Task> by_type;
    for (const auto& s : samples) {
        Task& t = by_type[s.labels.defect_type];
        t.labels = s.labels;
        if (s.paired()) {
            t.pairs.emplace_back(s.source, *s.target);
            t.targets.push_back(*s.target);
        } else {
            t.unpaired_sources.push_back(s.source);
        }
    }
    TrainingData data;
    for (auto& [type, task] : by_type)
        if (!task.pairs.empty()) data.tasks.push_back(std::move(task));
    return data;
}

std::size_t TrainingData::total_pairs() const
{
    std::size_t n = 0;
    for (const auto& t : tasks) n += t.pairs.size();
    return n;
}

std::vector<StepBatch<float>> plan_epoch(const TrainingData& data, const TrainingConfig& config, int epoch)
{
    std::vector<StepBatch<float>> steps;
    if (data.tasks.empty()) return steps;
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    const std::size_t n_steps = (data.total_pairs() + batch - 1) / batch;
    const std::uint64_t e = static_cast<std::uint64_t>(epoch);

    std::vector<std::vector<int>> order;
    std::vector<std::size_t> cursor(data.tasks.size(), 0);
    for (std::size_t t = 0; t < data.tasks.size(); ++t)
        order.push_back(seeded_permutation(static_cast<int>(data.tasks[t].pairs.size()),
                                           derive_seed(config.seed, e, t, hash_name("order"))));

    steps.reserve(n_steps);
    for (std::size_t s = 0; s < n_steps; ++s) {
        const std::size_t t = s % data.tasks.size();
        const auto& task = data.tasks[t];
        StepBatch<float> b;
        for (std::size_t k = 0; k < batch; ++k) {
            const auto& pair = task.pairs[static_cast<std::size_t>(order[t][cursor[t]++ % order[t].size()])];
            b.paired.push_back({pair.first, pair.second, task.labels});
        }
        if (config.ablation.use_unpaired && !task.unpaired_sources.empty() && !task.targets.empty()) {
            Rng rng(derive_seed(config.seed, e, s, hash_name("unpaired")));
            for (std::size_t k = 0; k < batch; ++k) {
                const auto& x = task.unpaired_sources[static_cast<std::size_t>(
                    uniform_int(rng, 0, static_cast<int>(task.unpaired_sources.size()) - 1))];
                const auto& y = task.targets[static_cast<std::size_t>(
                    uniform_int(rng, 0, static_cast<int>(task.targets.size()) - 1))];
                b.unpaired.push_back({x, y, task.labels});
            }
        }
        steps.push_back(std::move(b));
    }
    return steps;
}

std::string metrics_json_line(const EpochRecord<float>& r)
{
    ojson j;
    j["epoch"] = r.epoch;
    j["lr"] = r.lr;
    j["adv_xy"] = r.mean.losses.adv_xy;
    j["adv_yx"] = r.mean.losses.adv_yx;
    j["l1"] = r.mean.losses.l1;
    j["cycle"] = r.mean.losses.cycle;
    j["identity"] = r.mean.losses.identity;
    j["total"] = r.mean.losses.total;
    j["disc_xy"] = r.mean.disc_xy;
    j["disc_yx"] = r.mean.disc_yx;
    return j.dump();
}

namespace {

EpochRecord<float> record_from_json(const ojson& j)
{
    EpochRecord<float> r;
    r.epoch = j.at("epoch").get<int>();
    r.lr = j.at("lr").get<double>();
    r.mean.losses.adv_xy = j.at("adv_xy").get<double>();
    r.mean.losses.adv_yx = j.at("adv_yx").get<double>();
    r.mean.losses.l1 = j.at("l1").get<double>();
    r.mean.losses.cycle = j.at("cycle").get<double>();
    r.mean.losses.identity = j.at("identity").get<double>();
    r.mean.losses.total = j.at("total").get<double>();
    r.mean.disc_xy = j.at("disc_xy").get<double>();
    r.mean.disc_yx = j.at("disc_yx").get<double>();
    return r;
}

void write_network_sidecar(const std::filesystem::path& path, const char* kind, ojson config,
                           const LabelVocabulary& vocab, const AblationFlags& ablation)
{
    ojson j;
    j["kind"] = kind;
    j["config"] = std::move(config);
    j["vocabulary"] = to_json(vocab);
    j["ablation"] = to_json(ablation);
    write_text_file(path, j.dump(2) + "\n");
}

ojson read_json(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw IoError("no checkpoint: missing " + path.string());
    try {
        return ojson::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt checkpoint file " + path.string() + ": " + e.what());
    }
}

std::string epoch_dir_name(int epoch)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04d", epoch);
    return buf;
}

} // namespace

void save_checkpoint(const std::filesystem::path& dir, TrainState<float>& state, const TrainingConfig& config,
                     const ModelConfig& model, const LabelVocabulary& vocab, int image_size)
{
    std::filesystem::create_directories(dir);
    auto& n = state.nets;
    save_params(dir / "g_xy.bin", n.g_xy.parameters());
    save_params(dir / "g_yx.bin", n.g_yx.parameters());
    save_params(dir / "d_x.bin", n.d_x.parameters());
    save_params(dir / "d_y.bin", n.d_y.parameters());
    write_network_sidecar(dir / "g_xy.json", "generator", to_json(n.g_xy.config), vocab, config.ablation);
    write_network_sidecar(dir / "g_yx.json", "generator", to_json(n.g_yx.config), vocab, config.ablation);
    write_network_sidecar(dir / "d_x.json", "critic", to_json(n.d_x.config), vocab, config.ablation);
    write_network_sidecar(dir / "d_y.json", "critic", to_json(n.d_y.config), vocab, config.ablation);
    save_params(dir / "optimizer_g.bin", state.opt_g.moments(n.generator_parameters()));
    save_params(dir / "optimizer_d.bin", state.opt_d.moments(n.critic_parameters()));

    ojson s;
    s["epoch"] = state.epoch;
    s["step"] = state.step;
    s["opt_g_step"] = state.opt_g.step;
    s["opt_d_step"] = state.opt_d.step;
    s["seed"] = config.seed;
    s["image_size"] = image_size;
    s["training"] = to_json(config);
    s["model"] = to_json(model);
    ojson history = ojson::array();
    for (const auto& r : state.history) history.push_back(ojson::parse(metrics_json_line(r)));
    s["history"] = std::move(history);
    write_text_file(dir / "state.json", s.dump(2) + "\n");
}

Generator<float> load_generator(const std::filesystem::path& dir, const std::string& name)
{
    const ojson side = read_json(dir / (name + ".json"));
    if (side.value("kind", "") != "generator") throw IoError(name + ".json does not describe a generator");
    auto gen = Generator<float>::create(generator_config_from_json(side.at("config"), name + ".config"), 0);
    load_params(dir / (name + ".bin"), gen.parameters());
    return gen;
}

namespace {

Critic<float> load_critic(const std::filesystem::path& dir, const std::string& name)
{
    const ojson side = read_json(dir / (name + ".json"));
    if (side.value("kind", "") != "critic") throw IoError(name + ".json does not describe a critic");
    auto net = Critic<float>::create(critic_config_from_json(side.at("config"), name + ".config"), 0);
    load_params(dir / (name + ".bin"), net.parameters());
    return net;
}

} // namespace

TrainState<float> load_checkpoint(const std::filesystem::path& dir)
{
    const ojson s = read_json(dir / "state.json");
    TrainState<float> state;
    state.nets = Networks<float>{load_generator(dir, "g_xy"), load_generator(dir, "g_yx"), load_critic(dir, "d_x"),
                                 load_critic(dir, "d_y")};
    state.opt_g = AdamState<float>::for_params(state.nets.generator_parameters());
    state.opt_d = AdamState<float>::for_params(state.nets.critic_parameters());
    load_params(dir / "optimizer_g.bin", state.opt_g.moments(state.nets.generator_parameters()));
    load_params(dir / "optimizer_d.bin", state.opt_d.moments(state.nets.critic_parameters()));
    try {
        state.epoch = s.at("epoch").get<int>();
        state.step = s.at("step").get<std::int64_t>();
        state.opt_g.step = s.at("opt_g_step").get<std::int64_t>();
        state.opt_d.step = s.at("opt_d_step").get<std::int64_t>();
        for (const auto& r : s.at("history")) state.history.push_back(record_from_json(r));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt state.json in " + dir.string() + ": " + e.what());
    }
    return state;
}

FitResult fit(const TrainingConfig& config, const ModelConfig& model, const DatasetManifest& manifest,
              const std::filesystem::path& dataset_root, const FitOptions& options)
{
    config.validate();
    const TrainingData data = TrainingData::from_samples(load_split(manifest, dataset_root, "train"));
    if (data.tasks.empty()) throw InsufficientSamplesError("fit: training split has no paired samples");

    const auto gen_config = make_generator_config(model, manifest.image_size, manifest.vocabulary, config.ablation);
    const auto crit_config = make_critic_config(model, manifest.image_size);

    FitResult result;
    TrainState<float>& state = result.state;
    if (options.resume_from) {
        state = load_checkpoint(*options.resume_from);
        if (state.nets.g_xy.config.use_group_label != gen_config.use_group_label ||
            state.nets.g_xy.config.use_type_label != gen_config.use_type_label ||
            state.nets.g_xy.config.base_channels != gen_config.base_channels)
            throw ConfigError("fit: checkpoint " + options.resume_from->string() + " does not match the model config");
        if (state.epoch > config.epochs) throw ConfigError("fit: checkpoint is past the configured epoch count");
    } else {
        state = TrainState<float>::create(gen_config, crit_config, config.seed);
    }

    const auto checkpoints = options.output_dir / "checkpoints";
    std::filesystem::create_directories(options.output_dir);
    for (int epoch = state.epoch; epoch < config.epochs; ++epoch) {
        const double lr = lr_at(epoch, config);
        const auto batches = plan_epoch(data, config, epoch);
        EpochRecord<float> record;
        record.epoch = epoch;
        record.lr = lr;
        for (const auto& b : batches) {
            const StepMetrics m = train_step(b, state, config, lr);
            record.mean.losses.adv_xy += m.losses.adv_xy;
            record.mean.losses.adv_yx += m.losses.adv_yx;
            record.mean.losses.l1 += m.losses.l1;
            record.mean.losses.cycle += m.losses.cycle;
            record.mean.losses.identity += m.losses.identity;
            record.mean.disc_xy += m.disc_xy;
            record.mean.disc_yx += m.disc_yx;
        }
        const double inv = 1.0 / static_cast<double>(batches.size());
        record.mean.losses.adv_xy *= inv;
        record.mean.losses.adv_yx *= inv;
        record.mean.losses.l1 *= inv;
        record.mean.losses.cycle *= inv;
        record.mean.losses.identity *= inv;
        record.mean.losses = total_loss(record.mean.losses, config.weights);
        record.mean.disc_xy *= inv;
        record.mean.disc_yx *= inv;

        state.history.push_back(record);
        state.epoch = epoch + 1;

        std::string log;
        for (const auto& r : state.history) log += metrics_json_line(r) + "\n";
        write_text_file(options.output_dir / "metrics.jsonl", log);

        if (config.checkpoint_every > 0 && state.epoch % config.checkpoint_every == 0)
            save_checkpoint(checkpoints / epoch_dir_name(state.epoch), state, config, model, manifest.vocabulary,
                            manifest.image_size);
        if (options.on_epoch) options.on_epoch(record);
    }
    result.final_checkpoint = checkpoints / "final";
    save_checkpoint(result.final_checkpoint, state, config, model, manifest.vocabulary, manifest.image_size);
    return result;
}

#define UNIFIX_INSTANTIATE_TRAINER(T)                                                                                  \
    template struct Networks<T>;                                                                                       \
    template struct TrainState<T>;                                                                                     \
    template LossBreakdown generator_objective(const Networks<T>&, const StepBatch<T>&, const TrainingConfig&,         \
                                               Networks<T>*);                                                          \
    template std::pair<double, double> discriminator_objective(const Networks<T>&, const StepBatch<T>&,                \
                                                               const TrainingConfig&, Networks<T>*);                   \
    template StepMetrics train_step(const StepBatch<T>&, TrainState<T>&, const TrainingConfig&, double);

UNIFIX_INSTANTIATE_TRAINER(float)
UNIFIX_INSTANTIATE_TRAINER(double)

} // namespace unifix
