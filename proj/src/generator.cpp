#include "unifix/generator.hpp"

namespace unifix {

namespace {

constexpr double kConvInitStd = 0.02;

Rng layer_rng(std::uint64_t seed, const std::string& name)
{
    return Rng(derive_seed(seed, hash_name(name)));
}

template <typename Scalar>
Conv2d<Scalar> init_conv(std::uint64_t seed, const std::string& name, int in, int out, int k, int stride, int pad)
{
    Rng rng = layer_rng(seed, name);
    return Conv2d<Scalar>::random(in, out, k, stride, pad, kConvInitStd, rng);
}

} // namespace

void GeneratorConfig::validate() const
{
    if (input_channels <= 0 || base_channels <= 0) throw ConfigError("generator: channel counts must be positive");
    if (n_downsamples < 0) throw ConfigError("generator: n_downsamples must be nonnegative");
    if (n_res_blocks < 1) throw ConfigError("generator: n_res_blocks must be at least 1");
    if (image_size <= 0 || image_size % (1 << n_downsamples) != 0)
        throw ConfigError("generator: image_size " + std::to_string(image_size) + " not divisible by 2^" +
                          std::to_string(n_downsamples));
    if (n_groups <= 0 || n_types <= 0) throw ConfigError("generator: label vocabularies must be nonempty");
    if (stem_kernel <= 0 || stem_kernel % 2 == 0) throw ConfigError("generator: stem_kernel must be odd and positive");
}

template <typename Scalar>
Generator<Scalar> Generator<Scalar>::create(const GeneratorConfig& config, std::uint64_t seed)
{
    config.validate();
    Generator g;
    g.config = config;
    const int k = config.stem_kernel;
    g.stem = init_conv<Scalar>(seed, "stem", config.input_channels, config.base_channels, k, 1, k / 2);
    int channels = config.base_channels;
    for (int i = 0; i < config.n_downsamples; ++i) {
        g.down.push_back(init_conv<Scalar>(seed, "down" + std::to_string(i), channels, 2 * channels, 3, 2, 1));
        channels *= 2;
    }
    if (config.use_group_label) {
        Rng rng = layer_rng(seed, "group_site");
        g.group_site = InjectionParams<Scalar>::random(config.n_groups, channels, rng);
        g.group_site->rescale_spatial = config.rescale_relevance;
    }
    for (int i = 0; i < config.n_res_blocks; ++i) {
        const std::string name = "block" + std::to_string(i);
        g.blocks.push_back({init_conv<Scalar>(seed, name + ".first", channels, channels, 3, 1, 1),
                            init_conv<Scalar>(seed, name + ".second", channels, channels, 3, 1, 1)});
    }
    if (config.use_type_label) {
        Rng rng = layer_rng(seed, "type_site");
        g.type_site = InjectionParams<Scalar>::random(config.n_types, channels, rng);
        g.type_site->rescale_spatial = config.rescale_relevance;
    }
    for (int i = 0; i < config.n_downsamples; ++i) {
        g.up.push_back(init_conv<Scalar>(seed, "up" + std::to_string(i), channels, channels / 2, 3, 1, 1));
        channels /= 2;
    }
    g.head = init_conv<Scalar>(seed, "head", channels, config.input_channels, k, 1, k / 2);
    return g;
}

template <typename Scalar>
Generator<Scalar> Generator<Scalar>::zeros_like() const
{
    Generator g;
    g.config = config;
    g.stem = stem.zeros_like();
    for (const auto& c : down) g.down.push_back(c.zeros_like());
    if (group_site) g.group_site = group_site->zeros_like();
    for (const auto& b : blocks) g.blocks.push_back({b.first.zeros_like(), b.second.zeros_like()});
    if (type_site) g.type_site = type_site->zeros_like();
    for (const auto& c : up) g.up.push_back(c.zeros_like());
    g.head = head.zeros_like();
    return g;
}

template <typename Scalar>
ParamList<Scalar> Generator<Scalar>::parameters()
{
    ParamList<Scalar> out;
    stem.collect(out, "stem");
    for (std::size_t i = 0; i < down.size(); ++i) down[i].collect(out, "down" + std::to_string(i));
    if (group_site) group_site->collect(out, "group_site");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].first.collect(out, "block" + std::to_string(i) + ".first");
        blocks[i].second.collect(out, "block" + std::to_string(i) + ".second");
    }
    if (type_site) type_site->collect(out, "type_site");
    for (std::size_t i = 0; i < up.size(); ++i) up[i].collect(out, "up" + std::to_string(i));
    head.collect(out, "head");
    return out;
}

namespace {

template <typename Scalar>
void check_input(const Generator<Scalar>& gen, const Tensor3<Scalar>& image)
{
    const auto& c = gen.config;
    if (image.channels() != c.input_channels || image.height != c.image_size || image.width != c.image_size)
        throw InvalidShapeError("generator: expected input " + shape_string(c.input_channels, c.image_size, c.image_size) +
                                ", got " + shape_string(image));
}

template <typename Scalar>
void check_labels(const Generator<Scalar>& gen, const ConditionLabels& labels)
{
    if (labels.group < 0 || labels.group >= gen.config.n_groups)
        throw InvalidLabelError("generator: group " + std::to_string(labels.group) + " outside vocabulary");
    if (labels.defect_type < 0 || labels.defect_type >= gen.config.n_types)
        throw InvalidLabelError("generator: defect type " + std::to_string(labels.defect_type) + " outside vocabulary");
}

template <typename Scalar>
FeatureMap<Scalar> run_encoder(const Generator<Scalar>& gen, const Tensor3<Scalar>& image, GeneratorTrace<Scalar>* trace)
{
    std::size_t n = 1 + gen.down.size();
    if (trace) trace->encoder.resize(n);
    FeatureMap<Scalar> h =
        conv_unit_forward(gen.stem, true, Activation::relu, image, trace ? &trace->encoder[0] : nullptr);
    for (std::size_t i = 0; i < gen.down.size(); ++i)
        h = conv_unit_forward(gen.down[i], true, Activation::relu, h, trace ? &trace->encoder[i + 1] : nullptr);
    return h;
}

} // namespace

template <typename Scalar>
FeatureMap<Scalar> encode(const Generator<Scalar>& gen, const Tensor3<Scalar>& image)
{
    check_input(gen, image);
    return run_encoder(gen, image, static_cast<GeneratorTrace<Scalar>*>(nullptr));
}

template <typename Scalar>
Tensor3<Scalar> generate(const Generator<Scalar>& gen, const Tensor3<Scalar>& image, const ConditionLabels& labels)
{
    return generator_forward(gen, image, labels, static_cast<GeneratorTrace<Scalar>*>(nullptr));
}

template <typename Scalar>
Tensor3<Scalar> generator_forward(const Generator<Scalar>& gen, const Tensor3<Scalar>& image,
                                  const ConditionLabels& labels, GeneratorTrace<Scalar>* trace)
{
    check_input(gen, image);
    check_labels(gen, labels);

    FeatureMap<Scalar> h = run_encoder(gen, image, trace);

    if (gen.group_site) {
        InjectionCache<Scalar>* cache = nullptr;
        if (trace) cache = &trace->group.emplace();
        h = inject_forward(h, labels.group, *gen.group_site, cache);
    }

    if (trace) {
        trace->block_first.resize(gen.blocks.size());
        trace->block_second.resize(gen.blocks.size());
    }
    for (std::size_t i = 0; i < gen.blocks.size(); ++i) {
        const auto& b = gen.blocks[i];
        FeatureMap<Scalar> r =
            conv_unit_forward(b.first, true, Activation::relu, h, trace ? &trace->block_first[i] : nullptr);
        r = conv_unit_forward(b.second, true, Activation::none, r, trace ? &trace->block_second[i] : nullptr);
        h.data += r.data;
    }

    if (gen.type_site) {
        InjectionCache<Scalar>* cache = nullptr;
        if (trace) cache = &trace->type.emplace();
        h = inject_forward(h, labels.defect_type, *gen.type_site, cache);
    }

    if (trace) trace->decoder.resize(gen.up.size());
    for (std::size_t i = 0; i < gen.up.size(); ++i)
        h = conv_unit_forward(gen.up[i], true, Activation::relu, upsample2x(h), trace ? &trace->decoder[i] : nullptr);

    Tensor3<Scalar> out = tanh_forward(conv2d_forward(gen.head, h, trace ? &trace->head : nullptr));
    if (trace) trace->output = out;
    return out;
}

template <typename Scalar>
Tensor3<Scalar> generator_backward(const Generator<Scalar>& gen, const GeneratorTrace<Scalar>& trace,
                                   const Tensor3<Scalar>& dy, Generator<Scalar>* grad, bool want_input_grad)
{
    Tensor3<Scalar> d = tanh_backward(trace.output, dy);
    d = conv2d_backward(gen.head, trace.head, d, grad ? &grad->head : nullptr);

    for (std::size_t i = gen.up.size(); i-- > 0;) {
        d = conv_unit_backward(gen.up[i], true, Activation::relu, trace.decoder[i], d, grad ? &grad->up[i] : nullptr);
        d = upsample2x_backward(d);
    }

    if (gen.type_site)
        d = inject_backward(*gen.type_site, *trace.type, d, grad ? &*grad->type_site : nullptr);

    for (std::size_t i = gen.blocks.size(); i-- > 0;) {
        const auto& b = gen.blocks[i];
        Tensor3<Scalar> dr = conv_unit_backward(b.second, true, Activation::none, trace.block_second[i], d,
                                                grad ? &grad->blocks[i].second : nullptr);
        dr = conv_unit_backward(b.first, true, Activation::relu, trace.block_first[i], dr,
                                grad ? &grad->blocks[i].first : nullptr);
        d.data += dr.data;
    }

    if (gen.group_site)
        d = inject_backward(*gen.group_site, *trace.group, d, grad ? &*grad->group_site : nullptr);

    for (std::size_t i = gen.down.size(); i-- > 0;)
        d = conv_unit_backward(gen.down[i], true, Activation::relu, trace.encoder[i + 1], d,
                               grad ? &grad->down[i] : nullptr);
    return conv_unit_backward(gen.stem, true, Activation::relu, trace.encoder[0], d, grad ? &grad->stem : nullptr,
                              want_input_grad);
}

#define UNIFIX_INSTANTIATE_GENERATOR(T)                                                                                \
    template struct Generator<T>;                                                                                      \
    template FeatureMap<T> encode(const Generator<T>&, const Tensor3<T>&);                                             \
    template Tensor3<T> generate(const Generator<T>&, const Tensor3<T>&, const ConditionLabels&);                      \
    template Tensor3<T> generator_forward(const Generator<T>&, const Tensor3<T>&, const ConditionLabels&,              \
                                          GeneratorTrace<T>*);                                                         \
    template Tensor3<T> generator_backward(const Generator<T>&, const GeneratorTrace<T>&, const Tensor3<T>&,           \
                                           Generator<T>*, bool);

UNIFIX_INSTANTIATE_GENERATOR(float)
UNIFIX_INSTANTIATE_GENERATOR(double)

} // namespace unifix
