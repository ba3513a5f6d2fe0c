#include "unifix/discriminator.hpp"

#include <algorithm>

namespace unifix {

namespace {

struct LayerSpec {
    int in;
    int out;
    int stride;
    bool normalize;
    Activation act;
};

std::vector<LayerSpec> layer_specs(const CriticConfig& c)
{
    std::vector<LayerSpec> specs;
    const int cap = c.base_channels * 8;
    int channels = c.base_channels;
    specs.push_back({c.input_channels, channels, 2, false, Activation::leaky_relu});
    for (int i = 1; i < c.n_layers; ++i) {
        const int next = std::min(c.base_channels << i, cap);
        specs.push_back({channels, next, 2, true, Activation::leaky_relu});
        channels = next;
    }
    const int next = std::min(c.base_channels << c.n_layers, cap);
    specs.push_back({channels, next, 1, true, Activation::leaky_relu});
    specs.push_back({next, 1, 1, false, Activation::none});
    return specs;
}

constexpr int kCriticKernel = 4;

} // namespace

void CriticConfig::validate() const
{
    if (input_channels <= 0 || base_channels <= 0 || n_layers < 1)
        throw ConfigError("critic: channels and n_layers must be positive");
    if (patch_map_size() < 1)
        throw ConfigError("critic: image_size " + std::to_string(image_size) + " too small for " +
                          std::to_string(n_layers) + " layers");
}

int CriticConfig::patch_map_size() const
{
    int size = image_size;
    for (int i = 0; i < n_layers; ++i) size = (size + 2 - kCriticKernel) / 2 + 1;
    for (int i = 0; i < 2; ++i) size = size + 2 - kCriticKernel + 1;
    return size;
}

template <typename Scalar>
Critic<Scalar> Critic<Scalar>::create(const CriticConfig& config, std::uint64_t seed)
{
    config.validate();
    Critic c;
    c.config = config;
    const auto specs = layer_specs(config);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Rng rng(derive_seed(seed, hash_name("critic" + std::to_string(i))));
        c.layers.push_back(Conv2d<Scalar>::random(specs[i].in, specs[i].out, kCriticKernel, specs[i].stride, 1, 0.02, rng));
    }
    return c;
}

template <typename Scalar>
Critic<Scalar> Critic<Scalar>::zeros_like() const
{
    Critic c;
    c.config = config;
    for (const auto& l : layers) c.layers.push_back(l.zeros_like());
    return c;
}

template <typename Scalar>
ParamList<Scalar> Critic<Scalar>::parameters()
{
    ParamList<Scalar> out;
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(out, "layer" + std::to_string(i));
    return out;
}

template <typename Scalar>
CriticOutput<Scalar> critic(const Critic<Scalar>& net, const Tensor3<Scalar>& image)
{
    return critic_forward(net, image, static_cast<CriticTrace<Scalar>*>(nullptr));
}

template <typename Scalar>
CriticOutput<Scalar> critic_forward(const Critic<Scalar>& net, const Tensor3<Scalar>& image, CriticTrace<Scalar>* trace)
{
    const auto& c = net.config;
    if (image.channels() != c.input_channels || image.height != c.image_size || image.width != c.image_size)
        throw InvalidShapeError("critic: expected input " + shape_string(c.input_channels, c.image_size, c.image_size) +
                                ", got " + shape_string(image));
    const auto specs = layer_specs(c);
    if (trace) trace->units.resize(specs.size());
    Tensor3<Scalar> h = image;
    for (std::size_t i = 0; i < specs.size(); ++i)
        h = conv_unit_forward(net.layers[i], specs[i].normalize, specs[i].act, h, trace ? &trace->units[i] : nullptr);
    CriticOutput<Scalar> out;
    out.score = h.data.mean();
    if (trace) trace->patches = h.pixels();
    out.patch_scores = std::move(h);
    return out;
}

template <typename Scalar>
Tensor3<Scalar> critic_backward(const Critic<Scalar>& net, const CriticTrace<Scalar>& trace, Scalar dscore,
                                Critic<Scalar>* grad, bool want_input_grad)
{
    const auto specs = layer_specs(net.config);
    const auto& last = trace.units.back().output;
    Tensor3<Scalar> d = Tensor3<Scalar>::constant(1, last.height, last.width, dscore / static_cast<Scalar>(trace.patches));
    for (std::size_t i = specs.size(); i-- > 0;) {
        const bool need_input = i > 0 || want_input_grad;
        d = conv_unit_backward(net.layers[i], specs[i].normalize, specs[i].act, trace.units[i], d,
                               grad ? &grad->layers[i] : nullptr, need_input);
    }
    return d;
}

double relativistic_prob(double c_real, double c_fake)
{
    const double z = c_real - c_fake;
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

#define UNIFIX_INSTANTIATE_CRITIC(T)                                                                                   \
    template struct Critic<T>;                                                                                         \
    template CriticOutput<T> critic(const Critic<T>&, const Tensor3<T>&);                                              \
    template CriticOutput<T> critic_forward(const Critic<T>&, const Tensor3<T>&, CriticTrace<T>*);                     \
    template Tensor3<T> critic_backward(const Critic<T>&, const CriticTrace<T>&, T, Critic<T>*, bool);

UNIFIX_INSTANTIATE_CRITIC(float)
UNIFIX_INSTANTIATE_CRITIC(double)

} // namespace unifix
