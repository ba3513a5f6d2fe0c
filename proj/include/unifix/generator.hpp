#pragma once

#include "unifix/conditioning.hpp"

#include <optional>

namespace unifix {

struct GeneratorConfig {
    int input_channels = 3;
    int base_channels = 16;
    int n_downsamples = 2;
    int n_res_blocks = 4;
    int image_size = 32;
    int n_groups = 2;
    int n_types = 3;
    int stem_kernel = 7;
    // An injection site that is switched off is absent: no parameters, the
    // feature map passes through unchanged.
    bool use_group_label = true;
    bool use_type_label = true;
    bool rescale_relevance = false;

    int bottleneck_channels() const { return base_channels << n_downsamples; }
    int bottleneck_size() const { return image_size >> n_downsamples; }

    /// Throws ConfigError on an inconsistent configuration.
    void validate() const;
};

template <typename Scalar>
struct ResBlock {
    Conv2d<Scalar> first;
    Conv2d<Scalar> second;
};

/// Encoder -> group injection -> residual blocks -> type injection -> decoder.
template <typename Scalar>
struct Generator {
    GeneratorConfig config;
    Conv2d<Scalar> stem;
    std::vector<Conv2d<Scalar>> down;
    std::optional<InjectionParams<Scalar>> group_site;
    std::vector<ResBlock<Scalar>> blocks;
    std::optional<InjectionParams<Scalar>> type_site;
    std::vector<Conv2d<Scalar>> up;
    Conv2d<Scalar> head;

    /// Every layer draws from its own stream derived from (seed, layer name),
    /// so toggling an injection site leaves the other layers' weights intact.
    static Generator create(const GeneratorConfig& config, std::uint64_t seed);

    Generator zeros_like() const;
    ParamList<Scalar> parameters();
};

template <typename Scalar>
struct GeneratorTrace {
    std::vector<ConvUnitCache<Scalar>> encoder;
    std::optional<InjectionCache<Scalar>> group;
    std::vector<ConvUnitCache<Scalar>> block_first;
    std::vector<ConvUnitCache<Scalar>> block_second;
    std::optional<InjectionCache<Scalar>> type;
    std::vector<ConvUnitCache<Scalar>> decoder;
    ConvCache<Scalar> head;
    Tensor3<Scalar> output;
};

template <typename Scalar>
FeatureMap<Scalar> encode(const Generator<Scalar>& gen, const Tensor3<Scalar>& image);

template <typename Scalar>
Tensor3<Scalar> generate(const Generator<Scalar>& gen, const Tensor3<Scalar>& image, const ConditionLabels& labels);

template <typename Scalar>
Tensor3<Scalar> generator_forward(const Generator<Scalar>& gen, const Tensor3<Scalar>& image,
                                  const ConditionLabels& labels, GeneratorTrace<Scalar>* trace);

/// Accumulates parameter gradients into `grad` and returns the gradient with
/// respect to the input image.
template <typename Scalar>
Tensor3<Scalar> generator_backward(const Generator<Scalar>& gen, const GeneratorTrace<Scalar>& trace,
                                   const Tensor3<Scalar>& dy, Generator<Scalar>* grad, bool want_input_grad = true);

} // namespace unifix
