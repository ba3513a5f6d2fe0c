#pragma once

#include "unifix/layers.hpp"

namespace unifix {

/// Patch critic: n_layers stride-2 4x4 convs, one stride-1 conv, then a
/// 1-channel stride-1 conv. With three stride-2 layers the receptive field is
/// 70x70. Instance norm on all but the first and last layers.
struct CriticConfig {
    int input_channels = 3;
    int base_channels = 16;
    int n_layers = 3;
    int image_size = 32;

    void validate() const;
    /// Side length of the patch-score map for the configured image size.
    int patch_map_size() const;
};

template <typename Scalar>
struct Critic {
    CriticConfig config;
    std::vector<Conv2d<Scalar>> layers;

    static Critic create(const CriticConfig& config, std::uint64_t seed);
    Critic zeros_like() const;
    ParamList<Scalar> parameters();
};

/// Raw (no sigmoid) critic output: mean of the patch map.
template <typename Scalar>
struct CriticOutput {
    Scalar score = 0;
    Tensor3<Scalar> patch_scores;
};

template <typename Scalar>
struct CriticTrace {
    std::vector<ConvUnitCache<Scalar>> units;
    int patches = 0;
};

template <typename Scalar>
CriticOutput<Scalar> critic(const Critic<Scalar>& net, const Tensor3<Scalar>& image);

template <typename Scalar>
CriticOutput<Scalar> critic_forward(const Critic<Scalar>& net, const Tensor3<Scalar>& image, CriticTrace<Scalar>* trace);

/// Backpropagates d(loss)/d(score). Parameter gradients accumulate into
/// `grad` when non-null; the image gradient is returned when requested.
template <typename Scalar>
Tensor3<Scalar> critic_backward(const Critic<Scalar>& net, const CriticTrace<Scalar>& trace, Scalar dscore,
                                Critic<Scalar>* grad, bool want_input_grad);

/// sigmoid(c_real - c_fake): probability that the first image looks more
/// realistic than the second.
double relativistic_prob(double c_real, double c_fake);

} // namespace unifix
