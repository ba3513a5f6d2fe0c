#pragma once

#include "unifix/core.hpp"

#include <string>
#include <vector>

namespace unifix {

/// Named handle onto a parameter matrix owned by some network. Networks expose
/// their parameters as an ordered list of these; gradients are stored in a
/// second network of the same shape and listed in the same order.
template <typename Scalar>
struct ParamRef {
    std::string name;
    Matrix<Scalar>* value;
};

template <typename Scalar>
using ParamList = std::vector<ParamRef<Scalar>>;

// ---------------------------------------------------------------------------
// 2-D convolution (zero padding), evaluated as an im2col GEMM.
// Weight layout: out x (k * k * in), column index (ki * k + kj) * in + ci.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct Conv2d {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int padding = 0;
    Matrix<Scalar> weight;
    Matrix<Scalar> bias; // out x 1

    static Conv2d create(int in, int out, int kernel, int stride, int padding);
    static Conv2d random(int in, int out, int kernel, int stride, int padding, double stddev, Rng& rng);

    Conv2d zeros_like() const;
    int output_size(int input) const { return (input + 2 * padding - kernel) / stride + 1; }
    void collect(ParamList<Scalar>& out, const std::string& prefix);
};

template <typename Scalar>
struct ConvCache {
    Matrix<Scalar> columns;
    int in_height = 0;
    int in_width = 0;
};

template <typename Scalar>
Tensor3<Scalar> conv2d_forward(const Conv2d<Scalar>& conv, const Tensor3<Scalar>& x, ConvCache<Scalar>* cache);

/// Accumulates parameter gradients into `grad` when non-null. Returns the input
/// gradient unless `want_input_grad` is false, in which case an empty tensor is
/// returned.
template <typename Scalar>
Tensor3<Scalar> conv2d_backward(const Conv2d<Scalar>& conv, const ConvCache<Scalar>& cache, const Tensor3<Scalar>& dy,
                                Conv2d<Scalar>* grad, bool want_input_grad = true);

// ---------------------------------------------------------------------------
// Instance normalization without affine parameters.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct NormCache {
    Matrix<Scalar> normalized;
    Vector<Scalar> inv_std;
};

inline constexpr double kInstanceNormEps = 1e-5;

template <typename Scalar>
Tensor3<Scalar> instance_norm_forward(const Tensor3<Scalar>& x, NormCache<Scalar>* cache);

template <typename Scalar>
Tensor3<Scalar> instance_norm_backward(const NormCache<Scalar>& cache, const Tensor3<Scalar>& dy);

// ---------------------------------------------------------------------------
// Pointwise activations. Backward passes take the forward output.
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor3<Scalar> relu(const Tensor3<Scalar>& x);

template <typename Scalar>
Tensor3<Scalar> relu_backward(const Tensor3<Scalar>& y, const Tensor3<Scalar>& dy);

inline constexpr double kLeakySlope = 0.2;

template <typename Scalar>
Tensor3<Scalar> leaky_relu(const Tensor3<Scalar>& x);

template <typename Scalar>
Tensor3<Scalar> leaky_relu_backward(const Tensor3<Scalar>& y, const Tensor3<Scalar>& dy);

template <typename Scalar>
Tensor3<Scalar> tanh_forward(const Tensor3<Scalar>& x);

template <typename Scalar>
Tensor3<Scalar> tanh_backward(const Tensor3<Scalar>& y, const Tensor3<Scalar>& dy);

// Nearest-neighbour 2x upsampling.
template <typename Scalar>
Tensor3<Scalar> upsample2x(const Tensor3<Scalar>& x);

template <typename Scalar>
Tensor3<Scalar> upsample2x_backward(const Tensor3<Scalar>& dy);

// ---------------------------------------------------------------------------
// conv -> instance norm -> activation, the unit most of both networks are
// built from.
// ---------------------------------------------------------------------------

enum class Activation { none, relu, leaky_relu };

template <typename Scalar>
struct ConvUnitCache {
    ConvCache<Scalar> conv;
    NormCache<Scalar> norm;
    Tensor3<Scalar> output;
};

template <typename Scalar>
Tensor3<Scalar> conv_unit_forward(const Conv2d<Scalar>& conv, bool normalize, Activation act, const Tensor3<Scalar>& x,
                                  ConvUnitCache<Scalar>* cache);

template <typename Scalar>
Tensor3<Scalar> conv_unit_backward(const Conv2d<Scalar>& conv, bool normalize, Activation act,
                                   const ConvUnitCache<Scalar>& cache, const Tensor3<Scalar>& dy, Conv2d<Scalar>* grad,
                                   bool want_input_grad = true);

// Helpers shared by every network.

template <typename Scalar>
void zero_params(ParamList<Scalar>& params)
{
    for (auto& p : params) p.value->setZero();
}

template <typename Scalar>
std::size_t count_params(const ParamList<Scalar>& params)
{
    std::size_t n = 0;
    for (const auto& p : params) n += static_cast<std::size_t>(p.value->size());
    return n;
}

template <typename Scalar>
bool all_finite(const ParamList<Scalar>& params)
{
    for (const auto& p : params)
        if (!p.value->allFinite()) return false;
    return true;
}

} // namespace unifix
