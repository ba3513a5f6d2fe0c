#include "unifix/layers.hpp"

namespace unifix {

std::string shape_string(int c, int h, int w)
{
    return "(" + std::to_string(c) + ", " + std::to_string(h) + ", " + std::to_string(w) + ")";
}

std::uint64_t hash_name(const std::string& name)
{
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : name) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename Scalar>
Conv2d<Scalar> Conv2d<Scalar>::create(int in, int out, int kernel, int stride, int padding)
{
    if (in <= 0 || out <= 0 || kernel <= 0 || stride <= 0 || padding < 0)
        throw InvalidShapeError("conv2d: invalid geometry");
    Conv2d c;
    c.in_channels = in;
    c.out_channels = out;
    c.kernel = kernel;
    c.stride = stride;
    c.padding = padding;
    c.weight = Matrix<Scalar>::Zero(out, kernel * kernel * in);
    c.bias = Matrix<Scalar>::Zero(out, 1);
    return c;
}

template <typename Scalar>
Conv2d<Scalar> Conv2d<Scalar>::random(int in, int out, int kernel, int stride, int padding, double stddev, Rng& rng)
{
    Conv2d c = create(in, out, kernel, stride, padding);
    c.weight = random_normal<Scalar>(out, kernel * kernel * in, stddev, rng);
    return c;
}

template <typename Scalar>
Conv2d<Scalar> Conv2d<Scalar>::zeros_like() const
{
    return create(in_channels, out_channels, kernel, stride, padding);
}

template <typename Scalar>
void Conv2d<Scalar>::collect(ParamList<Scalar>& out, const std::string& prefix)
{
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
}

template <typename Scalar>
Tensor3<Scalar> conv2d_forward(const Conv2d<Scalar>& conv, const Tensor3<Scalar>& x, ConvCache<Scalar>* cache)
{
    if (x.channels() != conv.in_channels)
        throw InvalidShapeError("conv2d: expected " + std::to_string(conv.in_channels) + " input channels, got " +
                                shape_string(x));
    const int out_h = conv.output_size(x.height);
    const int out_w = conv.output_size(x.width);
    if (out_h <= 0 || out_w <= 0) throw InvalidShapeError("conv2d: input too small " + shape_string(x));

    const int k = conv.kernel;
    const int cin = conv.in_channels;
    Matrix<Scalar> cols = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(k) * k * cin, out_h * out_w);
    for (int oi = 0; oi < out_h; ++oi) {
        for (int oj = 0; oj < out_w; ++oj) {
            const int p = oi * out_w + oj;
            for (int ki = 0; ki < k; ++ki) {
                const int ii = oi * conv.stride - conv.padding + ki;
                if (ii < 0 || ii >= x.height) continue;
                for (int kj = 0; kj < k; ++kj) {
                    const int jj = oj * conv.stride - conv.padding + kj;
                    if (jj < 0 || jj >= x.width) continue;
                    cols.col(p).segment((ki * k + kj) * cin, cin) = x.data.col(ii * x.width + jj);
                }
            }
        }
    }

    Tensor3<Scalar> y(Matrix<Scalar>(conv.weight * cols), out_h, out_w);
    y.data.colwise() += conv.bias.col(0);
    if (cache) {
        cache->columns = std::move(cols);
        cache->in_height = x.height;
        cache->in_width = x.width;
    }
    return y;
}

template <typename Scalar>
Tensor3<Scalar> conv2d_backward(const Conv2d<Scalar>& conv, const ConvCache<Scalar>& cache, const Tensor3<Scalar>& dy,
                                Conv2d<Scalar>* grad, bool want_input_grad)
{
    if (grad) {
        grad->weight.noalias() += dy.data * cache.columns.transpose();
        grad->bias.col(0) += dy.data.rowwise().sum();
    }
    if (!want_input_grad) return {};

    const Matrix<Scalar> dcols = conv.weight.transpose() * dy.data;
    const int k = conv.kernel;
    const int cin = conv.in_channels;
    Tensor3<Scalar> dx(cin, cache.in_height, cache.in_width);
    for (int oi = 0; oi < dy.height; ++oi) {
        for (int oj = 0; oj < dy.width; ++oj) {
            const int p = oi * dy.width + oj;
            for (int ki = 0; ki < k; ++ki) {
                const int ii = oi * conv.stride - conv.padding + ki;
                if (ii < 0 || ii >= cache.in_height) continue;
                for (int kj = 0; kj < k; ++kj) {
                    const int jj = oj * conv.stride - conv.padding + kj;
                    if (jj < 0 || jj >= cache.in_width) continue;
                    dx.data.col(ii * cache.in_width + jj) += dcols.col(p).segment((ki * k + kj) * cin, cin);
                }
            }
        }
    }
    return dx;
}

template <typename Scalar>
Tensor3<Scalar> instance_norm_forward(const Tensor3<Scalar>& x, NormCache<Scalar>* cache)
{
    const Scalar n = static_cast<Scalar>(x.pixels());
    const Vector<Scalar> mean = x.data.rowwise().sum() / n;
    Matrix<Scalar> centered = x.data.colwise() - mean;
    const Vector<Scalar> var = centered.array().square().rowwise().sum() / n;
    const Vector<Scalar> inv_std = (var.array() + static_cast<Scalar>(kInstanceNormEps)).rsqrt();
    centered.array().colwise() *= inv_std.array();
    Tensor3<Scalar> y(centered, x.height, x.width);
    if (cache) {
        cache->normalized = std::move(centered);
        cache->inv_std = inv_std;
    }
    return y;
}

template <typename Scalar>
Tensor3<Scalar> instance_norm_backward(const NormCache<Scalar>& cache, const Tensor3<Scalar>& dy)
{
    const Scalar n = static_cast<Scalar>(dy.pixels());
    const Vector<Scalar> sum_dy = dy.data.rowwise().sum();
    const Vector<Scalar> sum_dy_xhat = (dy.data.array() * cache.normalized.array()).rowwise().sum();
    Matrix<Scalar> dx = (n * dy.data).colwise() - sum_dy;
    dx.array() -= cache.normalized.array().colwise() * sum_dy_xhat.array();
    dx.array().colwise() *= cache.inv_std.array() / n;
    return Tensor3<Scalar>(std::move(dx), dy.height, dy.width);
}

template <typename Scalar>
Tensor3<Scalar> relu(const Tensor3<Scalar>& x)
{
    return Tensor3<Scalar>(Matrix<Scalar>(x.data.cwiseMax(Scalar(0))), x.height, x.width);
}

template <typename Scalar>
Tensor3<Scalar> relu_backward(const Tensor3<Scalar>& y, const Tensor3<Scalar>& dy)
{
    Matrix<Scalar> dx = (y.data.array() > Scalar(0)).select(dy.data, Scalar(0));
    return Tensor3<Scalar>(std::move(dx), dy.height, dy.width);
}

template <typename Scalar>
Tensor3<Scalar> leaky_relu(const Tensor3<Scalar>& x)
{
    const Scalar slope = static_cast<Scalar>(kLeakySlope);
    Matrix<Scalar> y = (x.data.array() > Scalar(0)).select(x.data, slope * x.data);
    return Tensor3<Scalar>(std::move(y), x.height, x.width);
}

template <typename Scalar>
Tensor3<Scalar> leaky_relu_backward(const Tensor3<Scalar>& y, const Tensor3<Scalar>& dy)
{
    const Scalar slope = static_cast<Scalar>(kLeakySlope);
    Matrix<Scalar> dx = (y.data.array() > Scalar(0)).select(dy.data, slope * dy.data);
    return Tensor3<Scalar>(std::move(dx), dy.height, dy.width);
}

template <typename Scalar>
Tensor3<Scalar> tanh_forward(const Tensor3<Scalar>& x)
{
    return Tensor3<Scalar>(Matrix<Scalar>(x.data.array().tanh()), x.height, x.width);
}

template <typename Scalar>
Tensor3<Scalar> tanh_backward(const Tensor3<Scalar>& y, const Tensor3<Scalar>& dy)
{
    Matrix<Scalar> dx = dy.data.array() * (Scalar(1) - y.data.array().square());
    return Tensor3<Scalar>(std::move(dx), dy.height, dy.width);
}

template <typename Scalar>
Tensor3<Scalar> upsample2x(const Tensor3<Scalar>& x)
{
    Tensor3<Scalar> y(x.channels(), 2 * x.height, 2 * x.width);
    for (int i = 0; i < y.height; ++i)
        for (int j = 0; j < y.width; ++j) y.data.col(i * y.width + j) = x.data.col((i / 2) * x.width + j / 2);
    return y;
}

template <typename Scalar>
Tensor3<Scalar> upsample2x_backward(const Tensor3<Scalar>& dy)
{
    Tensor3<Scalar> dx(dy.channels(), dy.height / 2, dy.width / 2);
    for (int i = 0; i < dy.height; ++i)
        for (int j = 0; j < dy.width; ++j) dx.data.col((i / 2) * dx.width + j / 2) += dy.data.col(i * dy.width + j);
    return dx;
}

template <typename Scalar>
Tensor3<Scalar> conv_unit_forward(const Conv2d<Scalar>& conv, bool normalize, Activation act, const Tensor3<Scalar>& x,
                                  ConvUnitCache<Scalar>* cache)
{
    Tensor3<Scalar> y = conv2d_forward(conv, x, cache ? &cache->conv : nullptr);
    if (normalize) y = instance_norm_forward(y, cache ? &cache->norm : nullptr);
    switch (act) {
    case Activation::relu: y = relu(y); break;
    case Activation::leaky_relu: y = leaky_relu(y); break;
    case Activation::none: break;
    }
    if (cache) cache->output = y;
    return y;
}

template <typename Scalar>
Tensor3<Scalar> conv_unit_backward(const Conv2d<Scalar>& conv, bool normalize, Activation act,
                                   const ConvUnitCache<Scalar>& cache, const Tensor3<Scalar>& dy, Conv2d<Scalar>* grad,
                                   bool want_input_grad)
{
    Tensor3<Scalar> d = dy;
    switch (act) {
    case Activation::relu: d = relu_backward(cache.output, d); break;
    case Activation::leaky_relu: d = leaky_relu_backward(cache.output, d); break;
    case Activation::none: break;
    }
    if (normalize) d = instance_norm_backward(cache.norm, d);
    return conv2d_backward(conv, cache.conv, d, grad, want_input_grad);
}

#define UNIFIX_INSTANTIATE_LAYERS(T)                                                                                   \
    template struct Conv2d<T>;                                                                                         \
    template Tensor3<T> conv2d_forward(const Conv2d<T>&, const Tensor3<T>&, ConvCache<T>*);                            \
    template Tensor3<T> conv2d_backward(const Conv2d<T>&, const ConvCache<T>&, const Tensor3<T>&, Conv2d<T>*, bool);   \
    template Tensor3<T> instance_norm_forward(const Tensor3<T>&, NormCache<T>*);                                       \
    template Tensor3<T> instance_norm_backward(const NormCache<T>&, const Tensor3<T>&);                                \
    template Tensor3<T> relu(const Tensor3<T>&);                                                                       \
    template Tensor3<T> relu_backward(const Tensor3<T>&, const Tensor3<T>&);                                           \
    template Tensor3<T> leaky_relu(const Tensor3<T>&);                                                                 \
    template Tensor3<T> leaky_relu_backward(const Tensor3<T>&, const Tensor3<T>&);                                     \
    template Tensor3<T> tanh_forward(const Tensor3<T>&);                                                               \
    template Tensor3<T> tanh_backward(const Tensor3<T>&, const Tensor3<T>&);                                           \
    template Tensor3<T> upsample2x(const Tensor3<T>&);                                                                 \
    template Tensor3<T> upsample2x_backward(const Tensor3<T>&);                                                        \
    template Tensor3<T> conv_unit_forward(const Conv2d<T>&, bool, Activation, const Tensor3<T>&, ConvUnitCache<T>*);   \
    template Tensor3<T> conv_unit_backward(const Conv2d<T>&, bool, Activation, const ConvUnitCache<T>&,                \
                                           const Tensor3<T>&, Conv2d<T>*, bool);

UNIFIX_INSTANTIATE_LAYERS(float)
UNIFIX_INSTANTIATE_LAYERS(double)

} // namespace unifix
