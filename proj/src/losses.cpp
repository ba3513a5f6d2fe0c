#include "unifix/losses.hpp"

#include <algorithm>
#include <cmath>

namespace unifix {

void LossWeights::validate() const
{
    for (double w : {lambda1, lambda2, lambda3, lambda4})
        if (!std::isfinite(w) || w < 0) throw ConfigError("loss weights must be finite and nonnegative");
}

double softplus(double x)
{
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double adv_loss_discriminator(double c_real, double c_fake)
{
    return softplus(-(c_real - c_fake));
}

double adv_loss_generator(double c_fake, double c_real)
{
    return softplus(-(c_fake - c_real));
}

double neg_log_sigmoid_grad(double z)
{
    // -sigmoid(-z), evaluated on the stable branch.
    if (z >= 0) {
        const double e = std::exp(-z);
        return -e / (1.0 + e);
    }
    return -1.0 / (1.0 + std::exp(z));
}

template <typename Scalar>
double mean_abs_error(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b)
{
    require_same_shape(a, b, "mean_abs_error");
    return (a.data.template cast<double>() - b.data.template cast<double>()).cwiseAbs().mean();
}

template <typename Scalar>
Tensor3<Scalar> mean_abs_error_grad(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b, double scale)
{
    require_same_shape(a, b, "mean_abs_error_grad");
    const Scalar s = static_cast<Scalar>(scale / static_cast<double>(a.data.size()));
    Matrix<Scalar> g = (a.data - b.data).array().sign() * s;
    return Tensor3<Scalar>(std::move(g), a.height, a.width);
}

template <typename Scalar>
double l1_reconstruction(const Tensor3<Scalar>& gen_xy_of_x, const Tensor3<Scalar>& y,
                         const Tensor3<Scalar>& gen_yx_of_y, const Tensor3<Scalar>& x)
{
    return mean_abs_error(gen_xy_of_x, y) + mean_abs_error(gen_yx_of_y, x);
}

template <typename Scalar>
double cycle_loss(const Tensor3<Scalar>& x, const Tensor3<Scalar>& x_cycled, const Tensor3<Scalar>& y,
                  const Tensor3<Scalar>& y_cycled)
{
    return mean_abs_error(x_cycled, x) + mean_abs_error(y_cycled, y);
}

template <typename Scalar>
double identity_loss(const Tensor3<Scalar>& gen_yx_of_x, const Tensor3<Scalar>& x, const Tensor3<Scalar>& gen_xy_of_y,
                     const Tensor3<Scalar>& y)
{
    return mean_abs_error(gen_yx_of_x, x) + mean_abs_error(gen_xy_of_y, y);
}

LossBreakdown total_loss(LossBreakdown c, const LossWeights& w)
{
    c.total = w.lambda1 * (c.adv_xy + c.adv_yx) + w.lambda2 * c.l1 + w.lambda3 * c.cycle + w.lambda4 * c.identity;
    return c;
}

#define UNIFIX_INSTANTIATE_LOSSES(T)                                                                                   \
    template double mean_abs_error(const Tensor3<T>&, const Tensor3<T>&);                                              \
    template Tensor3<T> mean_abs_error_grad(const Tensor3<T>&, const Tensor3<T>&, double);                             \
    template double l1_reconstruction(const Tensor3<T>&, const Tensor3<T>&, const Tensor3<T>&, const Tensor3<T>&);     \
    template double cycle_loss(const Tensor3<T>&, const Tensor3<T>&, const Tensor3<T>&, const Tensor3<T>&);            \
    template double identity_loss(const Tensor3<T>&, const Tensor3<T>&, const Tensor3<T>&, const Tensor3<T>&);

UNIFIX_INSTANTIATE_LOSSES(float)
UNIFIX_INSTANTIATE_LOSSES(double)

} // namespace unifix
