#pragma once

#include "unifix/core.hpp"

namespace unifix {

/// Multipliers of the adversarial, paired-L1, cycle and identity terms.
struct LossWeights {
    double lambda1 = 1.0;
    double lambda2 = 150.0;
    double lambda3 = 10.0;
    double lambda4 = 10.0;

    void validate() const;
};

struct LossBreakdown {
    double adv_xy = 0;
    double adv_yx = 0;
    double l1 = 0;
    double cycle = 0;
    double identity = 0;
    double total = 0;
};

/// log(1 + exp(x)) without overflow.
double softplus(double x);

/// -log sigmoid(c_real - c_fake); minimized by the critic.
double adv_loss_discriminator(double c_real, double c_fake);

/// -log sigmoid(c_fake - c_real); minimized by the generator.
double adv_loss_generator(double c_fake, double c_real);

/// d/dz of -log sigmoid(z).
double neg_log_sigmoid_grad(double z);

template <typename Scalar>
double mean_abs_error(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b);

/// Gradient of mean_abs_error(a, b) with respect to a, scaled by `scale`.
template <typename Scalar>
Tensor3<Scalar> mean_abs_error_grad(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b, double scale);

template <typename Scalar>
double l1_reconstruction(const Tensor3<Scalar>& gen_xy_of_x, const Tensor3<Scalar>& y,
                         const Tensor3<Scalar>& gen_yx_of_y, const Tensor3<Scalar>& x);

template <typename Scalar>
double cycle_loss(const Tensor3<Scalar>& x, const Tensor3<Scalar>& x_cycled, const Tensor3<Scalar>& y,
                  const Tensor3<Scalar>& y_cycled);

template <typename Scalar>
double identity_loss(const Tensor3<Scalar>& gen_yx_of_x, const Tensor3<Scalar>& x, const Tensor3<Scalar>& gen_xy_of_y,
                     const Tensor3<Scalar>& y);

/// Fills `total` from the other fields.
LossBreakdown total_loss(LossBreakdown components, const LossWeights& weights);

} // namespace unifix
