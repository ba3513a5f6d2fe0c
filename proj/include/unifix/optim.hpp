#pragma once

#include "unifix/layers.hpp"

#include <cmath>
#include <cstdint>

namespace unifix {

struct AdamOptions {
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
    std::vector<Matrix<Scalar>> first_moment;
    std::vector<Matrix<Scalar>> second_moment;
    std::int64_t step = 0;

    static AdamState for_params(const ParamList<Scalar>& params)
    {
        AdamState s;
        for (const auto& p : params) {
            s.first_moment.push_back(Matrix<Scalar>::Zero(p.value->rows(), p.value->cols()));
            s.second_moment.push_back(Matrix<Scalar>::Zero(p.value->rows(), p.value->cols()));
        }
        return s;
    }

    void update(const ParamList<Scalar>& params, const ParamList<Scalar>& grads, double lr, const AdamOptions& opt)
    {
        ++step;
        const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
        const auto b1 = static_cast<Scalar>(opt.beta1);
        const auto b2 = static_cast<Scalar>(opt.beta2);
        const auto step_size = static_cast<Scalar>(lr / c1);
        const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
        const auto eps = static_cast<Scalar>(opt.eps);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& g = *grads[i].value;
            auto& m = first_moment[i];
            auto& v = second_moment[i];
            m = b1 * m + (Scalar(1) - b1) * g;
            v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
            params[i].value->array() -= step_size * m.array() / ((v.array() * inv_c2).sqrt() + eps);
        }
    }

    /// Moments as a parameter list (names "m.<param>" / "v.<param>") for archiving.
    ParamList<Scalar> moments(const ParamList<Scalar>& params)
    {
        ParamList<Scalar> out;
        for (std::size_t i = 0; i < params.size(); ++i) out.push_back({"m." + params[i].name, &first_moment[i]});
        for (std::size_t i = 0; i < params.size(); ++i) out.push_back({"v." + params[i].name, &second_moment[i]});
        return out;
    }
};

} // namespace unifix
