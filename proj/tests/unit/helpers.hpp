#pragma once

#include "unifix/core.hpp"
#include "unifix/layers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>

namespace testing {

using unifix::Matrix;
using unifix::ParamList;
using unifix::Tensor3;

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
        : path_(std::filesystem::temp_directory_path() /
                ("unifix_" + tag + "_" + std::to_string(::getpid())))
    {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline Tensor3<double> random_tensor(int c, int h, int w, std::uint64_t seed, double lo = -1.0, double hi = 1.0)
{
    unifix::Rng rng(seed);
    return Tensor3<double>(unifix::random_uniform<double>(c, h * w, lo, hi, rng), h, w);
}

inline double relative_error(double a, double n)
{
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

/// Largest relative error between `analytic` and central differences of
/// `loss` over every entry of `params`.
inline double worst_fd_error(const ParamList<double>& params, const ParamList<double>& analytic,
                             const std::function<double()>& loss, double step = 1e-5)
{
    double worst = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix<double>& p = *params[k].value;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double saved = p(i);
            p(i) = saved + step;
            const double up = loss();
            p(i) = saved - step;
            const double down = loss();
            p(i) = saved;
            worst = std::max(worst, relative_error((*analytic[k].value)(i), (up - down) / (2 * step)));
        }
    }
    return worst;
}

/// ||analytic - fd|| / max(||analytic||, ||fd||) over every entry of `params`.
/// Suits whole objectives, where biases ahead of instance norm have exactly
/// zero gradient and an elementwise ratio would only measure roundoff.
inline double normwise_fd_error(const ParamList<double>& params, const ParamList<double>& analytic,
                                const std::function<double()>& loss, double step = 1e-6)
{
    double diff = 0, norm_a = 0, norm_fd = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix<double>& p = *params[k].value;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double saved = p(i);
            p(i) = saved + step;
            const double up = loss();
            p(i) = saved - step;
            const double down = loss();
            p(i) = saved;
            const double fd = (up - down) / (2 * step);
            const double a = (*analytic[k].value)(i);
            diff += (a - fd) * (a - fd);
            norm_a += a * a;
            norm_fd += fd * fd;
        }
    }
    return std::sqrt(diff) / std::max({std::sqrt(norm_a), std::sqrt(norm_fd), 1e-12});
}

/// Same as worst_fd_error, for the entries of one tensor.
inline double worst_fd_error(Tensor3<double>& x, const Tensor3<double>& analytic, const std::function<double()>& loss,
                             double step = 1e-5)
{
    double worst = 0;
    for (Eigen::Index i = 0; i < x.data.size(); ++i) {
        const double saved = x.data(i);
        x.data(i) = saved + step;
        const double up = loss();
        x.data(i) = saved - step;
        const double down = loss();
        x.data(i) = saved;
        worst = std::max(worst, relative_error(analytic.data(i), (up - down) / (2 * step)));
    }
    return worst;
}

} // namespace testing
