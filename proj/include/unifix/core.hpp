#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace unifix {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Errors. Every module throws a subclass of Error so that callers (the CLI in
// particular) can map failures onto exit codes without string matching.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidShapeError : public Error {
public:
    using Error::Error;
};

class InvalidLabelError : public Error {
public:
    using Error::Error;
};

class InvalidStateError : public Error {
public:
    using Error::Error;
};

class InvalidMomentsError : public Error {
public:
    using Error::Error;
};

class InsufficientSamplesError : public Error {
public:
    using Error::Error;
};

class TrainingDivergedError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A channels x height x width array. Channels are rows, pixels are columns in
/// row-major pixel order (index = i * width + j), so every column holds the
/// channel vector of a single pixel contiguously.
template <typename Scalar>
struct Tensor3 {
    Matrix<Scalar> data;
    int height = 0;
    int width = 0;

    Tensor3() = default;
    Tensor3(int channels, int h, int w) : data(Matrix<Scalar>::Zero(channels, h * w)), height(h), width(w) {}
    Tensor3(Matrix<Scalar> values, int h, int w) : data(std::move(values)), height(h), width(w) {}

    static Tensor3 zeros(int channels, int h, int w) { return Tensor3(channels, h, w); }
    static Tensor3 constant(int channels, int h, int w, Scalar v)
    {
        Tensor3 t(channels, h, w);
        t.data.setConstant(v);
        return t;
    }

    int channels() const { return static_cast<int>(data.rows()); }
    int pixels() const { return height * width; }

    Scalar& operator()(int c, int i, int j) { return data(c, i * width + j); }
    Scalar operator()(int c, int i, int j) const { return data(c, i * width + j); }

    bool same_shape(const Tensor3& other) const
    {
        return channels() == other.channels() && height == other.height && width == other.width;
    }

    bool all_finite() const { return data.allFinite(); }

    template <typename Other>
    Tensor3<Other> cast() const
    {
        return Tensor3<Other>(data.template cast<Other>(), height, width);
    }
};

/// Feature maps and images share the same storage; the aliases name the role.
template <typename Scalar>
using FeatureMap = Tensor3<Scalar>;

using Image = Tensor3<float>;

std::string shape_string(int c, int h, int w);

template <typename Scalar>
std::string shape_string(const Tensor3<Scalar>& t)
{
    return shape_string(t.channels(), t.height, t.width);
}

template <typename Scalar>
void require_same_shape(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b, const char* what)
{
    if (!a.same_shape(b)) {
        throw InvalidShapeError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                                shape_string(b));
    }
}

// ---------------------------------------------------------------------------
// Seeding. Every random stream in the library is derived from a base seed and
// a small tuple of stream identifiers so that results never depend on the
// order in which streams are consumed.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base)
{
    return splitmix64(base);
}

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t next, Rest... rest)
{
    return derive_seed(splitmix64(base) ^ splitmix64(next + 0x632be59bd9b4e019ULL), rest...);
}

std::uint64_t hash_name(const std::string& name);

using Rng = std::mt19937_64;

/// Uniform draw in [lo, hi) that does not depend on the standard library's
/// distribution implementation.
inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0)
{
    const double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
    return lo + (hi - lo) * u;
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive)
{
    const auto span = static_cast<std::uint64_t>(hi_inclusive - lo + 1);
    return lo + static_cast<int>(rng() % span);
}

/// Box-Muller normal draw.
inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0)
{
    double u1 = uniform(rng);
    while (u1 <= 0.0) u1 = uniform(rng);
    const double u2 = uniform(rng);
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Fisher-Yates permutation of [0, n) driven by `seed`.
inline std::vector<int> seeded_permutation(int n, std::uint64_t seed)
{
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i)
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(uniform_int(rng, 0, i))]);
    return idx;
}

template <typename Scalar>
Matrix<Scalar> random_normal(int rows, int cols, double stddev, Rng& rng)
{
    Matrix<Scalar> m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(normal(rng, 0.0, stddev));
    return m;
}

template <typename Scalar>
Matrix<Scalar> random_uniform(int rows, int cols, double lo, double hi, Rng& rng)
{
    Matrix<Scalar> m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(uniform(rng, lo, hi));
    return m;
}

} // namespace unifix
