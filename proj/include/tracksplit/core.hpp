#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tracksplit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SingularError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StepSizeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require_dim(Index got, Index want, const std::string& what)
{
    if (got != want)
        throw DimensionError(what + ": expected dimension " + std::to_string(want) + ", got " +
                             std::to_string(got));
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const std::string& what)
{
    if (!m.allFinite()) throw std::domain_error(what + ": non-finite entries");
}

inline void require_finite(double v, const std::string& what)
{
    if (!std::isfinite(v)) throw std::domain_error(what + ": non-finite value");
}

/// Flattens a matrix column-major into a vector.
inline Vector flatten(const Matrix& m)
{
    return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unflatten(const Vector& v, Index rows, Index cols)
{
    require_dim(v.size(), rows * cols, "unflatten");
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline double spectral_norm(const Matrix& m)
{
    if (m.size() == 0) return 0.0;
    require_finite(m, "spectral_norm");
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

} // namespace tracksplit
