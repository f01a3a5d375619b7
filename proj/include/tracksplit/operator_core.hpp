#pragma once

#include <algorithm>
#include <cmath>

#include "tracksplit/core.hpp"

namespace tracksplit {

/**
 * @brief Dense self-adjoint operator X -> X*.
 *
 * The input matrix is symmetrised on construction and its eigendecomposition is cached,
 * so seminorms, operator order and Young companions are cheap afterwards.
 */
class SymOperator {
public:
    SymOperator() = default;

    explicit SymOperator(const Matrix& m)
    {
        if (m.rows() != m.cols()) throw DimensionError("SymOperator: matrix is not square");
        require_finite(m, "SymOperator");
        m_ = 0.5 * (m + m.transpose());
        if (m_.size() > 0) {
            Eigen::SelfAdjointEigenSolver<Matrix> eig(m_);
            if (eig.info() != Eigen::Success)
                throw std::domain_error("SymOperator: eigendecomposition failed");
            evals_ = eig.eigenvalues();
            evecs_ = eig.eigenvectors();
            norm_ = evals_.cwiseAbs().maxCoeff();
            psd_ = evals_(0) >= -1e-9 * norm_;
        } else {
            psd_ = true;
        }
    }

    static SymOperator identity(Index n, double scale = 1.0)
    {
        return SymOperator(scale * Matrix::Identity(n, n));
    }
    static SymOperator zero(Index n) { return SymOperator(Matrix::Zero(n, n)); }
    static SymOperator diagonal(const Vector& d) { return SymOperator(Matrix(d.asDiagonal())); }

    Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }
    bool psd_checked() const { return psd_; }
    const Vector& eigenvalues() const { return evals_; }
    const Matrix& eigenvectors() const { return evecs_; }
    double spectral_norm() const { return norm_; }
    double min_eigenvalue() const { return evals_.size() ? evals_(0) : 0.0; }
    double max_eigenvalue() const { return evals_.size() ? evals_(evals_.size() - 1) : 0.0; }

    Vector apply(const Vector& x) const
    {
        require_dim(x.size(), dim(), "SymOperator::apply");
        return m_ * x;
    }

    SymOperator scaled(double s) const { return SymOperator(s * m_); }

    friend SymOperator operator+(const SymOperator& a, const SymOperator& b)
    {
        require_dim(b.dim(), a.dim(), "SymOperator +");
        return SymOperator(a.m_ + b.m_);
    }
    friend SymOperator operator-(const SymOperator& a, const SymOperator& b)
    {
        require_dim(b.dim(), a.dim(), "SymOperator -");
        return SymOperator(a.m_ - b.m_);
    }

private:
    Matrix m_;
    Vector evals_;
    Matrix evecs_;
    double norm_ = 0.0;
    bool psd_ = false;
};

/// Antisymmetric operator; houses the primal-dual coupling Ξ.
class SkewOperator {
public:
    SkewOperator() = default;

    explicit SkewOperator(const Matrix& m)
    {
        if (m.rows() != m.cols()) throw DimensionError("SkewOperator: matrix is not square");
        require_finite(m, "SkewOperator");
        m_ = 0.5 * (m - m.transpose());
    }

    static SkewOperator zero(Index n) { return SkewOperator(Matrix::Zero(n, n)); }

    Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }

    Vector apply(const Vector& x) const
    {
        require_dim(x.size(), dim(), "SkewOperator::apply");
        return m_ * x;
    }

private:
    Matrix m_;
};

/// Primal/dual split of a product space with coupling K: Z -> Y*.
struct BlockShape {
    Index primal_dim = 0;
    Index dual_dim = 0;
    Matrix K;

    BlockShape() = default;
    explicit BlockShape(Matrix k) : primal_dim(k.cols()), dual_dim(k.rows()), K(std::move(k)) {}

    Index total_dim() const { return primal_dim + dual_dim; }
};

inline double seminorm(const SymOperator& M, const Vector& x)
{
    require_dim(x.size(), M.dim(), "seminorm");
    if (!M.psd_checked()) throw std::domain_error("seminorm: operator is not PSD-checked");
    double r = x.dot(M.matrix() * x);
    if (r < 0.0) {
        double scale = std::max(1.0, M.spectral_norm() * x.squaredNorm());
        if (r < -1e-12 * scale) throw std::domain_error("seminorm: negative radicand");
        r = 0.0;
    }
    return std::sqrt(r);
}

inline double seminorm_sq(const SymOperator& M, const Vector& x)
{
    double n = seminorm(M, x);
    return n * n;
}

inline double quad_form(const SymOperator& G, const Vector& x)
{
    require_dim(x.size(), G.dim(), "quad_form");
    return x.dot(G.matrix() * x);
}

/// Dual seminorm ‖x*‖_{M⁻¹}; components of x* in the null space of M are rejected.
inline double dual_seminorm(const SymOperator& M, const Vector& xs)
{
    require_dim(xs.size(), M.dim(), "dual_seminorm");
    if (!M.psd_checked()) throw std::domain_error("dual_seminorm: operator is not PSD-checked");
    const Vector c = M.eigenvectors().transpose() * xs;
    const double cut = 1e-12 * std::max(1.0, M.spectral_norm());
    double s = 0.0;
    for (Index i = 0; i < c.size(); ++i) {
        double lam = M.eigenvalues()(i);
        if (lam > cut) {
            s += c(i) * c(i) / lam;
        } else if (std::abs(c(i)) > 1e-10 * (1.0 + xs.norm())) {
            throw std::domain_error("dual_seminorm: covector has a component in the null space");
        }
    }
    return std::sqrt(s);
}

inline SymOperator young_companion(const SymOperator& G)
{
    if (G.dim() == 0) return G;
    const Matrix& V = G.eigenvectors();
    return SymOperator(V * G.eigenvalues().cwiseAbs().asDiagonal() * V.transpose());
}

inline bool operator_leq(const SymOperator& A, const SymOperator& B, double tol = 1e-9)
{
    require_dim(B.dim(), A.dim(), "operator_leq");
    SymOperator d = B - A;
    return d.min_eigenvalue() >= -tol * std::max(1.0, d.spectral_norm());
}

inline Matrix block_diag(const Matrix& a, const Matrix& b)
{
    Matrix m = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    m.topLeftCorner(a.rows(), a.cols()) = a;
    m.bottomRightCorner(b.rows(), b.cols()) = b;
    return m;
}

inline SymOperator pdps_preconditioner(double tau, double sigma, const SymOperator& Mz,
                                       const SymOperator& My, const Matrix& K)
{
    if (!(tau > 0.0) || !(sigma > 0.0))
        throw std::invalid_argument("pdps_preconditioner: step sizes must be positive");
    require_dim(K.cols(), Mz.dim(), "pdps_preconditioner: K columns");
    require_dim(K.rows(), My.dim(), "pdps_preconditioner: K rows");
    const Index nz = Mz.dim(), ny = My.dim();
    Matrix m(nz + ny, nz + ny);
    m.topLeftCorner(nz, nz) = Mz.matrix() / tau;
    m.topRightCorner(nz, ny) = -K.transpose();
    m.bottomLeftCorner(ny, nz) = -K;
    m.bottomRightCorner(ny, ny) = My.matrix() / sigma;
    return SymOperator(m);
}

inline SkewOperator pdps_skew(const Matrix& K)
{
    const Index nz = K.cols(), ny = K.rows();
    Matrix m = Matrix::Zero(nz + ny, nz + ny);
    m.topRightCorner(nz, ny) = K.transpose();
    m.bottomLeftCorner(ny, nz) = -K;
    return SkewOperator(m);
}

inline bool pdps_step_check(double tau, double sigma, double lambda, const SymOperator& Mz,
                            const SymOperator& My, const Matrix& Kz, const Matrix& Ky,
                            double tol = 1e-9)
{
    require_dim(Ky.rows(), My.dim(), "pdps_step_check: K_y rows");
    require_dim(Kz.cols(), Mz.dim(), "pdps_step_check: K_z columns");
    require_dim(Ky.cols(), Kz.rows(), "pdps_step_check: K_y·K_z inner dimension");
    bool dual_ok = operator_leq(SymOperator(Ky * Ky.transpose()), My, tol);
    SymOperator lhs(tau * lambda * Mz.matrix() + tau * sigma * Kz.transpose() * Kz);
    return dual_ok && operator_leq(lhs, Mz, tol);
}

inline bool preconditioner_bounds_check(const SymOperator& M, const SymOperator& Mz,
                                        const SymOperator& My, double lambda, double gamma_z,
                                        double gamma_y, double tau, double sigma, double tol = 1e-9)
{
    require_dim(M.dim(), Mz.dim() + My.dim(), "preconditioner_bounds_check");
    const Index ny = My.dim();
    SymOperator lower(block_diag(lambda * Mz.matrix(), Matrix::Zero(ny, ny)));
    double gamma = std::min(gamma_z * tau, gamma_y * sigma) / 2.0;
    SymOperator upper(block_diag(gamma_z * Mz.matrix(), gamma_y * My.matrix()));
    return operator_leq(lower, M, tol) && operator_leq(M.scaled(gamma), upper, tol);
}

} // namespace tracksplit
