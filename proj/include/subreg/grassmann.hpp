#pragma once

#include <span>
#include <vector>

#include "subreg/numerics.hpp"

namespace subreg {

/// Orthonormal representative of a point on Gr(p, n).
class OrthoBasis {
public:
    OrthoBasis() = default;

    /// Wraps a matrix that is already column-orthonormal (checked to `tol`).
    static OrthoBasis from_orthonormal(Matrix m, double tol = 1e-10);
    /// Orthonormalizes an arbitrary full-rank matrix with Cholesky-QR2.
    static OrthoBasis orthonormalize(const Matrix& m);
    /// Orthonormalizes with Householder QR (rank-revealing failure only).
    static OrthoBasis orthonormalize_householder(const Matrix& m);

    Index ambient_dim() const { return m_.rows(); }
    Index dim() const { return m_.cols(); }
    const Matrix& matrix() const { return m_; }

private:
    explicit OrthoBasis(Matrix m) : m_(std::move(m)) {}
    Matrix m_;
};

/// Horizontal tangent vector: base^T delta = 0.
struct TangentVector {
    OrthoBasis base;
    Matrix delta;

    TangentVector() = default;
    TangentVector(OrthoBasis b, Matrix d, double tol = 1e-10);

    double norm() const { return delta.norm(); }
};

struct PrincipalAngles {
    Vector angles;  // radians, ascending, in [0, pi/2]
};

enum class LossKind { L1, L2, L2Stab, Z2 };

enum class LeastSquaresPath { NormalEquations, CholeskyQr2 };

/// p - ||Q_B^T Q_A||_F^2 for A (n x k), B (n x p), p <= k.
double loss_l1(const Matrix& a, const Matrix& b);

/// min_u ||A u - Q_B z||^2, the stochastic (Hutchinson) variant of L1.
double loss_l2_stoch(const Matrix& a, const Matrix& b, const Vector& z,
                     LeastSquaresPath path = LeastSquaresPath::NormalEquations);

/// Gradient of loss_l1 with respect to A.
Matrix grad_loss_l1(const Matrix& a, const Matrix& b);
/// Gradient of loss_l2_stoch with respect to A (both least-squares paths).
Matrix grad_loss_l2(const Matrix& a, const Matrix& b, const Vector& z,
                    LeastSquaresPath path = LeastSquaresPath::NormalEquations);
/// Dispatch on loss kind; `z` is ignored for L1.
Matrix grad_loss(LossKind kind, const Matrix& a, const Matrix& b, const Vector& z = {});
double loss_value(LossKind kind, const Matrix& a, const Matrix& b, const Vector& z = {});

/// min(||v - u||, ||v + u||).
double loss_z2(const Vector& v, const Vector& u);
/// Gradient of loss_z2 with respect to v (zero at the minimizer).
Vector grad_loss_z2(const Vector& v, const Vector& u);

PrincipalAngles principal_angles(const OrthoBasis& a, const OrthoBasis& b);

/// Logarithm map at u0. Throws CutLocus when u0^T u1 is numerically singular.
TangentVector grassmann_log(const OrthoBasis& u0, const OrthoBasis& u1, double cut_tol = 1e-10);

/// Point at time t on the geodesic through delta.base with velocity delta.
OrthoBasis grassmann_exp(const TangentVector& delta, double t);

/// One step of the geodesic embedding: the dominant velocity direction is
/// appended to the base and frozen, so ||velocity||^2 drops by sigma_1^2 and
/// the new geodesic contains the old one for every t.
struct GeodesicEmbedding {
    TangentVector geodesic;  // base n x (k+1), velocity with sigma_1 removed
    double frozen_sigma = 0.0;
};

GeodesicEmbedding embed_geodesic(const TangentVector& delta);

/// Piecewise-geodesic embedding of a sampled curve on Gr(k, n) into Gr(r, n).
class EmbeddedCurve {
public:
    struct Piece {
        TangentVector geodesic;  // base W(t_i) (n x r), velocity per unit time
        double original_speed = 0.0;
    };

    EmbeddedCurve(std::vector<double> times, std::vector<Piece> pieces);

    /// W(t); pieces are half-open [t_i, t_{i+1}), the last one closed.
    OrthoBasis at(double t) const;
    /// W evaluated at every sample time.
    std::vector<OrthoBasis> samples() const;

    std::size_t intervals() const { return pieces_.size(); }
    const std::vector<double>& times() const { return times_; }
    const Piece& piece(std::size_t i) const { return pieces_.at(i); }
    double embedded_speed(std::size_t i) const { return pieces_.at(i).geodesic.norm(); }
    double original_speed(std::size_t i) const { return pieces_.at(i).original_speed; }

private:
    std::vector<double> times_;
    std::vector<Piece> pieces_;
};

EmbeddedCurve embed_curve(std::span<const OrthoBasis> samples, std::span<const double> times, Index r);

/// sqrt(loss_l1(W, V) / p): RMS sine of the principal angles.
double relative_subspace_error(const OrthoBasis& w, const OrthoBasis& v);

/// 1/2 ||W W^T - V V^T||_F^2 - (r - k)/2, evaluated through loss_l1.
double alignment_loss(const OrthoBasis& w, const OrthoBasis& v);

/// Orthonormal basis of the numerical span of all columns.
OrthoBasis subspace_union(std::span<const OrthoBasis> bases, double tol);

}  // namespace subreg
