#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "subreg/error.hpp"

namespace subreg {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class SparseOperator;

/// Default tolerances. Every routine that uses one takes it as a defaulted
/// argument so experiment configs can override it.
struct Tolerances {
    static constexpr double rank = 1e-12;            // qr_thin R-diagonal ratio
    static constexpr double cholesky_pivot = 1.5e-8;  // Cholesky-QR L-diagonal ratio
    static constexpr double eig_residual = 1e-8;      // relative to lambda_max
    static constexpr double lyapunov_residual = 1e-10;
};

struct QrResult {
    Matrix q;  // n x p, orthonormal columns
    Matrix r;  // p x p upper triangular, positive diagonal
};

/// Householder thin QR with the sign convention diag(R) > 0.
QrResult qr_thin(const Matrix& m, double rank_tol = Tolerances::rank);

/// Two passes of Cholesky-QR. Throws RankDeficient when either Gram matrix
/// is numerically singular.
Matrix cholesky_qr2(const Matrix& m, double pivot_tol = Tolerances::cholesky_pivot);

/// Shifted Cholesky-QR pre-pass followed by Cholesky-QR2; handles condition
/// numbers up to about 1/sqrt(eps) squared.
Matrix shifted_cholesky_qr3(const Matrix& m, double pivot_tol = Tolerances::cholesky_pivot);

struct EigDecomposition {
    Vector values;   // ascending
    Matrix vectors;  // orthonormal columns
};

struct EigOptions {
    Index dense_threshold = 1024;
    double residual_tol = Tolerances::eig_residual;
    Index max_krylov = 0;  // 0: automatic
    std::uint64_t seed = 0x5eed;
};

/// The m smallest eigenpairs of a symmetric operator. Dense solver for small
/// dimensions, shift-invert Lanczos with full reorthogonalization above
/// `dense_threshold`.
EigDecomposition sym_eig_smallest(const SparseOperator& op, Index m, const EigOptions& opts = {});

/// Full dense symmetric eigendecomposition (ascending).
EigDecomposition sym_eig_dense(const Matrix& sym);

/// Solves A X + X A^T + Q = 0 for stable A (Bartels-Stewart on the complex
/// Schur form). Throws UnstableSystem if the spectral abscissa is >= 0.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

using VectorField = std::function<Vector(double, const Vector&)>;

/// Classical RK4 from t0 to t1 in `steps` equal steps (t1 < t0 integrates
/// backward). Returns steps + 1 states including y0.
std::vector<Vector> rk4_integrate(const VectorField& f, const Vector& y0, double t0, double t1,
                                  int steps);

/// Frobenius norm of Q^T Q - I.
double orthonormality_defect(const Matrix& q);

/// Deterministic seed derivation for per-sample substreams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Sign convention for eigen/singular vectors: the largest-magnitude entry of
/// every column is made positive.
void canonicalize_signs(Matrix& vectors);

}  // namespace subreg
