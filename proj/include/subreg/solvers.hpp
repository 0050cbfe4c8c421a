#pragma once

#include <optional>
#include <vector>

#include "subreg/grassmann.hpp"
#include "subreg/problems.hpp"
#include "subreg/sparse_operator.hpp"

namespace subreg {

struct SolverReport {
    Index iterations = 0;
    std::vector<double> residuals;  // relative 2-norm, one entry per iteration starting at 0
    bool converged = false;
    double wall_seconds = 0.0;
};

struct SolveResult {
    Vector x;
    SolverReport report;
};

/// Conjugate gradient from x0 = 0. Throws MaxIterations unless
/// `allow_unconverged` is set.
SolveResult cg(const SparseOperator& a, const Vector& b, double tol, Index maxit, bool allow_unconverged = false);

/// Deflated CG: x0 = V (V^T A V)^-1 V^T b, search directions re-projected so
/// residuals stay orthogonal to span(V). V may have zero columns.
SolveResult deflated_cg(const SparseOperator& a, const Vector& b, const Matrix& v, double tol, Index maxit,
                        bool allow_unconverged = false);

/// Two-grid cycle: damped Jacobi, coarse correction on span(V), damped Jacobi.
class TwoGrid {
public:
    TwoGrid(const SparseOperator& a, Matrix v, double omega);

    /// One cycle for A x = b starting from x.
    Vector apply(const Vector& b, const Vector& x) const;
    /// Error propagation T e = S (I - V E^-1 V^T A) S e.
    Vector propagate(const Vector& e) const;
    /// Power-method estimate of the spectral radius of T (A-inner-product
    /// Rayleigh quotient, stops when the relative change drops below tol).
    double rho(Index power_iters = 200, std::uint64_t seed = 0x7e57, double tol = 1e-8) const;

private:
    Vector smooth(const Vector& b, const Vector& x) const;
    Vector coarse(const Vector& b, const Vector& x) const;

    SparseOperator a_;
    Matrix v_;
    Matrix av_;
    Eigen::LLT<Matrix> coarse_;
    Vector dinv_;
    double omega_;
};

Vector two_grid_apply(const SparseOperator& a, const Matrix& v, double omega, const Vector& b, const Vector& x);
double two_grid_rho(const SparseOperator& a, const Matrix& v, double omega, Index power_iters = 200,
                    std::uint64_t seed = 0x7e57);

enum class RomSource { LocalPod, GlobalPod, Predicted, Oracle };

struct RomBasis {
    Matrix basis;  // n x m, orthonormal columns (m may be 0)
    RomSource source = RomSource::LocalPod;

    RomBasis() = default;
    RomBasis(Matrix b, RomSource s);
    Index dim() const { return basis.cols(); }
};

/// Top-m left singular vectors of S diag(sqrt(w)). Throws RankDeficient when
/// m exceeds the numerical rank.
RomBasis pod_basis(const SnapshotMatrix& s, Index m, double rank_tol = 1e-12);
/// Weighted snapshot energy outside span(basis): sum_j w_j ||(I - P) s_j||^2.
double pod_residual_energy(const SnapshotMatrix& s, const Matrix& basis);
/// Weighted singular values of the snapshot matrix, descending.
Vector pod_singular_values(const SnapshotMatrix& s);

/// Galerkin ROM of burgers_integrate: lift, advect on the full grid, project,
/// then implicit reduced diffusion. Returns the lifted trajectory.
SnapshotMatrix pod_rom_integrate(const FieldSample& nu, const FieldSample& u0, const RomBasis& basis,
                                 const BurgersOptions& opts = {});

/// Relative Frobenius error between two trajectories.
double trajectory_error(const SnapshotMatrix& approx, const SnapshotMatrix& reference);

struct BalancedReduction {
    Matrix projection;    // T-bar, n x r
    Matrix left_inverse;  // r x n
    Vector hankel;        // all Hankel singular values, descending
    Matrix transform;     // full balancing transform T (n x n) when Gramians are nonsingular
    Matrix transform_inverse;
};

/// Square-root-free balancing through Gramian eigendecompositions. Throws
/// UnstableSystem for non-Hurwitz A.
BalancedReduction balanced_truncation(const Matrix& a, const Matrix& b, const Matrix& c, Index r);

struct LqrOptions {
    double lambda = 1.0;
    double t_end = 5.0;
    Index nt = 128;      // stored time levels including t = 0
    double stability = 2.0;  // bound on dt * rho(A) for the RK4 steps
};

struct LqrResult {
    Vector times;      // nt levels
    Matrix controls;   // m x nt
    Matrix states;     // n x nt (lifted for reduced runs)
    double cost = 0.0;
    double cost_uncontrolled = 0.0;
    double e_s = 0.0;  // relative final-state error vs full order (reduced runs)
    double e_o = 0.0;  // relative final-observation error vs full order
    bool e_o_defined = true;
    Index rk4_steps = 0;
};

/// Finite-horizon LQR for the augmented heat system: Riccati equations for
/// C11, C12 integrated backward with RK4, control applied forward. With a
/// basis the pipeline runs in reduced coordinates (Galerkin, plus the
/// constant-forcing coordinate) and e_s, e_o compare against full order.
LqrResult lqr_solve(const HeatControlSystem& sys, const LqrOptions& opts, const std::optional<Matrix>& basis = {});

}  // namespace subreg
