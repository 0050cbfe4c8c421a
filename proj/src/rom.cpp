#include <cmath>

#include "subreg/solvers.hpp"

namespace subreg {

RomBasis::RomBasis(Matrix b, RomSource s) : basis(std::move(b)), source(s) {
    require(basis.cols() <= basis.rows(), "RomBasis: more columns than rows");
    if (basis.cols() > 0 && orthonormality_defect(basis) > 1e-10)
        fail(ErrorKind::InvalidArgument, "RomBasis: columns are not orthonormal");
}

namespace {

Matrix weighted(const SnapshotMatrix& s) {
    require(s.weights.size() == s.snapshots(), "SnapshotMatrix: one weight per snapshot");
    require((s.weights.array() > 0.0).all() && s.values.allFinite(), "SnapshotMatrix: positive weights and finite values");
    return s.values * s.weights.cwiseSqrt().asDiagonal();
}

}  // namespace

Vector pod_singular_values(const SnapshotMatrix& s) {
    return Eigen::BDCSVD<Matrix>(weighted(s)).singularValues();
}

RomBasis pod_basis(const SnapshotMatrix& s, Index m, double rank_tol) {
    require(m >= 0, "pod_basis: m must be non-negative");
    if (m == 0) return RomBasis(Matrix(s.space_dim(), 0), RomSource::LocalPod);
    Eigen::BDCSVD<Matrix> svd(weighted(s), Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv[i] > rank_tol * sv[0]) ++rank;
    if (sv.size() == 0 || sv[0] == 0.0 || m > rank)
        fail(ErrorKind::RankDeficient, "pod_basis: m = " + std::to_string(m) + " exceeds the numerical rank " + std::to_string(rank));
    Matrix u = svd.matrixU().leftCols(m);
    canonicalize_signs(u);
    return RomBasis(std::move(u), RomSource::LocalPod);
}

double pod_residual_energy(const SnapshotMatrix& s, const Matrix& basis) {
    const Matrix ws = weighted(s);
    if (basis.cols() == 0) return ws.squaredNorm();
    return (ws - basis * (basis.transpose() * ws)).squaredNorm();
}

SnapshotMatrix pod_rom_integrate(const FieldSample& nu, const FieldSample& u0, const RomBasis& basis,
                                 const BurgersOptions& opts) {
    require(nu.grid.dims() == 1 && u0.grid == nu.grid, "pod_rom_integrate: 1D fields on one grid required");
    require(basis.basis.rows() == nu.grid.size(), "pod_rom_integrate: basis dimension mismatch");
    require(opts.nt >= 2 && opts.substeps >= 1 && opts.t_end > 0.0, "pod_rom_integrate: invalid time grid");
    const Matrix& v = basis.basis;
    const Index n = nu.grid.size();
    const double dx = nu.grid.spacing(0);
    const double dt = opts.t_end / static_cast<double>((opts.nt - 1) * opts.substeps);

    const Matrix kv = assemble_elliptic(nu).apply(v);
    const Matrix lhs = Matrix::Identity(v.cols(), v.cols()) + dt * (v.transpose() * kv);
    const Eigen::LLT<Matrix> solver(lhs);

    SnapshotMatrix snap;
    snap.values.resize(n, opts.nt);
    snap.weights = Vector::Constant(opts.nt, opts.t_end / static_cast<double>(opts.nt - 1));
    snap.weights[0] *= 0.5;
    snap.weights[opts.nt - 1] *= 0.5;

    Vector a = v.transpose() * u0.values;
    snap.values.col(0) = v * a;
    for (Index level = 1; level < opts.nt; ++level) {
        for (Index s = 0; s < opts.substeps; ++s) {
            const Vector u = v * a;
            check_cfl(u, dt, dx);
            a = solver.solve(v.transpose() * burgers_advect(u, dt, dx));
        }
        if (!a.allFinite()) fail(ErrorKind::NonFiniteState, "pod_rom_integrate: non-finite state");
        snap.values.col(level) = v * a;
    }
    return snap;
}

double trajectory_error(const SnapshotMatrix& approx, const SnapshotMatrix& reference) {
    require(approx.values.rows() == reference.values.rows() && approx.values.cols() == reference.values.cols(),
            "trajectory_error: shape mismatch");
    const double ref = reference.values.norm();
    const double diff = (approx.values - reference.values).norm();
    return ref > 0.0 ? diff / ref : diff;
}

}  // namespace subreg
