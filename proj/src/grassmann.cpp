#include "subreg/grassmann.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace subreg {

OrthoBasis OrthoBasis::from_orthonormal(Matrix m, double tol) {
    require(m.cols() >= 1 && m.rows() >= m.cols(), "OrthoBasis: need n >= p >= 1");
    if (!(orthonormality_defect(m) <= tol)) {
        fail(ErrorKind::InvalidArgument, "OrthoBasis: columns are not orthonormal");
    }
    return OrthoBasis(std::move(m));
}

OrthoBasis OrthoBasis::orthonormalize(const Matrix& m) { return OrthoBasis(cholesky_qr2(m)); }

OrthoBasis OrthoBasis::orthonormalize_householder(const Matrix& m) { return OrthoBasis(qr_thin(m).q); }

TangentVector::TangentVector(OrthoBasis b, Matrix d, double tol) : base(std::move(b)), delta(std::move(d)) {
    require(delta.rows() == base.ambient_dim() && delta.cols() == base.dim(),
            "TangentVector: shape must match the base point");
    const double scale = std::max(1.0, delta.norm());
    if (!((base.matrix().transpose() * delta).norm() <= tol * scale)) {
        fail(ErrorKind::InvalidArgument, "TangentVector: delta is not horizontal at the base point");
    }
}

namespace {

// ||(I - Qa Qa^T) Qb||_F^2 = p - ||Qb^T Qa||_F^2 without the cancellation
double projection_residual(const Matrix& qa, const Matrix& qb) {
    return (qb - qa * (qa.transpose() * qb)).squaredNorm();
}

}  // namespace

double loss_l1(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "loss_l1: ambient dimensions differ");
    require(b.cols() <= a.cols(), "loss_l1: need p <= k");
    return projection_residual(qr_thin(a).q, qr_thin(b).q);
}

namespace {

struct LeastSquares {
    Vector coeffs;    // u* = A^+ y
    Vector residual;  // y - A u*
};

Matrix gram_of(const Matrix& m) {
    Matrix g = Matrix::Zero(m.cols(), m.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
    return g;
}

LeastSquares solve_least_squares(const Matrix& a, const Vector& y, LeastSquaresPath path) {
    LeastSquares out;
    if (path == LeastSquaresPath::NormalEquations) {
        Eigen::LLT<Matrix> llt(gram_of(a));
        if (llt.info() != Eigen::Success) {
            fail(ErrorKind::RankDeficient, "loss_l2: normal equations are not positive definite");
        }
        out.coeffs = llt.solve(a.transpose() * y);
    } else {
        Matrix q;
        try {
            q = cholesky_qr2(a);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::RankDeficient) throw;
            q = shifted_cholesky_qr3(a);
        }
        const Matrix r = q.transpose() * a;
        out.coeffs = r.triangularView<Eigen::Upper>().solve(q.transpose() * y);
        // residual through the orthonormal factor: stays accurate when A is ill-conditioned
        out.residual = y - q * (q.transpose() * y);
        return out;
    }
    out.residual = y - a * out.coeffs;
    return out;
}

// Q_B z with the sign convention of qr_thin, without forming Q_B. The normal
// equations path uses B R^-1 z with R the Cholesky factor of B^T B.
Vector orthonormal_combination(const Matrix& b, const Vector& z, LeastSquaresPath path) {
    require(b.rows() >= b.cols() && b.cols() >= 1, "loss_l2: need n >= p >= 1");
    if (path == LeastSquaresPath::NormalEquations) {
        const Eigen::LLT<Matrix> llt(gram_of(b));
        const Vector d = llt.matrixLLT().diagonal();
        if (llt.info() != Eigen::Success || d.minCoeff() <= Tolerances::rank * d.maxCoeff())
            fail(ErrorKind::RankDeficient, "loss_l2: B is numerically rank deficient");
        return b * llt.matrixU().solve(z);
    }
    const Eigen::HouseholderQR<Matrix> qr(b);
    const Vector d = qr.matrixQR().diagonal();
    const double largest = d.cwiseAbs().maxCoeff();
    if (!(largest > 0.0) || d.cwiseAbs().minCoeff() <= Tolerances::rank * largest)
        fail(ErrorKind::RankDeficient, "loss_l2: B is numerically rank deficient");
    Vector y = Vector::Zero(b.rows());
    for (Index i = 0; i < b.cols(); ++i) y[i] = d[i] < 0.0 ? -z[i] : z[i];
    y.applyOnTheLeft(qr.householderQ());
    return y;
}

}  // namespace

double loss_l2_stoch(const Matrix& a, const Matrix& b, const Vector& z, LeastSquaresPath path) {
    require(a.rows() == b.rows(), "loss_l2: ambient dimensions differ");
    require(z.size() == b.cols(), "loss_l2: z must have one entry per column of B");
    return solve_least_squares(a, orthonormal_combination(b, z, path), path).residual.squaredNorm();
}

Matrix grad_loss_l1(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows() && b.cols() <= a.cols(), "grad_loss_l1: shape mismatch");
    const QrResult qra = qr_thin(a);
    const Matrix qb = qr_thin(b).q;
    const Matrix& qa = qra.q;
    const Matrix overlap = qb.transpose() * qa;  // p x k
    Matrix perp = qb * overlap;                   // P_B Q_A
    perp -= qa * (qa.transpose() * perp);         // (I - P_A) P_B Q_A
    // -2 (I - P_A) P_B Q_A R^{-T}
    const Matrix rt = qra.r.transpose();
    return -2.0 * rt.triangularView<Eigen::Lower>().solve<Eigen::OnTheRight>(perp);
}

Matrix grad_loss_l2(const Matrix& a, const Matrix& b, const Vector& z, LeastSquaresPath path) {
    require(a.rows() == b.rows() && z.size() == b.cols(), "grad_loss_l2: shape mismatch");
    const Matrix qb = qr_thin(b).q;
    const LeastSquares ls = solve_least_squares(a, qb * z, path);
    return -2.0 * ls.residual * ls.coeffs.transpose();
}

Matrix grad_loss(LossKind kind, const Matrix& a, const Matrix& b, const Vector& z) {
    switch (kind) {
        case LossKind::L1: return grad_loss_l1(a, b);
        case LossKind::L2: return grad_loss_l2(a, b, z, LeastSquaresPath::NormalEquations);
        case LossKind::L2Stab: return grad_loss_l2(a, b, z, LeastSquaresPath::CholeskyQr2);
        case LossKind::Z2: {
            require(a.cols() == 1 && b.cols() == 1, "grad_loss: Z2 works on single vectors");
            return grad_loss_z2(a.col(0), b.col(0));
        }
    }
    fail(ErrorKind::InvalidArgument, "grad_loss: unknown loss kind");
}

double loss_value(LossKind kind, const Matrix& a, const Matrix& b, const Vector& z) {
    switch (kind) {
        case LossKind::L1: return loss_l1(a, b);
        case LossKind::L2: return loss_l2_stoch(a, b, z, LeastSquaresPath::NormalEquations);
        case LossKind::L2Stab: return loss_l2_stoch(a, b, z, LeastSquaresPath::CholeskyQr2);
        case LossKind::Z2: {
            require(a.cols() == 1 && b.cols() == 1, "loss_value: Z2 works on single vectors");
            return loss_z2(a.col(0), b.col(0));
        }
    }
    fail(ErrorKind::InvalidArgument, "loss_value: unknown loss kind");
}

double loss_z2(const Vector& v, const Vector& u) {
    require(v.size() == u.size(), "loss_z2: length mismatch");
    return std::min((v - u).norm(), (v + u).norm());
}

Vector grad_loss_z2(const Vector& v, const Vector& u) {
    require(v.size() == u.size(), "grad_loss_z2: length mismatch");
    const Vector minus = v - u;
    const Vector plus = v + u;
    const Vector& d = minus.norm() <= plus.norm() ? minus : plus;
    const double n = d.norm();
    if (n == 0.0) return Vector::Zero(v.size());
    return d / n;
}

PrincipalAngles principal_angles(const OrthoBasis& a, const OrthoBasis& b) {
    require(a.ambient_dim() == b.ambient_dim(), "principal_angles: ambient dimensions differ");
    // x spans the larger subspace
    const Matrix& x = a.dim() >= b.dim() ? a.matrix() : b.matrix();
    const Matrix& y = a.dim() >= b.dim() ? b.matrix() : a.matrix();
    const Index q = y.cols();

    const Matrix xy = x.transpose() * y;
    const Vector cosines = Eigen::JacobiSVD<Matrix>(xy).singularValues();  // descending
    const Matrix rest = y - x * xy;
    Vector sines = Eigen::JacobiSVD<Matrix>(rest).singularValues();  // descending
    std::sort(sines.data(), sines.data() + sines.size());           // ascending

    PrincipalAngles out;
    out.angles.resize(q);
    for (Index i = 0; i < q; ++i) {
        const double c = std::clamp(cosines(i), 0.0, 1.0);
        const double s = i < sines.size() ? std::clamp(sines(i), 0.0, 1.0) : 0.0;
        // arcsin is accurate for small angles, arccos for large ones
        out.angles(i) = c * c >= 0.5 ? std::asin(s) : std::acos(c);
    }
    std::sort(out.angles.data(), out.angles.data() + q);
    return out;
}

TangentVector grassmann_log(const OrthoBasis& u0, const OrthoBasis& u1, double cut_tol) {
    require(u0.ambient_dim() == u1.ambient_dim() && u0.dim() == u1.dim(), "grassmann_log: shape mismatch");
    const Matrix& x = u0.matrix();
    const Matrix m = x.transpose() * u1.matrix();
    Eigen::JacobiSVD<Matrix> msvd(m);
    if (!(msvd.singularValues().minCoeff() >= cut_tol)) {
        fail(ErrorKind::CutLocus, "grassmann_log: target lies on the cut locus of the base point");
    }
    Matrix perp = u1.matrix() - x * m;
    // perp * M^{-1}
    const Matrix l = m.transpose().partialPivLu().solve(perp.transpose()).transpose();
    Eigen::JacobiSVD<Matrix> svd(l, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector angles = svd.singularValues().array().atan().matrix();
    Matrix delta = svd.matrixU() * angles.asDiagonal() * svd.matrixV().transpose();
    delta -= x * (x.transpose() * delta);
    return TangentVector(u0, std::move(delta));
}

OrthoBasis grassmann_exp(const TangentVector& delta, double t) {
    const Matrix& x = delta.base.matrix();
    if (delta.delta.norm() == 0.0 || t == 0.0) return delta.base;
    Eigen::JacobiSVD<Matrix> svd(delta.delta, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues() * t;
    const Matrix& y = svd.matrixV();
    Matrix out = x * y * s.array().cos().matrix().asDiagonal() * y.transpose() +
                 svd.matrixU() * s.array().sin().matrix().asDiagonal() * y.transpose();
    return OrthoBasis::from_orthonormal(std::move(out));
}

double relative_subspace_error(const OrthoBasis& w, const OrthoBasis& v) {
    require(v.dim() <= w.dim(), "relative_subspace_error: need p <= r");
    return std::sqrt(projection_residual(w.matrix(), v.matrix()) / static_cast<double>(v.dim()));
}

double alignment_loss(const OrthoBasis& w, const OrthoBasis& v) {
    require(v.dim() <= w.dim(), "alignment_loss: need k <= r");
    return projection_residual(w.matrix(), v.matrix());
}

OrthoBasis subspace_union(std::span<const OrthoBasis> bases, double tol) {
    require(!bases.empty(), "subspace_union: no bases");
    const Index n = bases.front().ambient_dim();
    Index total = 0;
    for (const auto& b : bases) {
        require(b.ambient_dim() == n, "subspace_union: ambient dimensions differ");
        total += b.dim();
    }
    Matrix stacked(n, total);
    Index col = 0;
    for (const auto& b : bases) {
        stacked.middleCols(col, b.dim()) = b.matrix();
        col += b.dim();
    }
    Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeThinU);
    Index rank = 0;
    while (rank < svd.singularValues().size() && svd.singularValues()(rank) > tol) ++rank;
    require(rank >= 1, "subspace_union: all singular values below tolerance");
    Matrix u = svd.matrixU().leftCols(rank);
    canonicalize_signs(u);
    return OrthoBasis::from_orthonormal(std::move(u));
}

}  // namespace subreg
