#include "subreg/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "subreg/sparse_operator.hpp"

namespace subreg {

QrResult qr_thin(const Matrix& m, double rank_tol) {
    const Index n = m.rows();
    const Index p = m.cols();
    require(n >= p && p >= 1, "qr_thin: need n >= p >= 1");

    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(n, p);
    Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();

    for (Index i = 0; i < p; ++i) {
        if (r(i, i) < 0.0) {
            r.row(i) *= -1.0;
            q.col(i) *= -1.0;
        }
    }
    const double largest = r.diagonal().cwiseAbs().maxCoeff();
    const double smallest = r.diagonal().cwiseAbs().minCoeff();
    if (!(largest > 0.0) || smallest <= rank_tol * largest) {
        fail(ErrorKind::RankDeficient, "qr_thin: matrix is numerically rank deficient");
    }
    return {std::move(q), std::move(r)};
}

namespace {

Matrix cholesky_qr_pass(const Matrix& m, double pivot_tol) {
    const Matrix gram = m.transpose() * m;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
        fail(ErrorKind::RankDeficient, "cholesky_qr2: Gram matrix not positive definite");
    }
    const Matrix r = llt.matrixU();
    const Vector d = r.diagonal().cwiseAbs();
    if (!(d.minCoeff() > pivot_tol * d.maxCoeff())) {
        fail(ErrorKind::RankDeficient, "cholesky_qr2: Cholesky pivot below tolerance");
    }
    return r.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(m);
}

}  // namespace

Matrix cholesky_qr2(const Matrix& m, double pivot_tol) {
    require(m.rows() >= m.cols() && m.cols() >= 1, "cholesky_qr2: need n >= p >= 1");
    if (!m.allFinite()) fail(ErrorKind::RankDeficient, "cholesky_qr2: non-finite input");
    return cholesky_qr_pass(cholesky_qr_pass(m, pivot_tol), pivot_tol);
}

Matrix shifted_cholesky_qr3(const Matrix& m, double pivot_tol) {
    require(m.rows() >= m.cols() && m.cols() >= 1, "shifted_cholesky_qr3: need n >= p >= 1");
    if (!m.allFinite()) fail(ErrorKind::RankDeficient, "shifted_cholesky_qr3: non-finite input");
    const double n = static_cast<double>(m.rows());
    const double p = static_cast<double>(m.cols());
    const double shift = 11.0 * (n * p + p * (p + 1.0)) * std::numeric_limits<double>::epsilon() * m.squaredNorm();
    Matrix gram = m.transpose() * m;
    gram.diagonal().array() += shift;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
        fail(ErrorKind::RankDeficient, "shifted_cholesky_qr3: shifted Gram matrix not positive definite");
    }
    const Matrix r = llt.matrixU();
    return cholesky_qr2(r.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(m), pivot_tol);
}

double orthonormality_defect(const Matrix& q) {
    return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).norm();
}

void canonicalize_signs(Matrix& vectors) {
    for (Index j = 0; j < vectors.cols(); ++j) {
        Index imax = 0;
        vectors.col(j).cwiseAbs().maxCoeff(&imax);
        if (vectors(imax, j) < 0.0) vectors.col(j) *= -1.0;
    }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    // splitmix64 finalizer over (master, stream)
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

EigDecomposition sym_eig_dense(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success) {
        fail(ErrorKind::ConvergenceFailure, "sym_eig_dense: QR iteration failed");
    }
    EigDecomposition out{es.eigenvalues(), es.eigenvectors()};
    canonicalize_signs(out.vectors);
    return out;
}

namespace {

EigDecomposition lanczos_shift_invert(const SparseOperator& op, Index m, const EigOptions& opts) {
    const Index n = op.dimension();
    const auto [glo, ghi] = op.gershgorin();
    const double sigma = std::min(0.0, glo);
    const double lambda_scale = std::max(std::abs(ghi), std::abs(glo));
    const double tol = 0.5 * opts.residual_tol * lambda_scale;

    Eigen::SparseMatrix<double> shifted = op.matrix();
    if (sigma != 0.0) {
        for (Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma;
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(shifted);
    if (solver.info() != Eigen::Success) {
        fail(ErrorKind::ConvergenceFailure, "sym_eig_smallest: shift factorization failed");
    }

    const Index kmax = opts.max_krylov > 0 ? std::min(opts.max_krylov, n)
                                           : std::min<Index>(n, 10 * m + 300);
    Matrix basis(n, kmax);
    std::vector<double> alpha;
    std::vector<double> beta;

    std::mt19937_64 gen(opts.seed);
    std::normal_distribution<double> normal;
    auto random_unit = [&](Index j) {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v(i) = normal(gen);
        for (int pass = 0; pass < 2 && j > 0; ++pass) {
            v -= basis.leftCols(j) * (basis.leftCols(j).transpose() * v);
        }
        return Vector(v / v.norm());
    };

    Vector q = random_unit(0);
    const Index first_check = std::min(kmax, m + 20);
    for (Index j = 0; j < kmax; ++j) {
        basis.col(j) = q;
        Vector w = solver.solve(q);
        const double a = q.dot(w);
        w -= a * q;
        if (j > 0) w -= beta.back() * basis.col(j - 1);
        for (int pass = 0; pass < 2; ++pass) {
            w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w);
        }
        alpha.push_back(a);
        const double b = w.norm();

        const bool last = (j + 1 == kmax);
        if ((j + 1 >= first_check && (j + 1 - first_check) % 10 == 0) || last) {
            const Index k = j + 1;
            Vector diag = Eigen::Map<const Vector>(alpha.data(), k);
            Vector sub = k > 1 ? Vector(Eigen::Map<const Vector>(beta.data(), k - 1)) : Vector();
            Eigen::SelfAdjointEigenSolver<Matrix> tri;
            tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
            if (k >= m) {
                // theta ascending -> take the m largest (last m columns)
                Vector lambdas(m);
                Matrix ritz(n, m);
                bool converged = true;
                for (Index i = 0; i < m; ++i) {
                    const Index col = k - 1 - i;
                    const double theta = tri.eigenvalues()(col);
                    if (!(theta > 0.0)) {
                        converged = false;
                        break;
                    }
                    lambdas(i) = sigma + 1.0 / theta;
                    ritz.col(i) = basis.leftCols(k) * tri.eigenvectors().col(col);
                    const double res = (op.apply(Vector(ritz.col(i))) - lambdas(i) * ritz.col(i)).norm();
                    if (res > tol) {
                        converged = false;
                        break;
                    }
                }
                if (converged) {
                    EigDecomposition out{lambdas, ritz};
                    canonicalize_signs(out.vectors);
                    return out;
                }
            }
        }
        if (last) break;
        if (b <= 1e-14 * std::abs(a)) {
            // invariant subspace found; continue from a fresh direction
            beta.push_back(0.0);
            q = random_unit(j + 1);
        } else {
            beta.push_back(b);
            q = w / b;
        }
    }
    fail(ErrorKind::ConvergenceFailure, "sym_eig_smallest: Lanczos did not converge within the Krylov cap");
}

}  // namespace

EigDecomposition sym_eig_smallest(const SparseOperator& op, Index m, const EigOptions& opts) {
    const Index n = op.dimension();
    require(m >= 1 && m < n, "sym_eig_smallest: need 1 <= m < dimension");
    if (n <= opts.dense_threshold) {
        EigDecomposition full = sym_eig_dense(op.dense());
        return {full.values.head(m), full.vectors.leftCols(m)};
    }
    return lanczos_shift_invert(op, m, opts);
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
    const Index n = a.rows();
    require(a.cols() == n && q.rows() == n && q.cols() == n, "solve_lyapunov: dimension mismatch");
    using CMatrix = Eigen::MatrixXcd;
    using Complex = std::complex<double>;

    Eigen::ComplexSchur<Matrix> schur(a);
    if (schur.info() != Eigen::Success) {
        fail(ErrorKind::ConvergenceFailure, "solve_lyapunov: Schur decomposition failed");
    }
    const CMatrix& t = schur.matrixT();
    const CMatrix& u = schur.matrixU();
    double abscissa = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) abscissa = std::max(abscissa, t(i, i).real());
    if (abscissa >= 0.0) {
        fail(ErrorKind::UnstableSystem, "solve_lyapunov: A has an eigenvalue with non-negative real part");
    }

    // A = U T U^H  =>  T Y + Y T^H = -U^H Q U, solved column by column from the right.
    const CMatrix c = -(u.adjoint() * q.cast<Complex>() * u);
    CMatrix y = CMatrix::Zero(n, n);
    for (Index j = n - 1; j >= 0; --j) {
        Eigen::VectorXcd rhs = c.col(j);
        for (Index k = j + 1; k < n; ++k) rhs -= std::conj(t(j, k)) * y.col(k);
        CMatrix shifted = t;
        shifted.diagonal().array() += std::conj(t(j, j));
        y.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
    }
    Matrix x = (u * y * u.adjoint()).real();
    return 0.5 * (x + x.transpose());
}

std::vector<Vector> rk4_integrate(const VectorField& f, const Vector& y0, double t0, double t1,
                                  int steps) {
    require(steps >= 1, "rk4_integrate: steps must be >= 1");
    const double h = (t1 - t0) / steps;
    std::vector<Vector> traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);
    traj.push_back(y0);
    Vector y = y0;
    for (int s = 0; s < steps; ++s) {
        const double t = t0 + s * h;
        const Vector k1 = f(t, y);
        const Vector k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
        const Vector k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
        const Vector k4 = f(t + h, y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!y.allFinite()) {
            fail(ErrorKind::NonFiniteState, "rk4_integrate: state became non-finite at step " + std::to_string(s + 1));
        }
        traj.push_back(y);
    }
    return traj;
}

}  // namespace subreg
