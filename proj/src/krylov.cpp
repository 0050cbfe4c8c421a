#include <chrono>
#include <cmath>

#include "subreg/solvers.hpp"

namespace subreg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::LLT<Matrix> factor_coarse(const Matrix& e) {
    Eigen::LLT<Matrix> llt(e);
    if (llt.info() != Eigen::Success) fail(ErrorKind::SingularCoarseMatrix, "coarse matrix V^T A V is not positive definite");
    const Vector d = Matrix(llt.matrixL()).diagonal();
    if (d.minCoeff() <= 1e-7 * d.maxCoeff())
        fail(ErrorKind::SingularCoarseMatrix, "coarse matrix V^T A V is numerically singular");
    return llt;
}

}  // namespace

SolveResult cg(const SparseOperator& a, const Vector& b, double tol, Index maxit, bool allow_unconverged) {
    return deflated_cg(a, b, Matrix(b.size(), 0), tol, maxit, allow_unconverged);
}

SolveResult deflated_cg(const SparseOperator& a, const Vector& b, const Matrix& v, double tol, Index maxit,
                        bool allow_unconverged) {
    const auto t0 = Clock::now();
    require(b.size() == a.dimension() && v.rows() == a.dimension(), "deflated_cg: dimension mismatch");
    SolveResult res;
    res.x = Vector::Zero(b.size());
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        res.report.residuals.push_back(0.0);
        res.report.converged = true;
        return res;
    }

    const bool deflate = v.cols() > 0;
    Matrix av;
    Eigen::LLT<Matrix> coarse;
    if (deflate) {
        av = a.apply(v);
        coarse = factor_coarse(v.transpose() * av);
        res.x = v * coarse.solve(v.transpose() * b);
    }
    Vector r = b - a.apply(res.x);
    auto project = [&](const Vector& y) -> Vector {
        return deflate ? Vector(y - v * coarse.solve(av.transpose() * y)) : y;
    };
    Vector p = project(r);
    double rr = r.squaredNorm();
    res.report.residuals.push_back(std::sqrt(rr) / bnorm);

    Index it = 0;
    while (res.report.residuals.back() > tol && it < maxit) {
        const Vector ap = a.apply(p);
        const double pap = p.dot(ap);
        if (!(pap > 0.0)) fail(ErrorKind::NonFiniteState, "deflated_cg: operator is not positive definite");
        const double alpha = rr / pap;
        res.x += alpha * p;
        r -= alpha * ap;
        const double rr_new = r.squaredNorm();
        p = project(r) + (rr_new / rr) * p;
        rr = rr_new;
        ++it;
        res.report.residuals.push_back(std::sqrt(rr) / bnorm);
    }
    res.report.iterations = it;
    res.report.converged = res.report.residuals.back() <= tol;
    res.report.wall_seconds = seconds_since(t0);
    if (!res.report.converged && !allow_unconverged)
        fail(ErrorKind::MaxIterations, "deflated_cg: no convergence in " + std::to_string(maxit) + " iterations");
    return res;
}

TwoGrid::TwoGrid(const SparseOperator& a, Matrix v, double omega) : a_(a), v_(std::move(v)), omega_(omega) {
    require(v_.rows() == a.dimension(), "TwoGrid: dimension mismatch");
    const Vector d = a.diagonal();
    require((d.array() != 0.0).all(), "TwoGrid: zero diagonal");
    dinv_ = d.cwiseInverse();
    if (v_.cols() > 0) {
        av_ = a.apply(v_);
        coarse_ = factor_coarse(v_.transpose() * av_);
    }
}

Vector TwoGrid::smooth(const Vector& b, const Vector& x) const {
    return x + omega_ * dinv_.cwiseProduct(b - a_.apply(x));
}

Vector TwoGrid::coarse(const Vector& b, const Vector& x) const {
    if (v_.cols() == 0) return x;
    return x + v_ * coarse_.solve(v_.transpose() * (b - a_.apply(x)));
}

Vector TwoGrid::apply(const Vector& b, const Vector& x) const { return smooth(b, coarse(b, smooth(b, x))); }

Vector TwoGrid::propagate(const Vector& e) const { return apply(Vector::Zero(e.size()), e); }

double TwoGrid::rho(Index power_iters, std::uint64_t seed, double tol) const {
    require(power_iters >= 1, "TwoGrid::rho: need iterations");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector x(a_.dimension());
    for (Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
    // T is self-adjoint and non-negative in the A inner product
    auto a_norm = [&](const Vector& y) { return std::sqrt(std::max(0.0, y.dot(a_.apply(y)))); };
    x /= a_norm(x);
    double estimate = 0.0;
    for (Index k = 0; k < power_iters; ++k) {
        const Vector tx = propagate(x);
        const Vector atx = a_.apply(tx);
        const double rq = x.dot(atx);
        const double nrm = std::sqrt(std::max(0.0, tx.dot(atx)));
        if (nrm == 0.0) return 0.0;
        const bool done = k > 0 && std::abs(rq - estimate) <= tol * std::abs(rq);
        estimate = rq;
        if (done) break;
        x = tx / nrm;
    }
    return estimate;
}

Vector two_grid_apply(const SparseOperator& a, const Matrix& v, double omega, const Vector& b, const Vector& x) {
    return TwoGrid(a, v, omega).apply(b, x);
}

double two_grid_rho(const SparseOperator& a, const Matrix& v, double omega, Index power_iters, std::uint64_t seed) {
    return TwoGrid(a, v, omega).rho(power_iters, seed);
}

}  // namespace subreg
