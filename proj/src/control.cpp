#include <cmath>

#include "subreg/solvers.hpp"

namespace subreg {

BalancedReduction balanced_truncation(const Matrix& a, const Matrix& b, const Matrix& c, Index r) {
    const Index n = a.rows();
    require(a.cols() == n && b.rows() == n && c.cols() == n, "balanced_truncation: dimension mismatch");
    require(r >= 1 && r <= n, "balanced_truncation: need 1 <= r <= n");

    // (i) Gramians
    const Matrix wc = solve_lyapunov(a, b * b.transpose());
    const Matrix wo = solve_lyapunov(a.transpose(), c.transpose() * c);

    // (ii) coordinates with identity controllability Gramian: Wc = T1 T1^T
    const EigDecomposition ec = sym_eig_dense(wc);
    const Vector lam = ec.values.cwiseMax(0.0);
    const Matrix t1 = ec.vectors * lam.cwiseSqrt().asDiagonal();

    // (iii) T1^T Wo T1 = V Sigma^2 V^T, Sigma descending
    const EigDecomposition eo = sym_eig_dense(t1.transpose() * wo * t1);
    Vector sigma = eo.values.cwiseMax(0.0).cwiseSqrt().reverse();
    Matrix v = eo.vectors.rowwise().reverse();

    BalancedReduction out;
    out.hankel = sigma;
    require(sigma[r - 1] > 0.0, "balanced_truncation: requested Hankel directions are zero");

    // (iv) T = T1 V Sigma^-1/2, left inverse Sigma^-1 T^T Wo
    const Vector s_isqrt = sigma.head(r).cwiseSqrt().cwiseInverse();
    out.projection = t1 * v.leftCols(r) * s_isqrt.asDiagonal();
    out.left_inverse = sigma.head(r).cwiseInverse().asDiagonal() * out.projection.transpose() * wo;

    if (sigma.minCoeff() > 0.0 && lam.minCoeff() > 0.0) {
        const Vector all_isqrt = sigma.cwiseSqrt().cwiseInverse();
        out.transform = t1 * v * all_isqrt.asDiagonal();
        out.transform_inverse = sigma.cwiseSqrt().asDiagonal() * v.transpose() * lam.cwiseSqrt().cwiseInverse().asDiagonal() *
                                ec.vectors.transpose();
    }
    return out;
}

namespace {

// Linear-quadratic problem x' = A x - G f + W u with constant f, cost
// 1/2 |Psi^T x(T)|^2 + lambda/2 int |u|^2.
struct LqProblem {
    Matrix a, w, psi, g;
    Vector f, x0;
};

struct Trajectory {
    Matrix states;    // q x (steps + 1)
    Matrix controls;  // m x (steps + 1)
    double cost = 0.0;
};

double spectral_bound(const Matrix& a) { return a.cwiseAbs().rowwise().sum().maxCoeff(); }

Trajectory run_lq(const LqProblem& p, double lambda, double t_end, Index steps, bool controlled) {
    const Index q = p.a.rows(), ng = p.g.cols();
    const double dt = t_end / static_cast<double>(steps);
    const Matrix wwt = p.w * p.w.transpose();
    const double inv_lambda = 1.0 / lambda;

    // Riccati in reversed time tau = T - t on half steps
    std::vector<Vector> riccati;
    if (controlled) {
        Vector y0(q * q + q * ng);
        Eigen::Map<Matrix>(y0.data(), q, q) = p.psi * p.psi.transpose();
        Eigen::Map<Matrix>(y0.data() + q * q, q, ng).setZero();
        auto rhs = [&](double, const Vector& y) {
            Eigen::Map<const Matrix> c11(y.data(), q, q), c12(y.data() + q * q, q, ng);
            Vector dy(y.size());
            const Matrix c11w = c11 * wwt;
            Eigen::Map<Matrix>(dy.data(), q, q) = p.a.transpose() * c11 + c11 * p.a - inv_lambda * c11w * c11;
            Eigen::Map<Matrix>(dy.data() + q * q, q, ng) = p.a.transpose() * c12 - c11 * p.g - inv_lambda * c11w * c12;
            return dy;
        };
        riccati = rk4_integrate(rhs, y0, 0.0, t_end, static_cast<int>(2 * steps));
    }
    auto control_at = [&](Index half, const Vector& x) -> Vector {
        if (!controlled) return Vector::Zero(p.w.cols());
        const Vector& y = riccati[static_cast<std::size_t>(2 * steps - half)];
        Eigen::Map<const Matrix> c11(y.data(), q, q), c12(y.data() + q * q, q, ng);
        return -inv_lambda * p.w.transpose() * (c11 * x + c12 * p.f);
    };

    const Vector forcing = p.g * p.f;
    auto field = [&](Index half, const Vector& x) -> Vector {
        return p.a * x - forcing + p.w * control_at(half, x);
    };

    Trajectory tr;
    tr.states.resize(q, steps + 1);
    tr.controls.resize(p.w.cols(), steps + 1);
    Vector x = p.x0;
    for (Index k = 0; k <= steps; ++k) {
        tr.states.col(k) = x;
        tr.controls.col(k) = control_at(2 * k, x);
        if (k == steps) break;
        const Vector k1 = field(2 * k, x);
        const Vector k2 = field(2 * k + 1, x + 0.5 * dt * k1);
        const Vector k3 = field(2 * k + 1, x + 0.5 * dt * k2);
        const Vector k4 = field(2 * k + 2, x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) fail(ErrorKind::NonFiniteState, "lqr: non-finite state");
    }
    double effort = 0.0;
    for (Index k = 0; k < steps; ++k)
        effort += 0.5 * dt * (tr.controls.col(k).squaredNorm() + tr.controls.col(k + 1).squaredNorm());
    const Vector y_t = p.psi.transpose() * tr.states.col(steps);
    tr.cost = 0.5 * y_t.squaredNorm() + 0.5 * lambda * effort;
    return tr;
}

Index choose_steps(const Matrix& a, const LqrOptions& opts) {
    const Index levels = opts.nt - 1;
    const double needed = std::ceil(opts.t_end * spectral_bound(a) / opts.stability);
    const Index per_level = std::max<Index>(1, static_cast<Index>(std::ceil(needed / static_cast<double>(levels))));
    return levels * per_level;
}

}  // namespace

LqrResult lqr_solve(const HeatControlSystem& sys, const LqrOptions& opts, const std::optional<Matrix>& basis) {
    require(opts.lambda > 0.0 && opts.t_end > 0.0 && opts.nt >= 2, "lqr_solve: need lambda > 0, T > 0, nt >= 2");
    const Index n = sys.state_dim();

    LqProblem full{sys.a, sys.w, sys.psi, Matrix::Identity(n, n), sys.b, sys.phi0};
    const Index steps = choose_steps(sys.a, opts);
    const Index stride = steps / (opts.nt - 1);

    LqrResult res;
    res.rk4_steps = steps;
    res.times = Vector::LinSpaced(opts.nt, 0.0, opts.t_end);

    auto sample_levels = [&](const Matrix& m) {
        Matrix out(m.rows(), opts.nt);
        for (Index j = 0; j < opts.nt; ++j) out.col(j) = m.col(j * stride);
        return out;
    };

    const Trajectory full_run = run_lq(full, opts.lambda, opts.t_end, steps, true);
    if (!basis) {
        res.states = sample_levels(full_run.states);
        res.controls = sample_levels(full_run.controls);
        res.cost = full_run.cost;
        res.cost_uncontrolled = run_lq(full, opts.lambda, opts.t_end, steps, false).cost;
        return res;
    }

    const Matrix& v = *basis;
    require(v.rows() == n && v.cols() >= 1, "lqr_solve: basis dimension mismatch");
    LqProblem red{v.transpose() * sys.a * v, v.transpose() * sys.w, v.transpose() * sys.psi, v.transpose() * sys.b,
                  Vector::Ones(1), v.transpose() * sys.phi0};
    const Index red_steps = std::max(steps, choose_steps(red.a, opts));
    const Index red_stride = red_steps / (opts.nt - 1);
    const Trajectory red_run = run_lq(red, opts.lambda, opts.t_end, red_steps, true);

    res.states.resize(n, opts.nt);
    res.controls.resize(sys.w.cols(), opts.nt);
    for (Index j = 0; j < opts.nt; ++j) {
        res.states.col(j) = v * red_run.states.col(j * red_stride);
        res.controls.col(j) = red_run.controls.col(j * red_stride);
    }
    res.cost = red_run.cost;
    res.cost_uncontrolled = run_lq(red, opts.lambda, opts.t_end, red_steps, false).cost;

    const Vector ref = full_run.states.col(steps);
    const Vector got = res.states.col(opts.nt - 1);
    res.e_s = (got - ref).norm() / ref.norm();
    const Vector yref = sys.psi.transpose() * ref;
    res.e_o_defined = yref.norm() > 0.0;
    res.e_o = res.e_o_defined ? (sys.psi.transpose() * (got - ref)).norm() / yref.norm() : 0.0;
    return res;
}

}  // namespace subreg
