#include <Eigen/SparseCholesky>

#include <cmath>

#include "subreg/problems.hpp"

namespace subreg {

double check_cfl(const Vector& u, double dt, double dx) {
    const double cfl = (u.size() ? u.cwiseAbs().maxCoeff() : 0.0) * dt / dx;
    if (!std::isfinite(cfl)) fail(ErrorKind::NonFiniteState, "burgers: non-finite state");
    if (cfl > 1.0) fail(ErrorKind::CflViolation, "burgers: CFL number " + std::to_string(cfl) + " exceeds 1");
    return cfl;
}

Vector burgers_advect(const Vector& u, double dt, double dx) {
    const Index n = u.size();
    auto at = [&](Index i) { return i < 0 || i >= n ? 0.0 : u[i]; };
    Vector flux(n + 1);
    for (Index f = 0; f <= n; ++f) {
        const double ul = at(f - 1), ur = at(f);
        const double a = std::max(std::abs(ul), std::abs(ur));
        flux[f] = 0.25 * (ul * ul + ur * ur) - 0.5 * a * (ur - ul);
    }
    return u - (dt / dx) * (flux.tail(n) - flux.head(n));
}

SnapshotMatrix burgers_integrate(const FieldSample& nu, const FieldSample& u0, const BurgersOptions& opts) {
    require(nu.grid.dims() == 1 && u0.grid == nu.grid, "burgers_integrate: 1D fields on one grid required");
    require(opts.nt >= 2 && opts.substeps >= 1 && opts.t_end > 0.0, "burgers_integrate: invalid time grid");
    const Index n = nu.grid.size();
    const double dx = nu.grid.spacing(0);
    const double dt = opts.t_end / static_cast<double>((opts.nt - 1) * opts.substeps);

    const SparseOperator k = assemble_elliptic(nu);
    SparseMatrix lhs = k.matrix() * dt;
    for (Index i = 0; i < n; ++i) lhs.coeffRef(i, i) += 1.0;
    const Eigen::SparseMatrix<double> lhs_col = lhs;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(lhs_col);
    if (solver.info() != Eigen::Success) fail(ErrorKind::NonFiniteState, "burgers_integrate: diffusion factorization failed");

    SnapshotMatrix snap;
    snap.values.resize(n, opts.nt);
    snap.weights = Vector::Constant(opts.nt, opts.t_end / static_cast<double>(opts.nt - 1));
    snap.weights[0] *= 0.5;
    snap.weights[opts.nt - 1] *= 0.5;

    Vector u = u0.values;
    snap.values.col(0) = u;
    for (Index level = 1; level < opts.nt; ++level) {
        for (Index s = 0; s < opts.substeps; ++s) {
            check_cfl(u, dt, dx);
            u = solver.solve(burgers_advect(u, dt, dx));
        }
        if (!u.allFinite()) fail(ErrorKind::NonFiniteState, "burgers_integrate: non-finite state");
        snap.values.col(level) = u;
    }
    return snap;
}

BurgersSample sample_burgers(const GridSpec& grid, std::mt19937_64& rng) {
    FieldSample psi = standardize(grf_sample(grid, 40.0, 4.0, rng));
    FieldSample nu = psi;
    nu.values = psi.values.unaryExpr([](double p) { return 5e-3 + (1.0 + std::tanh(30.0 * p)) / 20.0; });
    FieldSample u0 = standardize(grf_sample(grid, 10.0, 2.0, rng));
    return {nu, u0};
}

HeatControlSystem heat_control_system(const FieldSample& k_field, const Vector& b, const Vector& phi0, const Matrix& w,
                                      const Matrix& psi) {
    const Index n = k_field.grid.size();
    require(b.size() == n && phi0.size() == n && w.rows() == n && psi.rows() == n,
            "heat_control_system: dimension mismatch");
    HeatControlSystem sys;
    sys.k = k_field;
    sys.a = -assemble_elliptic(k_field).dense();
    sys.w = w;
    sys.psi = psi;
    sys.b = b;
    sys.phi0 = phi0;
    sys.a_aug = Matrix::Zero(2 * n, 2 * n);
    sys.a_aug.topLeftCorner(n, n) = sys.a;
    sys.a_aug.topRightCorner(n, n) = -Matrix::Identity(n, n);
    sys.b_aug = Matrix::Zero(2 * n, w.cols());
    sys.b_aug.topRows(n) = w;
    sys.x0_aug.resize(2 * n);
    sys.x0_aug << phi0, b;
    return sys;
}

Vector heat_steady_state(const HeatControlSystem& sys) { return sys.a.ldlt().solve(sys.b); }

HeatControlSystem sample_control_system(std::mt19937_64& rng, const ControlSampleOptions& opts) {
    require(opts.n_inputs >= 1 && opts.n_outputs >= 1 && opts.n_inputs <= opts.grid_n && opts.n_outputs <= opts.grid_n,
            "sample_control_system: shape counts must be in [1, grid]");
    const GridSpec grid = GridSpec::unit({opts.grid_n});
    FieldSample chi = standardize(grf_sample(grid, 6.0, 4.0, rng));
    FieldSample k = chi;
    k.values = chi.values.unaryExpr([](double c) { return 5e-3 + (1.0 + std::tanh(5.0 * c)) / 10.0; });
    auto shape = [&] { return standardize(grf_sample(grid, 5.0, 4.0, rng)).values; };
    const Vector phi0 = shape();
    const Vector b = shape();
    Matrix w(grid.size(), opts.n_inputs), psi(grid.size(), opts.n_outputs);
    for (Index j = 0; j < w.cols(); ++j) w.col(j) = shape();
    for (Index j = 0; j < psi.cols(); ++j) psi.col(j) = shape();
    return heat_control_system(k, b, phi0, qr_thin(w).q, qr_thin(psi).q);
}

}  // namespace subreg
