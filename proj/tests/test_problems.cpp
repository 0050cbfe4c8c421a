#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>

#include "subreg/numerics.hpp"
#include "subreg/problems.hpp"

using namespace subreg;
namespace fs = std::filesystem;

namespace {

FieldSample constant_field(const GridSpec& g, double c) { return FieldSample{g, Vector::Constant(g.size(), c)}; }

FieldSample random_positive(const GridSpec& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.5, 20.0);
    FieldSample f{g, Vector(g.size())};
    for (Index i = 0; i < f.values.size(); ++i) f.values[i] = unif(rng);
    return f;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("subreg_test_" + name);
    fs::remove_all(p);
    return p;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no exception");
    return ErrorKind::InvalidArgument;
}

FieldSample from_function(const GridSpec& g, const std::function<double(double)>& f) {
    FieldSample out{g, Vector(g.size())};
    for (Index i = 0; i < g.size(); ++i) out.values[i] = f(g.coordinate(0, i));
    return out;
}

}  // namespace

TEST_CASE("1D unit-coefficient stencil") {
    const SparseOperator a = assemble_elliptic(constant_field(GridSpec::unit({3}), 1.0));
    Matrix expected(3, 3);
    expected << 32, -16, 0, -16, 32, -16, 0, -16, 32;
    CHECK((a.dense() - expected).norm() <= 1e-12);
}

TEST_CASE("elliptic operator is linear in a constant coefficient") {
    const GridSpec g = GridSpec::unit({5, 4});
    const Matrix one = assemble_elliptic(constant_field(g, 1.0)).dense();
    CHECK((assemble_elliptic(constant_field(g, 3.5)).dense() - 3.5 * one).norm() <= 1e-10 * one.norm());
}

TEST_CASE("elliptic operators are symmetric positive definite") {
    std::mt19937_64 rng(51);
    for (const GridSpec& g : {GridSpec::unit({12}), GridSpec::unit({7, 9}), GridSpec::unit({4, 5, 3})}) {
        for (int trial = 0; trial < 5; ++trial) {
            const SparseOperator a = assemble_elliptic(random_positive(g, rng));
            CHECK(a.asymmetry() <= 1e-14 * a.gershgorin().second);
            CHECK((a.diagonal().array() > 0.0).all());
            CHECK(sym_eig_smallest(a, 1).values[0] > 0.0);
        }
    }
    const GridSpec g = GridSpec::unit({6, 6});
    const SparseOperator aniso = assemble_elliptic(std::vector<FieldSample>{random_positive(g, rng), random_positive(g, rng)});
    CHECK(aniso.asymmetry() <= 1e-12);
    CHECK(sym_eig_smallest(aniso, 1).values[0] > 0.0);
}

TEST_CASE("elliptic assembly rejects non-positive coefficients") {
    FieldSample k = constant_field(GridSpec::unit({4}), 1.0);
    k.values[2] = 0.0;
    CHECK(kind_of([&] { assemble_elliptic(k); }) == ErrorKind::NonPositiveCoefficient);
}

TEST_CASE("Schrodinger operator spectra") {
    const GridSpec g = GridSpec::unit({50});
    const double h = g.spacing(0);
    const auto free = sym_eig_smallest(assemble_schrodinger(constant_field(g, 0.0)), 3);
    for (Index j = 0; j < 3; ++j)
        CHECK(free.values[j] == doctest::Approx(4.0 / (h * h) * std::pow(std::sin((j + 1) * M_PI * h / 2), 2)).epsilon(1e-10));
    const auto shifted = sym_eig_smallest(assemble_schrodinger(constant_field(g, 7.0)), 3);
    for (Index j = 0; j < 3; ++j) CHECK(shifted.values[j] == doctest::Approx(free.values[j] + 7.0).epsilon(1e-10));

    const GridSpec wide = GridSpec::box({400}, -10.0, 10.0);
    const SparseOperator harmonic = assemble_schrodinger(from_function(wide, [](double x) { return x * x; }));
    const double lambda1 = sym_eig_smallest(harmonic, 1).values[0];
    const Vector dense = Eigen::SelfAdjointEigenSolver<Matrix>(harmonic.dense()).eigenvalues();
    CHECK(lambda1 == doctest::Approx(dense[0]).epsilon(1e-10));
    // ground state of -u'' + x^2 u has energy 1
    CHECK(lambda1 == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(harmonic.asymmetry() == 0.0);
}

TEST_CASE("preset names round-trip") {
    for (Preset p : {Preset::Elliptic2dIso, Preset::Elliptic2dAniso, Preset::Elliptic3d, Preset::Qm1d, Preset::Qm2d,
                     Preset::Burgers, Preset::TwoGrid, Preset::Control})
        CHECK(parse_preset(preset_name(p)) == p);
    CHECK(kind_of([] { parse_preset("elliptic4d"); }) == ErrorKind::ConfigError);
}

TEST_CASE("eigen dataset targets are eigenvectors") {
    for (Preset p : {Preset::Elliptic2dIso, Preset::Elliptic2dAniso, Preset::Elliptic3d, Preset::Qm1d, Preset::Qm2d}) {
        DatasetOptions opts;
        opts.preset = p;
        opts.n_samples = 3;
        opts.m_target = 4;
        opts.seed = 7;
        opts.grid_n = p == Preset::Elliptic3d ? 6 : (p == Preset::Qm1d ? 100 : 16);
        const SubspaceDataset ds = gen_eig_dataset(opts);
        CHECK(ds.size() == 3);
        CHECK(ds.target_dim() == 4);
        for (Index s = 0; s < ds.size(); ++s) {
            std::vector<FieldSample> ch;
            for (Index c = 0; c < ds.channels; ++c) ch.push_back(ds.channel(s, c));
            const SparseOperator a = sample_operator(p, ch);
            const double lmax = std::abs(a.gershgorin().second);
            const Matrix& phi = ds.targets[static_cast<std::size_t>(s)];
            CHECK(orthonormality_defect(phi) <= 1e-10);
            for (Index j = 0; j < phi.cols(); ++j) {
                const Vector v = phi.col(j);
                const double lambda = v.dot(a.apply(v));
                CHECK((a.apply(v) - lambda * v).norm() <= 1e-8 * lmax);
            }
        }
    }
}

TEST_CASE("single-vector target has the smallest Rayleigh quotient") {
    DatasetOptions opts;
    opts.preset = Preset::Elliptic2dIso;
    opts.n_samples = 2;
    opts.m_target = 1;
    opts.grid_n = 12;
    const SubspaceDataset ds = gen_eig_dataset(opts);
    for (Index s = 0; s < ds.size(); ++s) {
        const SparseOperator a = sample_operator(opts.preset, {ds.channel(s, 0)});
        const Vector v = ds.targets[static_cast<std::size_t>(s)].col(0);
        const double lambda1 = Eigen::SelfAdjointEigenSolver<Matrix>(a.dense()).eigenvalues()[0];
        CHECK(v.dot(a.apply(v)) == doctest::Approx(lambda1).epsilon(1e-8));
    }
}

TEST_CASE("eigen datasets are deterministic and the 16x16 smoke run passes") {
    DatasetOptions opts;
    opts.preset = Preset::Elliptic2dIso;
    opts.n_samples = 20;
    opts.m_target = 5;
    opts.seed = 99;
    opts.grid_n = 16;
    const SubspaceDataset a = gen_eig_dataset(opts);
    const SubspaceDataset b = gen_eig_dataset(opts);
    CHECK(a.features == b.features);
    for (std::size_t s = 0; s < a.targets.size(); ++s) {
        CHECK(a.targets[s] == b.targets[s]);
        CHECK(orthonormality_defect(a.targets[s]) <= 1e-10);
    }
    opts.seed = 100;
    CHECK(gen_eig_dataset(opts).features != a.features);
}

TEST_CASE("two-grid coefficient range and Jacobi leading space") {
    std::mt19937_64 rng(52);
    const GridSpec g = GridSpec::unit({16, 16});
    const FieldSample k = twogrid_coefficient(g, rng);
    CHECK(k.values.minCoeff() >= 1.0);
    CHECK(k.values.maxCoeff() <= 50.0);

    const SparseOperator a = assemble_elliptic(k);
    const Matrix v = jacobi_leading_space(a, 5, 0.9);
    CHECK(orthonormality_defect(v) <= 1e-10);
    // oracle: dense eigenvectors of the symmetric Jacobi iteration matrix
    const Vector d = a.diagonal();
    const Vector dm = d.cwiseSqrt().cwiseInverse();
    const Matrix s = Matrix::Identity(a.dimension(), a.dimension()) - 0.9 * dm.asDiagonal() * a.dense() * dm.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    std::vector<Index> order(static_cast<std::size_t>(a.dimension()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Index x, Index y) { return std::abs(es.eigenvalues()[x]) > std::abs(es.eigenvalues()[y]); });
    Matrix w(a.dimension(), 5);
    for (Index j = 0; j < 5; ++j) w.col(j) = dm.asDiagonal() * es.eigenvectors().col(order[static_cast<std::size_t>(j)]);
    const auto angles = principal_angles(OrthoBasis::from_orthonormal(v), OrthoBasis::orthonormalize_householder(w));
    CHECK(angles.angles.maxCoeff() <= 1e-6);
}

TEST_CASE("right-hand side pairs satisfy A u = f inside the leading span") {
    DatasetOptions opts;
    opts.preset = Preset::Elliptic2dIso;
    opts.n_samples = 2;
    opts.m_target = 10;
    opts.grid_n = 12;
    const SubspaceDataset ds = gen_eig_dataset(opts);
    const RhsPairs pairs = gen_elliptic_rhs_pairs(ds, 4, 3);
    CHECK(pairs.f.size() == 8);
    for (std::size_t i = 0; i < pairs.f.size(); ++i) {
        const std::size_t s = i / 4;
        const SparseOperator a = sample_operator(opts.preset, {ds.channel(static_cast<Index>(s), 0)});
        const Matrix& phi = ds.targets[s];
        CHECK((a.apply(pairs.u[i]) - pairs.f[i]).norm() <= 1e-12 * pairs.f[i].norm());
        CHECK(relative_subspace_error(OrthoBasis::from_orthonormal(phi), OrthoBasis::orthonormalize_householder(pairs.u[i])) <= 1e-10);
        // eigenpair identity: coefficients of f are lambda_i times those of u
        const Vector cu = phi.transpose() * pairs.u[i];
        const Vector cf = phi.transpose() * pairs.f[i];
        for (Index j = 0; j < 10; ++j) {
            const Vector p = phi.col(j);
            CHECK(cf[j] == doctest::Approx(p.dot(a.apply(p)) * cu[j]).epsilon(1e-8));
        }
    }
}

TEST_CASE("Burgers with zero data stays zero") {
    const GridSpec g = GridSpec::unit({32});
    const SnapshotMatrix s = burgers_integrate(constant_field(g, 0.01), constant_field(g, 0.0));
    CHECK(s.snapshots() == 64);
    CHECK(s.values.isZero());
    CHECK((s.weights.array() > 0.0).all());
    CHECK(s.weights.sum() == doctest::Approx(0.1));
}

TEST_CASE("Burgers reduces to the heat equation for small data") {
    const GridSpec g = GridSpec::unit({127});
    const double nu = 1.0, eps = 1e-6;
    const SnapshotMatrix s = burgers_integrate(constant_field(g, nu), from_function(g, [&](double x) { return eps * std::sin(M_PI * x); }));
    const Vector mode = from_function(g, [](double x) { return std::sin(M_PI * x); }).values;
    const double ratio = s.values.col(s.snapshots() - 1).dot(mode) / s.values.col(0).dot(mode);
    const double exact = std::exp(-nu * M_PI * M_PI * 0.1);
    CHECK(std::abs(std::log(ratio) / std::log(exact) - 1.0) <= 0.05);
}

TEST_CASE("Burgers energy decays for sampled coefficients") {
    std::mt19937_64 rng(53);
    const GridSpec g = GridSpec::unit({128});
    for (int trial = 0; trial < 5; ++trial) {
        const BurgersSample bs = sample_burgers(g, rng);
        CHECK(bs.nu.values.minCoeff() >= 5e-3);
        const SnapshotMatrix s = burgers_integrate(bs.nu, bs.u0);
        for (Index t = 1; t < s.snapshots(); ++t) CHECK(s.values.col(t).squaredNorm() <= s.values.col(t - 1).squaredNorm() * (1 + 1e-12));
    }
}

TEST_CASE("Burgers converges at first order") {
    const auto nu = [](double x) { return 0.01 + 0.005 * std::sin(2 * M_PI * x); };
    const auto u0 = [](double x) { return std::sin(M_PI * x) + 0.5 * std::sin(2 * M_PI * x); };
    const auto run = [&](Index cells, Index substeps) {
        const GridSpec g = GridSpec::unit({cells - 1});
        BurgersOptions o;
        o.substeps = substeps;
        return Vector(burgers_integrate(from_function(g, nu), from_function(g, u0), o).values.rightCols(1));
    };
    const Vector ref = run(2048, 64);
    const auto error = [&](Index cells, Index substeps) {
        const Vector u = run(cells, substeps);
        const Index stride = 2048 / cells;
        double e = 0.0;
        for (Index i = 0; i < u.size(); ++i) e += std::pow(u[i] - ref[(i + 1) * stride - 1], 2);
        return std::sqrt(e / cells);
    };
    const double e1 = error(64, 1);
    const double e2 = error(128, 2);
    const double e3 = error(256, 4);
    CHECK(e1 / e2 >= 1.8);
    CHECK(e2 / e3 >= 1.8);
}

TEST_CASE("CFL violations are reported") {
    const Vector u = Vector::Constant(10, 2.0);
    CHECK(check_cfl(u, 0.1, 0.4) == doctest::Approx(0.5));
    CHECK(kind_of([&] { check_cfl(u, 0.1, 0.1); }) == ErrorKind::CflViolation);
    const GridSpec g = GridSpec::unit({63});
    BurgersOptions o;
    o.t_end = 10.0;
    CHECK(kind_of([&] { burgers_integrate(constant_field(g, 0.01), from_function(g, [](double x) { return 5 * std::sin(M_PI * x); }), o); }) ==
          ErrorKind::CflViolation);
}

TEST_CASE("heat control system structure and steady state") {
    std::mt19937_64 rng(54);
    const GridSpec g = GridSpec::unit({12});
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector b(12), phi0(12);
    for (Index i = 0; i < 12; ++i) {
        b[i] = normal(rng);
        phi0[i] = normal(rng);
    }
    Matrix w(12, 3), psi(12, 2);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    for (Index i = 0; i < psi.size(); ++i) psi.data()[i] = normal(rng);
    const HeatControlSystem sys = heat_control_system(constant_field(g, 1.0), b, phi0, qr_thin(w).q, qr_thin(psi).q);
    CHECK(sys.a_aug.bottomRows(12).isZero());
    CHECK(sys.b_aug.bottomRows(12).isZero());

    const VectorField f = [&](double, const Vector& x) { return Vector(sys.a_aug * x); };
    const auto traj = rk4_integrate(f, sys.x0_aug, 0.0, 3.0, 1500);
    const Vector end = traj.back();
    CHECK((end.tail(12) - b).norm() == 0.0);
    const Vector steady = heat_steady_state(sys);
    CHECK((end.head(12) - steady).norm() <= 0.01 * steady.norm());
    CHECK((sys.a * steady - b).norm() <= 1e-10 * b.norm());

    const HeatControlSystem unforced = heat_control_system(constant_field(g, 1.0), Vector::Zero(12), phi0, qr_thin(w).q, qr_thin(psi).q);
    const VectorField plain = [&](double, const Vector& x) { return Vector(unforced.a * x); };
    const VectorField aug = [&](double, const Vector& x) { return Vector(unforced.a_aug * x); };
    CHECK((rk4_integrate(aug, unforced.x0_aug, 0.0, 0.5, 300).back().head(12) - rk4_integrate(plain, phi0, 0.0, 0.5, 300).back()).norm() <= 1e-14);
}

TEST_CASE("sampled control systems have orthonormal shapes and stable dynamics") {
    std::mt19937_64 rng(55);
    const HeatControlSystem sys = sample_control_system(rng);
    CHECK(orthonormality_defect(sys.w) <= 1e-10);
    CHECK(orthonormality_defect(sys.psi) <= 1e-10);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(sys.a).eigenvalues().maxCoeff() < 0.0);
}

TEST_CASE("dataset container round-trip and corruption") {
    DatasetOptions opts;
    opts.preset = Preset::Elliptic2dAniso;
    opts.n_samples = 3;
    opts.m_target = 3;
    opts.grid_n = 8;
    const SubspaceDataset ds = gen_eig_dataset(opts);
    const fs::path dir = scratch_dir("io");
    write_dataset(ds, dir);
    const SubspaceDataset back = read_dataset(dir);
    CHECK(back.preset == ds.preset);
    CHECK(back.seed == ds.seed);
    CHECK(back.grid == ds.grid);
    CHECK(back.channels == 2);
    CHECK(back.features == ds.features);
    for (std::size_t s = 0; s < ds.targets.size(); ++s) CHECK(back.targets[s] == ds.targets[s]);

    const fs::path bad_magic = scratch_dir("magic");
    fs::copy(dir, bad_magic);
    {
        std::ifstream in(bad_magic / "meta.json");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        text.replace(text.find("subreg-dataset"), 14, "subreg-datasex");
        std::ofstream(bad_magic / "meta.json") << text;
    }
    CHECK(kind_of([&] { read_dataset(bad_magic); }) == ErrorKind::CorruptHeader);

    const fs::path bad_version = scratch_dir("version");
    fs::copy(dir, bad_version);
    {
        std::ifstream in(bad_version / "meta.json");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const auto pos = text.find("\"format_version\": 1");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 19, "\"format_version\": 2");
        std::ofstream(bad_version / "meta.json") << text;
    }
    CHECK(kind_of([&] { read_dataset(bad_version); }) == ErrorKind::FormatVersionMismatch);

    const fs::path truncated = scratch_dir("truncated");
    fs::copy(dir, truncated);
    fs::resize_file(truncated / "targets.f64", fs::file_size(truncated / "targets.f64") - 8);
    CHECK(kind_of([&] { read_dataset(truncated); }) == ErrorKind::TruncatedPayload);

    for (const auto& p : {dir, bad_magic, bad_version, truncated}) fs::remove_all(p);
}
