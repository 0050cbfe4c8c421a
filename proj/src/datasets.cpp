#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "subreg/parallel.hpp"
#include "subreg/problems.hpp"

namespace subreg {

namespace {

struct PresetInfo {
    Preset preset;
    std::string_view name;
};

constexpr PresetInfo kPresets[] = {
    {Preset::Elliptic2dIso, "elliptic2d-iso"},
    {Preset::Elliptic2dAniso, "elliptic2d-aniso"},
    {Preset::Elliptic3d, "elliptic3d"},
    {Preset::Qm1d, "qm1d"},
    {Preset::Qm2d, "qm2d"},
    {Preset::Burgers, "burgers"},
    {Preset::TwoGrid, "twogrid"},
    {Preset::Control, "control"},
};

SparseOperator diag_scaled(const SparseOperator& a, const Vector& dinv_sqrt) {
    SparseMatrix m = dinv_sqrt.asDiagonal() * a.matrix() * dinv_sqrt.asDiagonal();
    return SparseOperator(std::move(m), true);
}

}  // namespace

std::string_view preset_name(Preset p) {
    for (const auto& info : kPresets)
        if (info.preset == p) return info.name;
    return "unknown";
}

Preset parse_preset(std::string_view name) {
    for (const auto& info : kPresets)
        if (info.name == name) return info.preset;
    fail(ErrorKind::ConfigError, "unknown preset '" + std::string(name) + "'");
}

bool is_eigen_preset(Preset p) { return p != Preset::Burgers && p != Preset::Control; }

Index default_grid_size(Preset p) {
    switch (p) {
        case Preset::Elliptic2dIso:
        case Preset::Elliptic2dAniso:
        case Preset::Qm2d:
        case Preset::TwoGrid:
        case Preset::Control: return 32;
        case Preset::Elliptic3d: return 12;
        case Preset::Qm1d: return 100;
        case Preset::Burgers: return 128;
    }
    return 32;
}

GridSpec preset_grid(Preset p, Index n) {
    if (n <= 0) n = default_grid_size(p);
    switch (p) {
        case Preset::Elliptic2dIso:
        case Preset::Elliptic2dAniso:
        case Preset::TwoGrid: return GridSpec::unit({n, n});
        case Preset::Elliptic3d: return GridSpec::unit({n, n, n});
        case Preset::Qm1d: return GridSpec::box({n}, 0.0, 10.0);
        case Preset::Qm2d: return GridSpec::box({n, n}, -7.0, 7.0);
        case Preset::Burgers:
        case Preset::Control: return GridSpec::unit({n});
    }
    return GridSpec::unit({n});
}

FieldSample SubspaceDataset::channel(Index sample, Index c) const {
    const Index nodes = grid.size();
    require(sample >= 0 && sample < size() && c >= 0 && c < channels, "SubspaceDataset::channel: out of range");
    return {grid, features.row(sample).segment(c * nodes, nodes).transpose()};
}

FieldSample twogrid_coefficient(const GridSpec& grid, std::mt19937_64& rng, const TwoGridFieldParams& params) {
    require(grid.dims() == 2, "twogrid_coefficient: 2D grid required");
    const Index m = params.modes;
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix c(m, m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j)
            c(i, j) = normal(rng) / (1.0 + params.lambda1 * static_cast<double>(i * i + j * j));

    auto waves = [&](std::size_t axis) {
        Eigen::MatrixXcd e(grid.extents[axis], m);
        for (Index p = 0; p < grid.extents[axis]; ++p)
            for (Index k = 0; k < m; ++k)
                e(p, k) = std::polar(1.0, static_cast<double>(k) * grid.coordinate(axis, p));
        return e;
    };
    const Eigen::MatrixXcd ex = waves(0), ey = waves(1);
    const Matrix s0 = (ex * c.cast<std::complex<double>>() * ey.transpose()).real();

    FieldSample out{grid, Vector(grid.size())};
    for (Index i = 0; i < grid.extents[0]; ++i)
        for (Index j = 0; j < grid.extents[1]; ++j) {
            const double s = std::tanh(params.lambda2 * s0(i, j));
            out.values[i * grid.extents[1] + j] = params.alpha + (params.beta - params.alpha) * (s + 1.0) / 2.0;
        }
    return out;
}

std::vector<FieldSample> sample_eigen_fields(Preset p, const GridSpec& grid, std::mt19937_64& rng) {
    switch (p) {
        case Preset::Elliptic2dIso:
            return {contrast_map(grf_sample(grid, 1.0 / (20.0 * M_PI), 0.5, rng), 1.0, 50.0, 1.0)};
        case Preset::Elliptic2dAniso: {
            auto k1 = contrast_map(grf_sample(grid, 1.0 / (20.0 * M_PI), 0.5, rng), 1.0, 50.0, 1.0);
            auto k2 = contrast_map(grf_sample(grid, 1.0 / (20.0 * M_PI), 0.5, rng), 1.0, 50.0, 1.0);
            return {k1, k2};
        }
        case Preset::Elliptic3d: return {contrast_map(grf_sample(grid, 1.0 / 100.0, 1.5, rng), 50.0, 1.0, 2.0)};
        case Preset::Qm1d: return {morse_potential_1d(sample_morse_1d(rng), grid)};
        case Preset::Qm2d: return {morse_potential_2d(sample_morse_2d(rng), grid)};
        case Preset::TwoGrid: return {twogrid_coefficient(grid, rng)};
        default: fail(ErrorKind::ConfigError, "preset '" + std::string(preset_name(p)) + "' is not an eigen preset");
    }
}

SparseOperator sample_operator(Preset p, const std::vector<FieldSample>& channels) {
    switch (p) {
        case Preset::Qm1d:
        case Preset::Qm2d: return assemble_schrodinger(channels.at(0));
        default: return assemble_elliptic(channels);
    }
}

Matrix jacobi_leading_space(const SparseOperator& a, Index m, double omega, const EigOptions& opts) {
    require(omega > 0.0, "jacobi_leading_space: omega must be positive");
    const Vector d = a.diagonal();
    require((d.array() > 0.0).all(), "jacobi_leading_space: diagonal must be positive");
    const Vector dinv_sqrt = d.array().rsqrt();
    const SparseOperator at = diag_scaled(a, dinv_sqrt);

    EigDecomposition low = sym_eig_smallest(at, m, opts);
    Matrix w = low.vectors;
    Vector nu = low.values;
    const double nu_max = at.gershgorin().second;
    if (omega * (nu(0) + nu_max) > 2.0) {
        // the top of the spectrum competes in |1 - omega nu|
        const SparseOperator flipped = at.scaled(-1.0).shifted(Vector::Constant(at.dimension(), nu_max));
        EigDecomposition high = sym_eig_smallest(flipped, m, opts);
        std::vector<std::pair<double, Vector>> all;
        for (Index i = 0; i < m; ++i) all.emplace_back(std::abs(1.0 - omega * nu(i)), low.vectors.col(i));
        for (Index i = 0; i < m; ++i)
            all.emplace_back(std::abs(1.0 - omega * (nu_max - high.values(i))), high.vectors.col(i));
        std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
        for (Index i = 0; i < m; ++i) w.col(i) = all[static_cast<std::size_t>(i)].second;
    }
    Matrix v = dinv_sqrt.asDiagonal() * w;
    Matrix q = qr_thin(v).q;
    canonicalize_signs(q);
    return q;
}

SubspaceDataset gen_eig_dataset(const DatasetOptions& opts) {
    require(is_eigen_preset(opts.preset), "gen_eig_dataset: not an eigen preset");
    require(opts.n_samples >= 1 && opts.m_target >= 1, "gen_eig_dataset: need samples and targets");
    SubspaceDataset ds;
    ds.preset = std::string(preset_name(opts.preset));
    ds.seed = opts.seed;
    ds.grid = preset_grid(opts.preset, opts.grid_n);
    const Index nodes = ds.grid.size();
    require(opts.m_target < nodes, "gen_eig_dataset: m_target must be below the grid size");
    ds.channels = opts.preset == Preset::Elliptic2dAniso ? 2 : 1;
    ds.features.resize(opts.n_samples, ds.channels * nodes);
    ds.targets.resize(static_cast<std::size_t>(opts.n_samples));

    parallel_for(static_cast<std::size_t>(opts.n_samples), [&](std::size_t s) {
        std::mt19937_64 rng(derive_seed(opts.seed, s));
        const auto fields = sample_eigen_fields(opts.preset, ds.grid, rng);
        for (Index c = 0; c < ds.channels; ++c)
            ds.features.row(static_cast<Index>(s)).segment(c * nodes, nodes) = fields[static_cast<std::size_t>(c)].values.transpose();
        const SparseOperator a = sample_operator(opts.preset, fields);
        Matrix target;
        if (opts.preset == Preset::TwoGrid) {
            target = jacobi_leading_space(a, opts.m_target, opts.omega, opts.eig);
        } else {
            target = sym_eig_smallest(a, opts.m_target, opts.eig).vectors;
            canonicalize_signs(target);
        }
        ds.targets[s] = std::move(target);
    });
    return ds;
}

RhsPairs elliptic_rhs_pairs(const SparseOperator& a, const Matrix& phi, Index n_rhs, std::mt19937_64& rng) {
    require(phi.cols() >= 10, "elliptic_rhs_pairs: need at least 10 eigenvectors");
    std::normal_distribution<double> normal(0.0, 1.0);
    RhsPairs out;
    for (Index j = 0; j < n_rhs; ++j) {
        Vector z(10);
        for (Index i = 0; i < 10; ++i) z[i] = normal(rng);
        Vector u = phi.leftCols(10) * z;
        out.f.push_back(a.apply(u));
        out.u.push_back(std::move(u));
    }
    return out;
}

RhsPairs gen_elliptic_rhs_pairs(const SubspaceDataset& dataset, Index n_rhs, std::uint64_t seed) {
    const Preset p = parse_preset(dataset.preset);
    require(is_eigen_preset(p), "gen_elliptic_rhs_pairs: eigen dataset required");
    RhsPairs out;
    for (Index s = 0; s < dataset.size(); ++s) {
        std::vector<FieldSample> ch;
        for (Index c = 0; c < dataset.channels; ++c) ch.push_back(dataset.channel(s, c));
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
        auto pairs = elliptic_rhs_pairs(sample_operator(p, ch), dataset.targets[static_cast<std::size_t>(s)], n_rhs, rng);
        for (auto& f : pairs.f) out.f.push_back(std::move(f));
        for (auto& u : pairs.u) out.u.push_back(std::move(u));
    }
    return out;
}

}  // namespace subreg
