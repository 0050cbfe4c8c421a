#include <random>

#include "subreg/cli.hpp"
#include "subreg/parallel.hpp"
#include "subreg/solvers.hpp"

namespace subreg {

namespace {

SubspaceDataset empty_dataset(const GenOptions& opts, Index channels) {
    const DatasetOptions& d = opts.dataset;
    require(d.n_samples >= 1 && d.m_target >= 1, "generate_dataset: need samples and targets");
    SubspaceDataset ds;
    ds.preset = std::string(preset_name(d.preset));
    ds.seed = d.seed;
    ds.grid = preset_grid(d.preset, d.grid_n);
    require(d.m_target < ds.grid.size(), "generate_dataset: m_target must be below the grid size");
    ds.channels = channels;
    ds.features.resize(d.n_samples, channels * ds.grid.size());
    ds.targets.resize(static_cast<std::size_t>(d.n_samples));
    return ds;
}

SubspaceDataset gen_burgers(const GenOptions& opts) {
    SubspaceDataset ds = empty_dataset(opts, 2);
    const Index nodes = ds.grid.size();
    parallel_for(static_cast<std::size_t>(ds.size()), [&](std::size_t s) {
        std::mt19937_64 rng(derive_seed(ds.seed, s));
        const BurgersSample bs = sample_burgers(ds.grid, rng);
        auto row = ds.features.row(static_cast<Index>(s));
        row.segment(0, nodes) = bs.nu.values.transpose();
        row.segment(nodes, nodes) = bs.u0.values.transpose();
        Matrix basis = pod_basis(burgers_integrate(bs.nu, bs.u0, opts.burgers), opts.dataset.m_target).basis;
        canonicalize_signs(basis);
        ds.targets[s] = std::move(basis);
    });
    return ds;
}

SubspaceDataset gen_control(const GenOptions& opts) {
    require(opts.n_shapes >= 1, "generate_dataset: need at least one control shape");
    SubspaceDataset ds = empty_dataset(opts, 3 + 2 * opts.n_shapes);
    const Index nodes = ds.grid.size();
    const ControlSampleOptions copts{nodes, opts.n_shapes, opts.n_shapes};
    parallel_for(static_cast<std::size_t>(ds.size()), [&](std::size_t s) {
        std::mt19937_64 rng(derive_seed(ds.seed, s));
        const HeatControlSystem sys = sample_control_system(rng, copts);
        auto row = ds.features.row(static_cast<Index>(s));
        row.segment(0, nodes) = sys.k.values.transpose();
        row.segment(nodes, nodes) = sys.phi0.transpose();
        row.segment(2 * nodes, nodes) = sys.b.transpose();
        for (Index j = 0; j < opts.n_shapes; ++j) {
            row.segment((3 + j) * nodes, nodes) = sys.w.col(j).transpose();
            row.segment((3 + opts.n_shapes + j) * nodes, nodes) = sys.psi.col(j).transpose();
        }
        const BalancedReduction br =
            balanced_truncation(sys.a, sys.w, sys.psi.transpose(), opts.dataset.m_target);
        Matrix basis = OrthoBasis::orthonormalize_householder(br.projection).matrix();
        canonicalize_signs(basis);
        ds.targets[s] = std::move(basis);
    });
    return ds;
}

}  // namespace

SubspaceDataset generate_dataset(const GenOptions& opts) {
    switch (opts.dataset.preset) {
        case Preset::Burgers: return gen_burgers(opts);
        case Preset::Control: return gen_control(opts);
        default: return gen_eig_dataset(opts.dataset);
    }
}

HeatControlSystem control_system_of(const SubspaceDataset& ds, Index s) {
    require(ds.preset == preset_name(Preset::Control), "control_system_of: not a control dataset");
    require(ds.channels >= 5 && (ds.channels - 3) % 2 == 0, "control_system_of: bad channel count");
    const Index shapes = (ds.channels - 3) / 2;
    const Index nodes = ds.grid.size();
    Matrix w(nodes, shapes), psi(nodes, shapes);
    for (Index j = 0; j < shapes; ++j) {
        w.col(j) = ds.channel(s, 3 + j).values;
        psi.col(j) = ds.channel(s, 3 + shapes + j).values;
    }
    return heat_control_system(ds.channel(s, 0), ds.channel(s, 2).values, ds.channel(s, 1).values, w, psi);
}

}  // namespace subreg
