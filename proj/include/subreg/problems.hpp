#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "subreg/fields.hpp"
#include "subreg/grassmann.hpp"
#include "subreg/sparse_operator.hpp"

namespace subreg {

/// -div k grad with Dirichlet boundaries on the interior nodes of the grid.
/// One channel gives an isotropic coefficient, one channel per axis an
/// anisotropic one. Face coefficients are arithmetic means of the adjacent
/// nodes; boundary faces use the node value.
SparseOperator assemble_elliptic(const std::vector<FieldSample>& k_fields);
SparseOperator assemble_elliptic(const FieldSample& k_field);

/// -Laplace + U.
SparseOperator assemble_schrodinger(const FieldSample& potential);

enum class Preset { Elliptic2dIso, Elliptic2dAniso, Elliptic3d, Qm1d, Qm2d, Burgers, TwoGrid, Control };

std::string_view preset_name(Preset p);
/// Throws ConfigError for unknown names.
Preset parse_preset(std::string_view name);
bool is_eigen_preset(Preset p);
/// Reduced default grid (nodes per axis) for each preset.
Index default_grid_size(Preset p);
GridSpec preset_grid(Preset p, Index n);

struct SubspaceDataset {
    std::string preset;
    std::uint64_t seed = 0;
    GridSpec grid;
    Index channels = 1;
    Matrix features;               // one row per sample: channels x nodes, channel-major
    std::vector<Matrix> targets;   // orthonormal n x k per sample

    Index size() const { return features.rows(); }
    Index target_dim() const { return targets.empty() ? 0 : targets.front().cols(); }
    FieldSample channel(Index sample, Index c) const;
};

struct DatasetOptions {
    Preset preset = Preset::Elliptic2dIso;
    Index n_samples = 1;
    Index m_target = 10;
    std::uint64_t seed = 0;
    Index grid_n = 0;  // 0: preset default
    double omega = 0.9;  // twogrid only
    EigOptions eig;
};

/// Coefficient/potential fields of one sample of an eigen preset.
std::vector<FieldSample> sample_eigen_fields(Preset p, const GridSpec& grid, std::mt19937_64& rng);

/// Operator of a sample rebuilt from its stored channels.
SparseOperator sample_operator(Preset p, const std::vector<FieldSample>& channels);

/// Leading eigenspace (largest |mu|) of I - omega D^-1 A, computed on the
/// symmetric similarity D^-1/2 A D^-1/2 and returned as orthonormal columns.
Matrix jacobi_leading_space(const SparseOperator& a, Index m, double omega, const EigOptions& opts = {});

SubspaceDataset gen_eig_dataset(const DatasetOptions& opts);

/// Appendix two-grid coefficient: M x M complex-exponential modes with
/// weights (1 + lambda1 |k|^2)^-1, tanh(lambda2 s0), rescaled to [alpha, beta].
struct TwoGridFieldParams {
    Index modes = 100;
    double lambda1 = 0.1;
    double lambda2 = 1.0;
    double alpha = 1.0;
    double beta = 50.0;
};

FieldSample twogrid_coefficient(const GridSpec& grid, std::mt19937_64& rng, const TwoGridFieldParams& params = {});

struct RhsPairs {
    std::vector<Vector> f;
    std::vector<Vector> u;
};

/// u = sum_i phi_i z_i over the first ten target vectors, f = A u.
RhsPairs gen_elliptic_rhs_pairs(const SubspaceDataset& dataset, Index n_rhs, std::uint64_t seed);
RhsPairs elliptic_rhs_pairs(const SparseOperator& a, const Matrix& phi, Index n_rhs, std::mt19937_64& rng);

struct SnapshotMatrix {
    Matrix values;   // n x snapshots
    Vector weights;  // quadrature weight per snapshot

    Index space_dim() const { return values.rows(); }
    Index snapshots() const { return values.cols(); }
};

struct BurgersOptions {
    Index nt = 64;       // time levels including t = 0
    double t_end = 0.1;
    Index substeps = 1;  // time steps between stored levels
};

/// Burgers' equation u_t + (u^2/2)_x = (nu u_x)_x on (0, 1), u = 0 at both
/// ends. Rusanov flux for the advection step, backward Euler for diffusion.
SnapshotMatrix burgers_integrate(const FieldSample& nu, const FieldSample& u0, const BurgersOptions& opts = {});

/// One explicit advection update (conservative Rusanov flux).
Vector burgers_advect(const Vector& u, double dt, double dx);

/// Largest CFL number max|u| dt / dx; throws CflViolation above 1.
double check_cfl(const Vector& u, double dt, double dx);

struct HeatControlSystem {
    FieldSample k; // diffusion coefficient
    Matrix a;      // div k grad (negative definite)
    Matrix w;      // input shapes, n x m
    Matrix psi;    // observation shapes, n x q
    Vector b;      // constant forcing
    Vector phi0;   // initial state
    Matrix a_aug;  // [[A, -I], [0, 0]]
    Matrix b_aug;  // [W; 0]
    Vector x0_aug; // [phi0; b]

    Index state_dim() const { return a.rows(); }
};

HeatControlSystem heat_control_system(const FieldSample& k_field, const Vector& b, const Vector& phi0, const Matrix& w,
                                      const Matrix& psi);

/// Solution of A phi = b, the uncontrolled long-time limit.
Vector heat_steady_state(const HeatControlSystem& sys);

struct ControlSampleOptions {
    Index grid_n = 32;
    Index n_inputs = 10;
    Index n_outputs = 10;
};

/// Appendix control sample: k = 5e-3 + (1 + tanh(5 chi)) / 10 and standardized
/// random shapes for W, Psi (orthonormalized), phi0, b.
HeatControlSystem sample_control_system(std::mt19937_64& rng, const ControlSampleOptions& opts = {});

/// Burgers coefficient and initial condition of one sample.
struct BurgersSample {
    FieldSample nu;
    FieldSample u0;
};

BurgersSample sample_burgers(const GridSpec& grid, std::mt19937_64& rng);

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr std::string_view kDatasetMagic = "subreg-dataset";

void write_dataset(const SubspaceDataset& ds, const std::filesystem::path& dir);
SubspaceDataset read_dataset(const std::filesystem::path& dir);

}  // namespace subreg
