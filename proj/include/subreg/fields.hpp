#pragma once

#include <random>
#include <vector>

#include "subreg/numerics.hpp"

namespace subreg {

/// Uniform grid of interior nodes: along axis d the nodes are
/// lo_d + (i + 1) h_d, i = 0..n_d-1, with h_d = (hi_d - lo_d) / (n_d + 1).
/// Values are stored row-major with the last axis fastest.
struct GridSpec {
    std::vector<Index> extents;
    std::vector<double> lo;
    std::vector<double> hi;

    static GridSpec unit(std::vector<Index> extents);
    static GridSpec box(std::vector<Index> extents, double lo, double hi);

    void validate() const;
    std::size_t dims() const { return extents.size(); }
    Index size() const;
    double spacing(std::size_t axis) const { return (hi[axis] - lo[axis]) / static_cast<double>(extents[axis] + 1); }
    double length(std::size_t axis) const { return hi[axis] - lo[axis]; }
    double coordinate(std::size_t axis, Index i) const { return lo[axis] + static_cast<double>(i + 1) * spacing(axis); }
    /// Multi-index of a flat node index.
    std::vector<Index> unravel(Index flat) const;

    bool operator==(const GridSpec&) const = default;
};

struct FieldSample {
    GridSpec grid;
    Vector values;
};

/// Dirichlet sine modes normalized in L2 of the box. Entry (i, k) of the
/// returned matrix is sqrt(2/L) sin(pi (k+1) (x_i - lo) / L).
Matrix sine_basis(const GridSpec& grid, std::size_t axis);

/// Eigenvalue of -Laplace for the mode with 1-based indices `k`.
double sine_mode_eigenvalue(const GridSpec& grid, const std::vector<Index>& k);

/// Tensor sine coefficients (row-major over mode indices) of a field; exact
/// inverse of synthesize_sine on the grid.
Vector sine_coefficients(const FieldSample& field);
FieldSample synthesize_sine(const GridSpec& grid, const Vector& coefficients);

/// Gaussian random field with mode weights (1 + gamma lambda)^(-r).
FieldSample grf_sample(const GridSpec& grid, double gamma, double r, std::mt19937_64& rng);

/// Same field rescaled to unit sample standard deviation (zero fields stay zero).
FieldSample standardize(FieldSample field);

/// alpha + (beta - alpha) (tanh(s psi) + 1) / 2.
FieldSample contrast_map(const FieldSample& psi, double alpha, double beta, double s);

/// Parameters of the expanded Morse oscillator
/// V(r) = d (1 - exp(-y p(r)))^2, y = (r/r_e - 1)/(r/r_e + 1),
/// p = q1 below r_e and q2 above, q(x) = (1 - y) qt(x) + c y.
struct MorseParams {
    double r_e = 1.0;
    double d = 1.0;
    std::vector<double> q1_poly;  // coefficients of qt_1 in x = r/r_e, ascending degree
    double c1 = 0.0;
    std::vector<double> q2_poly;
    double c2 = 0.0;

    double operator()(double r) const;
};

struct Morse2dParams {
    MorseParams v1;
    MorseParams v2;
    double u = 1.0;  // unit direction of the centers
    double v = 0.0;

    /// Centers sit at +/- c (u, v) with c = sqrt(2) v1.r_e.
    double center_offset() const;
    double operator()(double x, double y) const;
};

MorseParams sample_morse_1d(std::mt19937_64& rng);
Morse2dParams sample_morse_2d(std::mt19937_64& rng);

FieldSample morse_potential_1d(const MorseParams& params, const GridSpec& grid);
FieldSample morse_potential_2d(const Morse2dParams& params, const GridSpec& grid);

}  // namespace subreg
