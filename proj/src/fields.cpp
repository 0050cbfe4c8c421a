#include "subreg/fields.hpp"

#include <cmath>
#include <numeric>

namespace subreg {

namespace {

// Applies `m` along one axis of a row-major tensor.
Vector transform_axis(const Vector& data, const std::vector<Index>& ext, std::size_t axis, const Matrix& m) {
    Index outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= ext[d];
    for (std::size_t d = axis + 1; d < ext.size(); ++d) inner *= ext[d];
    const Index n = ext[axis];
    Vector out(data.size());
    for (Index o = 0; o < outer; ++o) {
        Eigen::Map<const Matrix> in(data.data() + o * n * inner, inner, n);
        Eigen::Map<Matrix> res(out.data() + o * n * inner, inner, n);
        res.noalias() = in * m.transpose();
    }
    return out;
}

double polyval(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
}

}  // namespace

GridSpec GridSpec::unit(std::vector<Index> extents) { return box(std::move(extents), 0.0, 1.0); }

GridSpec GridSpec::box(std::vector<Index> extents, double lo, double hi) {
    GridSpec g;
    g.lo.assign(extents.size(), lo);
    g.hi.assign(extents.size(), hi);
    g.extents = std::move(extents);
    g.validate();
    return g;
}

void GridSpec::validate() const {
    require(!extents.empty() && extents.size() <= 3, "GridSpec: 1 to 3 dimensions");
    require(lo.size() == extents.size() && hi.size() == extents.size(), "GridSpec: bounds per axis");
    for (std::size_t d = 0; d < extents.size(); ++d) {
        require(extents[d] >= 2, "GridSpec: extents must be >= 2");
        require(std::isfinite(lo[d]) && std::isfinite(hi[d]) && lo[d] < hi[d], "GridSpec: invalid bounds");
    }
}

Index GridSpec::size() const {
    return std::accumulate(extents.begin(), extents.end(), Index{1}, std::multiplies<>());
}

std::vector<Index> GridSpec::unravel(Index flat) const {
    std::vector<Index> idx(extents.size());
    for (std::size_t d = extents.size(); d-- > 0;) {
        idx[d] = flat % extents[d];
        flat /= extents[d];
    }
    return idx;
}

Matrix sine_basis(const GridSpec& grid, std::size_t axis) {
    const Index n = grid.extents[axis];
    const double len = grid.length(axis);
    const double scale = std::sqrt(2.0 / len);
    Matrix s(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k)
            s(i, k) = scale * std::sin(M_PI * static_cast<double>((k + 1) * (i + 1)) / static_cast<double>(n + 1));
    return s;
}

double sine_mode_eigenvalue(const GridSpec& grid, const std::vector<Index>& k) {
    double lam = 0.0;
    for (std::size_t d = 0; d < k.size(); ++d) {
        const double w = M_PI * static_cast<double>(k[d]) / grid.length(d);
        lam += w * w;
    }
    return lam;
}

Vector sine_coefficients(const FieldSample& field) {
    const auto& g = field.grid;
    Vector c = field.values;
    for (std::size_t d = 0; d < g.dims(); ++d) {
        const Matrix proj = sine_basis(g, d).transpose() * g.spacing(d);
        c = transform_axis(c, g.extents, d, proj);
    }
    return c;
}

FieldSample synthesize_sine(const GridSpec& grid, const Vector& coefficients) {
    require(coefficients.size() == grid.size(), "synthesize_sine: coefficient count mismatch");
    Vector v = coefficients;
    for (std::size_t d = 0; d < grid.dims(); ++d) v = transform_axis(v, grid.extents, d, sine_basis(grid, d));
    return {grid, v};
}

FieldSample grf_sample(const GridSpec& grid, double gamma, double r, std::mt19937_64& rng) {
    grid.validate();
    require(gamma >= 0.0 && r >= 0.0, "grf_sample: gamma and r must be non-negative");
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector c(grid.size());
    std::vector<Index> k(grid.dims());
    for (Index m = 0; m < grid.size(); ++m) {
        const auto idx = grid.unravel(m);
        for (std::size_t d = 0; d < k.size(); ++d) k[d] = idx[d] + 1;
        c[m] = normal(rng) * std::pow(1.0 + gamma * sine_mode_eigenvalue(grid, k), -r);
    }
    return synthesize_sine(grid, c);
}

FieldSample standardize(FieldSample field) {
    const double n = static_cast<double>(field.values.size());
    const double mean = field.values.mean();
    const double sd = std::sqrt((field.values.array() - mean).square().sum() / n);
    if (sd > 0.0) field.values /= sd;
    return field;
}

FieldSample contrast_map(const FieldSample& psi, double alpha, double beta, double s) {
    require(alpha > 0.0 && beta > 0.0, "contrast_map: alpha and beta must be positive");
    FieldSample out = psi;
    out.values = psi.values.unaryExpr([&](double p) { return alpha + (beta - alpha) * (std::tanh(s * p) + 1.0) / 2.0; });
    return out;
}

double MorseParams::operator()(double r) const {
    const double x = r / r_e;
    const double y = (x - 1.0) / (x + 1.0);
    const double q = r < r_e ? (1.0 - y) * polyval(q1_poly, x) + c1 * y : (1.0 - y) * polyval(q2_poly, x) + c2 * y;
    const double e = 1.0 - std::exp(-y * q);
    return d * e * e;
}

double Morse2dParams::center_offset() const { return std::sqrt(2.0) * v1.r_e; }

double Morse2dParams::operator()(double x, double y) const {
    const double c = center_offset();
    return v1(std::hypot(x - c * u, y - c * v)) + v2(std::hypot(x + c * u, y + c * v));
}

MorseParams sample_morse_1d(std::mt19937_64& rng) {
    auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    MorseParams p;
    p.r_e = unif(1.0, 8.0);
    p.d = unif(10.0, 40.0);
    p.q1_poly.resize(11);
    for (auto& c : p.q1_poly) c = unif(0.0, 5.0);
    p.c1 = unif(0.0, 5.0);
    p.q2_poly.resize(11);
    for (auto& c : p.q2_poly) c = unif(0.0, 10.0);
    p.c2 = unif(1.0, 11.0);
    return p;
}

Morse2dParams sample_morse_2d(std::mt19937_64& rng) {
    auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    auto one = [&] {
        MorseParams p;
        p.r_e = unif(1.0, 5.0);
        p.d = unif(10.0, 40.0);
        p.q1_poly.resize(3);
        for (auto& c : p.q1_poly) c = unif(0.0, 3.0);
        p.c1 = unif(10.0, 13.0);
        p.q2_poly.resize(3);
        for (auto& c : p.q2_poly) c = unif(0.0, 3.0);
        p.c2 = unif(10.0, 13.0);
        return p;
    };
    Morse2dParams p;
    p.v1 = one();
    p.v2 = one();
    std::normal_distribution<double> normal(0.0, 1.0);
    double u = 0.0, v = 0.0;
    while (std::hypot(u, v) < 1e-12) {
        u = normal(rng);
        v = normal(rng);
    }
    const double n = std::hypot(u, v);
    p.u = u / n;
    p.v = v / n;
    return p;
}

FieldSample morse_potential_1d(const MorseParams& params, const GridSpec& grid) {
    require(grid.dims() == 1, "morse_potential_1d: 1D grid required");
    require(params.r_e > 0.0 && params.d > 0.0, "morse_potential_1d: r_e and d must be positive");
    FieldSample f{grid, Vector(grid.size())};
    for (Index i = 0; i < grid.size(); ++i) f.values[i] = params(grid.coordinate(0, i));
    return f;
}

FieldSample morse_potential_2d(const Morse2dParams& params, const GridSpec& grid) {
    require(grid.dims() == 2, "morse_potential_2d: 2D grid required");
    require(std::abs(std::hypot(params.u, params.v) - 1.0) < 1e-12, "morse_potential_2d: (u, v) must be a unit vector");
    FieldSample f{grid, Vector(grid.size())};
    for (Index i = 0; i < grid.extents[0]; ++i)
        for (Index j = 0; j < grid.extents[1]; ++j)
            f.values[i * grid.extents[1] + j] = params(grid.coordinate(0, i), grid.coordinate(1, j));
    return f;
}

}  // namespace subreg
