#include <doctest.h>

#include <cmath>
#include <random>

#include "subreg/fields.hpp"

using namespace subreg;

namespace {

struct ModeStats {
    Vector mean;
    Vector var;
};

// per-mode sample statistics of the sine coefficients of repeated GRF draws
ModeStats mode_stats(const GridSpec& grid, double gamma, double r, int draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Vector sum = Vector::Zero(grid.size()), sum2 = Vector::Zero(grid.size());
    for (int i = 0; i < draws; ++i) {
        const Vector c = sine_coefficients(grf_sample(grid, gamma, r, rng));
        sum += c;
        sum2 += c.cwiseProduct(c);
    }
    ModeStats s;
    s.mean = sum / draws;
    s.var = sum2 / draws - s.mean.cwiseProduct(s.mean);
    return s;
}

MorseParams simple_morse() {
    MorseParams p;
    p.r_e = 2.0;
    p.d = 15.0;
    p.q1_poly = {1.0, 0.5};
    p.c1 = 2.0;
    p.q2_poly = {1.5};
    p.c2 = 3.0;
    return p;
}

}  // namespace

TEST_CASE("GridSpec geometry") {
    const GridSpec g = GridSpec::box({4, 3}, -1.0, 1.0);
    CHECK(g.size() == 12);
    CHECK(g.spacing(0) == doctest::Approx(0.4));
    CHECK(g.coordinate(0, 0) == doctest::Approx(-0.6));
    CHECK(g.coordinate(1, 2) == doctest::Approx(0.5));
    CHECK(g.unravel(7) == std::vector<Index>{2, 1});
    CHECK_THROWS_AS(GridSpec::unit({1}).validate(), Error);
    CHECK_THROWS_AS(GridSpec::box({4}, 1.0, 1.0).validate(), Error);
    CHECK_THROWS_AS(GridSpec::unit({2, 2, 2, 2}).validate(), Error);
}

TEST_CASE("sine basis is orthonormal under the grid weight") {
    const GridSpec g = GridSpec::box({20}, 0.0, 3.0);
    const Matrix s = sine_basis(g, 0);
    const Matrix gram = g.spacing(0) * s.transpose() * s;
    CHECK((gram - Matrix::Identity(20, 20)).norm() <= 1e-12);
    CHECK(sine_mode_eigenvalue(g, {2}) == doctest::Approx(std::pow(2 * M_PI / 3.0, 2)));
}

TEST_CASE("sine transform roundtrip in 1, 2 and 3 dimensions") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const GridSpec& g : {GridSpec::unit({9}), GridSpec::box({5, 7}, -2.0, 3.0), GridSpec::unit({3, 4, 5})}) {
        Vector c(g.size());
        for (Index i = 0; i < c.size(); ++i) c[i] = normal(rng);
        CHECK((sine_coefficients(synthesize_sine(g, c)) - c).norm() <= 1e-11 * c.norm());
    }
}

TEST_CASE("single sine coefficient synthesizes the analytic mode") {
    const GridSpec g = GridSpec::unit({6, 5});
    Vector c = Vector::Zero(g.size());
    c[1 * 5 + 2] = 1.0;  // mode (2, 3)
    const FieldSample f = synthesize_sine(g, c);
    for (Index m = 0; m < g.size(); ++m) {
        const auto idx = g.unravel(m);
        const double x = g.coordinate(0, idx[0]), y = g.coordinate(1, idx[1]);
        CHECK(f.values[m] == doctest::Approx(2.0 * std::sin(2 * M_PI * x) * std::sin(3 * M_PI * y)));
    }
}

TEST_CASE("GRF mode variances follow the prescribed weights") {
    const GridSpec g = GridSpec::unit({8, 8});
    const double gamma = 0.01, r = 1.0;
    const int draws = 10000;
    const ModeStats s = mode_stats(g, gamma, r, draws, 42);
    for (Index m = 0; m < g.size(); ++m) {
        const auto idx = g.unravel(m);
        const double w = std::pow(1.0 + gamma * sine_mode_eigenvalue(g, {idx[0] + 1, idx[1] + 1}), -r);
        const double expected = w * w;
        // sample variance of a Gaussian has relative sd sqrt(2 / N)
        CHECK(std::abs(s.var[m] - expected) <= 5.0 * std::sqrt(2.0 / draws) * expected);
        CHECK(std::abs(s.mean[m]) <= 5.0 * std::sqrt(expected / draws));
    }
}

TEST_CASE("GRF with gamma zero is white in mode space") {
    const GridSpec g = GridSpec::unit({6});
    const ModeStats s = mode_stats(g, 0.0, 2.0, 10000, 43);
    for (Index m = 0; m < g.size(); ++m) CHECK(std::abs(s.var[m] - 1.0) <= 5.0 * std::sqrt(2.0 / 10000));
}

TEST_CASE("GRF energy concentrates in the lowest mode as r grows") {
    const GridSpec g = GridSpec::unit({10});
    double prev = 0.0;
    for (double r : {0.5, 1.0, 2.0, 4.0}) {
        const ModeStats s = mode_stats(g, 0.05, r, 4000, 44);
        const double ratio = s.var[0] / s.var[1];
        CHECK(ratio > prev);
        prev = ratio;
    }
}

TEST_CASE("GRF pointwise mean vanishes") {
    const GridSpec g = GridSpec::unit({6, 6});
    std::mt19937_64 rng(45);
    const int draws = 10000;
    Vector sum = Vector::Zero(g.size()), sum2 = Vector::Zero(g.size());
    for (int i = 0; i < draws; ++i) {
        const Vector v = grf_sample(g, 0.01, 1.0, rng).values;
        sum += v;
        sum2 += v.cwiseProduct(v);
    }
    const Vector mean = sum / draws;
    const Vector var = sum2 / draws - mean.cwiseProduct(mean);
    for (Index i = 0; i < g.size(); ++i) CHECK(std::abs(mean[i]) <= 4.0 * std::sqrt(var[i] / draws));
}

TEST_CASE("GRF is deterministic given the seed") {
    const GridSpec g = GridSpec::unit({7, 5});
    std::mt19937_64 a(46), b(46);
    CHECK(grf_sample(g, 0.1, 1.5, a).values == grf_sample(g, 0.1, 1.5, b).values);
}

TEST_CASE("standardize gives unit standard deviation") {
    std::mt19937_64 rng(47);
    const FieldSample f = standardize(grf_sample(GridSpec::unit({30}), 0.1, 2.0, rng));
    const double mean = f.values.mean();
    CHECK(std::sqrt((f.values.array() - mean).square().mean()) == doctest::Approx(1.0));
    const FieldSample zero = standardize(FieldSample{GridSpec::unit({4}), Vector::Zero(4)});
    CHECK(zero.values.isZero());
}

TEST_CASE("contrast_map saturation, midpoint and range") {
    const GridSpec g = GridSpec::unit({5});
    CHECK(contrast_map(FieldSample{g, Vector::Zero(5)}, 1.0, 50.0, 1.0).values.isApproxToConstant(25.5));
    CHECK(contrast_map(FieldSample{g, Vector::Constant(5, 1e3)}, 1.0, 50.0, 1.0).values.isApproxToConstant(50.0));
    CHECK(contrast_map(FieldSample{g, Vector::Constant(5, -1e3)}, 1.0, 50.0, 1.0).values.isApproxToConstant(1.0));

    std::mt19937_64 rng(48);
    for (int trial = 0; trial < 20; ++trial) {
        const FieldSample psi = grf_sample(GridSpec::unit({16, 16}), 1.0 / (20 * M_PI), 0.5, rng);
        const FieldSample a = contrast_map(psi, 1.0, 50.0, 1.0);
        CHECK(a.values.minCoeff() >= 1.0);
        CHECK(a.values.maxCoeff() <= 50.0);
        for (Index i = 0; i < psi.values.size(); ++i)
            if (std::abs(psi.values[i]) < 15.0) CHECK((a.values[i] > 1.0 && a.values[i] < 50.0));
        CHECK(a.values.maxCoeff() / a.values.minCoeff() <= 50.0);
        for (Index i = 0; i < psi.values.size(); ++i)
            for (Index j = 0; j < psi.values.size(); j += 17)
                if (psi.values[i] < psi.values[j]) CHECK(a.values[i] <= a.values[j]);
    }
    CHECK_THROWS_AS(contrast_map(FieldSample{g, Vector::Zero(5)}, 0.0, 50.0, 1.0), Error);
}

TEST_CASE("Morse potential vanishes at equilibrium and is continuous there") {
    const MorseParams p = simple_morse();
    CHECK(p(p.r_e) == 0.0);
    CHECK(std::abs(p(p.r_e - 1e-7) - p(p.r_e + 1e-7)) <= 1e-9);
}

TEST_CASE("Morse potential approaches its dissociation limit") {
    MorseParams p = simple_morse();
    // q -> c2 as r -> infinity when the q2 polynomial is constant
    const double limit = p.d * std::pow(1.0 - std::exp(-p.c2), 2);
    CHECK(p(1e8) == doctest::Approx(limit).epsilon(1e-6));
    p.c2 = 40.0;
    CHECK(p(1e8) == doctest::Approx(p.d).epsilon(1e-9));
}

TEST_CASE("sampled Morse potentials are finite and non-negative") {
    std::mt19937_64 rng(49);
    const GridSpec g1 = GridSpec::box({100}, 0.0, 10.0);
    const GridSpec g2 = GridSpec::box({40, 40}, -7.0, 7.0);
    for (int trial = 0; trial < 200; ++trial) {
        const FieldSample v = morse_potential_1d(sample_morse_1d(rng), g1);
        CHECK(v.values.allFinite());
        CHECK(v.values.minCoeff() >= 0.0);
    }
    for (int trial = 0; trial < 50; ++trial) {
        const FieldSample v = morse_potential_2d(sample_morse_2d(rng), g2);
        CHECK(v.values.allFinite());
        CHECK(v.values.minCoeff() >= 0.0);
    }
}

TEST_CASE("2D Morse geometry and inversion symmetry") {
    Morse2dParams p;
    p.v1 = simple_morse();
    p.v2 = simple_morse();
    p.v2.d = 20.0;
    p.u = 1.0;
    p.v = 0.0;
    const double c = p.center_offset();
    CHECK(c == doctest::Approx(std::sqrt(2.0) * 2.0));
    // on the equilibrium ring of the first center only the second term survives
    CHECK(p(c, p.v1.r_e) == doctest::Approx(p.v2(std::hypot(2 * c, p.v1.r_e))));
    CHECK(p(c, 0.0) == doctest::Approx(p.v1(0.0) + p.v2(2 * c)));

    p.v2 = p.v1;
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> unif(-7.0, 7.0);
    for (int i = 0; i < 100; ++i) {
        const double x = unif(rng), y = unif(rng);
        CHECK(p(x, y) == doctest::Approx(p(-x, -y)).epsilon(1e-12));
    }
    const Morse2dParams s = sample_morse_2d(rng);
    CHECK(std::hypot(s.u, s.v) == doctest::Approx(1.0));
}
