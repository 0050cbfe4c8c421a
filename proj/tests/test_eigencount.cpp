#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "subreg/eigencount.hpp"

using namespace subreg::eigencount;

namespace {

// direct enumeration of all D-tuples with product <= k
std::uint64_t brute_count(std::uint64_t k, unsigned d) {
    std::uint64_t total = 0;
    std::function<void(unsigned, std::uint64_t)> rec = [&](unsigned left, std::uint64_t prod) {
        if (left == 0) {
            ++total;
            return;
        }
        for (std::uint64_t i = 1; prod * i <= k; ++i) rec(left - 1, prod * i);
    };
    rec(d, 1);
    return total;
}

std::uint64_t brute_tau(std::uint64_t p, unsigned d) {
    std::uint64_t total = 0;
    std::function<void(unsigned, std::uint64_t)> rec = [&](unsigned left, std::uint64_t rest) {
        if (left == 1) {
            ++total;
            return;
        }
        for (std::uint64_t i = 1; i <= rest; ++i)
            if (rest % i == 0) rec(left - 1, rest / i);
    };
    rec(d, p);
    return total;
}

double lambda(const std::vector<double>& a, const IndexTuple& t) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * std::pow(M_PI * t[j], 2);
    return s;
}

// all tuples in the box [1, m]^D sorted by (lambda, lexicographic)
std::vector<IndexTuple> brute_order(const std::vector<double>& a, std::uint32_t m) {
    std::vector<IndexTuple> all;
    IndexTuple t(a.size(), 1);
    while (true) {
        all.push_back(t);
        std::size_t j = 0;
        while (j < t.size() && t[j] == m) t[j++] = 1;
        if (j == t.size()) break;
        ++t[j];
    }
    std::sort(all.begin(), all.end(), [&](const IndexTuple& x, const IndexTuple& y) {
        const double lx = lambda(a, x), ly = lambda(a, y);
        return lx != ly ? lx < ly : x < y;
    });
    return all;
}

}  // namespace

TEST_CASE("count_products_leq small cases") {
    for (std::uint64_t k : {1, 5, 17, 100}) CHECK(count_products_leq(k, 1) == k);
    CHECK(count_products_leq(4, 2) == 8);
    for (unsigned d = 1; d <= 4; ++d)
        for (std::uint64_t k = 1; k <= 60; ++k) CHECK(count_products_leq(k, d) == brute_count(k, d));
}

TEST_CASE("count_products_leq matches the divisor-summatory asymptotic") {
    const double k = 1e6;
    const double oracle = k * std::log(k) * 1.011;
    const double count = count_products_leq(1000000, 2).convert_to<double>();
    CHECK(std::abs(count - oracle) <= 0.05 * oracle);
    CHECK(count_asymptotic(1000000, 2) == doctest::Approx(k * std::log(k)));
    CHECK(count_asymptotic(1000, 3) == doctest::Approx(1000 * std::pow(std::log(1000.0), 2) / 2));
}

TEST_CASE("tau cases and brute-force agreement") {
    CHECK(tau(1, 3) == 1);
    CHECK(tau(12, 2) == 6);
    CHECK(tau(8, 3) == 10);
    for (unsigned d = 1; d <= 4; ++d)
        for (std::uint64_t p = 1; p <= 80; ++p) CHECK(tau(p, d) == brute_tau(p, d));
}

TEST_CASE("count is the partial sum of tau") {
    for (unsigned d = 1; d <= 6; ++d) {
        BigInt sum = 0;
        for (std::uint64_t k = 1; k <= 500; ++k) {
            sum += tau(k, d);
            CHECK(count_products_leq(k, d) == sum);
        }
    }
}

TEST_CASE("count obeys the power upper bound") {
    for (std::uint64_t k : {2, 4, 8, 16}) {
        const unsigned log2k = static_cast<unsigned>(std::log2(static_cast<double>(k)));
        for (unsigned d = 1; d <= 50; ++d) {
            BigInt bound = k;
            for (unsigned i = 0; i < log2k; ++i) bound *= d;
            CHECK(count_products_leq(k, d) <= bound);
        }
    }
}

TEST_CASE("min_position is the product of indices") {
    CHECK(min_position({1, 1, 1}) == 1);
    CHECK(min_position({4, 5}) == 20);
    CHECK(min_position({2, 3, 7}) == 42);
}

TEST_CASE("enumerate_spectrum examples") {
    const auto strong = enumerate_spectrum({1.0, 1e6}, 4);
    CHECK(strong.ordered == std::vector<IndexTuple>{{1, 1}, {2, 1}, {3, 1}, {4, 1}});

    const auto iso = enumerate_spectrum({1.0, 1.0}, 4);
    CHECK(iso.ordered == std::vector<IndexTuple>{{1, 1}, {1, 2}, {2, 1}, {2, 2}});
    CHECK(iso.lambdas[0] == doctest::Approx(2 * M_PI * M_PI));
    CHECK(iso.lambdas[1] == doctest::Approx(5 * M_PI * M_PI));
    CHECK(iso.lambdas[3] == doctest::Approx(8 * M_PI * M_PI));

    const auto line = enumerate_spectrum({0.3}, 6);
    for (std::uint32_t i = 0; i < 6; ++i) CHECK(line.ordered[i] == IndexTuple{i + 1});
}

TEST_CASE("enumerate_spectrum agrees with brute force on random coefficients") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const unsigned d = 1 + trial % 3;
        std::vector<double> a(d);
        for (auto& x : a) x = 0.05 + unif(rng);
        const std::size_t k = 12;
        const auto got = enumerate_spectrum(a, k);
        // box size large enough: any tuple in the first k has every index <= k
        const auto expected = brute_order(a, d == 1 ? 12 : (d == 2 ? 40 : 14));
        bool same = true;
        for (std::size_t i = 0; i < k; ++i) same = same && got.ordered[i] == expected[i];
        CHECK(same);
        for (std::size_t i = 1; i < k; ++i) CHECK(got.lambdas[i] >= got.lambdas[i - 1]);
    }
}

TEST_CASE("census at position k respects the product condition") {
    std::mt19937_64 rng(32);
    const auto first = census_position_k(3, 1, 200, rng);
    CHECK(first == std::set<IndexTuple>{{1, 1, 1}});

    for (unsigned d : {2u, 3u}) {
        for (std::size_t k : {3u, 7u, 12u}) {
            const auto seen = census_position_k(d, k, 3000, rng);
            for (const auto& t : seen) {
                CHECK(min_position(t) <= k);
                CHECK(t != IndexTuple(d, 1));
            }
            CHECK(BigInt(seen.size()) <= count_products_leq(k, d));
        }
    }
}

TEST_CASE("subspace census counts") {
    std::mt19937_64 rng(33);
    CHECK(census_subspaces(3, 1, 500, rng).distinct_count() == 1);

    // k = 2, 3: the lattice-filling construction degenerates, exact counts are k
    for (std::size_t k = 2; k <= 3; ++k) {
        std::mt19937_64 r(34 + k);
        CHECK(census_subspaces(2, k, 100000, r).distinct_count() == k);
    }
    for (std::size_t k = 4; k <= 6; ++k) {
        std::mt19937_64 r(34 + k);
        CHECK(census_subspaces(2, k, 100000, r).distinct_count() >= k + 1);
    }

    std::size_t prev = 0;
    for (std::size_t n : {100u, 1000u, 5000u}) {
        std::mt19937_64 r(35);
        const std::size_t c = census_subspaces(3, 8, n, r).distinct_count();
        CHECK(c >= prev);
        prev = c;
    }
}

TEST_CASE("greedy augmentation reduces the distinct count") {
    std::mt19937_64 rng(36);
    const auto census = census_subspaces(3, 10, 20000, rng);
    const std::size_t c0 = greedy_augment(census, 0);
    const std::size_t c10 = greedy_augment(census, 10);
    const std::size_t c20 = greedy_augment(census, 20);
    CHECK(c0 == census.distinct_count());
    CHECK(c10 < c0);
    CHECK(c20 < c10);
    std::size_t prev = c0;
    for (std::size_t m = 1; m <= 30; ++m) {
        const std::size_t c = greedy_augment(census, m);
        CHECK(c <= prev);
        prev = c;
    }
    CHECK(greedy_augment(census, census.frequency.size()) == 1);
}
