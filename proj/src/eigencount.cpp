#include "subreg/eigencount.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>

#include "subreg/error.hpp"

namespace subreg::eigencount {

namespace {

struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, unsigned>& p) const noexcept {
        return std::hash<std::uint64_t>{}(p.first * 131 + p.second);
    }
};

// C(k, D) = sum_{i=1}^{k} C(floor(k/i), D-1), grouped over equal quotients.
BigInt count_rec(std::uint64_t k, unsigned d,
                 std::unordered_map<std::pair<std::uint64_t, unsigned>, BigInt, PairHash>& memo) {
    if (k == 0) return 0;
    if (d == 1) return BigInt(k);
    const auto key = std::make_pair(k, d);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    BigInt total = 0;
    for (std::uint64_t i = 1; i <= k;) {
        const std::uint64_t q = k / i;
        const std::uint64_t last = k / q;
        total += BigInt(last - i + 1) * count_rec(q, d - 1, memo);
        i = last + 1;
    }
    memo.emplace(key, total);
    return total;
}

BigInt binomial(std::uint64_t n, std::uint64_t r) {
    if (r > n) return 0;
    r = std::min(r, n - r);
    BigInt out = 1;
    for (std::uint64_t i = 1; i <= r; ++i) {
        out *= (n - r + i);
        out /= i;
    }
    return out;
}

double energy(const std::vector<double>& a, const IndexTuple& t) {
    double e = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) e += a[j] * static_cast<double>(t[j]) * t[j];
    return e;
}

}  // namespace

BigInt count_products_leq(std::uint64_t k, unsigned d) {
    require(k >= 1 && d >= 1, "count_products_leq: need k, D >= 1");
    std::unordered_map<std::pair<std::uint64_t, unsigned>, BigInt, PairHash> memo;
    return count_rec(k, d, memo);
}

BigInt tau(std::uint64_t p, unsigned d) {
    require(p >= 1 && d >= 1, "tau: need p, D >= 1");
    BigInt out = 1;
    std::uint64_t rest = p;
    for (std::uint64_t f = 2; f * f <= rest; ++f) {
        std::uint64_t e = 0;
        while (rest % f == 0) {
            rest /= f;
            ++e;
        }
        if (e > 0) out *= binomial(e + d - 1, e);
    }
    if (rest > 1) out *= d;  // binom(1 + D - 1, 1)
    return out;
}

BigInt min_position(const IndexTuple& t) {
    BigInt out = 1;
    for (auto i : t) {
        require(i >= 1, "min_position: indices must be >= 1");
        out *= i;
    }
    return out;
}

double count_asymptotic(std::uint64_t k, unsigned d) {
    const double lk = std::log(static_cast<double>(k));
    return static_cast<double>(k) * std::pow(lk, d - 1.0) / std::tgamma(static_cast<double>(d));
}

SpectrumOrder enumerate_spectrum(const std::vector<double>& a, std::size_t k) {
    require(!a.empty() && k >= 1, "enumerate_spectrum: need D >= 1 and k >= 1");
    for (double aj : a) require(aj > 0.0 && std::isfinite(aj), "enumerate_spectrum: coefficients must be positive");
    using Entry = std::pair<double, IndexTuple>;
    // best-first over the index lattice: every successor has a strictly
    // larger energy, so pops arrive in (energy, lexicographic) order
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
    std::set<IndexTuple> seen;
    const IndexTuple origin(a.size(), 1);
    frontier.emplace(energy(a, origin), origin);
    seen.insert(origin);
    std::vector<Entry> found;
    while (found.size() < k) {
        Entry top = frontier.top();
        frontier.pop();
        for (std::size_t j = 0; j < a.size(); ++j) {
            IndexTuple next = top.second;
            ++next[j];
            if (seen.insert(next).second) frontier.emplace(energy(a, next), std::move(next));
        }
        found.push_back(std::move(top));
    }

    SpectrumOrder out;
    out.coefficients = a;
    const double pi2 = M_PI * M_PI;
    for (std::size_t i = 0; i < k; ++i) {
        out.ordered.push_back(found[i].second);
        out.lambdas.push_back(pi2 * found[i].first);
    }
    return out;
}

namespace {

std::vector<double> sample_coefficients(unsigned d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> a(d);
    for (auto& x : a) {
        do {
            x = unif(rng);
        } while (x <= 0.0);
    }
    return a;
}

}  // namespace

std::set<IndexTuple> census_position_k(unsigned d, std::size_t k, std::size_t n_samples, std::mt19937_64& rng) {
    require(d >= 1 && k >= 1 && n_samples >= 1, "census_position_k: invalid arguments");
    std::set<IndexTuple> seen;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const auto order = enumerate_spectrum(sample_coefficients(d, rng), k);
        seen.insert(order.ordered.back());
    }
    return seen;
}

SubspaceCensus census_subspaces(unsigned d, std::size_t k, std::size_t n_samples, std::mt19937_64& rng) {
    require(d >= 1 && k >= 1 && n_samples >= 1, "census_subspaces: invalid arguments");
    SubspaceCensus census;
    census.k = k;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const auto order = enumerate_spectrum(sample_coefficients(d, rng), k);
        std::set<IndexTuple> subspace(order.ordered.begin(), order.ordered.end());
        for (const auto& t : subspace) ++census.frequency[t];
        census.distinct.insert(std::move(subspace));
    }
    return census;
}

std::size_t greedy_augment(const SubspaceCensus& census, std::size_t m) {
    if (m == 0) return census.distinct_count();
    std::vector<std::pair<IndexTuple, std::uint64_t>> ranked(census.frequency.begin(), census.frequency.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    std::set<IndexTuple> extra;
    for (std::size_t i = 0; i < std::min(m, ranked.size()); ++i) extra.insert(ranked[i].first);

    std::set<std::set<IndexTuple>> augmented;
    for (const auto& sub : census.distinct) {
        std::set<IndexTuple> a = sub;
        a.insert(extra.begin(), extra.end());
        augmented.insert(std::move(a));
    }
    return augmented.size();
}

}  // namespace subreg::eigencount
