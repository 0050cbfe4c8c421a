#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace subreg::eigencount {

using BigInt = boost::multiprecision::cpp_int;

/// Multi-index (i_1, ..., i_D) of the separable eigenfunction prod_j sin(pi i_j x_j).
using IndexTuple = std::vector<std::uint32_t>;

struct SpectrumOrder {
    std::vector<double> coefficients;  // a_j > 0
    std::vector<IndexTuple> ordered;   // ascending lambda, lexicographic on ties
    std::vector<double> lambdas;       // sum_j a_j (pi i_j)^2, same order
};

/// Number of D-tuples of positive integers whose product is <= k.
BigInt count_products_leq(std::uint64_t k, unsigned d);

/// Number of ordered D-tuples with product exactly p.
BigInt tau(std::uint64_t p, unsigned d);

/// Product of the indices: the earliest position the eigenvector can take.
BigInt min_position(const IndexTuple& t);

/// Leading-order asymptotic k (ln k)^(D-1) / (D-1)!.
double count_asymptotic(std::uint64_t k, unsigned d);

/// First k index tuples ordered by eigenvalue for coefficients a.
SpectrumOrder enumerate_spectrum(const std::vector<double>& a, std::size_t k);

/// Distinct tuples seen at position k over uniform coefficient samples.
std::set<IndexTuple> census_position_k(unsigned d, std::size_t k, std::size_t n_samples, std::mt19937_64& rng);

struct SubspaceCensus {
    std::size_t k = 0;
    std::set<std::set<IndexTuple>> distinct;      // distinct V_k as tuple sets
    std::map<IndexTuple, std::uint64_t> frequency;  // samples in which each tuple was in V_k

    std::size_t distinct_count() const { return distinct.size(); }
};

SubspaceCensus census_subspaces(unsigned d, std::size_t k, std::size_t n_samples, std::mt19937_64& rng);

/// Distinct count after appending the m most frequent tuples to every V_k.
std::size_t greedy_augment(const SubspaceCensus& census, std::size_t m);

}  // namespace subreg::eigencount
