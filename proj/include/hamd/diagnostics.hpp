#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hamd/instance.hpp"
#include "hamd/quadratizer.hpp"

namespace hamd {

/// Decoded-feasibility record of one augmented state.
struct FeasibilityRecord {
  double augmented_matrix_energy = 0.0;  // constant λ_K·K² excluded
  double decoded_native_objective = 0.0;
  std::size_t cardinality = 0;
  std::size_t card_violation = 0;
  std::size_t aux_viol_count = 0;
  double aux_viol_rate = 0.0;
  std::size_t false_positive_count = 0;  // w = 1, x_i x_j = 0
  std::size_t false_negative_count = 0;  // w = 0, x_i x_j = 1
  double card_penalty = 0.0;
  double rosenberg_penalty = 0.0;
  double penalty_fraction = 0.0;
};

/// Penalty fraction denominator: |matrix energy + λ_K·K²|, i.e. the penalty-
/// inclusive energy with the cardinality constant restored.
FeasibilityRecord feasibility_record(const AugmentedQubo& qubo, std::span<const std::uint8_t> state,
                                     const PortfolioInstance& instance);

struct OracleResult {
  Portfolio portfolio;
  double value = 0.0;
  std::uint64_t visited = 0;
  double seconds = 0.0;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// Visits every k-subset of {0..n-1} in revolving-door order, where
/// consecutive subsets differ by one swap. `visit(out, in)` is called for
/// each transition after the first subset; the first subset is {0..k-1}.
/// Returns the number of subsets visited.
template <class Visit>
std::uint64_t revolving_door(std::size_t n, std::size_t k, Visit&& visit);

/// Global exact-K minimizer by exhaustive enumeration. Ties resolve to the
/// lexicographically smallest selection. Throws std::length_error when
/// C(n, K) exceeds `cap`.
OracleResult brute_force_optimum(const PortfolioInstance& instance,
                                 std::uint64_t cap = kDefaultEnumerationCap);

/// Best native objective over `trials` uniform exact-K portfolios.
double random_reference(const PortfolioInstance& instance, std::size_t trials, std::uint64_t seed,
                        std::vector<double>* running_min = nullptr);

// Knuth, TAOCP 7.2.1.3, Algorithm R. c[1..t] ascending, c[t+1] = n.
template <class Visit>
std::uint64_t revolving_door(std::size_t n, std::size_t t, Visit&& visit) {
  if (t == 0 || t > n) return t == 0 ? 1 : 0;
  if (t == n) return 1;
  if (t == 1) {
    for (std::size_t v = 1; v < n; ++v) visit(v - 1, v);
    return n;
  }
  std::vector<std::size_t> c(t + 2);
  for (std::size_t j = 1; j <= t; ++j) c[j] = j - 1;
  c[t + 1] = n;
  std::uint64_t visited = 1;
  for (;;) {
    std::size_t j;
    if (t % 2 == 1) {
      if (c[1] + 1 < c[2]) {
        const std::size_t from = c[1];
        ++c[1];
        visit(from, c[1]);
        ++visited;
        continue;
      }
      j = 2;
      goto r4;
    } else {
      if (c[1] > 0) {
        const std::size_t from = c[1];
        --c[1];
        visit(from, c[1]);
        ++visited;
        continue;
      }
      j = 2;
      goto r5;
    }
  r4:
    // c[j] = c[j-1] + 1 here.
    if (c[j] >= j) {
      const std::size_t removed = c[j];
      const std::size_t added = j - 2;
      c[j] = c[j - 1];
      c[j - 1] = added;
      visit(removed, added);
      ++visited;
      continue;
    }
    ++j;
  r5:
    // c[j-1] = j - 2 here.
    if (c[j] + 1 < c[j + 1]) {
      const std::size_t removed = c[j - 1];
      c[j - 1] = c[j];
      ++c[j];
      visit(removed, c[j]);
      ++visited;
      continue;
    }
    ++j;
    if (j <= t) goto r4;
    return visited;
  }
}

}  // namespace hamd
