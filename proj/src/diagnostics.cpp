#include "hamd/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hamd/native_model.hpp"
#include "hamd/rng.hpp"

namespace hamd {

FeasibilityRecord feasibility_record(const AugmentedQubo& qubo, std::span<const std::uint8_t> state,
                                     const PortfolioInstance& instance) {
  if (state.size() != qubo.n_aug) throw std::invalid_argument("feasibility_record: state length does not match n_aug");
  const auto parts = augmented_energy(qubo, instance, state);
  const auto dec = decode(qubo, state);

  FeasibilityRecord r;
  r.augmented_matrix_energy = parts.matrix_energy;
  r.decoded_native_objective = parts.native;
  r.cardinality = dec.cardinality;
  r.card_violation = dec.cardinality > qubo.k ? dec.cardinality - qubo.k : qubo.k - dec.cardinality;
  for (std::size_t t = 0; t < qubo.aux_map.size(); ++t) {
    const auto& a = qubo.aux_map[t];
    const bool product = dec.x[a.i] && dec.x[a.j];
    const bool w = dec.w[t] != 0;
    if (w && !product) ++r.false_positive_count;
    if (!w && product) ++r.false_negative_count;
  }
  r.aux_viol_count = r.false_positive_count + r.false_negative_count;
  r.aux_viol_rate = qubo.aux_map.empty() ? 0.0
                                         : static_cast<double>(r.aux_viol_count) / static_cast<double>(qubo.aux_map.size());
  r.card_penalty = parts.card_penalty;
  r.rosenberg_penalty = parts.rosenberg_penalty;
  const double numerator = std::abs(r.card_penalty) + std::abs(r.rosenberg_penalty);
  const double denominator = std::abs(parts.matrix_energy + qubo.constant);
  if (numerator == 0.0) {
    r.penalty_fraction = 0.0;
  } else {
    r.penalty_fraction = denominator > 0.0 ? numerator / denominator : std::numeric_limits<double>::infinity();
  }
  return r;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    // r * num / i stays exact because r * num is divisible by i.
    if (r > UINT64_MAX / num) return UINT64_MAX;
    r = r * num / i;
  }
  return r;
}

namespace {

bool lex_less(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

OracleResult brute_force_optimum(const PortfolioInstance& instance, std::uint64_t cap) {
  instance.validate();
  const auto count = binomial(instance.n, instance.k);
  if (count > cap) {
    throw std::length_error("brute_force_optimum: C(" + std::to_string(instance.n) + ", " +
                            std::to_string(instance.k) + ") exceeds the enumeration cap");
  }
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::size_t> first(instance.k);
  std::iota(first.begin(), first.end(), std::size_t{0});
  SwapCache cache(instance, Portfolio::from_indices(instance.n, first));

  OracleResult best;
  best.portfolio = cache.portfolio();
  best.value = eval_native(instance, best.portfolio);
  auto best_sel = best.portfolio.chosen();

  // Incremental values only nominate candidates; the winner is decided on
  // exact re-evaluation so drift cannot reorder near-ties.
  auto consider = [&]() {
    const double slack = 1e-9 * std::max(1.0, std::abs(best.value));
    if (cache.value() > best.value + slack) return;
    const double exact = eval_native(instance, cache.portfolio());
    if (exact < best.value) {
      best.value = exact;
      best.portfolio = cache.portfolio();
      best_sel = best.portfolio.chosen();
    } else if (exact == best.value) {
      auto sel = cache.portfolio().chosen();
      if (lex_less(sel, best_sel)) {
        best.portfolio = cache.portfolio();
        best_sel = std::move(sel);
      }
    }
  };

  std::uint64_t steps = 0;
  best.visited = revolving_door(instance.n, instance.k, [&](std::size_t out, std::size_t in) {
    cache.apply(out, in);
    if (++steps % 65536 == 0) cache.resync();
    consider();
  });
  best.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return best;
}

double random_reference(const PortfolioInstance& instance, std::size_t trials, std::uint64_t seed,
                        std::vector<double>* running_min) {
  if (trials < 1) throw std::invalid_argument("random_reference: trials must be >= 1");
  Rng rng(seed, "random-reference");
  std::vector<std::size_t> pool(instance.n);
  double best = std::numeric_limits<double>::infinity();
  if (running_min) running_min->clear();
  for (std::size_t s = 0; s < trials; ++s) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t r = 0; r < instance.k; ++r) {
      std::swap(pool[r], pool[r + rng.below(instance.n - r)]);
    }
    const auto p = Portfolio::from_indices(instance.n, std::span(pool.data(), instance.k));
    best = std::min(best, eval_native(instance, p));
    if (running_min) running_min->push_back(best);
  }
  return best;
}

}  // namespace hamd
