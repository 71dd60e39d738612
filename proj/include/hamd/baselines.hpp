#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hamd/hamd_solver.hpp"
#include "hamd/quadratizer.hpp"

namespace hamd {

/// Geometric-cooling Metropolis annealing over single-bit flips.
///
/// When `initial_temperature`/`final_temperature` are zero they are
/// calibrated from `calibration_samples` random flips of the start state so
/// that uphill moves are accepted with probability ≈ `initial_acceptance`
/// at the start and ≈ `final_acceptance` at the end. In iteration mode the
/// budget counts sweeps of n_aug proposals each.
struct AnnealConfig {
  double initial_temperature = 0.0;
  double final_temperature = 0.0;
  double initial_acceptance = 0.8;
  double final_acceptance = 0.01;
  std::size_t calibration_samples = 100;
  Budget budget = Budget::seconds(60.0);
  std::uint64_t seed = 0;

  void validate() const;
};

/// Steepest non-tabu single-bit flip with aspiration. `tenure == 0` means
/// max(10, n_aug/50). In iteration mode the budget counts flips.
struct TabuConfig {
  std::size_t tenure = 0;
  bool aspiration = true;
  Budget budget = Budget::seconds(60.0);
  std::uint64_t seed = 0;

  std::size_t effective_tenure(std::size_t n_aug) const;
  void validate() const;
};

struct BaselineTracePoint {
  double fraction = 0.0;
  double best_energy = 0.0;
};

struct BaselineResult {
  std::vector<std::uint8_t> final_state;
  std::vector<std::uint8_t> best_state;
  double final_energy = 0.0;
  double best_energy = 0.0;
  std::vector<BaselineTracePoint> trace;
  // Best-seen state snapshotted at the TTT fractions, for native decoding.
  std::vector<std::vector<std::uint8_t>> ttt_states;
  std::uint64_t iterations = 0;  // sweeps (SA) or flips (tabu)
  double initial_temperature = 0.0;
  double final_temperature = 0.0;
  std::size_t tenure = 0;
  double wall_seconds = 0.0;
};

/// Local fields h_v = linear_v + Σ_u Q_vu s_u for O(degree) flip deltas.
class FlipState {
 public:
  FlipState(const AugmentedQubo& qubo, std::vector<std::uint8_t> state);

  double flip_delta(std::size_t v) const { return state_[v] ? -field_[v] : field_[v]; }
  void flip(std::size_t v);
  double energy() const { return energy_; }
  const std::vector<std::uint8_t>& state() const { return state_; }

 private:
  const AugmentedQubo* qubo_;
  std::vector<std::uint8_t> state_;
  std::vector<double> field_;
  double energy_ = 0.0;
};

BaselineResult sa_solve(const AugmentedQubo& qubo, const AnnealConfig& config);
BaselineResult tabu_solve(const AugmentedQubo& qubo, const TabuConfig& config);

}  // namespace hamd
