#include "hamd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hamd/rng.hpp"

namespace hamd {

void AnnealConfig::validate() const {
  if (!(budget.amount > 0.0)) throw std::invalid_argument("AnnealConfig: budget must be positive");
  const bool manual = initial_temperature > 0.0 || final_temperature > 0.0;
  if (manual && !(initial_temperature > 0.0 && final_temperature > 0.0 &&
                  final_temperature < initial_temperature)) {
    throw std::invalid_argument("AnnealConfig: need 0 < final temperature < initial temperature");
  }
  if (!(initial_acceptance > final_acceptance && final_acceptance > 0.0 && initial_acceptance < 1.0)) {
    throw std::invalid_argument("AnnealConfig: need 0 < final acceptance < initial acceptance < 1");
  }
}

std::size_t TabuConfig::effective_tenure(std::size_t n_aug) const {
  return tenure > 0 ? tenure : std::max<std::size_t>(10, n_aug / 50);
}

void TabuConfig::validate() const {
  if (!(budget.amount > 0.0)) throw std::invalid_argument("TabuConfig: budget must be positive");
}

FlipState::FlipState(const AugmentedQubo& qubo, std::vector<std::uint8_t> state)
    : qubo_(&qubo), state_(std::move(state)) {
  if (state_.size() != qubo.n_aug) throw std::invalid_argument("FlipState: state length does not match n_aug");
  field_ = qubo.linear;
  for (std::size_t v = 0; v < qubo.n_aug; ++v) {
    if (!state_[v]) continue;
    for (std::size_t e = qubo.adj_start[v]; e < qubo.adj_start[v + 1]; ++e) {
      field_[qubo.adj_index[e]] += qubo.adj_weight[e];
    }
  }
  energy_ = qubo.matrix_energy(state_);
}

void FlipState::flip(std::size_t v) {
  const auto& q = *qubo_;
  energy_ += flip_delta(v);
  const double sign = state_[v] ? -1.0 : 1.0;
  state_[v] ^= 1;
  for (std::size_t e = q.adj_start[v]; e < q.adj_start[v + 1]; ++e) {
    field_[q.adj_index[e]] += sign * q.adj_weight[e];
  }
}

namespace {

// Snapshots the best-seen state at each TTT fraction as the clock passes it.
class TttRecorder {
 public:
  void advance(double fraction, const std::vector<std::uint8_t>& best) {
    while (next_ < kTttFractions.size() && fraction >= kTttFractions[next_] - 1e-12) {
      states_.push_back(best);
      ++next_;
    }
  }
  std::vector<std::vector<std::uint8_t>> finish(const std::vector<std::uint8_t>& best) {
    while (next_ < kTttFractions.size()) {
      states_.push_back(best);
      ++next_;
    }
    return std::move(states_);
  }

 private:
  std::size_t next_ = 0;
  std::vector<std::vector<std::uint8_t>> states_;
};

}  // namespace

BaselineResult sa_solve(const AugmentedQubo& qubo, const AnnealConfig& config) {
  config.validate();
  if (qubo.n_aug == 0) throw std::invalid_argument("sa_solve: empty QUBO");
  Rng rng(config.seed, "sa");
  BudgetClock clock(config.budget);
  const std::size_t n_aug = qubo.n_aug;

  FlipState fs(qubo, std::vector<std::uint8_t>(n_aug, 0));
  BaselineResult res;

  double t0 = config.initial_temperature;
  double tf = config.final_temperature;
  if (t0 <= 0.0) {
    double sum = 0.0, sum_abs = 0.0;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < config.calibration_samples; ++s) {
      const double d = fs.flip_delta(rng.below(n_aug));
      sum_abs += std::abs(d);
      if (d > 0.0) {
        sum += d;
        ++pos;
      }
    }
    double scale = pos > 0 ? sum / static_cast<double>(pos)
                           : sum_abs / static_cast<double>(std::max<std::size_t>(1, config.calibration_samples));
    if (!(scale > 0.0)) scale = 1.0;
    t0 = -scale / std::log(config.initial_acceptance);
    tf = -scale / std::log(config.final_acceptance);
  }
  res.initial_temperature = t0;
  res.final_temperature = tf;

  res.best_state = fs.state();
  res.best_energy = fs.energy();
  res.trace.push_back({0.0, res.best_energy});
  TttRecorder ttt;

  const bool fixed = config.budget.fixed();
  const auto total_sweeps = static_cast<std::uint64_t>(config.budget.amount);
  const double log_ratio = std::log(tf / t0);
  for (std::uint64_t sweep = 0;; ++sweep) {
    double progress;
    if (fixed) {
      if (sweep >= total_sweeps) break;
      progress = total_sweeps > 1 ? static_cast<double>(sweep) / static_cast<double>(total_sweeps - 1) : 0.0;
    } else {
      progress = clock.fraction();
      if (progress >= 1.0) break;
    }
    const double temp = t0 * std::exp(log_ratio * progress);
    for (std::size_t p = 0; p < n_aug; ++p) {
      const std::size_t v = rng.below(n_aug);
      const double d = fs.flip_delta(v);
      if (d <= 0.0 || rng.uniform() < std::exp(-d / temp)) {
        fs.flip(v);
        if (fs.energy() < res.best_energy) {
          res.best_energy = fs.energy();
          res.best_state = fs.state();
        }
      }
    }
    ++res.iterations;
    clock.tick();
    const double done = fixed ? static_cast<double>(sweep + 1) / static_cast<double>(total_sweeps) : clock.fraction();
    if (res.trace.back().best_energy != res.best_energy) res.trace.push_back({done, res.best_energy});
    ttt.advance(done, res.best_state);
  }

  res.ttt_states = ttt.finish(res.best_state);
  res.final_state = fs.state();
  res.final_energy = qubo.matrix_energy(res.final_state);
  res.best_energy = qubo.matrix_energy(res.best_state);
  res.wall_seconds = clock.elapsed_seconds();
  return res;
}

BaselineResult tabu_solve(const AugmentedQubo& qubo, const TabuConfig& config) {
  config.validate();
  if (qubo.n_aug == 0) throw std::invalid_argument("tabu_solve: empty QUBO");
  BudgetClock clock(config.budget);
  const std::size_t n_aug = qubo.n_aug;
  const std::size_t tenure = config.effective_tenure(n_aug);

  FlipState fs(qubo, std::vector<std::uint8_t>(n_aug, 0));
  BaselineResult res;
  res.tenure = tenure;
  res.best_state = fs.state();
  res.best_energy = fs.energy();
  res.trace.push_back({0.0, res.best_energy});
  TttRecorder ttt;

  // tabu_until[v] is the first iteration at which v may flip again.
  std::vector<std::uint64_t> tabu_until(n_aug, 0);
  const bool fixed = config.budget.fixed();
  const auto total = static_cast<std::uint64_t>(config.budget.amount);
  for (std::uint64_t it = 0;; ++it) {
    if (fixed) {
      if (it >= total) break;
    } else if ((it & 63) == 0 && clock.exhausted()) {
      break;
    }
    std::size_t pick = n_aug;
    double pick_delta = std::numeric_limits<double>::infinity();
    std::size_t fallback = n_aug;
    for (std::size_t v = 0; v < n_aug; ++v) {
      const double d = fs.flip_delta(v);
      const bool tabu = tabu_until[v] > it;
      const bool aspires = config.aspiration && fs.energy() + d < res.best_energy;
      if (tabu && !aspires) {
        if (fallback == n_aug || tabu_until[v] < tabu_until[fallback]) fallback = v;
        continue;
      }
      if (d < pick_delta) {
        pick_delta = d;
        pick = v;
      }
    }
    if (pick == n_aug) pick = fallback;
    fs.flip(pick);
    tabu_until[pick] = it + 1 + tenure;
    if (fs.energy() < res.best_energy) {
      res.best_energy = fs.energy();
      res.best_state = fs.state();
    }
    ++res.iterations;
    clock.tick();
    const double done = fixed ? static_cast<double>(it + 1) / static_cast<double>(total) : clock.fraction();
    if (res.trace.back().best_energy != res.best_energy) res.trace.push_back({done, res.best_energy});
    ttt.advance(done, res.best_state);
  }

  res.ttt_states = ttt.finish(res.best_state);
  res.final_state = fs.state();
  res.final_energy = qubo.matrix_energy(res.final_state);
  res.best_energy = qubo.matrix_energy(res.best_state);
  res.wall_seconds = clock.elapsed_seconds();
  return res;
}

}  // namespace hamd
