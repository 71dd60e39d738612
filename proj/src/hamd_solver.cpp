#include "hamd/hamd_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hamd {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Cont: return "cont";
    case Mode::Proj: return "proj";
    case Mode::Polish: return "polish";
    case Mode::Full: return "full";
  }
  return "full";
}

Mode parse_mode(const std::string& name) {
  if (name == "cont") return Mode::Cont;
  if (name == "proj") return Mode::Proj;
  if (name == "polish") return Mode::Polish;
  if (name == "full") return Mode::Full;
  throw std::invalid_argument("unknown mode '" + name + "' (expected cont, proj, polish or full)");
}

BudgetClock::BudgetClock(Budget budget) : budget_(budget), start_(std::chrono::steady_clock::now()) {
  if (!(budget_.amount > 0.0)) throw std::invalid_argument("budget must be positive");
}

double BudgetClock::elapsed_seconds() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

double BudgetClock::fraction() const {
  const double f = budget_.fixed() ? static_cast<double>(ticks_) / budget_.amount
                                   : elapsed_seconds() / budget_.amount;
  return std::min(f, 1.0);
}

void HamdConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("HamdConfig: batch_size must be >= 1");
  if (!(ils_fraction > 0.0 && ils_fraction < 1.0)) throw std::invalid_argument("HamdConfig: ils_fraction must be in (0,1)");
  if (!(step_size > 0.0)) throw std::invalid_argument("HamdConfig: step_size must be positive");
  if (!(damping >= 0.0 && damping < 1.0)) throw std::invalid_argument("HamdConfig: damping must be in [0,1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("HamdConfig: epsilon must be positive");
  if (!(restitution >= 0.0 && restitution <= 1.0)) throw std::invalid_argument("HamdConfig: restitution must be in [0,1]");
  if (!(budget.amount > 0.0)) throw std::invalid_argument("HamdConfig: budget must be positive");
  if (stall_window < 1 || snap_interval < 1) throw std::invalid_argument("HamdConfig: windows must be >= 1");
}

std::vector<double> transverse_force(std::span<const double> g, std::span<const double> hv, double epsilon) {
  const std::size_t n = g.size();
  std::vector<double> f(hv.begin(), hv.end());
  double gg = 0.0, hh = 0.0, hg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    gg += g[i] * g[i];
    hh += hv[i] * hv[i];
    hg += hv[i] * g[i];
  }
  const double alpha = std::min(1.0, std::sqrt(gg) / (std::sqrt(hh) + epsilon));
  if (gg > 0.0) {
    // Two Gram-Schmidt passes; one pass leaves O(u·‖Hv‖) residue along g
    // when Hv is nearly parallel to g.
    double coef = hg / gg;
    for (std::size_t i = 0; i < n; ++i) f[i] -= coef * g[i];
    double fg = 0.0;
    for (std::size_t i = 0; i < n; ++i) fg += f[i] * g[i];
    coef = fg / gg;
    for (std::size_t i = 0; i < n; ++i) f[i] -= coef * g[i];
  }
  for (auto& fi : f) fi *= alpha;
  return f;
}

void reflect(double& x, double& v, double restitution) {
  if (x > 1.0) {
    x = 1.0 - restitution * (x - 1.0);
    v = -restitution * v;
  } else if (x < 0.0) {
    x = -restitution * x;
    v = -restitution * v;
  }
  // A very large step can overshoot the opposite wall as well.
  x = std::clamp(x, 0.0, 1.0);
}

TrajectoryBatch init_batch(const PortfolioInstance& instance, const HamdConfig& config, Rng& rng) {
  TrajectoryBatch batch;
  batch.trajectories.resize(config.batch_size);
  for (auto& tr : batch.trajectories) {
    tr.x.resize(instance.n);
    for (auto& xi : tr.x) xi = rng.uniform();
    tr.v.assign(instance.n, 0.0);
    tr.energy = std::numeric_limits<double>::infinity();
    tr.stall_ref = std::numeric_limits<double>::infinity();
  }
  return batch;
}

std::size_t dynamics_step(TrajectoryBatch& batch, const PortfolioInstance& instance,
                          const HamdConfig& config, double t) {
  batch.beta = beta_schedule(t);
  const EnergyParams params{batch.beta};
  const std::size_t n = instance.n;
  std::vector<double> g(n), hv(n);
  std::size_t aborted = 0;
  for (auto& tr : batch.trajectories) {
    tr.energy = energy_and_gradient(instance, tr.x, params, g);
    bool finite = std::isfinite(tr.energy);
    for (std::size_t i = 0; i < n && finite; ++i) finite = std::isfinite(g[i]);
    tr.aborted = !finite;
    if (!finite) {
      ++aborted;
      continue;
    }
    for (auto& gi : g) gi = std::clamp(gi, -config.gradient_clip, config.gradient_clip);
    hvp_into(instance, tr.x, tr.v, params, hv);
    const auto fperp = transverse_force(g, hv, config.epsilon);
    for (std::size_t i = 0; i < n; ++i) {
      tr.v[i] = (1.0 - config.damping) * tr.v[i] +
                config.step_size * (-g[i] + config.transverse_weight * fperp[i]);
      tr.x[i] += config.step_size * tr.v[i];
      reflect(tr.x[i], tr.v[i], config.restitution);
    }
  }
  return aborted;
}

Portfolio project_topk(std::span<const double> x, std::size_t k) {
  if (k > x.size()) throw std::invalid_argument("project_topk: K exceeds vector length");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&x](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  order.resize(k);
  return Portfolio::from_indices(x.size(), order);
}

Portfolio kswap_polish(const Portfolio& portfolio, const PortfolioInstance& instance,
                       std::size_t* swaps_applied) {
  if (!portfolio.feasible(instance.k)) throw std::invalid_argument("kswap_polish: portfolio is not exact-K");
  SwapCache cache(instance, portfolio);
  std::vector<double> deltas;
  std::size_t swaps = 0;
  for (;;) {
    cache.delta_matrix(deltas);
    const auto& sel = cache.selected();
    const auto& uns = cache.unselected();
    const std::size_t cols = uns.size();
    double best = 0.0;
    std::size_t best_out = instance.n, best_in = instance.n;
    for (std::size_t a = 0; a < sel.size(); ++a) {
      for (std::size_t b = 0; b < cols; ++b) {
        const double d = deltas[a * cols + b];
        if (d < best || (d == best && best_out < instance.n &&
                         std::pair(sel[a], uns[b]) < std::pair(best_out, best_in))) {
          best = d;
          best_out = sel[a];
          best_in = uns[b];
        }
      }
    }
    const double threshold = -kImproveTolerance * std::max(1.0, std::abs(cache.value()));
    if (best_out == instance.n || !(best < threshold)) break;
    cache.apply(best_out, best_in);
    ++swaps;
  }
  if (swaps_applied) *swaps_applied = swaps;
  return cache.portfolio();
}

IlsResult ils_phase(const Portfolio& best, const PortfolioInstance& instance, Rng& rng,
                    BudgetClock& clock, const std::function<void(double, double)>& on_improve) {
  if (!best.feasible(instance.k)) throw std::invalid_argument("ils_phase: incumbent is not exact-K");
  IlsResult result{best, eval_native(instance, best), 0, {}};
  if (instance.k < 2 || instance.n - instance.k < 2) {
    result.warnings.push_back("ILS skipped: 2-pair perturbation needs K >= 2 and n - K >= 2");
    return result;
  }
  while (!clock.exhausted()) {
    auto in_set = result.best.chosen();
    auto out_set = result.best.unchosen();
    Portfolio trial = result.best;
    for (int r = 0; r < 2; ++r) {
      const std::size_t a = r + rng.below(in_set.size() - r);
      std::swap(in_set[r], in_set[a]);
      trial.set(in_set[r], false);
      const std::size_t b = r + rng.below(out_set.size() - r);
      std::swap(out_set[r], out_set[b]);
      trial.set(out_set[r], true);
    }
    trial = kswap_polish(trial, instance);
    const double value = eval_native(instance, trial);
    ++result.steps;
    clock.tick();
    if (value < result.best_value) {
      result.best = std::move(trial);
      result.best_value = value;
      if (on_improve) on_improve(clock.fraction(), value);
    }
  }
  return result;
}

double RunTrace::best_at(double fraction) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    if (p.fraction <= fraction + 1e-12) best = std::min(best, p.best);
  }
  return best;
}

std::array<double, 5> RunTrace::ttt() const {
  std::array<double, 5> out{};
  for (std::size_t i = 0; i < kTttFractions.size(); ++i) out[i] = best_at(kTttFractions[i]);
  return out;
}

namespace {

struct Incumbent {
  Portfolio portfolio;
  double value = std::numeric_limits<double>::infinity();
};

class Solver {
 public:
  Solver(const PortfolioInstance& instance, const HamdConfig& config, std::uint64_t seed)
      : inst_(instance), cfg_(config), rng_(seed, "hamd"), clock_(config.budget) {
    trace_.config = config;
  }

  RunTrace run() {
    auto init_rng = rng_.split(0);
    batch_ = init_batch(inst_, cfg_, init_rng);
    traj_rng_.reserve(batch_.trajectories.size());
    for (std::size_t b = 0; b < batch_.trajectories.size(); ++b) traj_rng_.push_back(rng_.split(b + 1));

    for (auto& tr : batch_.trajectories) {
      auto snap = project_topk(tr.x, inst_.k);
      const double value = eval_native(inst_, snap);
      remember(tr, snap, value);
      offer(snap, value, 0.0);
    }

    continuous_phase();
    if (cfg_.mode == Mode::Full) ils();

    trace_.final_portfolio = best_.portfolio;
    trace_.final_objective = best_.value;
    trace_.wall_seconds = clock_.elapsed_seconds();
    return std::move(trace_);
  }

 private:
  double phase_end() const { return 1.0 - cfg_.ils_fraction; }
  double phase_progress() const { return std::min(1.0, clock_.fraction() / phase_end()); }

  void offer(const Portfolio& p, double value, double fraction) {
    if (value < best_.value) {
      best_ = {p, value};
      trace_.points.push_back({fraction, value});
    }
  }

  static void remember(Trajectory& tr, const Portfolio& p, double value) {
    if (!tr.has_best || value < tr.best_value) {
      tr.best = p;
      tr.best_value = value;
      tr.has_best = true;
    }
  }

  void continuous_phase() {
    while (clock_.fraction() < phase_end()) {
      const double t = phase_progress();
      trace_.aborted_trajectories += dynamics_step(batch_, inst_, cfg_, t);
      ++trace_.dynamics_steps;
      clock_.tick();
      const double now = clock_.fraction();

      if (cfg_.mode == Mode::Cont) {
        if (trace_.dynamics_steps % cfg_.snap_interval == 0) {
          for (auto& tr : batch_.trajectories) {
            auto snap = project_topk(tr.x, inst_.k);
            const double value = eval_native(inst_, snap);
            remember(tr, snap, value);
            offer(snap, value, now);
          }
        }
        for (std::size_t b = 0; b < batch_.trajectories.size(); ++b) {
          if (batch_.trajectories[b].aborted) reinitialize(b, false, phase_progress());
        }
        continue;
      }

      for (std::size_t b = 0; b < batch_.trajectories.size(); ++b) {
        auto& tr = batch_.trajectories[b];
        if (tr.aborted) {
          trace_.warnings.push_back("trajectory " + std::to_string(b) +
                                    ": non-finite gradient, reinitialized");
          reinitialize(b, false, phase_progress());
          continue;
        }
        if (tr.energy < tr.stall_ref - cfg_.stall_tolerance * std::max(1.0, std::abs(tr.stall_ref))) {
          tr.stall_ref = tr.energy;
          tr.stall_steps = 0;
        } else {
          ++tr.stall_steps;
        }
        const bool stalled = tr.stall_steps >= cfg_.stall_window;
        const bool too_old = phase_progress() - tr.born_at >= cfg_.max_age;
        if (stalled || too_old) restart(b, now);
      }
    }
  }

  void restart(std::size_t b, double now) {
    auto& tr = batch_.trajectories[b];
    auto snap = project_topk(tr.x, inst_.k);
    if (cfg_.mode == Mode::Polish || cfg_.mode == Mode::Full) snap = kswap_polish(snap, inst_);
    const double value = eval_native(inst_, snap);
    remember(tr, snap, value);
    offer(snap, value, now);
    ++trace_.restarts;
    const bool near = tr.restarts % 2 == 0;
    ++tr.restarts;
    reinitialize(b, near, phase_progress());
  }

  void reinitialize(std::size_t b, bool near_incumbent, double born_at) {
    auto& tr = batch_.trajectories[b];
    auto& rng = traj_rng_[b];
    for (std::size_t i = 0; i < inst_.n; ++i) {
      if (near_incumbent) {
        const double base = best_.portfolio.selected(i) ? 1.0 : 0.0;
        tr.x[i] = std::clamp(base + rng.uniform(-0.2, 0.2), 0.0, 1.0);
      } else {
        tr.x[i] = rng.uniform();
      }
    }
    std::fill(tr.v.begin(), tr.v.end(), 0.0);
    tr.energy = std::numeric_limits<double>::infinity();
    tr.stall_ref = std::numeric_limits<double>::infinity();
    tr.stall_steps = 0;
    tr.born_at = born_at;
    tr.aborted = false;
  }

  void ils() {
    auto ils_rng = rng_.split(batch_.trajectories.size() + 1);
    auto result = ils_phase(best_.portfolio, inst_, ils_rng, clock_,
                            [this](double fraction, double value) {
                              trace_.points.push_back({fraction, value});
                            });
    trace_.ils_steps = result.steps;
    for (auto& w : result.warnings) trace_.warnings.push_back(std::move(w));
    if (result.best_value < best_.value) best_ = {result.best, result.best_value};
  }

  const PortfolioInstance& inst_;
  HamdConfig cfg_;
  Rng rng_;
  BudgetClock clock_;
  TrajectoryBatch batch_;
  std::vector<Rng> traj_rng_;
  Incumbent best_;
  RunTrace trace_;
};

}  // namespace

RunTrace solve(const PortfolioInstance& instance, const HamdConfig& config, std::uint64_t seed) {
  config.validate();
  instance.validate();
  Solver solver(instance, config, seed);
  return solver.run();
}

}  // namespace hamd
