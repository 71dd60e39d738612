#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hamd/instance.hpp"
#include "hamd/native_model.hpp"
#include "hamd/rng.hpp"

namespace hamd {

enum class Mode { Cont, Proj, Polish, Full };

std::string to_string(Mode mode);
/// Throws std::invalid_argument on an unknown name.
Mode parse_mode(const std::string& name);

/// Either a wall-clock allowance or a fixed count of solver steps. Fixed
/// counts make runs bit-reproducible.
struct Budget {
  enum class Kind { Seconds, Iterations };
  Kind kind = Kind::Seconds;
  double amount = 60.0;

  static Budget seconds(double s) { return {Kind::Seconds, s}; }
  static Budget iterations(std::uint64_t n) { return {Kind::Iterations, static_cast<double>(n)}; }
  bool fixed() const { return kind == Kind::Iterations; }
};

/// Tracks elapsed budget as a fraction in [0, 1]. In iteration mode one
/// tick is one unit of work; in wall-clock mode ticks are ignored.
class BudgetClock {
 public:
  explicit BudgetClock(Budget budget);
  double fraction() const;
  bool exhausted() const { return fraction() >= 1.0; }
  void tick() { ++ticks_; }
  std::uint64_t ticks() const { return ticks_; }
  double elapsed_seconds() const;
  const Budget& budget() const { return budget_; }

 private:
  Budget budget_;
  std::chrono::steady_clock::time_point start_;
  std::uint64_t ticks_ = 0;
};

struct HamdConfig {
  std::size_t batch_size = 32;
  double ils_fraction = 0.20;
  double damping = 0.1;
  double step_size = 0.05;
  double transverse_weight = 1.0;
  double epsilon = 1e-9;
  double restitution = 0.5;
  double gradient_clip = 1e3;
  // Restart when effective energy improves by less than stall_tolerance
  // (relative) over stall_window steps, or when a trajectory has lived
  // max_age of the continuous phase.
  std::size_t stall_window = 200;
  double stall_tolerance = 1e-6;
  double max_age = 1.0 / 3.0;
  // mode=cont snaps every trajectory on this cadence for the trace only.
  std::size_t snap_interval = 100;
  Mode mode = Mode::Full;
  Budget budget = Budget::seconds(60.0);

  void validate() const;
};

struct Trajectory {
  std::vector<double> x;
  std::vector<double> v;
  Portfolio best;
  double best_value = 0.0;
  bool has_best = false;
  std::size_t restarts = 0;
  double energy = 0.0;       // ℰ at the start of the last step
  double stall_ref = 0.0;    // energy level the stall window compares against
  std::size_t stall_steps = 0;
  double born_at = 0.0;      // phase progress at (re)initialization
  bool aborted = false;      // non-finite gradient on the last step
};

struct TrajectoryBatch {
  std::vector<Trajectory> trajectories;
  double beta = 0.0;
};

/// Linear bifurcation ramp over the continuous phase.
inline double beta_schedule(double phase_progress) {
  return phase_progress < 0.0 ? 0.0 : (phase_progress > 1.0 ? 1.0 : phase_progress);
}

/// F⊥ = α (Hv − ⟨Hv,g⟩/⟨g,g⟩ g), α = min(1, ‖g‖/(‖Hv‖+ε)).
std::vector<double> transverse_force(std::span<const double> g, std::span<const double> hv, double epsilon);

/// Damped-elastic reflection of one coordinate into [0, 1]: the overshoot is
/// mirrored and scaled by `restitution`, and the velocity flips sign and is
/// scaled likewise.
void reflect(double& x, double& v, double restitution);

/// Uniform random states in [0,1]^n, zero velocity.
TrajectoryBatch init_batch(const PortfolioInstance& instance, const HamdConfig& config, Rng& rng);

/// One damped momentum step for every trajectory at phase progress t.
/// Trajectories with a non-finite gradient are left in place with
/// `aborted` set. Returns the number of aborted trajectories.
std::size_t dynamics_step(TrajectoryBatch& batch, const PortfolioInstance& instance,
                          const HamdConfig& config, double t);

/// K largest coordinates, lowest index first on ties.
Portfolio project_topk(std::span<const double> x, std::size_t k);

/// Steepest-descent exact-K swap search to a 1-swap local minimum.
Portfolio kswap_polish(const Portfolio& portfolio, const PortfolioInstance& instance,
                       std::size_t* swaps_applied = nullptr);

/// Relative slack below which a swap is not an improvement.
inline constexpr double kImproveTolerance = 1e-10;

struct IlsResult {
  Portfolio best;
  double best_value = 0.0;
  std::uint64_t steps = 0;
  std::vector<std::string> warnings;
};

/// 2-out/2-in perturbation + polish, accepted only on strict improvement,
/// until `clock` is exhausted. Each step ticks the clock once.
/// `on_improve(fraction, value)` fires on each accepted improvement.
IlsResult ils_phase(const Portfolio& best, const PortfolioInstance& instance, Rng& rng,
                    BudgetClock& clock,
                    const std::function<void(double, double)>& on_improve = {});

struct TracePoint {
  double fraction = 0.0;
  double best = 0.0;
};

inline constexpr std::array<double, 5> kTttFractions{0.10, 0.25, 0.50, 0.75, 1.00};

struct RunTrace {
  std::vector<TracePoint> points;
  std::uint64_t restarts = 0;
  std::uint64_t ils_steps = 0;
  std::uint64_t dynamics_steps = 0;
  std::uint64_t aborted_trajectories = 0;
  Portfolio final_portfolio;
  double final_objective = 0.0;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
  HamdConfig config;

  /// Best objective recorded at or before `fraction`.
  double best_at(double fraction) const;
  std::array<double, 5> ttt() const;
};

RunTrace solve(const PortfolioInstance& instance, const HamdConfig& config, std::uint64_t seed);

}  // namespace hamd
