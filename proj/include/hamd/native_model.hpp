#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hamd/instance.hpp"

namespace hamd {

/// Parameters of the effective energy f(x) + β Σ x²(x−1)².
///
/// The domain center is fixed at 0.5·𝟙 and the expansion force is
/// permanently off on [0,1]^n, so neither is a field.
struct EnergyParams {
  double beta = 0.0;
};

/// xᵀΣx − μᵀx + Σ c_ijk x_i x_j x_k, accumulated index-ascending.
double eval_native(const PortfolioInstance& instance, std::span<const double> x);
double eval_native(const PortfolioInstance& instance, const Portfolio& portfolio);

double eval_effective_energy(const PortfolioInstance& instance, std::span<const double> x,
                             const EnergyParams& params);

/// ∇ℰ(x).
std::vector<double> gradient(const PortfolioInstance& instance, std::span<const double> x,
                             const EnergyParams& params);

/// ∇²ℰ(x)·v.
std::vector<double> hvp(const PortfolioInstance& instance, std::span<const double> x,
                        std::span<const double> v, const EnergyParams& params);

/// Writes ∇ℰ(x) into `grad` and returns ℰ(x); shares the Σx product.
double energy_and_gradient(const PortfolioInstance& instance, std::span<const double> x,
                           const EnergyParams& params, std::span<double> grad);

/// In-place HVP for the solver hot loop.
void hvp_into(const PortfolioInstance& instance, std::span<const double> x,
              std::span<const double> v, const EnergyParams& params, std::span<double> out);

/// Incremental objective state for exact-K swap moves.
///
/// Holds (Σx)_i for every asset and the number of selected members of every
/// triple, so one swap delta costs O(deg(out) + deg(in)) and applying a swap
/// costs O(n + deg). Confined to one worker.
class SwapCache {
 public:
  SwapCache(const PortfolioInstance& instance, const Portfolio& portfolio);

  const Portfolio& portfolio() const { return portfolio_; }
  /// Objective maintained by accumulated deltas.
  double value() const { return value_; }
  /// Recompute the objective from scratch and reset drift.
  void resync();

  const std::vector<std::size_t>& selected() const { return selected_; }
  const std::vector<std::size_t>& unselected() const { return unselected_; }

  /// f(x − e_out + e_in) − f(x). Preconditions are not checked here.
  double delta(std::size_t out_idx, std::size_t in_idx) const;

  /// Full K×(n−K) delta matrix, row-major over selected() × unselected().
  void delta_matrix(std::vector<double>& out) const;

  void apply(std::size_t out_idx, std::size_t in_idx);

 private:
  const PortfolioInstance* instance_;
  Portfolio portfolio_;
  std::vector<double> sigma_x_;
  std::vector<unsigned char> triple_count_;
  std::vector<std::size_t> selected_;
  std::vector<std::size_t> unselected_;
  std::vector<std::size_t> position_;  // index within selected_ or unselected_
  double value_ = 0.0;
};

/// Checked single-swap delta: throws std::invalid_argument unless the
/// portfolio is feasible, out_idx is selected, and in_idx is not.
double swap_delta(const PortfolioInstance& instance, const Portfolio& portfolio,
                  std::size_t out_idx, std::size_t in_idx, const SwapCache& cache);

}  // namespace hamd
