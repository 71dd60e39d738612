#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hamd/instance.hpp"

namespace hamd {

inline constexpr double kRosenbergWeight = 10.0;

/// λ_R (3w + x_i x_j − 2 x_i w − 2 x_j w); zero iff w = x_i x_j.
double rosenberg_penalty(bool xi, bool xj, bool w, double lambda_r = kRosenbergWeight);

struct QuboEntry {
  std::size_t row = 0;  // row < col
  std::size_t col = 0;
  double value = 0.0;
};

struct LinearUpdate {
  std::size_t var = 0;
  double value = 0.0;
};

/// Coefficient updates produced by reducing one cubic monomial.
struct RosenbergUpdates {
  std::vector<QuboEntry> objective;   // c · w·x_k
  std::vector<LinearUpdate> penalty_linear;
  std::vector<QuboEntry> penalty_quadratic;
};

/// Source monomial of one auxiliary variable.
struct AuxSource {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  double coeff = 0.0;
};

/// Upper-triangular QUBO over the native bits followed by one auxiliary per
/// cubic triple. Energy(s) = Σ linear_v s_v + Σ_{r<c} Q_rc s_r s_c; the
/// cardinality constant λ_K·K² is kept in `constant` and never added to it.
class AugmentedQubo {
 public:
  std::size_t n = 0;
  std::size_t n_aug = 0;
  std::size_t k = 0;
  double lambda_r = kRosenbergWeight;
  double lambda_k = 0.0;
  double lambda_multiplier = 1.0;
  double max_abs_q = 0.0;  // before any penalty insertion
  double constant = 0.0;

  std::vector<double> linear;             // n_aug
  std::vector<double> native_pairs;       // n*n, only r<c used
  std::vector<std::array<QuboEntry, 3>> aux_couplings;  // per auxiliary
  std::vector<AuxSource> aux_map;         // aux t <-> variable n + t

  // Symmetric adjacency (CSR) for O(degree) flip deltas.
  std::vector<std::size_t> adj_start;
  std::vector<std::uint32_t> adj_index;
  std::vector<double> adj_weight;

  std::size_t aux_var(std::size_t t) const { return n + t; }

  double matrix_energy(std::span<const std::uint8_t> state) const;
  /// Nonzero upper-triangular entries, row-major; diagonal carries `linear`.
  std::vector<QuboEntry> entries() const;
  void build_adjacency();
};

/// Accumulates coefficients into an AugmentedQubo.
class QuboBuilder {
 public:
  QuboBuilder(std::size_t n, std::size_t n_aux);

  /// Registers auxiliary `aux_index` for c·x_i x_j x_k and returns the
  /// updates that reduce it; nothing is applied yet. Throws
  /// std::invalid_argument on a repeated aux index or non-distinct i, j, k.
  RosenbergUpdates quadratize_term(std::size_t i, std::size_t j, std::size_t k, double coeff,
                                   std::size_t aux_index, double lambda_r = kRosenbergWeight);

  void add_linear(std::size_t var, double value);
  void add_pair(std::size_t a, std::size_t b, double value);
  void apply(std::span<const LinearUpdate> linear);
  void apply(std::span<const QuboEntry> pairs);

  /// Largest |coefficient| currently in the matrix, diagonal included.
  double max_abs() const;

  AugmentedQubo& qubo() { return qubo_; }
  AugmentedQubo finish();

 private:
  AugmentedQubo qubo_;
  std::vector<bool> used_;
};

/// Rosenberg-reduced QUBO with λ_K = multiplier · 4n · max|Q|.
AugmentedQubo build_augmented(const PortfolioInstance& instance, double lambda_multiplier = 1.0);

struct EnergyDecomposition {
  double matrix_energy = 0.0;
  double native = 0.0;            // f(x) on the decoded bits
  double surrogate_native = 0.0;  // f_quad(x) + Σ c·w·x_k
  double card_penalty = 0.0;      // λ_K (Σx − K)², constant included
  double rosenberg_penalty = 0.0;
};

/// matrix_energy = surrogate_native + card_penalty + rosenberg_penalty − λ_K K²,
/// and surrogate_native = native whenever every w equals its product.
EnergyDecomposition augmented_energy(const AugmentedQubo& qubo, const PortfolioInstance& instance,
                                     std::span<const std::uint8_t> state);

struct DecodedState {
  std::vector<std::uint8_t> x;  // leading n bits, no feasibility guarantee
  std::vector<std::uint8_t> w;  // indexed like aux_map
  std::size_t cardinality = 0;
};

DecodedState decode(const AugmentedQubo& qubo, std::span<const std::uint8_t> state);

/// x followed by the consistent products w_t = x_i x_j.
std::vector<std::uint8_t> embed(const AugmentedQubo& qubo, std::span<const std::uint8_t> x);

/// COO body: "row col value" lines with hex-float values.
std::string export_qubo_coo(const AugmentedQubo& qubo);
/// Sidecar: n, n_aug, K, λ_R, λ_K, constant and the aux map.
std::string export_qubo_header(const AugmentedQubo& qubo);

}  // namespace hamd
