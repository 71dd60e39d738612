#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hamd {

inline constexpr std::size_t kNumSectors = 10;
inline constexpr double kAlphaCubic = 4.0;
inline constexpr int kInstanceFormatVersion = 1;

struct Triple {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;  // sector anchor
  double coeff = 0.0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

/// Cubic cardinality-constrained portfolio problem:
///   minimize xᵀΣx − μᵀx + Σ_T c_ijk x_i x_j x_k   s.t. Σx = K.
///
/// Immutable once built by generate_instance/load_instance; shared read-only
/// across solver workers.
struct PortfolioInstance {
  std::size_t n = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t n_sectors = kNumSectors;
  double alpha_cubic = kAlphaCubic;
  double quad_scale = 0.0;

  std::vector<double> covariance;       // n*n, row-major, symmetric
  std::vector<double> expected_return;  // n
  std::vector<Triple> triples;
  std::vector<std::size_t> sector_of;  // n
  std::vector<double> loading;         // n; empty for hand-written files

  /// triples_of[i] lists indices into `triples` touching asset i, ascending.
  std::vector<std::vector<std::size_t>> triples_of;

  double cov(std::size_t r, std::size_t c) const { return covariance[r * n + c]; }

  /// Rebuilds triples_of; called by the constructors in this header.
  void index_triples();

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  friend bool operator==(const PortfolioInstance& a, const PortfolioInstance& b);
};

/// Exact-K selection vector.
class Portfolio {
 public:
  Portfolio() = default;
  explicit Portfolio(std::size_t n) : selection_(n, 0) {}
  static Portfolio from_indices(std::size_t n, std::span<const std::size_t> chosen);
  static Portfolio from_bits(std::span<const std::uint8_t> bits);

  std::size_t size() const { return selection_.size(); }
  std::size_t cardinality() const { return cardinality_; }
  bool feasible(std::size_t k) const { return cardinality_ == k; }
  bool selected(std::size_t i) const { return selection_[i] != 0; }

  void set(std::size_t i, bool on);

  std::span<const std::uint8_t> bits() const { return selection_; }
  std::vector<double> as_real() const;
  std::vector<std::size_t> chosen() const;
  std::vector<std::size_t> unchosen() const;

  friend bool operator==(const Portfolio&, const Portfolio&) = default;

 private:
  std::vector<std::uint8_t> selection_;
  std::size_t cardinality_ = 0;
};

/// Deterministic cubic instance for (n, K, seed).
PortfolioInstance generate_instance(std::size_t n, std::size_t k, std::uint64_t seed);

void save_instance(const PortfolioInstance& instance, const std::filesystem::path& path);
PortfolioInstance load_instance(const std::filesystem::path& path);

std::string serialize_instance(const PortfolioInstance& instance);
PortfolioInstance parse_instance(const std::string& text);

/// Sector anchor: largest own-sector loading, lowest index on ties.
std::vector<std::size_t> sector_anchors(const PortfolioInstance& instance);

}  // namespace hamd
